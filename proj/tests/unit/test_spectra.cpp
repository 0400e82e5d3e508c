#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qdm/constants.hpp"
#include "qdm/spectra.hpp"

using namespace qdm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Independent restatement of the lineshape formulas.
double formula(double f, const SpectrumParams& p) {
  const double d = p.hyperfine;
  double s = p.offset;
  if (p.mode == Mode::cpmm) {
    for (int j = 0; j < 2; ++j) {
      const double g = p.linewidths[j];
      const double x = (f - p.res_freqs[j]) * 1000.0;
      s += p.amplitudes[2 * j] / ((x + d / 2) * (x + d / 2) + g * g);
      s += p.amplitudes[2 * j + 1] / ((x - d / 2) * (x - d / 2) + g * g);
    }
    return s;
  }
  const int groups = p.mode == Mode::vmm ? 8 : 2;
  for (int j = 0; j < groups; ++j) {
    const double g = p.linewidths[j];
    const double x = (f - p.res_freqs[j]) * 1000.0;
    s += p.amplitudes[3 * j] / ((x + d) * (x + d) + g * g);
    s += p.amplitudes[3 * j + 1] / (x * x + g * g);
    s += p.amplitudes[3 * j + 2] / ((x - d) * (x - d) + g * g);
  }
  return s;
}

SpectrumParams random_params(Mode mode, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SpectrumParams p;
  p.mode = mode;
  p.hyperfine = default_hyperfine_mhz(mode);
  for (int i = 0; i < amplitude_count(mode); ++i) p.amplitudes.push_back(0.001 + 0.01 * u(rng));
  for (int j = 0; j < resonance_count(mode); ++j) {
    p.res_freqs.push_back(2.82 + 0.1 * u(rng));
    p.linewidths.push_back(0.3 + 0.7 * u(rng));
  }
  p.offset = 0.5 + u(rng);
  return p;
}

}  // namespace

TEST_CASE("mode layout", "[spectra]") {
  CHECK(resonance_count(Mode::vmm) == 8);
  CHECK(resonance_count(Mode::pmm) == 2);
  CHECK(resonance_count(Mode::cpmm) == 2);
  CHECK(amplitude_count(Mode::vmm) == 24);
  CHECK(amplitude_count(Mode::pmm) == 6);
  CHECK(amplitude_count(Mode::cpmm) == 4);
  CHECK(default_hyperfine_mhz(Mode::vmm) == 2.16);
  CHECK(default_hyperfine_mhz(Mode::cpmm) == 3.03);
  CHECK(parse_mode("pmm") == Mode::pmm);
  CHECK(to_string(Mode::cpmm) == "cpmm");
  CHECK_THROWS_AS(parse_mode("xyz"), std::invalid_argument);
}

TEST_CASE("eval_spectrum matches the formula", "[spectra]") {
  std::mt19937_64 rng(11);
  for (Mode mode : {Mode::vmm, Mode::pmm, Mode::cpmm}) {
    for (int t = 0; t < 20; ++t) {
      const SpectrumParams p = random_params(mode, rng);
      for (double f = 2.80; f < 2.94; f += 0.0007) {
        CHECK_THAT(eval_spectrum(f, p), WithinRel(formula(f, p), 1e-13));
      }
    }
  }
}

TEST_CASE("eval_spectrum rejects mismatched shapes", "[spectra]") {
  SpectrumParams p = SpectrumParams::uniform(Mode::vmm, 2.87, 1.0, 0.5, 1.0);
  CHECK_NOTHROW(p.check_shape());
  p.amplitudes.pop_back();
  CHECK_THROWS_AS(eval_spectrum(2.87, p), std::invalid_argument);
  SpectrumParams q = SpectrumParams::uniform(Mode::pmm, 2.87, 1.0, 0.5, 1.0);
  q.res_freqs.push_back(2.9);
  CHECK_THROWS_AS(q.check_shape(), std::invalid_argument);
}

TEST_CASE("tails approach the offset", "[spectra]") {
  const SpectrumParams p = SpectrumParams::uniform(Mode::pmm, 2.87, 0.01, 0.5, 1.0);
  const double far = eval_spectrum(3.87, p);
  CHECK(far > 1.0);
  CHECK(far - 1.0 < 6 * 0.01 / (1000.0 - 5) / (1000.0 - 5));
}

TEST_CASE("isolated line depth and width", "[spectra]") {
  SpectrumParams p = SpectrumParams::uniform(Mode::pmm, 2.87, 0.0, 0.7, 2.0);
  p.res_freqs = {2.80, 2.95};
  const double a = 0.04;
  p.amplitudes[1] = a;  // centre line of group 1
  const double peak = eval_spectrum(2.80, p) - p.offset;
  CHECK_THAT(peak, WithinRel(a / (0.7 * 0.7), 1e-3));
  // full width at half depth on a fine grid
  double lo = 0.0;
  double hi = 0.0;
  const double step = 1e-7;
  for (double f = 2.795; f < 2.805; f += step) {
    if (eval_spectrum(f, p) - p.offset >= 0.5 * peak) {
      if (lo == 0.0) lo = f;
      hi = f;
    }
  }
  CHECK_THAT((hi - lo) * 1000.0, WithinRel(2 * 0.7, 1e-3));
}

TEST_CASE("VMM with one orientation reduces to PMM", "[spectra]") {
  std::mt19937_64 rng(12);
  const SpectrumParams v0 = random_params(Mode::vmm, rng);
  for (int k = 0; k < 4; ++k) {
    SpectrumParams v = v0;
    SpectrumParams p;
    p.mode = Mode::pmm;
    p.hyperfine = v.hyperfine;
    p.offset = v.offset;
    for (int i = 0; i < 24; ++i) {
      const int group = i / 3;
      if (group / 2 == k) {
        p.amplitudes.push_back(v.amplitudes[i]);
      } else {
        v.amplitudes[i] = 0.0;
      }
    }
    p.res_freqs = {v.res_freqs[2 * k], v.res_freqs[2 * k + 1]};
    p.linewidths = {v.linewidths[2 * k], v.linewidths[2 * k + 1]};
    for (double f = 2.80; f < 2.94; f += 0.0003) {
      CHECK_THAT(eval_spectrum(f, v), WithinRel(eval_spectrum(f, p), 1e-14));
    }
  }
}

TEST_CASE("transition weights", "[spectra]") {
  PolarizationDrive lin;
  const TransitionWeights w0 = transition_weights(lin, 1);
  CHECK(w0.plus == 0.5);
  CHECK(w0.minus == 0.5);
  PolarizationDrive sp{Handedness::sigma_plus, nv_axis(1)};
  const TransitionWeights w1 = transition_weights(sp, 1);
  CHECK_THAT(w1.plus, WithinAbs(1.0, 1e-14));
  CHECK_THAT(w1.minus, WithinAbs(0.0, 1e-14));
  PolarizationDrive sm{Handedness::sigma_minus, nv_axis(1)};
  CHECK_THAT(transition_weights(sm, 1).minus, WithinAbs(1.0, 1e-14));
  // about z every NV sees the same imperfect selectivity
  PolarizationDrive z{Handedness::sigma_plus, Vec3::UnitZ()};
  const TransitionWeights wz = transition_weights(z, 1);
  CHECK(wz.plus > 0.5);
  CHECK(wz.plus < 1.0);
  for (int k = 2; k <= 4; ++k) {
    CHECK_THAT(transition_weights(z, k).plus, WithinAbs(wz.plus, 1e-14));
  }
  CHECK_THAT(wz.plus + wz.minus, WithinAbs(1.0, 1e-15));
}

TEST_CASE("CPMM spectrum at zero field equals the base doublet", "[spectra]") {
  const SpectrumParams base = SpectrumParams::uniform(Mode::cpmm, 2.87, 0.005, 0.7, 1.0);
  for (Handedness h : {Handedness::linear, Handedness::sigma_plus, Handedness::sigma_minus}) {
    const CpmmSpectrum s({0, 0, 0, 0}, PolarizationDrive{h, Vec3::UnitZ()}, base);
    for (double f = 2.85; f < 2.89; f += 0.0001) {
      CHECK_THAT(s(f), WithinRel(eval_spectrum(f, base), 1e-13));
    }
  }
}

TEST_CASE("CPMM shift for a drive along one NV axis", "[spectra]") {
  SpectrumParams base = SpectrumParams::uniform(Mode::cpmm, 2.87, 0.005, 0.3, 0.0);
  const double b = 10e-6;
  const double shift_khz = PhysicalConstants::gamma * b * 1e6;
  CHECK_THAT(shift_khz, WithinAbs(280.34, 0.005));
  for (Handedness h : {Handedness::sigma_plus, Handedness::sigma_minus}) {
    const PolarizationDrive drive{h, nv_axis(1)};
    const CpmmSpectrum s0({0, 0, 0, 0}, drive, base);
    const CpmmSpectrum s1({b, 0, 0, 0}, drive, base);
    // only orientation 1 moves, and only its selected transition is driven
    const double sign = h == Handedness::sigma_plus ? 1.0 : -1.0;
    const double dshift = sign * PhysicalConstants::gamma * b;
    const double w = 0.5 * base.amplitudes[0];
    for (double f = 2.86; f < 2.88; f += 0.00005) {
      double expect = s0(f);
      for (double off : {-1.515e-3, 1.515e-3}) {
        const double x0 = (f - 2.87 - off) * 1000.0;
        const double x1 = (f - 2.87 - off - dshift) * 1000.0;
        expect += w / (x1 * x1 + 0.09) - w / (x0 * x0 + 0.09);
      }
      CHECK_THAT(s1(f), WithinAbs(expect, 1e-12));
    }
  }
}

TEST_CASE("CPMM handedness swap equals field negation", "[spectra]") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-50e-6, 50e-6);
  const SpectrumParams base = SpectrumParams::uniform(Mode::cpmm, 2.87, 0.005, 0.5, 1.0);
  for (int t = 0; t < 20; ++t) {
    const Vec3 b(u(rng), u(rng), u(rng));
    std::array<double, 4> bp{};
    std::array<double, 4> bn{};
    std::array<double, 4> bzn{};
    const Vec3 bz_only(0, 0, b.z());
    for (int k = 1; k <= 4; ++k) {
      bp[k - 1] = projected_field(b, k);
      bn[k - 1] = projected_field(-b, k);
      bzn[k - 1] = projected_field(-bz_only, k);
    }
    const PolarizationDrive plus{Handedness::sigma_plus, Vec3::UnitZ()};
    const PolarizationDrive minus{Handedness::sigma_minus, Vec3::UnitZ()};
    const CpmmSpectrum a(bp, minus, base);
    const CpmmSpectrum c(bn, plus, base);
    std::array<double, 4> bzp{};
    for (int k = 1; k <= 4; ++k) bzp[k - 1] = projected_field(bz_only, k);
    const CpmmSpectrum d(bzp, minus, base);
    const CpmmSpectrum e(bzn, plus, base);
    for (double f = 2.86; f < 2.88; f += 0.0001) {
      CHECK_THAT(a(f), WithinAbs(c(f), 1e-12));
      CHECK_THAT(d(f), WithinAbs(e(f), 1e-12));
    }
  }
}

TEST_CASE("CPMM in-plane field leaves the centroid unchanged", "[spectra]") {
  const SpectrumParams base = SpectrumParams::uniform(Mode::cpmm, 2.87, 0.005, 0.5, 0.0);
  const Vec3 b(40e-6, 0, 0);
  std::array<double, 4> bp{};
  for (int k = 1; k <= 4; ++k) bp[k - 1] = projected_field(b, k);
  auto centroid = [&](Handedness h) {
    const CpmmSpectrum s(bp, PolarizationDrive{h, Vec3::UnitZ()}, base);
    double num = 0.0;
    double den = 0.0;
    for (double f = 2.37; f < 3.37; f += 1e-5) {
      num += (f - 2.87) * s(f);
      den += s(f);
    }
    return num / den;
  };
  const double cp = centroid(Handedness::sigma_plus);
  const double cm = centroid(Handedness::sigma_minus);
  CHECK_THAT(cp - cm, WithinAbs(0.0, 1e-9));
  // the lines are broadened though
  const CpmmSpectrum s0({0, 0, 0, 0}, PolarizationDrive{Handedness::sigma_plus, Vec3::UnitZ()}, base);
  const CpmmSpectrum s1(bp, PolarizationDrive{Handedness::sigma_plus, Vec3::UnitZ()}, base);
  CHECK(s1(2.87 + 1.515e-3) < s0(2.87 + 1.515e-3));
}
