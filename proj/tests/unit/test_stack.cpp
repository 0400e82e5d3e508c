#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>

#include "qdm/error.hpp"
#include "qdm/fit_stack.hpp"
#include "qdm/forward.hpp"

using namespace qdm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> axis(double lo, double hi, int q) {
  std::vector<double> f;
  for (int i = 0; i < q; ++i) f.push_back(lo + (hi - lo) * i / (q - 1));
  return f;
}

const Vec3 kBias = 2e-3 * Vec3(0.35, 0.2, 0.915).normalized();

SynthesisOptions vmm_options() {
  SynthesisOptions o;
  o.mode = Mode::vmm;
  o.lineshape = SpectrumParams::uniform(Mode::vmm, 2.87, 0.01 * 0.25, 0.5, 1.0);
  o.freqs = axis(2.81, 2.93, 600);
  o.bias = kBias;
  return o;
}

SensorGeometry small_geometry(int m, int n) {
  SensorGeometry g;
  g.m = m;
  g.n = n;
  g.pixel_pitch = 2e-6;
  g.standoff = 8e-6;
  return g;
}

}  // namespace

TEST_CASE("stack validation", "[stack]") {
  OdmrStack s;
  s.m = 2;
  s.n = 3;
  s.freqs = {2.8, 2.9};
  s.data.assign(12, 1.0f);
  CHECK_NOTHROW(s.validate());
  s.freqs = {2.9, 2.8};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.freqs = {2.8, 2.9};
  s.data[3] = -1.0f;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.data[3] = 1.0f;
  s.data.pop_back();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.data.push_back(1.0f);
  s.pixel_pitch = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("stack indexing and spectra", "[stack]") {
  OdmrStack s;
  s.m = 2;
  s.n = 3;
  s.freqs = {2.8, 2.85, 2.9};
  s.data.resize(18);
  for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = static_cast<float>(i);
  const std::vector<double> sp = s.spectrum(1, 2);
  CHECK(sp == std::vector<double>{5.0, 11.0, 17.0});
  CHECK(s.pmm_orientation() == 1);
  s.metadata["pmm_orientation"] = "3";
  CHECK(s.pmm_orientation() == 3);
}

TEST_CASE("sum binning", "[stack]") {
  OdmrStack s;
  s.m = 5;
  s.n = 4;
  s.freqs = {2.8, 2.9};
  s.pixel_pitch = 1e-6;
  s.data.assign(40, 1.0f);
  const OdmrStack b = bin_stack(s, 2);
  CHECK(b.m == 2);
  CHECK(b.n == 2);
  CHECK(b.pixel_pitch == 2e-6);
  for (float v : b.data) CHECK(v == 4.0f);
  CHECK_THROWS_AS(bin_stack(s, 0), std::invalid_argument);
}

TEST_CASE("field map masking", "[stack]") {
  FieldMap f = FieldMap::zeros(3, 4, 3, 1e-6);
  CHECK(f.masked_count() == 0);
  f.set_masked(1, 2);
  CHECK(f.masked(1, 2));
  CHECK(f.masked_count() == 1);
  for (int c = 0; c < 3; ++c) CHECK(std::isnan(f.at(c, 1, 2)));
  CHECK(std::isnan(f.component(2)[6]));
  CHECK_NOTHROW(f.validate());
}

TEST_CASE("thread count resolution", "[stack]") {
  CHECK(thread_count(3) == 3);
  ::setenv("QDM_THREADS", "2", 1);
  CHECK(thread_count(0) == 2);
  ::setenv("QDM_THREADS", "zero", 1);
  CHECK_THROWS_AS(thread_count(0), ConfigError);
  ::unsetenv("QDM_THREADS");
  CHECK(thread_count(0) >= 1);
}

TEST_CASE("noiseless single-dipole VMM round trip", "[stack]") {
  const SensorGeometry g = small_geometry(12, 12);
  const std::vector<DipoleSource> src = {{Vec3(1e-6, -2e-6, -4e-6), Vec3(2e-16, -1e-16, 6e-16)}};
  const FieldMap truth = sample_field_map(src, g, kBias);
  const OdmrStack st = synthesize_stack(sample_field_map(src, g), vmm_options());
  FitSummary sum;
  const FieldMap fit = fit_stack(st, {}, &sum);
  CHECK(sum.masked == 0);
  CHECK(sum.converged == truth.pixels());
  REQUIRE(fit.components == 3);
  REQUIRE(fit.zfs.size() == 4 * fit.pixels());
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < g.m; ++i) {
      for (int j = 0; j < g.n; ++j) {
        CHECK(std::abs(fit.at(c, i, j) - truth.at(c, i, j)) < 1e-6 * kBias.norm());
      }
    }
  }
  for (double d : fit.zfs) CHECK_THAT(d, WithinAbs(2.87, 1e-8));
}

TEST_CASE("uniform field gives a constant map", "[stack]") {
  const SensorGeometry g = small_geometry(6, 6);
  const OdmrStack st = synthesize_stack(sample_field_map({}, g), vmm_options());
  const FieldMap fit = fit_stack(st);
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0;
    const std::vector<double> p = fit.component(c);
    for (double v : p) mean += v / p.size();
    double var = 0.0;
    for (double v : p) var += (v - mean) * (v - mean) / p.size();
    CHECK(std::sqrt(var) < 1e-12);
    CHECK_THAT(mean, WithinAbs(kBias[c], 1e-10));
  }
}

TEST_CASE("a poisoned pixel is masked in isolation", "[stack]") {
  const SensorGeometry g = small_geometry(6, 6);
  const std::vector<DipoleSource> src = {{Vec3(0, 0, -4e-6), Vec3(0, 0, 5e-16)}};
  OdmrStack st = synthesize_stack(sample_field_map(src, g), vmm_options());
  const FieldMap clean = fit_stack(st);
  for (int q = 0; q < st.q(); ++q) st.at(q, 2, 3) = 1.0f;
  FitSummary sum;
  const FieldMap fit = fit_stack(st, {}, &sum);
  CHECK(fit.masked(2, 3));
  CHECK(sum.masked == 1);
  CHECK(sum.masked_no_dips == 1);
  for (int i = 0; i < g.m; ++i) {
    for (int j = 0; j < g.n; ++j) {
      if (i == 2 && j == 3) continue;
      CHECK_FALSE(fit.masked(i, j));
      for (int c = 0; c < 3; ++c) CHECK_THAT(fit.at(c, i, j), WithinAbs(clean.at(c, i, j), 1e-12));
    }
  }
}

TEST_CASE("fit_stack is deterministic across thread counts", "[stack]") {
  const SensorGeometry g = small_geometry(8, 8);
  const std::vector<DipoleSource> src = {{Vec3(0, 0, -4e-6), Vec3(1e-16, 0, 5e-16)}};
  SynthesisOptions o = vmm_options();
  o.photons_per_pixel = 1e9;
  o.seed = 5;
  const OdmrStack st = synthesize_stack(sample_field_map(src, g), o);
  FitStackOptions a;
  a.threads = 1;
  FitStackOptions b;
  b.threads = 4;
  const FieldMap fa = fit_stack(st, a);
  const FieldMap fb = fit_stack(st, b);
  CHECK(fa.mask == fb.mask);
  for (std::size_t i = 0; i < fa.data.size(); ++i) {
    CHECK((fa.data[i] == fb.data[i] || (std::isnan(fa.data[i]) && std::isnan(fb.data[i]))));
  }
}

TEST_CASE("PMM stack gives the signed projection", "[stack]") {
  const SensorGeometry g = small_geometry(6, 6);
  const std::vector<DipoleSource> src = {{Vec3(0, 0, -4e-6), Vec3(0, 0, 5e-16)}};
  for (double sign : {1.0, -1.0}) {
    SynthesisOptions o;
    o.mode = Mode::pmm;
    o.lineshape = SpectrumParams::uniform(Mode::pmm, 2.87, 0.01 * 0.25, 0.5, 1.0);
    o.freqs = axis(2.83, 2.91, 200);
    o.pmm_orientation = 3;
    o.bias = sign * 0.8e-3 * nv_axis(3);
    const OdmrStack st = synthesize_stack(sample_field_map(src, g), o);
    const FieldMap fit = fit_stack(st);
    const FieldMap truth = sample_field_map(src, g, o.bias);
    REQUIRE(fit.components == 1);
    CHECK(fit.masked_count() == 0);
    for (int i = 0; i < g.m; ++i) {
      for (int j = 0; j < g.n; ++j) {
        const Vec3 b(truth.at(0, i, j), truth.at(1, i, j), truth.at(2, i, j));
        CHECK_THAT(fit.at(0, i, j), WithinAbs(projected_field(b, 3), 1e-6 * 0.8e-3));
      }
    }
  }
}

TEST_CASE("CPMM stacks", "[stack]") {
  const SensorGeometry g = small_geometry(5, 5);
  SynthesisOptions o;
  o.mode = Mode::cpmm;
  o.lineshape = SpectrumParams::uniform(Mode::cpmm, 2.87, 0.01 * 0.49, 0.7, 1.0);
  o.lineshape.hyperfine = 3.03;
  o.freqs = axis(2.855, 2.885, 150);
  o.drive = PolarizationDrive{Handedness::sigma_plus, Vec3::UnitZ()};
  const FieldMap field = sample_field_map({}, g, Vec3(0, 0, 8e-6));
  const OdmrStack plus = synthesize_stack(field, o);
  o.drive.handedness = Handedness::sigma_minus;
  const OdmrStack minus = synthesize_stack(field, o);
  CHECK_THROWS_AS(fit_stack(plus), std::invalid_argument);
  CHECK_THROWS_AS(fit_cpmm_stacks(minus, plus), std::invalid_argument);
  const FieldMap fit = fit_cpmm_stacks(plus, minus);
  CHECK(fit.masked_count() == 0);
  for (int i = 0; i < g.m; ++i) {
    for (int j = 0; j < g.n; ++j) CHECK_THAT(fit.at(0, i, j), WithinRel(8e-6, 0.01));
  }
}
