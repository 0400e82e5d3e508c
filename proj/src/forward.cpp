#include "qdm/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "qdm/constants.hpp"

namespace qdm {

void SensorGeometry::validate() const {
  if (!(standoff > 0.0)) throw std::invalid_argument("standoff must be > 0");
  if (!(nv_layer_thickness >= 0.0)) throw std::invalid_argument("NV layer thickness must be >= 0");
  if (!(nv_layer_depth >= 0.0)) throw std::invalid_argument("NV layer depth must be >= 0");
  if (!(pixel_pitch > 0.0)) throw std::invalid_argument("pixel_pitch must be > 0");
  if (m <= 0 || n <= 0) throw std::invalid_argument("grid dimensions must be positive");
}

Vec3 SensorGeometry::pixel_center(int i, int j) const {
  return {(j - 0.5 * (n - 1)) * pixel_pitch, (i - 0.5 * (m - 1)) * pixel_pitch,
          standoff + nv_layer_depth};
}

Vec3 dipole_field(const DipoleSource& src, const Vec3& r_obs) {
  const Vec3 r = r_obs - src.position;
  const double d = r.norm();
  if (!(d > 0.0)) throw std::invalid_argument("dipole field is singular at zero separation");
  const Vec3 u = r / d;
  constexpr double k = PhysicalConstants::mu0 / (4.0 * std::numbers::pi);
  return k * (3.0 * src.moment.dot(u) * u - src.moment) / (d * d * d);
}

FieldMap sample_field_map(std::span<const DipoleSource> sources, const SensorGeometry& geom,
                          const Vec3& bias) {
  geom.validate();
  FieldMap map = FieldMap::zeros(geom.m, geom.n, 3, geom.pixel_pitch);
  for (int i = 0; i < geom.m; ++i) {
    for (int j = 0; j < geom.n; ++j) {
      const Vec3 r = geom.pixel_center(i, j);
      Vec3 b = Vec3::Zero();
      for (const DipoleSource& s : sources) b += dipole_field(s, r);
      b += bias;
      for (int c = 0; c < 3; ++c) map.at(c, i, j) = b[c];
    }
  }
  return map;
}

namespace {

double mean_zfs(const ZfsVector& z) {
  return std::accumulate(z.d.begin(), z.d.end(), 0.0) / kOrientationCount;
}

// Line-centre frequencies (GHz) for the window check.
std::vector<double> line_centers(const SpectrumParams& p) {
  std::vector<double> c;
  const int lines = lines_per_group(p.mode);
  for (int j = 0; j < resonance_count(p.mode); ++j) {
    for (int l = 0; l < lines; ++l) {
      c.push_back(p.res_freqs[j] + line_offset_mhz(p.mode, p.hyperfine, l) * kGHzPerMHz);
    }
  }
  return c;
}

SpectrumParams pixel_params(const Vec3& b, const SynthesisOptions& opts) {
  SpectrumParams p = opts.lineshape;
  p.mode = opts.mode;
  p.check_shape();
  constexpr double gamma = PhysicalConstants::gamma;
  if (opts.mode == Mode::vmm) {
    const ResonanceSet r = resonance_frequencies(b, opts.zfs);
    p.res_freqs.assign(r.begin(), r.end());
  } else if (opts.mode == Mode::pmm) {
    const int k = opts.pmm_orientation;
    const double d = opts.zfs.d[static_cast<std::size_t>(k - 1)];
    if (opts.pmm_model == PmmModel::hamiltonian) {
      const auto pair = resonance_pair(b, d, k);
      p.res_freqs = {pair[0], pair[1]};
    } else {
      const double shift = gamma * std::abs(projected_field(b, k));
      p.res_freqs = {d - shift, d + shift};
    }
  } else {
    const double d = mean_zfs(opts.zfs);
    p.res_freqs = {d, d};
  }
  return p;
}

}  // namespace

std::vector<double> pixel_fluorescence(const Vec3& b_total, const SynthesisOptions& opts) {
  const SpectrumParams p = pixel_params(b_total, opts);
  std::vector<double> out(opts.freqs.size());
  if (opts.mode == Mode::cpmm) {
    std::array<double, kOrientationCount> bpar{};
    for (int k = 1; k <= kOrientationCount; ++k) bpar[k - 1] = projected_field(b_total, k);
    SpectrumParams base = p;
    base.offset = 0.0;
    const CpmmSpectrum spec(bpar, opts.drive, base);
    for (std::size_t q = 0; q < out.size(); ++q) out[q] = p.offset - spec.lines(opts.freqs[q]);
  } else {
    SpectrumParams lines = p;
    lines.offset = 0.0;
    for (std::size_t q = 0; q < out.size(); ++q) {
      out[q] = p.offset - eval_spectrum(opts.freqs[q], lines);
    }
  }
  for (double& v : out) v = std::max(v, 0.0);
  return out;
}

OdmrStack synthesize_stack(const FieldMap& field, const SynthesisOptions& opts,
                           SynthesisReport* report) {
  field.validate();
  if (field.components != 3) throw std::invalid_argument("synthesis needs a 3-component field map");
  if (opts.freqs.size() < 2) throw std::invalid_argument("synthesis needs a frequency axis");
  if (!(opts.lineshape.offset > 0.0)) throw std::invalid_argument("lineshape offset must be > 0");
  if (!(opts.photons_per_pixel > 0.0)) throw std::invalid_argument("photons_per_pixel must be > 0");
  nv_axis(opts.pmm_orientation);
  opts.lineshape.check_shape();
  if (opts.lineshape.mode != opts.mode) throw std::invalid_argument("lineshape mode differs from mode");
  for (double v : field.data) {
    if (!std::isfinite(v)) throw std::invalid_argument("field map holds non-finite values");
  }

  OdmrStack st;
  st.m = field.m;
  st.n = field.n;
  st.freqs = opts.freqs;
  st.pixel_pitch = field.pixel_pitch;
  st.mode = opts.mode;
  st.bias_field = opts.bias;
  st.polarization = opts.drive;
  st.seed = opts.seed;
  st.data.assign(opts.freqs.size() * field.pixels(), 0.0f);
  st.metadata["pmm_orientation"] = std::to_string(opts.pmm_orientation);
  st.metadata["hyperfine_mhz"] = std::to_string(opts.lineshape.hyperfine);

  const bool noisy = std::isfinite(opts.photons_per_pixel);
  const double scale = opts.photons_per_pixel / opts.lineshape.offset;
  const double f_lo = opts.freqs.front();
  const double f_hi = opts.freqs.back();
  std::vector<std::size_t> outside(static_cast<std::size_t>(field.m), 0);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < field.m; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(opts.seed >> 32), static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    for (int j = 0; j < field.n; ++j) {
      const Vec3 b = Vec3(field.at(0, i, j), field.at(1, i, j), field.at(2, i, j)) + opts.bias;
      const SpectrumParams p = pixel_params(b, opts);
      bool out_of_window = false;
      if (opts.mode == Mode::cpmm) {
        constexpr double gamma = PhysicalConstants::gamma;
        for (int k = 1; k <= kOrientationCount; ++k) {
          const double s = gamma * std::abs(projected_field(b, k)) +
                           0.5 * p.hyperfine * kGHzPerMHz;
          if (p.res_freqs[0] - s < f_lo || p.res_freqs[0] + s > f_hi) out_of_window = true;
        }
      } else {
        for (double c : line_centers(p)) {
          if (c < f_lo || c > f_hi) out_of_window = true;
        }
      }
      if (out_of_window) ++outside[static_cast<std::size_t>(i)];
      const std::vector<double> f = pixel_fluorescence(b, opts);
      for (std::size_t q = 0; q < f.size(); ++q) {
        double v = f[q];
        if (noisy) {
          const double lambda = v * scale;
          double counts;
          if (lambda < 1e6) {
            std::poisson_distribution<long long> pd(lambda);
            counts = lambda > 0.0 ? static_cast<double>(pd(rng)) : 0.0;
          } else {
            std::normal_distribution<double> nd(lambda, std::sqrt(lambda));
            counts = std::max(0.0, nd(rng));
          }
          v = counts / scale;
        }
        st.at(static_cast<int>(q), i, j) = static_cast<float>(v);
      }
    }
  }
  const std::size_t total = std::accumulate(outside.begin(), outside.end(), std::size_t{0});
  st.metadata["out_of_window_pixels"] = std::to_string(total);
  if (noisy) st.metadata["photons_per_pixel"] = std::to_string(opts.photons_per_pixel);
  if (report != nullptr) report->out_of_window = total;
  return st;
}

}  // namespace qdm
