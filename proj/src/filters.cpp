#include "qdm/filters.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>

#include <fftw3.h>

#include "qdm/error.hpp"

namespace qdm {

namespace {

constexpr double kFwhmPerSigma = 2.3548;

int reflect(int i, int size, EdgeMode edges) {
  if (edges == EdgeMode::periodic) {
    const int r = i % size;
    return r < 0 ? r + size : r;
  }
  if (size == 1) return 0;
  const int period = 2 * size;
  int r = i % period;
  if (r < 0) r += period;
  return r < size ? r : period - 1 - r;
}

std::vector<double> gaussian_kernel(double sigma_px) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma_px));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int x = -radius; x <= radius; ++x) {
    const double v = std::exp(-0.5 * x * x / (sigma_px * sigma_px));
    k[static_cast<std::size_t>(x + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable convolution of an m x n plane along rows then columns.
std::vector<double> convolve(const std::vector<double>& in, int m, int n,
                             const std::vector<double>& kernel, EdgeMode edges) {
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(in.size(), 0.0);
  std::vector<double> out(in.size(), 0.0);
#pragma omp parallel for
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        s += kernel[static_cast<std::size_t>(d + radius)] *
             in[static_cast<std::size_t>(i) * n + reflect(j + d, n, edges)];
      }
      tmp[static_cast<std::size_t>(i) * n + j] = s;
    }
  }
#pragma omp parallel for
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        s += kernel[static_cast<std::size_t>(d + radius)] *
             tmp[static_cast<std::size_t>(reflect(i + d, m, edges)) * n + j];
      }
      out[static_cast<std::size_t>(i) * n + j] = s;
    }
  }
  return out;
}

std::vector<double> plane(const FieldMap& map, int c) {
  std::vector<double> p(map.pixels());
  for (int i = 0; i < map.m; ++i) {
    for (int j = 0; j < map.n; ++j) {
      p[static_cast<std::size_t>(i) * map.n + j] = map.masked(i, j) ? 0.0 : map.at(c, i, j);
    }
  }
  return p;
}

// Mean of unmasked values in the smallest square window around (i, j) that
// contains any; falls back to the global unmasked mean.
double local_mean(const std::vector<double>& p, const FieldMap& map, int i, int j) {
  const int max_r = std::max(map.m, map.n);
  for (int r = 2; r <= 2 * max_r; r *= 2) {
    double s = 0.0;
    int count = 0;
    for (int a = std::max(0, i - r); a <= std::min(map.m - 1, i + r); ++a) {
      for (int b = std::max(0, j - r); b <= std::min(map.n - 1, j + r); ++b) {
        if (!map.masked(a, b)) {
          s += p[static_cast<std::size_t>(a) * map.n + b];
          ++count;
        }
      }
    }
    if (count > 0) return s / count;
  }
  return 0.0;
}

}  // namespace

void FilterSpec::validate() const {
  if (lowpass_fwhm && !(*lowpass_fwhm > 0.0)) {
    throw ConfigError("low-pass FWHM must be > 0");
  }
  if (highpass_cutoff && !(*highpass_cutoff > 0.0)) {
    throw ConfigError("high-pass cutoff must be > 0");
  }
  if (highpass_order < 1) throw ConfigError("high-pass order must be >= 1");
}

FieldMap gaussian_lowpass(const FieldMap& map, double fwhm, EdgeMode edges, std::string* warning) {
  map.validate();
  if (!(fwhm > 0.0)) throw ConfigError("low-pass FWHM must be > 0");
  if (fwhm < map.pixel_pitch) {
    if (warning != nullptr) {
      std::ostringstream os;
      os << "low-pass FWHM " << fwhm << " m is below one pixel (" << map.pixel_pitch
         << " m); filter skipped";
      *warning = os.str();
    }
    return map;
  }
  const std::vector<double> kernel = gaussian_kernel(fwhm / kFwhmPerSigma / map.pixel_pitch);
  FieldMap out = map;
  std::vector<double> weight(map.pixels());
  bool any_masked = false;
  for (std::size_t p = 0; p < weight.size(); ++p) {
    weight[p] = map.mask[p] != 0 ? 0.0 : 1.0;
    any_masked = any_masked || map.mask[p] != 0;
  }
  const std::vector<double> norm =
      any_masked ? convolve(weight, map.m, map.n, kernel, edges) : std::vector<double>{};
  for (int c = 0; c < map.components; ++c) {
    const std::vector<double> num = convolve(plane(map, c), map.m, map.n, kernel, edges);
    for (int i = 0; i < map.m; ++i) {
      for (int j = 0; j < map.n; ++j) {
        if (map.masked(i, j)) continue;
        const std::size_t p = static_cast<std::size_t>(i) * map.n + j;
        out.at(c, i, j) = any_masked ? num[p] / norm[p] : num[p];
      }
    }
  }
  return out;
}

double butterworth_gain(double wavelength, double cutoff, int order) {
  if (!std::isfinite(wavelength)) return 0.0;
  return 1.0 / std::sqrt(1.0 + std::pow(wavelength / cutoff, 2.0 * order));
}

FieldMap butterworth_highpass(const FieldMap& map, double cutoff, int order) {
  map.validate();
  if (order < 1) throw ConfigError("high-pass order must be >= 1");
  if (!(cutoff > 2.0 * map.pixel_pitch)) {
    std::ostringstream os;
    os << "high-pass cutoff " << cutoff << " m must exceed twice the pixel pitch ("
       << 2.0 * map.pixel_pitch << " m)";
    throw ConfigError(os.str());
  }
  const int m = map.m;
  const int n = map.n;
  const int nh = n / 2 + 1;
  FieldMap out = map;

  double* in = fftw_alloc_real(static_cast<std::size_t>(m) * n);
  fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(m) * nh);
  const fftw_plan fwd = fftw_plan_dft_r2c_2d(m, n, in, spec, FFTW_ESTIMATE);
  const fftw_plan bwd = fftw_plan_dft_c2r_2d(m, n, spec, in, FFTW_ESTIMATE);

  std::vector<double> gain(static_cast<std::size_t>(m) * nh);
  const double fc = 1.0 / cutoff;  // cycles per meter
  for (int a = 0; a < m; ++a) {
    const double fy = (a <= m / 2 ? a : a - m) / (m * map.pixel_pitch);
    for (int b = 0; b < nh; ++b) {
      const double fx = b / (n * map.pixel_pitch);
      const double f = std::hypot(fx, fy);
      gain[static_cast<std::size_t>(a) * nh + b] =
          f == 0.0 ? 0.0 : 1.0 / std::sqrt(1.0 + std::pow(fc / f, 2.0 * order));
    }
  }

  const double scale = 1.0 / (static_cast<double>(m) * n);
  for (int c = 0; c < map.components; ++c) {
    const std::vector<double> p = plane(map, c);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        const std::size_t idx = static_cast<std::size_t>(i) * n + j;
        in[idx] = map.masked(i, j) ? local_mean(p, map, i, j) : p[idx];
      }
    }
    fftw_execute(fwd);
    for (std::size_t k = 0; k < gain.size(); ++k) {
      spec[k][0] *= gain[k];
      spec[k][1] *= gain[k];
    }
    fftw_execute(bwd);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        if (map.masked(i, j)) continue;
        out.at(c, i, j) = in[static_cast<std::size_t>(i) * n + j] * scale;
      }
    }
  }
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);
  fftw_free(in);
  fftw_free(spec);
  return out;
}

FieldMap apply_filters(const FieldMap& map, const FilterSpec& spec,
                       std::vector<std::string>* warnings) {
  spec.validate();
  FieldMap out = map;
  if (spec.lowpass_fwhm) {
    std::string w;
    out = gaussian_lowpass(out, *spec.lowpass_fwhm, EdgeMode::mirror, &w);
    if (!w.empty() && warnings != nullptr) warnings->push_back(w);
  }
  if (spec.highpass_cutoff) {
    out = butterworth_highpass(out, *spec.highpass_cutoff, spec.highpass_order);
  }
  return out;
}

}  // namespace qdm
