#include "qdm/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "qdm/constants.hpp"

namespace qdm {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::vmm: return "vmm";
    case Mode::pmm: return "pmm";
    case Mode::cpmm: return "cpmm";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  if (text == "vmm") return Mode::vmm;
  if (text == "pmm") return Mode::pmm;
  if (text == "cpmm") return Mode::cpmm;
  throw std::invalid_argument("unknown mode '" + std::string(text) + "' (expected vmm|pmm|cpmm)");
}

int resonance_count(Mode mode) { return mode == Mode::vmm ? 8 : 2; }
int lines_per_group(Mode mode) { return mode == Mode::cpmm ? 2 : 3; }
int amplitude_count(Mode mode) { return resonance_count(mode) * lines_per_group(mode); }

double default_hyperfine_mhz(Mode mode) {
  return mode == Mode::cpmm ? PhysicalConstants::d_hf_15n : PhysicalConstants::d_hf_14n;
}

SpectrumParams SpectrumParams::uniform(Mode mode, double center_ghz, double amplitude,
                                       double linewidth_mhz, double offset) {
  SpectrumParams p;
  p.mode = mode;
  p.amplitudes.assign(static_cast<std::size_t>(amplitude_count(mode)), amplitude);
  p.res_freqs.assign(static_cast<std::size_t>(resonance_count(mode)), center_ghz);
  p.linewidths.assign(static_cast<std::size_t>(resonance_count(mode)), linewidth_mhz);
  p.offset = offset;
  p.hyperfine = default_hyperfine_mhz(mode);
  return p;
}

void SpectrumParams::check_shape() const {
  const auto groups = static_cast<std::size_t>(resonance_count(mode));
  if (amplitudes.size() != static_cast<std::size_t>(amplitude_count(mode)) ||
      res_freqs.size() != groups || linewidths.size() != groups) {
    throw std::invalid_argument(
        "spectrum parameters do not match mode " + std::string(to_string(mode)) + ": " +
        std::to_string(amplitudes.size()) + " amplitudes, " + std::to_string(res_freqs.size()) +
        " resonances, " + std::to_string(linewidths.size()) + " linewidths");
  }
}

int SpectrumParams::parameter_count() const {
  return amplitude_count(mode) + 2 * resonance_count(mode) + 1;
}

double line_offset_mhz(Mode mode, double hyperfine_mhz, int line) {
  if (mode == Mode::cpmm) {
    return line == 0 ? -0.5 * hyperfine_mhz : 0.5 * hyperfine_mhz;
  }
  return (line - 1) * hyperfine_mhz;
}

double eval_spectrum(double f_ghz, const SpectrumParams& p) {
  p.check_shape();
  const int groups = resonance_count(p.mode);
  const int lines = lines_per_group(p.mode);
  double sum = 0.0;
  for (int j = 0; j < groups; ++j) {
    const double g2 = p.linewidths[j] * p.linewidths[j];
    const double det = (f_ghz - p.res_freqs[j]) * kMHzPerGHz;
    for (int l = 0; l < lines; ++l) {
      const double x = det - line_offset_mhz(p.mode, p.hyperfine, l);
      sum += p.amplitudes[static_cast<std::size_t>(lines * j + l)] / (x * x + g2);
    }
  }
  return sum + p.offset;
}

std::vector<double> eval_spectrum(std::span<const double> f_ghz, const SpectrumParams& p) {
  std::vector<double> out(f_ghz.size());
  std::transform(f_ghz.begin(), f_ghz.end(), out.begin(),
                 [&p](double f) { return eval_spectrum(f, p); });
  return out;
}

std::string_view to_string(Handedness h) {
  switch (h) {
    case Handedness::sigma_plus: return "sigma_plus";
    case Handedness::sigma_minus: return "sigma_minus";
    case Handedness::linear: return "linear";
  }
  return "?";
}

Handedness parse_handedness(std::string_view text) {
  if (text == "sigma_plus") return Handedness::sigma_plus;
  if (text == "sigma_minus") return Handedness::sigma_minus;
  if (text == "linear") return Handedness::linear;
  throw std::invalid_argument("unknown polarization '" + std::string(text) +
                              "' (expected sigma_plus|sigma_minus|linear)");
}

TransitionWeights transition_weights(const PolarizationDrive& drive, const Vec3& nv_axis) {
  using cd = std::complex<double>;
  if (drive.handedness == Handedness::linear) {
    return {};
  }
  const SpinFrame d = spin_frame(drive.axis);
  const SpinFrame nv = spin_frame(nv_axis);
  // sigma_plus field (e1 + i e2)/sqrt2 about the drive axis, resolved in the NV frame.
  const cd eps1 = cd(d.e1.dot(nv.e1), d.e2.dot(nv.e1)) / std::numbers::sqrt2;
  const cd eps2 = cd(d.e1.dot(nv.e2), d.e2.dot(nv.e2)) / std::numbers::sqrt2;
  const cd i(0.0, 1.0);
  const double right = std::norm((eps1 - i * eps2) / std::numbers::sqrt2);
  const double left = std::norm((eps1 + i * eps2) / std::numbers::sqrt2);
  const double total = right + left;
  if (!(total > 0.0)) {
    return {};
  }
  // sigma_minus is the mirror image; swapping keeps the two bitwise symmetric.
  if (drive.handedness == Handedness::sigma_plus) {
    return {right / total, left / total};
  }
  return {left / total, right / total};
}

TransitionWeights transition_weights(const PolarizationDrive& drive, int k) {
  return transition_weights(drive, nv_axis(k));
}

CpmmSpectrum::CpmmSpectrum(const std::array<double, kOrientationCount>& b_parallel_tesla,
                           const PolarizationDrive& drive, const SpectrumParams& base)
    : offset_(base.offset) {
  if (base.mode != Mode::cpmm) {
    throw std::invalid_argument("CPMM spectrum requires CPMM base parameters");
  }
  base.check_shape();
  constexpr double gamma = PhysicalConstants::gamma;
  lines_.reserve(4 * kOrientationCount);
  for (int k = 1; k <= kOrientationCount; ++k) {
    const TransitionWeights w = transition_weights(drive, k);
    const double shift = gamma * b_parallel_tesla[static_cast<std::size_t>(k - 1)];
    // group 0: dms = -1, group 1: dms = +1
    const std::array<double, 2> centers = {base.res_freqs[0] - shift, base.res_freqs[1] + shift};
    const std::array<double, 2> scale = {0.5 * w.minus, 0.5 * w.plus};
    for (int j = 0; j < 2; ++j) {
      for (int l = 0; l < 2; ++l) {
        const double off = line_offset_mhz(Mode::cpmm, base.hyperfine, l) * kGHzPerMHz;
        lines_.push_back({centers[j] + off, scale[j] * base.amplitudes[2 * j + l],
                          base.linewidths[j]});
      }
    }
  }
  std::sort(lines_.begin(), lines_.end(), [](const Line& a, const Line& b) {
    return std::tie(a.center_ghz, a.amplitude, a.gamma_mhz) <
           std::tie(b.center_ghz, b.amplitude, b.gamma_mhz);
  });
}

double CpmmSpectrum::lines(double f_ghz) const {
  double sum = 0.0;
  for (const Line& line : lines_) {
    const double x = (f_ghz - line.center_ghz) * kMHzPerGHz;
    sum += line.amplitude / (x * x + line.gamma_mhz * line.gamma_mhz);
  }
  return sum;
}

double CpmmSpectrum::operator()(double f_ghz) const { return lines(f_ghz) + offset_; }

CpmmSpectrum cpmm_polarized_spectrum(const std::array<double, kOrientationCount>& b_parallel_tesla,
                                     const PolarizationDrive& drive, const SpectrumParams& base) {
  return CpmmSpectrum(b_parallel_tesla, drive, base);
}

}  // namespace qdm
