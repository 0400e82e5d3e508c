#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qdm/stack.hpp"

namespace qdm {

enum class EdgeMode { mirror, periodic };

struct FilterSpec {
  std::optional<double> lowpass_fwhm;     // meters
  std::optional<double> highpass_cutoff;  // meters
  int highpass_order = 3;

  void validate() const;  // throws ConfigError
};

// Real-space Gaussian convolution, sigma = fwhm / 2.3548, kernel truncated at
// 4 sigma. Masked pixels are excluded and the kernel weights renormalized.
// fwhm below one pixel is a no-op; `warning` (if given) then receives a message.
FieldMap gaussian_lowpass(const FieldMap& map, double fwhm, EdgeMode edges = EdgeMode::mirror,
                          std::string* warning = nullptr);

// Frequency-domain Butterworth high-pass with radial power gain
// 1 / (1 + (k_c / k)^(2 order)), k_c = 2 pi / cutoff; DC removed. Masked pixels
// are in-filled with the local mean before the transform and re-masked after.
// Throws ConfigError when cutoff <= 2 * pixel_pitch or order < 1.
FieldMap butterworth_highpass(const FieldMap& map, double cutoff, int order = 3);

// Amplitude gain of the high-pass at spatial wavelength `wavelength`.
double butterworth_gain(double wavelength, double cutoff, int order);

FieldMap apply_filters(const FieldMap& map, const FilterSpec& spec,
                       std::vector<std::string>* warnings = nullptr);

}  // namespace qdm
