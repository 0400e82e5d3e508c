#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "qdm/stack.hpp"

namespace qdm {

struct Decomposition {
  FieldMap remanent;                 // (plus + minus) / 2
  FieldMap induced;                  // (plus - minus) / 2
  std::vector<double> residual_bias; // per component, mean remanent over the source-free region
};

// Bias-reversal split. The mask of both outputs is the union of the inputs'
// masks. `source_free` (m * n, nonzero = selected) is optional; when given it must
// select at least one unmasked pixel. Throws std::invalid_argument on mismatch.
Decomposition bias_reversal_decompose(const FieldMap& map_plus, const FieldMap& map_minus,
                                      std::span<const std::uint8_t> source_free = {});

// Sample standard deviation of `component` over selected, unmasked pixels.
// Throws std::invalid_argument when fewer than 100 pixels are selected.
double noise_floor(const FieldMap& map, std::span<const std::uint8_t> source_free,
                   int component = 0);

struct SensitivityFit {
  double exponent = 0.0;     // d log(noise) / d log(T)
  double prefactor = 0.0;    // noise = prefactor * T^exponent
  double sensitivity = 0.0;  // noise * sqrt(T) * sqrt(area) at the longest T, T m / sqrt(Hz)
  double longest_time = 0.0;
};

// Log-log regression of (T_avg seconds, noise tesla) pairs. `area_m2` is the
// normalization area. Needs >= 4 points spanning >= 1 decade in T; throws
// std::invalid_argument on non-positive inputs.
SensitivityFit sensitivity_scaling(std::span<const std::pair<double, double>> series,
                                   double area_m2);

}  // namespace qdm
