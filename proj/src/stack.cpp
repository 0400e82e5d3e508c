#include "qdm/stack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qdm {

void OdmrStack::spectrum(int i, int j, std::span<double> out) const {
  if (out.size() != freqs.size()) throw std::invalid_argument("spectrum buffer has wrong size");
  for (int iq = 0; iq < q(); ++iq) out[iq] = at(iq, i, j);
}

std::vector<double> OdmrStack::spectrum(int i, int j) const {
  std::vector<double> out(freqs.size());
  spectrum(i, j, out);
  return out;
}

int OdmrStack::pmm_orientation() const {
  const auto it = metadata.find("pmm_orientation");
  if (it == metadata.end()) return 1;
  const int k = std::stoi(it->second);
  if (k < 1 || k > kOrientationCount) {
    throw std::invalid_argument("pmm_orientation must be in 1..4");
  }
  return k;
}

void OdmrStack::validate() const {
  if (m <= 0 || n <= 0) throw std::invalid_argument("stack dimensions must be positive");
  if (freqs.empty()) throw std::invalid_argument("stack has no frequencies");
  for (std::size_t i = 1; i < freqs.size(); ++i) {
    if (!(freqs[i] > freqs[i - 1])) {
      throw std::invalid_argument("frequencies are not strictly increasing at index " +
                                  std::to_string(i));
    }
  }
  if (data.size() != freqs.size() * static_cast<std::size_t>(m) * n) {
    throw std::invalid_argument("stack data size does not equal q * m * n");
  }
  if (!(pixel_pitch > 0.0)) throw std::invalid_argument("pixel_pitch must be > 0");
  for (float v : data) {
    if (!(v >= 0.0f) || !std::isfinite(v)) {
      throw std::invalid_argument("fluorescence values must be finite and >= 0");
    }
  }
  if (std::abs(polarization.axis.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("polarization axis is not a unit vector");
  }
}

OdmrStack bin_stack(const OdmrStack& stack, int factor) {
  if (factor < 1) throw std::invalid_argument("binning factor must be >= 1");
  if (factor == 1) return stack;
  OdmrStack out = stack;
  out.m = stack.m / factor;
  out.n = stack.n / factor;
  if (out.m == 0 || out.n == 0) throw std::invalid_argument("binning factor exceeds stack size");
  out.pixel_pitch = stack.pixel_pitch * factor;
  out.data.assign(static_cast<std::size_t>(stack.q()) * out.m * out.n, 0.0f);
  for (int iq = 0; iq < stack.q(); ++iq) {
    for (int i = 0; i < out.m; ++i) {
      for (int j = 0; j < out.n; ++j) {
        double sum = 0.0;
        for (int di = 0; di < factor; ++di) {
          for (int dj = 0; dj < factor; ++dj) {
            sum += stack.at(iq, i * factor + di, j * factor + dj);
          }
        }
        out.at(iq, i, j) = static_cast<float>(sum);
      }
    }
  }
  out.metadata["binning"] = std::to_string(factor);
  return out;
}

FieldMap FieldMap::zeros(int m, int n, int components, double pixel_pitch) {
  FieldMap f;
  f.m = m;
  f.n = n;
  f.components = components;
  f.pixel_pitch = pixel_pitch;
  f.data.assign(static_cast<std::size_t>(components) * m * n, 0.0);
  f.mask.assign(static_cast<std::size_t>(m) * n, 0);
  return f;
}

std::size_t FieldMap::masked_count() const {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

void FieldMap::set_masked(int i, int j) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  mask[static_cast<std::size_t>(i) * n + j] = 1;
  for (int c = 0; c < components; ++c) at(c, i, j) = nan;
  if (!zfs.empty()) {
    for (int k = 0; k < 4; ++k) zfs_at(k, i, j) = nan;
  }
}

std::vector<double> FieldMap::component(int c) const {
  if (c < 0 || c >= components) throw std::out_of_range("field component out of range");
  const auto begin = data.begin() + static_cast<std::ptrdiff_t>(index(c, 0, 0));
  return {begin, begin + static_cast<std::ptrdiff_t>(pixels())};
}

void FieldMap::validate() const {
  if (m <= 0 || n <= 0) throw std::invalid_argument("field map dimensions must be positive");
  if (components != 1 && components != 3) {
    throw std::invalid_argument("field map must have 1 or 3 components");
  }
  if (data.size() != static_cast<std::size_t>(components) * pixels()) {
    throw std::invalid_argument("field data size does not equal components * m * n");
  }
  if (!zfs.empty() && zfs.size() != 4 * pixels()) {
    throw std::invalid_argument("zfs data size does not equal 4 * m * n");
  }
  if (!residuals.empty() && residuals.size() != pixels()) {
    throw std::invalid_argument("residual data size does not equal m * n");
  }
  if (mask.size() != pixels()) throw std::invalid_argument("mask size does not equal m * n");
  if (!(pixel_pitch > 0.0)) throw std::invalid_argument("pixel_pitch must be > 0");
}

}  // namespace qdm
