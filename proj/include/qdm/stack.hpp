#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qdm/nv.hpp"
#include "qdm/spectra.hpp"

namespace qdm {

// Q fluorescence images of m x n pixels, stored q-outermost then row-major.
struct OdmrStack {
  int m = 0;
  int n = 0;
  std::vector<double> freqs;  // GHz, strictly increasing
  std::vector<float> data;    // q * m * n
  double pixel_pitch = 1e-6;  // meters
  Mode mode = Mode::vmm;
  Vec3 bias_field = Vec3::Zero();  // tesla
  PolarizationDrive polarization;  // CPMM only
  int averages = 1;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> metadata;

  int q() const { return static_cast<int>(freqs.size()); }
  std::size_t index(int iq, int i, int j) const {
    return (static_cast<std::size_t>(iq) * m + i) * n + j;
  }
  float& at(int iq, int i, int j) { return data[index(iq, i, j)]; }
  float at(int iq, int i, int j) const { return data[index(iq, i, j)]; }

  // Copies the spectrum of pixel (i, j) into `out` (size q).
  void spectrum(int i, int j, std::span<double> out) const;
  std::vector<double> spectrum(int i, int j) const;

  // PMM orientation index, from metadata key "pmm_orientation" (default 1).
  int pmm_orientation() const;

  // Throws std::invalid_argument naming the violated invariant.
  void validate() const;
};

// Sum-binning of factor x factor pixel blocks on fluorescence; trailing rows and
// columns that do not fill a block are dropped.
OdmrStack bin_stack(const OdmrStack& stack, int factor);

// Field map: components (1 scalar or 3 for Bx, By, Bz) of m x n, component
// outermost. Masked pixels hold NaN in every component and zfs entry.
struct FieldMap {
  int m = 0;
  int n = 0;
  int components = 1;
  std::vector<double> data;       // components * m * n, tesla
  std::vector<double> zfs;        // empty or 4 * m * n, GHz
  std::vector<double> residuals;  // empty or m * n
  std::vector<std::uint8_t> mask; // m * n, 1 = masked
  double pixel_pitch = 1e-6;      // meters

  static FieldMap zeros(int m, int n, int components, double pixel_pitch);

  std::size_t pixels() const { return static_cast<std::size_t>(m) * n; }
  std::size_t index(int c, int i, int j) const {
    return (static_cast<std::size_t>(c) * m + i) * n + j;
  }
  double& at(int c, int i, int j) { return data[index(c, i, j)]; }
  double at(int c, int i, int j) const { return data[index(c, i, j)]; }
  double& zfs_at(int k, int i, int j) { return zfs[(static_cast<std::size_t>(k) * m + i) * n + j]; }
  double zfs_at(int k, int i, int j) const {
    return zfs[(static_cast<std::size_t>(k) * m + i) * n + j];
  }
  bool masked(int i, int j) const { return mask[static_cast<std::size_t>(i) * n + j] != 0; }
  std::size_t masked_count() const;

  // Marks (i, j) masked and writes the NaN sentinel.
  void set_masked(int i, int j);

  // One component as a plain m x n plane (NaN where masked).
  std::vector<double> component(int c) const;

  void validate() const;
};

}  // namespace qdm
