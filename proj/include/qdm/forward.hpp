#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "qdm/nv.hpp"
#include "qdm/spectra.hpp"
#include "qdm/stack.hpp"

namespace qdm {

struct DipoleSource {
  Vec3 position = Vec3::Zero();  // meters, z <= 0 below the sensor plane
  Vec3 moment = Vec3::UnitZ();   // A m^2
};

// Pixel (i, j) sits at x = (j - (n-1)/2) pitch, y = (i - (m-1)/2) pitch,
// z = standoff + nv_layer_depth.
struct SensorGeometry {
  double standoff = 10e-6;          // meters
  double nv_layer_thickness = 0.0;  // meters
  double nv_layer_depth = 0.0;      // meters
  double pixel_pitch = 1e-6;        // meters
  int m = 64;
  int n = 64;

  void validate() const;  // throws std::invalid_argument
  Vec3 pixel_center(int i, int j) const;
};

// Point-dipole field in tesla. Throws std::invalid_argument at zero separation.
Vec3 dipole_field(const DipoleSource& src, const Vec3& r_obs);

// (Bx, By, Bz) of the superposed sources plus a uniform `bias` at every pixel.
FieldMap sample_field_map(std::span<const DipoleSource> sources, const SensorGeometry& geom,
                          const Vec3& bias = Vec3::Zero());

// How PMM resonances are computed from the local field.
enum class PmmModel { projection, hamiltonian };

struct SynthesisOptions {
  Mode mode = Mode::vmm;
  // Fluorescence lineshape: F(f) = offset - sum of lines. res_freqs are replaced
  // per pixel; amplitudes, linewidths, offset and hyperfine are used as given.
  SpectrumParams lineshape;
  std::vector<double> freqs;   // GHz
  double photons_per_pixel = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  Vec3 bias = Vec3::Zero();    // added to the field map
  ZfsVector zfs = ZfsVector::uniform(2.87);
  int pmm_orientation = 1;
  PmmModel pmm_model = PmmModel::projection;
  PolarizationDrive drive;     // CPMM
};

struct SynthesisReport {
  std::size_t out_of_window = 0;  // pixels with a line centre outside the sweep
};

// Expected fluorescence of one pixel at every frequency, for the total field b.
std::vector<double> pixel_fluorescence(const Vec3& b_total, const SynthesisOptions& opts);

// One stack from a (3-component) field map. Finite photons_per_pixel adds shot
// noise (photons_per_pixel counts at the baseline level; exact Poisson below 1e6
// expected counts, Gaussian above) rescaled back to fluorescence units. Rows
// draw from independent generators seeded by (seed, row).
OdmrStack synthesize_stack(const FieldMap& field, const SynthesisOptions& opts,
                           SynthesisReport* report = nullptr);

}  // namespace qdm
