#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qdm/filters.hpp"
#include "qdm/fit_stack.hpp"
#include "qdm/forward.hpp"
#include "qdm/lm.hpp"

namespace qdm {

// Declarative job description. Lengths are given in micrometres and fields in
// microtesla in the file; members hold SI values.
struct RunConfig {
  Mode mode = Mode::vmm;
  SensorGeometry geometry;
  std::vector<DipoleSource> sources;
  Vec3 bias = Vec3::Zero();
  std::vector<double> freqs;  // GHz
  SpectrumParams lineshape;   // fluorescence template for synthesis
  ZfsVector zfs = ZfsVector::uniform(2.87);
  int pmm_orientation = 1;
  PmmModel pmm_model = PmmModel::projection;
  PolarizationDrive polarization;
  double photons_per_pixel = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  int threads = 0;
  LmOptions lm;
  FilterSpec filter;
  double max_masked_fraction = 0.5;

  SynthesisOptions synthesis() const;
  FitStackOptions fit_options() const;
};

// Parses and validates JSON text. Unknown keys, wrong types and out-of-range
// values throw ConfigError naming the offending key.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);  // IoError when unreadable

}  // namespace qdm
