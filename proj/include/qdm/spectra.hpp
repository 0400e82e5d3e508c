#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdm/nv.hpp"

namespace qdm {

// Acquisition modes: vector (all four orientations), projective (one orientation),
// circularly polarized (z-selective, 15N doublets).
enum class Mode { vmm, pmm, cpmm };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);  // throws std::invalid_argument

int resonance_count(Mode mode);    // 8, 2, 2
int lines_per_group(Mode mode);    // 3, 3, 2
int amplitude_count(Mode mode);    // 24, 6, 4
double default_hyperfine_mhz(Mode mode);

// Per-pixel Lorentzian lineshape parameters. A line with amplitude A and width
// Gamma contributes A / (detuning^2 + Gamma^2): depth A / Gamma^2, FWHM 2 Gamma.
//
// Group j has lines at res_freqs[j] + offset, offsets {-d, 0, +d} (triplet) or
// {-d/2, +d/2} (doublet), with amplitudes[lines_per_group * j + line].
struct SpectrumParams {
  Mode mode = Mode::pmm;
  std::vector<double> amplitudes;  // fluorescence * MHz^2
  std::vector<double> res_freqs;   // GHz
  std::vector<double> linewidths;  // MHz, HWHM, one per group
  double offset = 0.0;             // fluorescence
  double hyperfine = 2.16;         // MHz

  // Uniform template: every line gets `amplitude`, every group `linewidth`,
  // all groups centred on `center_ghz`.
  static SpectrumParams uniform(Mode mode, double center_ghz, double amplitude,
                                double linewidth_mhz, double offset);

  // Throws std::invalid_argument when list lengths do not match the mode.
  void check_shape() const;
  int parameter_count() const;
};

// Offset of line `line` of a group from the group centre, MHz.
double line_offset_mhz(Mode mode, double hyperfine_mhz, int line);

// Sum of Lorentzians plus offset, at one frequency (GHz).
double eval_spectrum(double f_ghz, const SpectrumParams& p);
std::vector<double> eval_spectrum(std::span<const double> f_ghz, const SpectrumParams& p);

// Circular-polarization drive about `axis` (unit length).
enum class Handedness { sigma_plus, sigma_minus, linear };

std::string_view to_string(Handedness h);
Handedness parse_handedness(std::string_view text);

struct PolarizationDrive {
  Handedness handedness = Handedness::linear;
  Vec3 axis = Vec3::UnitZ();
};

// Relative strengths of the dms = +1 and dms = -1 transitions for one NV axis,
// normalized to sum to one. sigma_plus about the NV axis gives (1, 0), linear
// drive gives (1/2, 1/2).
struct TransitionWeights {
  double plus = 0.5;
  double minus = 0.5;
};

TransitionWeights transition_weights(const PolarizationDrive& drive, const Vec3& nv_axis);
TransitionWeights transition_weights(const PolarizationDrive& drive, int k);

// Four-orientation CPMM spectrum under a polarized drive. For orientation k the
// dms = +1 doublet (base group 2) sits at res_freqs[1] + g mu_b b_par[k], the
// dms = -1 doublet (base group 1) at res_freqs[0] - g mu_b b_par[k]; each is
// weighted by 2 w(k) / 4 so a linear drive at zero field reproduces the base.
class CpmmSpectrum {
 public:
  CpmmSpectrum(const std::array<double, kOrientationCount>& b_parallel_tesla,
               const PolarizationDrive& drive, const SpectrumParams& base);

  double operator()(double f_ghz) const;   // lines + offset
  double lines(double f_ghz) const;         // lines only
  double offset() const { return offset_; }

 private:
  struct Line {
    double center_ghz;
    double amplitude;
    double gamma_mhz;
  };
  std::vector<Line> lines_;  // sorted, so the summation order is canonical
  double offset_ = 0.0;
};

CpmmSpectrum cpmm_polarized_spectrum(const std::array<double, kOrientationCount>& b_parallel_tesla,
                                     const PolarizationDrive& drive, const SpectrumParams& base);

}  // namespace qdm
