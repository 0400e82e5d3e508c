#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdm/lm.hpp"
#include "qdm/nv.hpp"
#include "qdm/spectra.hpp"

namespace qdm {

// Prior knowledge used to seed and interpret pixel fits.
struct FitHints {
  Vec3 bias = Vec3::Zero();                  // tesla; VMM resonance assignment, PMM sign
  ZfsVector zfs = ZfsVector::uniform(2.87);  // GHz
  int pmm_orientation = 1;
  PolarizationDrive drive;                   // CPMM
  std::optional<double> hyperfine_mhz;       // default per mode
  double linewidth_mhz = 0.5;                // initial Gamma
};

// The fitted quantity is the dip signal s = 1 - F / reference, modelled by
// eval_spectrum(params). reference is the upper-quartile fluorescence.
struct DipModel {
  SpectrumParams params;
  double reference = 1.0;

  double baseline() const { return reference * (1.0 - params.offset); }
  double fluorescence(double f_ghz) const;
};

struct DipDetection {
  std::vector<double> centers_ghz;  // ascending
  std::vector<double> depths;       // smoothed dip signal at each centre
};

// Local maxima of the box-smoothed dip signal above rel_threshold * its peak
// (and above the noise level).
DipDetection detect_dips(std::span<const double> dip_signal, std::span<const double> freqs,
                         double box_mhz, double rel_threshold = 0.25);

// Groups individual lines (sorted by frequency) into hyperfine triplets spaced
// by `hyperfine_mhz`, scanning from the low end. A line without partners within
// `tol_mhz` becomes its own group.
// `counts`, when given, receives the number of member lines per group.
DipDetection group_triplets(const DipDetection& lines, double hyperfine_mhz, double tol_mhz,
                            std::vector<int>* counts = nullptr);

// Upper-quartile level of a spectrum.
double upper_quartile(std::span<const double> values);

// Number of dips that must be found for `mode` (CPMM with a circular drive needs
// only the dominant doublet).
int required_dips(Mode mode, const FitHints& hints);

// Throws DipDetectionError when fewer dips than required are found,
// NumericalError when VMM dips cannot be assigned uniquely.
DipModel initial_guess(std::span<const double> spectrum, std::span<const double> freqs, Mode mode,
                       const FitHints& hints = {});

struct PixelFitResult {
  SpectrumParams params;     // dip domain
  double reference = 1.0;
  double residual_rms = 0.0; // fluorescence units
  int iterations = 0;
  bool converged = false;
  LmStatus status = LmStatus::max_iterations;
  int dips_found = 0;
  std::string failure;       // empty unless the fit could not start

  double baseline() const { return reference * (1.0 - params.offset); }
  DipModel model() const { return {params, reference}; }
};

// LM fit of eval_spectrum to one pixel. Seeds from `warm` if given, otherwise from
// initial_guess. Dip detection always runs; failures are reported in the result.
// Throws std::invalid_argument when Q < 4 * parameter count or sizes differ.
PixelFitResult fit_pixel_spectrum(std::span<const double> spectrum, std::span<const double> freqs,
                                  Mode mode, const LmOptions& opts, const FitHints& hints = {},
                                  const DipModel* warm = nullptr);

// Analytic Jacobian of the dip model at the given frequencies, columns ordered
// amplitudes, res_freqs (per GHz), linewidths (per MHz), offset.
Eigen::MatrixXd spectrum_jacobian(std::span<const double> freqs, const SpectrumParams& p);

// Group with the larger amplitude sum (CPMM: 0 = dms -1, 1 = dms +1).
int dominant_group(const SpectrumParams& p);

// bias_sign * (f2 - f1) / (2 g mu_b), tesla.
double projected_field_from_pair(double f1_ghz, double f2_ghz, int bias_sign);

// sqrt(3) (f_plus - f_minus) / (2 g mu_b), tesla.
double cpmm_field_from_shift(double f_sigma_plus_ghz, double f_sigma_minus_ghz);

struct CpmmPixelResult {
  double bz = 0.0;  // tesla
  PixelFitResult plus;
  PixelFitResult minus;
  bool converged = false;
};

// Fits the sigma+ and sigma- spectra of one pixel and extracts Bz from the
// dominant-group centres. hints.drive.axis sets the drive axis.
CpmmPixelResult fit_cpmm_pixel(std::span<const double> spectrum_plus,
                               std::span<const double> spectrum_minus,
                               std::span<const double> freqs, const LmOptions& opts,
                               const FitHints& hints = {}, const DipModel* warm_plus = nullptr,
                               const DipModel* warm_minus = nullptr);

struct VectorFieldFit {
  Vec3 b = Vec3::Zero();                     // tesla
  ZfsVector zfs = ZfsVector::uniform(2.87);  // GHz
  double residual_rms = 0.0;                 // GHz
  int iterations = 0;
  bool converged = false;
  bool low_bias_warning = false;
};

// LM defaults for the seven-parameter Hamiltonian fit (forward differences).
LmOptions vector_fit_options();

// Fits (B, D^(1..4)) to eight resonances in nv-core order. low_bias_warning is set
// when g mu_b |B . u_k| < 5 * strain_scale for any k.
VectorFieldFit vector_field_fit(std::span<const double> res_freqs, const VectorFieldFit& init,
                                const LmOptions& opts = vector_fit_options(),
                                double strain_scale_mhz = 0.5);

struct TemperatureShift {
  double kelvin = 0.0;   // from the mean ZFS shift
  double spread = 0.0;   // max - min of the per-orientation estimates, kelvin
  std::array<double, kOrientationCount> per_orientation{};
};

TemperatureShift estimate_temperature_shift(const ZfsVector& zfs_now, const ZfsVector& zfs_ref);

}  // namespace qdm
