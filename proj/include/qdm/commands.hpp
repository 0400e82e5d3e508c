#pragma once

#include <array>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

namespace qdm {

struct SimulateArgs {
  std::string config;
  std::string out;        // stack (sigma+ stack in CPMM)
  std::string out_minus;  // CPMM sigma- stack
  std::string truth;      // optional true field map
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

struct FitArgs {
  std::string stack;
  std::string minus;   // CPMM sigma- stack
  std::string out;
  std::string config;  // optional, for LM options, zfs and threads
  int threads = 0;
  double max_masked_fraction = 0.5;
};

struct FilterArgs {
  std::string in;
  std::string out;
  std::string config;           // optional filter section overrides the flags
  double lowpass_fwhm_um = 5.0;
  double highpass_cutoff_um = 200.0;
  int highpass_order = 3;
  bool no_lowpass = false;
  bool no_highpass = false;
};

struct DecomposeArgs {
  std::string plus;
  std::string minus;
  std::string out_remanent;
  std::string out_induced;
  std::optional<std::array<int, 4>> source_free;  // row0, col0, row1, col1 (half-open)
};

struct CalibrateArgs {
  std::string csv;           // optional "current_mA,measured_field_uT"
  double radius_mm = 15.5;
  double radius_sigma_mm = 0.05;
  double h0_mm = 20.9;
  double h0_sigma_mm = 0.1;
  double spacing_mm = 0.48;
  double spacing_sigma_mm = 0.02;
  int loops = 10;
  bool projected = false;    // compare with the NV-axis projection (1/sqrt 3)
};

struct ResolutionArgs {
  double tau = 1.0;
  double beta_s = 1.0;
  double rho_max = 3.0;
  double rho_step = 0.05;
  std::string out;  // CSV; stdout when empty
};

struct ExportArgs {
  std::string in;
  std::string out;
  std::string format = "csv";  // csv | pgm
  std::string component = "z"; // x | y | z; scalar maps accept z only
  std::optional<std::array<double, 2>> range;  // PGM range, tesla
};

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);
int cmd_filter(const FilterArgs& args, std::ostream& out, std::ostream& err);
int cmd_decompose(const DecomposeArgs& args, std::ostream& out, std::ostream& err);
int cmd_calibrate(const CalibrateArgs& args, std::ostream& out, std::ostream& err);
int cmd_resolution(const ResolutionArgs& args, std::ostream& out, std::ostream& err);
int cmd_export(const ExportArgs& args, std::ostream& out, std::ostream& err);

// Runs `body`, mapping qdm::Error to its exit code and printing the message.
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace qdm
