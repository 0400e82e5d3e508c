#include "qdm/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <vector>

#include <omp.h>

#include "qdm/calibration.hpp"
#include "qdm/config.hpp"
#include "qdm/error.hpp"
#include "qdm/filters.hpp"
#include "qdm/fit_stack.hpp"
#include "qdm/forward.hpp"
#include "qdm/io.hpp"
#include "qdm/resolution.hpp"
#include "qdm/statistics.hpp"

namespace qdm {

namespace {

constexpr double kMicro = 1e-6;
constexpr double kMilli = 1e-3;

std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  return os;
}

void print_summary(std::ostream& out, const FitSummary& s) {
  out << "pixels fit: " << s.pixels << "\n"
      << "converged: " << s.converged << "\n"
      << "masked: " << s.masked << " (no dips " << s.masked_no_dips << ", not converged "
      << s.masked_not_converged << ", residual " << s.masked_residual << ")\n";
  if (s.low_bias_warnings > 0) {
    out << "low-bias warnings: " << s.low_bias_warnings << "\n";
  }
  out << "wall time: " << std::fixed << std::setprecision(3) << s.seconds << " s\n";
  out.unsetf(std::ios::floatfield);
}

}  // namespace

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::config);
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::config);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_run_config(args.config);
  if (args.seed) cfg.seed = *args.seed;
  if (args.threads > 0) cfg.threads = args.threads;
  omp_set_num_threads(thread_count(cfg.threads));
  if (cfg.mode == Mode::cpmm && args.out_minus.empty()) {
    throw ConfigError("CPMM simulation needs --out-minus for the sigma- stack");
  }

  const FieldMap sources = sample_field_map(cfg.sources, cfg.geometry);
  SynthesisOptions opts = cfg.synthesis();
  std::vector<std::pair<std::string, OdmrStack>> stacks;
  SynthesisReport report;
  if (cfg.mode == Mode::cpmm) {
    opts.drive.handedness = Handedness::sigma_plus;
    stacks.emplace_back(args.out, synthesize_stack(sources, opts, &report));
    opts.drive.handedness = Handedness::sigma_minus;
    opts.seed = cfg.seed + 1;
    stacks.emplace_back(args.out_minus, synthesize_stack(sources, opts));
  } else {
    stacks.emplace_back(args.out, synthesize_stack(sources, opts, &report));
  }
  if (report.out_of_window > 0) {
    err << "error: " << report.out_of_window
        << " pixel(s) have resonances outside the frequency window\n";
    return static_cast<int>(ExitCode::config);
  }
  for (const auto& [path, st] : stacks) {
    write_stack_file(path, st);
    out << "wrote " << path << " (" << st.m << " x " << st.n << " x " << st.q() << ")\n";
  }
  if (!args.truth.empty()) {
    write_field_map_file(args.truth, sample_field_map(cfg.sources, cfg.geometry, cfg.bias));
    out << "wrote " << args.truth << "\n";
  }
  return 0;
}

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  FitStackOptions opts;
  double max_masked = args.max_masked_fraction;
  if (!args.config.empty()) {
    const RunConfig cfg = load_run_config(args.config);
    opts = cfg.fit_options();
    max_masked = cfg.max_masked_fraction;
  }
  if (args.threads > 0) opts.threads = args.threads;

  const OdmrStack stack = read_stack_file(args.stack);
  FitSummary summary;
  FieldMap map;
  if (stack.mode == Mode::cpmm) {
    if (args.minus.empty()) throw ConfigError("CPMM fitting needs --minus with the sigma- stack");
    const OdmrStack minus = read_stack_file(args.minus);
    map = fit_cpmm_stacks(stack, minus, opts, &summary);
  } else {
    map = fit_stack(stack, opts, &summary);
  }
  write_field_map_file(args.out, map);
  print_summary(out, summary);
  const double fraction =
      summary.pixels > 0 ? static_cast<double>(summary.masked) / summary.pixels : 0.0;
  if (fraction > max_masked) {
    err << "error: " << summary.masked << " of " << summary.pixels
        << " pixels masked, above the allowed fraction " << max_masked << "\n";
    return static_cast<int>(ExitCode::numerical);
  }
  return 0;
}

int cmd_filter(const FilterArgs& args, std::ostream& out, std::ostream& err) {
  FilterSpec spec;
  if (!args.config.empty()) {
    spec = load_run_config(args.config).filter;
  } else {
    if (!args.no_lowpass) spec.lowpass_fwhm = args.lowpass_fwhm_um * kMicro;
    if (!args.no_highpass) spec.highpass_cutoff = args.highpass_cutoff_um * kMicro;
    spec.highpass_order = args.highpass_order;
  }
  const FieldMap map = read_field_map_file(args.in);
  std::vector<std::string> warnings;
  const FieldMap filtered = apply_filters(map, spec, &warnings);
  for (const std::string& w : warnings) err << "warning: " << w << "\n";
  write_field_map_file(args.out, filtered);
  out << "wrote " << args.out << "\n";
  return 0;
}

int cmd_decompose(const DecomposeArgs& args, std::ostream& out, std::ostream&) {
  const FieldMap plus = read_field_map_file(args.plus);
  const FieldMap minus = read_field_map_file(args.minus);
  std::vector<std::uint8_t> region;
  if (args.source_free) {
    const auto [r0, c0, r1, c1] = *args.source_free;
    if (r0 < 0 || c0 < 0 || r1 > plus.m || c1 > plus.n || r0 >= r1 || c0 >= c1) {
      throw ConfigError("source-free region is empty or outside the map");
    }
    region.assign(plus.pixels(), 0);
    for (int i = r0; i < r1; ++i) {
      for (int j = c0; j < c1; ++j) region[static_cast<std::size_t>(i) * plus.n + j] = 1;
    }
  }
  const Decomposition d = bias_reversal_decompose(plus, minus, region);
  write_field_map_file(args.out_remanent, d.remanent);
  write_field_map_file(args.out_induced, d.induced);
  out << "residual bias (uT):";
  for (double v : d.residual_bias) out << " " << v / kMicro;
  out << "\n";
  return 0;
}

int cmd_calibrate(const CalibrateArgs& args, std::ostream& out, std::ostream&) {
  SolenoidGeometry g;
  g.radius_a = {args.radius_mm * kMilli, args.radius_sigma_mm * kMilli};
  g.h0 = {args.h0_mm * kMilli, args.h0_sigma_mm * kMilli};
  g.delta_h = {args.spacing_mm * kMilli, args.spacing_sigma_mm * kMilli};
  g.n_loops = args.loops;
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  Uncertain expected = solenoid_field(g, 1.0);
  if (args.projected) {
    expected.value /= std::numbers::sqrt3;
    expected.sigma /= std::numbers::sqrt3;
  }
  // T/A to nT/mA
  constexpr double k = 1e6;
  out << "expected slope (geometry): " << expected.value * k << " +/- " << expected.sigma * k
      << " nT/mA\n";
  if (args.csv.empty()) return 0;

  std::ifstream in(args.csv);
  if (!in) throw IoError("cannot open '" + args.csv + "'");
  const std::vector<CalibrationPoint> pts = read_calibration_csv(in);
  const CalibrationCurve c = fit_calibration(pts, expected);
  out << "points: " << pts.size() << "\n"
      << "fitted slope: " << c.fit_slope.value * k << " +/- " << c.fit_slope.sigma * k
      << " nT/mA (95% CI " << c.slope_ci_low * k << " .. " << c.slope_ci_high * k << ")\n"
      << "fitted intercept: " << c.fit_intercept.value / kMicro << " +/- "
      << c.fit_intercept.sigma / kMicro << " uT\n"
      << "expected slope (with current): " << c.expected_slope.value * k << " +/- "
      << c.expected_slope.sigma * k << " nT/mA\n"
      << "ratio fit/expected: " << c.ratio.value << " +/- " << c.ratio.sigma << "\n"
      << "residual rms: " << c.residual_rms / kMicro << " uT\n";
  if (c.outside_band) out << "FLAG: ratio outside the uncertainty band\n";
  return 0;
}

int cmd_resolution(const ResolutionArgs& args, std::ostream& out, std::ostream&) {
  const ReducedProfileParams p{args.tau, args.beta_s};
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(args.rho_max > 0.0) || !(args.rho_step > 0.0)) {
    throw ConfigError("rho-max and rho-step must be > 0");
  }
  std::vector<double> rho;
  const int count = static_cast<int>(std::floor(args.rho_max / args.rho_step + 1e-9));
  for (int i = 0; i <= count; ++i) rho.push_back(i * args.rho_step);
  const std::vector<double> phi = peak_shift_profile(rho, p);
  if (args.out.empty()) {
    write_profile_csv(out, rho, phi);
    return 0;
  }
  std::ofstream os = open_out(args.out, false);
  write_profile_csv(os, rho, phi);
  if (!os) throw IoError("write to '" + args.out + "' failed");
  const std::optional<double> half = half_max_radius(p);
  out << "peak shift at rho = 0: " << phi.front() << "\n";
  if (half) {
    out << "half-maximum radius: " << *half << "\n";
  } else {
    out << "half-maximum radius: none within rho <= 5\n";
  }
  return 0;
}

int cmd_export(const ExportArgs& args, std::ostream& out, std::ostream&) {
  const FieldMap map = read_field_map_file(args.in);
  int c = -1;
  if (map.components == 3) {
    if (args.component == "x") c = 0;
    if (args.component == "y") c = 1;
    if (args.component == "z") c = 2;
  } else if (args.component == "z") {
    c = 0;
  }
  if (c < 0) {
    throw ConfigError("component '" + args.component + "' not present in a " +
                      std::to_string(map.components) + "-component map");
  }
  if (args.format == "csv") {
    std::ofstream os = open_out(args.out, false);
    export_csv(os, map, c);
    if (!os) throw IoError("write to '" + args.out + "' failed");
  } else if (args.format == "pgm") {
    std::ofstream os = open_out(args.out, true);
    std::optional<std::pair<double, double>> range;
    if (args.range) range = std::make_pair((*args.range)[0], (*args.range)[1]);
    export_pgm(os, map, c, range);
    if (!os) throw IoError("write to '" + args.out + "' failed");
  } else {
    throw ConfigError("unknown export format '" + args.format + "'");
  }
  out << "wrote " << args.out << "\n";
  return 0;
}

}  // namespace qdm
