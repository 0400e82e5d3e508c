#include <iostream>

#include <CLI11.hpp>

#include "qdm/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Quantum diamond microscope simulation and analysis"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(36);

  qdm::SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Synthesize ODMR stacks from a configuration");
  s->add_option("--config", sim.config, "Run configuration (JSON)")->required();
  s->add_option("--out", sim.out, "Output stack (sigma+ stack in CPMM)")->required();
  s->add_option("--out-minus", sim.out_minus, "Output sigma- stack (CPMM)");
  s->add_option("--truth", sim.truth, "Write the true total field map");
  s->add_option("--seed", sim.seed, "Override the configured seed");
  s->add_option("--threads", sim.threads, "Worker threads (0: QDM_THREADS or all cores)")
      ->capture_default_str();

  qdm::FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit an ODMR stack to a field map");
  f->add_option("--stack", fit.stack, "Input stack (sigma+ stack in CPMM)")->required();
  f->add_option("--minus", fit.minus, "Sigma- stack (CPMM)");
  f->add_option("--out", fit.out, "Output field map")->required();
  f->add_option("--config", fit.config, "Run configuration for LM options and zfs");
  f->add_option("--threads", fit.threads, "Worker threads (0: QDM_THREADS or all cores)")
      ->capture_default_str();
  f->add_option("--max-masked-fraction", fit.max_masked_fraction,
                "Exit with code 5 above this masked fraction")
      ->capture_default_str();

  qdm::FilterArgs flt;
  auto* fl = app.add_subcommand("filter", "Gaussian low-pass and Butterworth high-pass");
  fl->add_option("--in", flt.in, "Input field map")->required();
  fl->add_option("--out", flt.out, "Output field map")->required();
  fl->add_option("--config", flt.config, "Take the filter section of a configuration");
  fl->add_option("--lowpass-fwhm-um", flt.lowpass_fwhm_um, "Gaussian FWHM (um)")
      ->capture_default_str();
  fl->add_option("--highpass-cutoff-um", flt.highpass_cutoff_um, "High-pass cutoff wavelength (um)")
      ->capture_default_str();
  fl->add_option("--highpass-order,--order", flt.highpass_order, "Butterworth order")->capture_default_str();
  fl->add_flag("--no-lowpass", flt.no_lowpass, "Skip the low-pass stage");
  fl->add_flag("--no-highpass", flt.no_highpass, "Skip the high-pass stage");

  qdm::DecomposeArgs dec;
  std::vector<int> region;
  auto* d = app.add_subcommand("decompose", "Split bias-reversed maps into remanent and induced");
  d->add_option("--plus", dec.plus, "Map at +B0")->required();
  d->add_option("--minus", dec.minus, "Map at -B0")->required();
  d->add_option("--out-remanent", dec.out_remanent, "Remanent map output")->required();
  d->add_option("--out-induced", dec.out_induced, "Induced map output")->required();
  d->add_option("--source-free", region, "Source-free rectangle: row0 col0 row1 col1 (half-open)")
      ->expected(4);

  qdm::CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Solenoid calibration against measured fields");
  c->add_option("--csv", cal.csv, "Measurements: current_mA,measured_field_uT");
  c->add_option("--radius-mm", cal.radius_mm, "Loop radius (mm)")->capture_default_str();
  c->add_option("--radius-sigma-mm", cal.radius_sigma_mm, "Loop radius 1-sigma (mm)")
      ->capture_default_str();
  c->add_option("--h0-mm", cal.h0_mm, "Nearest loop height (mm)")->capture_default_str();
  c->add_option("--h0-sigma-mm", cal.h0_sigma_mm, "Nearest loop height 1-sigma (mm)")
      ->capture_default_str();
  c->add_option("--spacing-mm", cal.spacing_mm, "Loop spacing (mm)")->capture_default_str();
  c->add_option("--spacing-sigma-mm", cal.spacing_sigma_mm, "Loop spacing 1-sigma (mm)")
      ->capture_default_str();
  c->add_option("--loops", cal.loops, "Number of loops")->capture_default_str();
  c->add_flag("--projected", cal.projected, "Compare with the NV-axis projection");

  qdm::ResolutionArgs res;
  auto* r = app.add_subcommand("resolution", "Peak-shift profile of a thick NV layer");
  r->add_option("--tau", res.tau, "Layer thickness over standoff")->capture_default_str();
  r->add_option("--beta-s", res.beta_s, "Field-induced shift over linewidth at the surface")
      ->capture_default_str();
  r->add_option("--rho-max", res.rho_max, "Largest radius (standoff units)")->capture_default_str();
  r->add_option("--rho-step", res.rho_step, "Radius step")->capture_default_str();
  r->add_option("--out", res.out, "CSV output (stdout when omitted)");

  qdm::ExportArgs ex;
  std::vector<double> range;
  auto* e = app.add_subcommand("export", "Export one component as CSV or PGM");
  e->add_option("--in", ex.in, "Input field map")->required();
  e->add_option("--out", ex.out, "Output file")->required();
  e->add_option("--format", ex.format, "csv or pgm")
      ->check(CLI::IsMember({"csv", "pgm"}))
      ->capture_default_str();
  e->add_option("--component", ex.component, "x, y or z (scalar maps: z)")
      ->check(CLI::IsMember({"x", "y", "z"}))
      ->capture_default_str();
  e->add_option("--range", range, "PGM range in tesla: low high")->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  if (region.size() == 4) dec.source_free = std::array<int, 4>{region[0], region[1], region[2], region[3]};
  if (range.size() == 2) ex.range = std::array<double, 2>{range[0], range[1]};

  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
  return qdm::run_guarded(
      [&] {
        if (*s) return qdm::cmd_simulate(sim, out, err);
        if (*f) return qdm::cmd_fit(fit, out, err);
        if (*fl) return qdm::cmd_filter(flt, out, err);
        if (*d) return qdm::cmd_decompose(dec, out, err);
        if (*c) return qdm::cmd_calibrate(cal, out, err);
        if (*r) return qdm::cmd_resolution(res, out, err);
        return qdm::cmd_export(ex, out, err);
      },
      err);
}
