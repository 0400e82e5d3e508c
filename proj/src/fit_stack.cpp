#include "qdm/fit_stack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <omp.h>

#include "qdm/error.hpp"

namespace qdm {

namespace {

enum class PixelState { ok, no_dips, not_converged };

struct PixelOutcome {
  PixelState state = PixelState::no_dips;
  std::array<double, 3> value{};
  std::array<double, 4> zfs{};
  double residual = std::numeric_limits<double>::quiet_NaN();  // fluorescence units
  double relative_residual = std::numeric_limits<double>::quiet_NaN();
  bool low_bias = false;
};

constexpr double kRelativeResidualFloor = 1e-9;

bool amplitudes_positive(const SpectrumParams& p) {
  const int lines = lines_per_group(p.mode);
  for (int j = 0; j < resonance_count(p.mode); ++j) {
    double sum = 0.0;
    for (int l = 0; l < lines; ++l) sum += p.amplitudes[lines * j + l];
    if (!(sum > 0.0)) return false;
  }
  return true;
}

PixelFitResult fit_with_fallback(std::span<const double> spec, std::span<const double> freqs,
                                 Mode mode, const LmOptions& opts, const FitHints& hints,
                                 const std::optional<DipModel>& warm) {
  PixelFitResult r = fit_pixel_spectrum(spec, freqs, mode, opts, hints, warm ? &*warm : nullptr);
  if (warm && r.failure.empty() && (!r.converged || !amplitudes_positive(r.params))) {
    r = fit_pixel_spectrum(spec, freqs, mode, opts, hints, nullptr);
  }
  return r;
}

PixelState classify(const PixelFitResult& r) {
  if (!r.failure.empty()) return PixelState::no_dips;
  if (!r.converged || !amplitudes_positive(r.params)) return PixelState::not_converged;
  return PixelState::ok;
}

FieldMap assemble(const std::vector<PixelOutcome>& px, int m, int n, int components,
                  bool with_zfs, double pitch, const FitStackOptions& opts, FitSummary* summary,
                  double seconds) {
  FieldMap map = FieldMap::zeros(m, n, components, pitch);
  map.residuals.assign(map.pixels(), std::numeric_limits<double>::quiet_NaN());
  if (with_zfs) map.zfs.assign(4 * map.pixels(), 0.0);

  std::vector<double> rel;
  for (const PixelOutcome& p : px) {
    if (p.state == PixelState::ok) rel.push_back(p.relative_residual);
  }
  double median = 0.0;
  if (!rel.empty()) {
    std::nth_element(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(rel.size() / 2),
                     rel.end());
    median = rel[rel.size() / 2];
  }
  const double limit = std::max(opts.residual_mask_factor * median, kRelativeResidualFloor);

  FitSummary s;
  s.pixels = map.pixels();
  s.median_residual = median;
  s.seconds = seconds;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const PixelOutcome& p = px[static_cast<std::size_t>(i) * n + j];
      map.residuals[static_cast<std::size_t>(i) * n + j] = p.residual;
      if (p.low_bias) ++s.low_bias_warnings;
      if (p.state == PixelState::no_dips) {
        ++s.masked_no_dips;
        map.set_masked(i, j);
        continue;
      }
      if (p.state == PixelState::not_converged) {
        ++s.masked_not_converged;
        map.set_masked(i, j);
        continue;
      }
      ++s.converged;
      for (int c = 0; c < components; ++c) map.at(c, i, j) = p.value[c];
      if (with_zfs) {
        for (int k = 0; k < 4; ++k) map.zfs_at(k, i, j) = p.zfs[k];
      }
      if (p.relative_residual > limit) {
        ++s.masked_residual;
        map.set_masked(i, j);
      }
    }
  }
  s.masked = map.masked_count();
  if (summary != nullptr) *summary = s;
  return map;
}

}  // namespace

int thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QDM_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("QDM_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1, omp_get_num_procs());
}

FitHints hints_from_stack(const OdmrStack& stack, const FitStackOptions& opts) {
  FitHints h;
  h.bias = stack.bias_field;
  h.zfs = opts.zfs;
  h.pmm_orientation = stack.pmm_orientation();
  h.drive = stack.polarization;
  h.linewidth_mhz = opts.linewidth_mhz;
  const auto it = stack.metadata.find("hyperfine_mhz");
  if (it != stack.metadata.end()) h.hyperfine_mhz = std::stod(it->second);
  return h;
}

FieldMap fit_stack(const OdmrStack& stack, const FitStackOptions& opts, FitSummary* summary) {
  stack.validate();
  if (stack.mode == Mode::cpmm) {
    throw std::invalid_argument("CPMM needs a sigma+/sigma- stack pair; use fit_cpmm_stacks");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const FitHints hints = hints_from_stack(stack, opts);
  const int m = stack.m;
  const int n = stack.n;
  const Mode mode = stack.mode;
  const int k = hints.pmm_orientation;
  const double bias_proj = projected_field(stack.bias_field, k);
  const int bias_sign = bias_proj < 0.0 ? -1 : 1;
  std::vector<PixelOutcome> px(static_cast<std::size_t>(m) * n);
  const int threads = thread_count(opts.threads);

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int i = 0; i < m; ++i) {
    std::vector<double> spec(stack.freqs.size());
    std::optional<DipModel> warm;
    std::optional<VectorFieldFit> vwarm;
    for (int j = 0; j < n; ++j) {
      PixelOutcome& out = px[static_cast<std::size_t>(i) * n + j];
      try {
        stack.spectrum(i, j, spec);
        const PixelFitResult r =
            fit_with_fallback(spec, stack.freqs, mode, opts.lm, hints, warm);
        out.state = classify(r);
        if (r.failure.empty()) {
          out.residual = r.residual_rms;
          out.relative_residual = r.residual_rms / r.reference;
        }
        if (out.state == PixelState::ok && mode == Mode::vmm) {
          VectorFieldFit init;
          init.b = stack.bias_field;
          init.zfs = opts.zfs;
          const VectorFieldFit v = vector_field_fit(r.params.res_freqs, vwarm ? *vwarm : init,
                                                    opts.vector_lm, opts.strain_scale_mhz);
          if (v.converged) {
            out.value = {v.b.x(), v.b.y(), v.b.z()};
            out.zfs = v.zfs.d;
            out.low_bias = v.low_bias_warning;
            vwarm = v;
          } else {
            out.state = PixelState::not_converged;
            vwarm.reset();
          }
        } else if (out.state == PixelState::ok) {
          out.value[0] =
              projected_field_from_pair(r.params.res_freqs[0], r.params.res_freqs[1], bias_sign);
        }
        if (out.state == PixelState::ok && opts.warm_start) {
          warm = r.model();
        } else {
          warm.reset();
        }
      } catch (const std::exception&) {
        out.state = PixelState::not_converged;
        warm.reset();
        vwarm.reset();
      }
    }
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return assemble(px, m, n, mode == Mode::vmm ? 3 : 1, mode == Mode::vmm, stack.pixel_pitch, opts,
                  summary, seconds);
}

FieldMap fit_cpmm_stacks(const OdmrStack& plus, const OdmrStack& minus,
                         const FitStackOptions& opts, FitSummary* summary) {
  plus.validate();
  minus.validate();
  if (plus.mode != Mode::cpmm || minus.mode != Mode::cpmm) {
    throw std::invalid_argument("fit_cpmm_stacks needs two CPMM stacks");
  }
  if (plus.m != minus.m || plus.n != minus.n || plus.freqs != minus.freqs) {
    throw std::invalid_argument("CPMM stacks are not congruent");
  }
  if (plus.polarization.handedness != Handedness::sigma_plus ||
      minus.polarization.handedness != Handedness::sigma_minus) {
    throw std::invalid_argument("CPMM stacks must be sigma_plus and sigma_minus, in that order");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const FitHints hints = hints_from_stack(plus, opts);
  const int m = plus.m;
  const int n = plus.n;
  std::vector<PixelOutcome> px(static_cast<std::size_t>(m) * n);
  const int threads = thread_count(opts.threads);

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int i = 0; i < m; ++i) {
    std::vector<double> sp(plus.freqs.size());
    std::vector<double> sm(plus.freqs.size());
    std::optional<DipModel> warm_p;
    std::optional<DipModel> warm_m;
    for (int j = 0; j < n; ++j) {
      PixelOutcome& out = px[static_cast<std::size_t>(i) * n + j];
      try {
        plus.spectrum(i, j, sp);
        minus.spectrum(i, j, sm);
        FitHints h = hints;
        h.drive.handedness = Handedness::sigma_plus;
        const PixelFitResult rp = fit_with_fallback(sp, plus.freqs, Mode::cpmm, opts.lm, h, warm_p);
        h.drive.handedness = Handedness::sigma_minus;
        const PixelFitResult rm = fit_with_fallback(sm, plus.freqs, Mode::cpmm, opts.lm, h, warm_m);
        const PixelState a = classify(rp);
        const PixelState b = classify(rm);
        if (a == PixelState::no_dips || b == PixelState::no_dips) {
          out.state = PixelState::no_dips;
        } else if (a != PixelState::ok || b != PixelState::ok) {
          out.state = PixelState::not_converged;
        } else {
          out.state = PixelState::ok;
        }
        if (rp.failure.empty() && rm.failure.empty()) {
          out.residual = std::max(rp.residual_rms, rm.residual_rms);
          out.relative_residual =
              std::max(rp.residual_rms / rp.reference, rm.residual_rms / rm.reference);
        }
        if (out.state == PixelState::ok) {
          out.value[0] = cpmm_field_from_shift(rp.params.res_freqs[dominant_group(rp.params)],
                                               rm.params.res_freqs[dominant_group(rm.params)]);
          if (opts.warm_start) {
            warm_p = rp.model();
            warm_m = rm.model();
          }
        } else {
          warm_p.reset();
          warm_m.reset();
        }
      } catch (const std::exception&) {
        out.state = PixelState::not_converged;
        warm_p.reset();
        warm_m.reset();
      }
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return assemble(px, m, n, 1, false, plus.pixel_pitch, opts, summary, seconds);
}

}  // namespace qdm
