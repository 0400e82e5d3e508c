#pragma once

#include "qdm/fitters.hpp"
#include "qdm/stack.hpp"

namespace qdm {

struct FitStackOptions {
  LmOptions lm;
  LmOptions vector_lm = vector_fit_options();
  double residual_mask_factor = 5.0;  // mask residual > factor * median
  double strain_scale_mhz = 0.5;
  double linewidth_mhz = 0.5;          // initial Gamma
  ZfsVector zfs = ZfsVector::uniform(2.87);
  bool warm_start = true;
  int threads = 0;                     // 0: QDM_THREADS or all cores
};

struct FitSummary {
  std::size_t pixels = 0;
  std::size_t converged = 0;
  std::size_t masked = 0;
  std::size_t masked_no_dips = 0;
  std::size_t masked_not_converged = 0;
  std::size_t masked_residual = 0;
  std::size_t low_bias_warnings = 0;
  double median_residual = 0.0;
  double seconds = 0.0;
};

// Threads to use: `requested` if > 0, else QDM_THREADS, else all cores.
int thread_count(int requested);

FitHints hints_from_stack(const OdmrStack& stack, const FitStackOptions& opts);

// Per-pixel spectral fit plus field extraction. VMM yields (Bx, By, Bz) with
// zfs maps, PMM yields the signed projected field B . u_k. CPMM stacks come in
// pairs; use fit_cpmm_stacks (fit_stack throws std::invalid_argument).
FieldMap fit_stack(const OdmrStack& stack, const FitStackOptions& opts = {},
                   FitSummary* summary = nullptr);

// Bz from a (sigma+, sigma-) pair of congruent CPMM stacks.
FieldMap fit_cpmm_stacks(const OdmrStack& plus, const OdmrStack& minus,
                         const FitStackOptions& opts = {}, FitSummary* summary = nullptr);

}  // namespace qdm
