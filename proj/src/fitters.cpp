#include "qdm/fitters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "qdm/constants.hpp"
#include "qdm/error.hpp"

namespace qdm {

namespace {

// Packed parameter vector: amplitudes, res_freqs, linewidths, offset.
struct Layout {
  Mode mode;
  int lines;
  int na;
  int ng;
  Eigen::Index f0() const { return na; }
  Eigen::Index g0() const { return na + ng; }
  Eigen::Index c() const { return na + 2 * ng; }
  Eigen::Index size() const { return na + 2 * ng + 1; }
};

Layout layout_for(Mode mode) {
  return {mode, lines_per_group(mode), amplitude_count(mode), resonance_count(mode)};
}

Eigen::VectorXd pack(const SpectrumParams& p) {
  const Layout lay = layout_for(p.mode);
  Eigen::VectorXd v(lay.size());
  for (int i = 0; i < lay.na; ++i) v[i] = p.amplitudes[i];
  for (int j = 0; j < lay.ng; ++j) {
    v[lay.f0() + j] = p.res_freqs[j];
    v[lay.g0() + j] = p.linewidths[j];
  }
  v[lay.c()] = p.offset;
  return v;
}

SpectrumParams unpack(const Eigen::VectorXd& v, Mode mode, double hyperfine) {
  const Layout lay = layout_for(mode);
  SpectrumParams p;
  p.mode = mode;
  p.hyperfine = hyperfine;
  p.amplitudes.resize(lay.na);
  p.res_freqs.resize(lay.ng);
  p.linewidths.resize(lay.ng);
  for (int i = 0; i < lay.na; ++i) p.amplitudes[i] = v[i];
  for (int j = 0; j < lay.ng; ++j) {
    p.res_freqs[j] = v[lay.f0() + j];
    p.linewidths[j] = std::abs(v[lay.g0() + j]);
  }
  p.offset = v[lay.c()];
  return p;
}

std::array<double, 3> offsets_for(Mode mode, double hyperfine) {
  std::array<double, 3> off{};
  for (int l = 0; l < lines_per_group(mode); ++l) off[l] = line_offset_mhz(mode, hyperfine, l);
  return off;
}

void model_values(std::span<const double> freqs, const Eigen::VectorXd& v, const Layout& lay,
                  const std::array<double, 3>& off, Eigen::VectorXd& out) {
  const auto q = static_cast<Eigen::Index>(freqs.size());
  out.setConstant(q, v[lay.c()]);
  for (int j = 0; j < lay.ng; ++j) {
    const double fj = v[lay.f0() + j];
    const double g2 = v[lay.g0() + j] * v[lay.g0() + j];
    for (int l = 0; l < lay.lines; ++l) {
      const double a = v[lay.lines * j + l];
      const double o = off[l];
      for (Eigen::Index i = 0; i < q; ++i) {
        const double x = (freqs[i] - fj) * kMHzPerGHz - o;
        out[i] += a / (x * x + g2);
      }
    }
  }
}

void model_jacobian(std::span<const double> freqs, const Eigen::VectorXd& v, const Layout& lay,
                    const std::array<double, 3>& off, Eigen::MatrixXd& jac) {
  const auto q = static_cast<Eigen::Index>(freqs.size());
  jac.setZero(q, lay.size());
  jac.col(lay.c()).setOnes();
  for (int j = 0; j < lay.ng; ++j) {
    const double fj = v[lay.f0() + j];
    const double g = v[lay.g0() + j];
    const double g2 = g * g;
    for (int l = 0; l < lay.lines; ++l) {
      const int ia = lay.lines * j + l;
      const double a = v[ia];
      const double o = off[l];
      for (Eigen::Index i = 0; i < q; ++i) {
        const double x = (freqs[i] - fj) * kMHzPerGHz - o;
        const double inv = 1.0 / (x * x + g2);
        const double inv2 = inv * inv;
        jac(i, ia) = inv;
        jac(i, lay.f0() + j) += 2.0 * kMHzPerGHz * a * x * inv2;
        jac(i, lay.g0() + j) -= 2.0 * a * g * inv2;
      }
    }
  }
}

double hyperfine_for(Mode mode, const FitHints& hints) {
  return hints.hyperfine_mhz.value_or(default_hyperfine_mhz(mode));
}

std::vector<double> dip_signal(std::span<const double> spectrum, double reference) {
  std::vector<double> s(spectrum.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1.0 - spectrum[i] / reference;
  return s;
}

double sample_at(std::span<const double> s, std::span<const double> freqs, double f) {
  const auto it = std::lower_bound(freqs.begin(), freqs.end(), f);
  std::size_t i = static_cast<std::size_t>(it - freqs.begin());
  if (i == freqs.size()) return s.back();
  if (i > 0 && std::abs(freqs[i - 1] - f) < std::abs(freqs[i] - f)) --i;
  return s[i];
}

double smoothing_box_mhz(Mode mode, const FitHints& hints) {
  const double hf = hyperfine_for(mode, hints);
  return (mode == Mode::cpmm ? hf : 2.0 * hf) + 2.0 * hints.linewidth_mhz;
}

DipDetection detect_resonances(std::span<const double> s, std::span<const double> freqs, Mode mode,
                               const FitHints& hints) {
  if (lines_per_group(mode) != 3) return detect_dips(s, freqs, smoothing_box_mhz(mode, hints));
  const double hf = hyperfine_for(mode, hints);
  const DipDetection lines = detect_dips(s, freqs, 2.0 * hints.linewidth_mhz, 0.1);
  std::vector<int> counts;
  DipDetection groups = group_triplets(lines, hf, hints.linewidth_mhz, &counts);
  // An incomplete triplet is placed where the full comb best matches the signal.
  const double d = hf * kGHzPerMHz;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 3) continue;
    const double c0 = groups.centers_ghz[i];
    double best = -std::numeric_limits<double>::infinity();
    double best_c = c0;
    const std::array<double, 3> cands = counts[i] == 1 ? std::array<double, 3>{c0 - d, c0, c0 + d}
                                                       : std::array<double, 3>{c0 - d, c0, c0};
    for (double c : cands) {
      const double score = sample_at(s, freqs, c - d) + sample_at(s, freqs, c) + sample_at(s, freqs, c + d);
      if (score > best) {
        best = score;
        best_c = c;
      }
    }
    groups.centers_ghz[i] = best_c;
  }
  std::vector<std::size_t> order(groups.centers_ghz.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return groups.centers_ghz[a] < groups.centers_ghz[b];
  });
  DipDetection sorted;
  for (std::size_t i : order) {
    sorted.centers_ghz.push_back(groups.centers_ghz[i]);
    sorted.depths.push_back(groups.depths[i]);
  }
  return sorted;
}

void check_inputs(std::span<const double> spectrum, std::span<const double> freqs, Mode mode) {
  if (spectrum.size() != freqs.size()) {
    throw std::invalid_argument("spectrum and frequency axis differ in length");
  }
  const auto p = static_cast<std::size_t>(layout_for(mode).size());
  if (freqs.size() < 4 * p) {
    throw std::invalid_argument("mode " + std::string(to_string(mode)) + " needs at least " +
                                std::to_string(4 * p) + " frequency points, got " +
                                std::to_string(freqs.size()));
  }
}


// Circular-drive CPMM: the minor transition is tied to the dominant one, mirrored
// about the nominal splitting and scaled by the summed transition weights.
struct CpmmTie {
  int dom = 1;
  int minor = 0;
  double ratio = 1.0;
  double mirror = 2.0 * 2.87;  // f_minor = mirror - f_dom
};

bool tied_cpmm(Mode mode, const FitHints& hints) {
  return mode == Mode::cpmm && hints.drive.handedness != Handedness::linear;
}

CpmmTie cpmm_tie(const FitHints& hints) {
  CpmmTie t;
  t.dom = hints.drive.handedness == Handedness::sigma_plus ? 1 : 0;
  t.minor = 1 - t.dom;
  double w_dom = 0.0;
  double w_min = 0.0;
  for (int k = 1; k <= kOrientationCount; ++k) {
    const TransitionWeights w = transition_weights(hints.drive, k);
    w_dom += t.dom == 1 ? w.plus : w.minus;
    w_min += t.dom == 1 ? w.minus : w.plus;
  }
  t.ratio = w_dom > 0.0 ? w_min / w_dom : 1.0;
  t.mirror = 2.0 * std::accumulate(hints.zfs.d.begin(), hints.zfs.d.end(), 0.0) / kOrientationCount;
  return t;
}

// Reduced vector: dominant amplitudes (2), dominant centre, shared width, offset.
Eigen::VectorXd tie_reduce(const SpectrumParams& p, const CpmmTie& t) {
  Eigen::VectorXd v(5);
  v << p.amplitudes[2 * t.dom], p.amplitudes[2 * t.dom + 1], p.res_freqs[t.dom],
      p.linewidths[t.dom], p.offset;
  return v;
}

Eigen::VectorXd tie_expand(const Eigen::VectorXd& v, const CpmmTie& t) {
  const Layout lay = layout_for(Mode::cpmm);
  Eigen::VectorXd full(lay.size());
  full[2 * t.dom] = v[0];
  full[2 * t.dom + 1] = v[1];
  full[2 * t.minor] = t.ratio * v[0];
  full[2 * t.minor + 1] = t.ratio * v[1];
  full[lay.f0() + t.dom] = v[2];
  full[lay.f0() + t.minor] = t.mirror - v[2];
  full[lay.g0() + t.dom] = v[3];
  full[lay.g0() + t.minor] = v[3];
  full[lay.c()] = v[4];
  return full;
}

void tie_jacobian(const Eigen::MatrixXd& full, const CpmmTie& t, Eigen::MatrixXd& jac) {
  const Layout lay = layout_for(Mode::cpmm);
  jac.resize(full.rows(), 5);
  jac.col(0) = full.col(2 * t.dom) + t.ratio * full.col(2 * t.minor);
  jac.col(1) = full.col(2 * t.dom + 1) + t.ratio * full.col(2 * t.minor + 1);
  jac.col(2) = full.col(lay.f0() + t.dom) - full.col(lay.f0() + t.minor);
  jac.col(3) = full.col(lay.g0() + t.dom) + full.col(lay.g0() + t.minor);
  jac.col(4) = full.col(lay.c());
}

DipModel guess_from_dips(std::span<const double> s, std::span<const double> freqs, Mode mode,
                         const FitHints& hints, const DipDetection& dips, double reference) {
  const int ng = resonance_count(mode);
  const int lines = lines_per_group(mode);
  const double hf = hyperfine_for(mode, hints);
  const double gamma0 = hints.linewidth_mhz;
  std::vector<double> centers(static_cast<std::size_t>(ng));

  std::vector<std::size_t> by_depth(dips.centers_ghz.size());
  std::iota(by_depth.begin(), by_depth.end(), 0);
  std::stable_sort(by_depth.begin(), by_depth.end(), [&](std::size_t a, std::size_t b) {
    return dips.depths[a] > dips.depths[b];
  });

  const bool circular = mode == Mode::cpmm && hints.drive.handedness != Handedness::linear;
  double minor_ratio = 1.0;
  int minor_group = -1;

  if (mode == Mode::vmm) {
    const ResonanceSet predicted = resonance_frequencies(hints.bias, hints.zfs);
    std::vector<int> used(dips.centers_ghz.size(), -1);
    for (int j = 0; j < ng; ++j) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < dips.centers_ghz.size(); ++i) {
        const double d = std::abs(dips.centers_ghz[i] - predicted[j]);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      if (used[best] >= 0) {
        throw NumericalError("resonances " + std::to_string(used[best] + 1) + " and " +
                             std::to_string(j + 1) +
                             " map to the same dip; check the configured bias field");
      }
      used[best] = j;
      centers[j] = dips.centers_ghz[best];
    }
  } else if (circular) {
    const double f_dom = dips.centers_ghz[by_depth[0]];
    const CpmmTie tie = cpmm_tie(hints);
    minor_group = tie.minor;
    centers[tie.dom] = f_dom;
    centers[tie.minor] = tie.mirror - f_dom;
    minor_ratio = tie.ratio;
  } else {
    centers[0] = dips.centers_ghz[by_depth[0]];
    centers[1] = dips.centers_ghz[by_depth[1]];
    if (centers[0] > centers[1]) std::swap(centers[0], centers[1]);
  }

  DipModel m;
  m.reference = reference;
  m.params = SpectrumParams::uniform(mode, 0.0, 0.0, gamma0, 0.0);
  m.params.hyperfine = hf;
  const int dom = minor_group < 0 ? -1 : 1 - minor_group;
  for (int j = 0; j < ng; ++j) {
    m.params.res_freqs[j] = centers[j];
    for (int l = 0; l < lines; ++l) {
      const int src = j == minor_group ? dom : j;
      const double pos = centers[src] + line_offset_mhz(mode, hf, l) * kGHzPerMHz;
      double a = std::max(sample_at(s, freqs, pos), 0.0) * gamma0 * gamma0;
      if (j == minor_group) a *= minor_ratio;
      m.params.amplitudes[lines * j + l] = a;
    }
  }
  return m;
}

}  // namespace

double DipModel::fluorescence(double f_ghz) const {
  return reference * (1.0 - eval_spectrum(f_ghz, params));
}

double upper_quartile(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("upper_quartile of an empty range");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t k = (3 * (v.size() - 1)) / 4;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

DipDetection detect_dips(std::span<const double> s, std::span<const double> freqs,
                         double box_mhz, double rel_threshold) {
  if (s.size() != freqs.size()) {
    throw std::invalid_argument("dip signal and frequency axis differ in length");
  }
  DipDetection out;
  const std::size_t n = s.size();
  if (n < 3) return out;
  const double step_mhz = (freqs.back() - freqs.front()) * kMHzPerGHz / static_cast<double>(n - 1);
  const auto half = static_cast<std::ptrdiff_t>(
      std::max(1.0, std::round(0.5 * box_mhz / std::max(step_mhz, 1e-12))));

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + s[i];
  std::vector<double> sm(n);
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  for (std::ptrdiff_t i = 0; i <= last; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min(last, i + half);
    sm[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }

  std::vector<double> diffs(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) diffs[i] = std::abs(s[i + 1] - s[i]);
  std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2),
                   diffs.end());
  const double noise = diffs[diffs.size() / 2] / (0.6745 * std::numbers::sqrt2);

  const double peak = *std::max_element(sm.begin(), sm.end());
  const double threshold = std::max({rel_threshold * peak, 5.0 * noise / std::sqrt(2.0 * half + 1.0), 1e-9});
  if (!(peak > threshold)) return out;

  for (std::ptrdiff_t i = 0; i <= last; ++i) {
    if (!(sm[i] > threshold)) continue;
    bool is_max = true;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - half); j <= std::min(last, i + half);
         ++j) {
      if (j < i ? sm[j] >= sm[i] : sm[j] > sm[i]) {
        is_max = false;
        break;
      }
    }
    if (!is_max || i == 0 || i == last) continue;
    // Parabolic refinement on the smoothed curve.
    const double y0 = sm[i - 1];
    const double y1 = sm[i];
    const double y2 = sm[i + 1];
    const double den = y0 - 2.0 * y1 + y2;
    double frac = den < 0.0 ? 0.5 * (y0 - y2) / den : 0.0;
    frac = std::clamp(frac, -0.5, 0.5);
    const double df = frac >= 0.0 ? freqs[i + 1] - freqs[i] : freqs[i] - freqs[i - 1];
    out.centers_ghz.push_back(freqs[i] + frac * df);
    out.depths.push_back(y1);
  }
  return out;
}

DipDetection group_triplets(const DipDetection& lines, double hyperfine_mhz, double tol_mhz,
                            std::vector<int>* counts) {
  const double d = hyperfine_mhz * kGHzPerMHz;
  const double tol = tol_mhz * kGHzPerMHz;
  const std::size_t n = lines.centers_ghz.size();
  std::vector<bool> used(n, false);
  auto find = [&](double f) -> std::ptrdiff_t {
    std::ptrdiff_t best = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i] || std::abs(lines.centers_ghz[i] - f) > tol) continue;
      if (best < 0 || std::abs(lines.centers_ghz[i] - f) <
                          std::abs(lines.centers_ghz[static_cast<std::size_t>(best)] - f)) {
        best = static_cast<std::ptrdiff_t>(i);
      }
    }
    return best;
  };
  DipDetection out;
  for (std::size_t i = 0; i < n; ++i) {
    if (used[i]) continue;
    used[i] = true;
    const double f = lines.centers_ghz[i];
    const std::ptrdiff_t a = find(f + d);
    if (a >= 0) used[static_cast<std::size_t>(a)] = true;
    const std::ptrdiff_t b = a >= 0 ? find(f + 2.0 * d) : -1;
    if (b >= 0) used[static_cast<std::size_t>(b)] = true;
    double center = f;
    double depth = lines.depths[i];
    int count = 1;
    if (a >= 0) {
      center = f + d;
      if (b >= 0) {
        const auto ua = static_cast<std::size_t>(a);
        const auto ub = static_cast<std::size_t>(b);
        center = (f + d + lines.centers_ghz[ua] + lines.centers_ghz[ub] - d) / 3.0;
        depth += lines.depths[ua] + lines.depths[ub];
        count = 3;
      } else {
        depth += lines.depths[static_cast<std::size_t>(a)];
        count = 2;
      }
    }
    out.centers_ghz.push_back(center);
    out.depths.push_back(depth / count);
    if (counts != nullptr) counts->push_back(count);
  }
  return out;
}

int required_dips(Mode mode, const FitHints& hints) {
  if (mode == Mode::cpmm && hints.drive.handedness != Handedness::linear) return 1;
  return resonance_count(mode);
}

DipModel initial_guess(std::span<const double> spectrum, std::span<const double> freqs, Mode mode,
                       const FitHints& hints) {
  check_inputs(spectrum, freqs, mode);
  const double reference = upper_quartile(spectrum);
  if (!(reference > 0.0) || !std::isfinite(reference)) {
    throw DipDetectionError(0, required_dips(mode, hints));
  }
  const std::vector<double> s = dip_signal(spectrum, reference);
  const DipDetection dips = detect_resonances(s, freqs, mode, hints);
  const int req = required_dips(mode, hints);
  if (static_cast<int>(dips.centers_ghz.size()) < req) {
    throw DipDetectionError(static_cast<int>(dips.centers_ghz.size()), req);
  }
  return guess_from_dips(s, freqs, mode, hints, dips, reference);
}

Eigen::MatrixXd spectrum_jacobian(std::span<const double> freqs, const SpectrumParams& p) {
  p.check_shape();
  Eigen::MatrixXd jac;
  model_jacobian(freqs, pack(p), layout_for(p.mode), offsets_for(p.mode, p.hyperfine), jac);
  return jac;
}

PixelFitResult fit_pixel_spectrum(std::span<const double> spectrum, std::span<const double> freqs,
                                  Mode mode, const LmOptions& opts, const FitHints& hints,
                                  const DipModel* warm) {
  check_inputs(spectrum, freqs, mode);
  if (warm != nullptr && warm->params.mode != mode) {
    throw std::invalid_argument("warm start has a different mode");
  }
  PixelFitResult result;
  const double hf = hyperfine_for(mode, hints);
  result.params = SpectrumParams::uniform(mode, 0.0, 0.0, hints.linewidth_mhz, 0.0);
  result.params.hyperfine = hf;

  const double reference = upper_quartile(spectrum);
  const int req = required_dips(mode, hints);
  if (!(reference > 0.0) || !std::isfinite(reference)) {
    result.failure = DipDetectionError(0, req).what();
    return result;
  }
  result.reference = reference;
  const std::vector<double> s = dip_signal(spectrum, reference);
  const DipDetection dips = detect_resonances(s, freqs, mode, hints);
  result.dips_found = static_cast<int>(dips.centers_ghz.size());
  if (result.dips_found < req) {
    result.failure = DipDetectionError(result.dips_found, req).what();
    return result;
  }

  SpectrumParams start;
  if (warm != nullptr) {
    start = warm->params;
    start.hyperfine = hf;
  } else {
    try {
      start = guess_from_dips(s, freqs, mode, hints, dips, reference).params;
    } catch (const NumericalError& e) {
      result.failure = e.what();
      return result;
    }
  }

  const Layout lay = layout_for(mode);
  const auto off = offsets_for(mode, hf);
  const Eigen::Map<const Eigen::VectorXd> target(s.data(), static_cast<Eigen::Index>(s.size()));
  const bool tied = tied_cpmm(mode, hints);
  const CpmmTie tie = tied ? cpmm_tie(hints) : CpmmTie{};
  Eigen::MatrixXd full_jac;
  const ResidualFn residuals = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r) {
    model_values(freqs, tied ? tie_expand(v, tie) : v, lay, off, r);
    r -= target;
  };
  const JacobianFn jacobian = [&](const Eigen::VectorXd& v, Eigen::MatrixXd& jac) {
    if (tied) {
      model_jacobian(freqs, tie_expand(v, tie), lay, off, full_jac);
      tie_jacobian(full_jac, tie, jac);
    } else {
      model_jacobian(freqs, v, lay, off, jac);
    }
  };

  LmResult lm;
  try {
    lm = lm_minimize(residuals, tied ? tie_reduce(start, tie) : pack(start), opts, jacobian);
  } catch (const std::invalid_argument& e) {
    result.failure = e.what();
    return result;
  }
  result.params = unpack(tied ? tie_expand(lm.params, tie) : lm.params, mode, hf);
  result.iterations = lm.iterations;
  result.status = lm.status;
  result.residual_rms = reference * std::sqrt(2.0 * lm.cost / static_cast<double>(s.size()));
  bool ok = lm.converged && lm.params.allFinite();
  for (double f : result.params.res_freqs) {
    if (f < freqs.front() || f > freqs.back()) ok = false;
  }
  result.converged = ok;
  return result;
}

int dominant_group(const SpectrumParams& p) {
  p.check_shape();
  const int lines = lines_per_group(p.mode);
  int best = 0;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < resonance_count(p.mode); ++j) {
    double sum = 0.0;
    for (int l = 0; l < lines; ++l) sum += p.amplitudes[lines * j + l];
    if (sum > best_sum) {
      best_sum = sum;
      best = j;
    }
  }
  return best;
}

double projected_field_from_pair(double f1_ghz, double f2_ghz, int bias_sign) {
  const double s = bias_sign < 0 ? -1.0 : 1.0;
  return s * (f2_ghz - f1_ghz) / (2.0 * PhysicalConstants::gamma);
}

double cpmm_field_from_shift(double f_sigma_plus_ghz, double f_sigma_minus_ghz) {
  return std::sqrt(3.0) * (f_sigma_plus_ghz - f_sigma_minus_ghz) / (2.0 * PhysicalConstants::gamma);
}

CpmmPixelResult fit_cpmm_pixel(std::span<const double> spectrum_plus,
                               std::span<const double> spectrum_minus,
                               std::span<const double> freqs, const LmOptions& opts,
                               const FitHints& hints, const DipModel* warm_plus,
                               const DipModel* warm_minus) {
  CpmmPixelResult out;
  FitHints h = hints;
  h.drive.handedness = Handedness::sigma_plus;
  out.plus = fit_pixel_spectrum(spectrum_plus, freqs, Mode::cpmm, opts, h, warm_plus);
  h.drive.handedness = Handedness::sigma_minus;
  out.minus = fit_pixel_spectrum(spectrum_minus, freqs, Mode::cpmm, opts, h, warm_minus);
  out.converged = out.plus.converged && out.minus.converged;
  if (out.converged) {
    const double fp = out.plus.params.res_freqs[dominant_group(out.plus.params)];
    const double fm = out.minus.params.res_freqs[dominant_group(out.minus.params)];
    out.bz = cpmm_field_from_shift(fp, fm);
  }
  return out;
}

LmOptions vector_fit_options() {
  LmOptions o;
  o.jacobian_mode = JacobianMode::forward_difference;
  o.fd_step = 1e-7;
  o.fd_floor = 1e-4;
  return o;
}

VectorFieldFit vector_field_fit(std::span<const double> res_freqs, const VectorFieldFit& init,
                                const LmOptions& opts, double strain_scale_mhz) {
  if (res_freqs.size() != 2 * kOrientationCount) {
    throw std::invalid_argument("vector field fit needs 8 resonance frequencies");
  }
  for (double f : res_freqs) {
    if (!std::isfinite(f)) throw std::invalid_argument("non-finite resonance frequency");
  }
  constexpr double gamma = PhysicalConstants::gamma;
  Eigen::VectorXd p0(7);
  p0.head<3>() = gamma * init.b;
  for (int k = 0; k < kOrientationCount; ++k) p0[3 + k] = init.zfs.d[k];

  const ResidualFn residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(8);
    const Vec3 b = p.head<3>() / gamma;
    for (int k = 1; k <= kOrientationCount; ++k) {
      const auto pair = resonance_pair(b, p[2 + k], k);
      r[2 * (k - 1)] = pair[0] - res_freqs[2 * (k - 1)];
      r[2 * (k - 1) + 1] = pair[1] - res_freqs[2 * (k - 1) + 1];
    }
  };
  LmOptions o = opts;
  o.jacobian_mode = JacobianMode::forward_difference;
  const LmResult lm = lm_minimize(residuals, p0, o);

  VectorFieldFit out;
  out.b = lm.params.head<3>() / gamma;
  for (int k = 0; k < kOrientationCount; ++k) out.zfs.d[k] = lm.params[3 + k];
  out.residual_rms = std::sqrt(2.0 * lm.cost / 8.0);
  out.iterations = lm.iterations;
  out.converged = lm.converged && lm.params.allFinite();
  for (int k = 1; k <= kOrientationCount; ++k) {
    const double shift_mhz = gamma * std::abs(projected_field(out.b, k)) * kMHzPerGHz;
    if (shift_mhz < 5.0 * strain_scale_mhz) out.low_bias_warning = true;
  }
  return out;
}

TemperatureShift estimate_temperature_shift(const ZfsVector& zfs_now, const ZfsVector& zfs_ref) {
  constexpr double kKHzPerGHz = 1.0e6;
  TemperatureShift t;
  double sum = 0.0;
  for (int k = 0; k < kOrientationCount; ++k) {
    const double shift_khz = (zfs_now.d[k] - zfs_ref.d[k]) * kKHzPerGHz;
    sum += shift_khz;
    t.per_orientation[k] = shift_khz / PhysicalConstants::temp_coeff;
  }
  t.kelvin = (sum / kOrientationCount) / PhysicalConstants::temp_coeff;
  const auto [lo, hi] = std::minmax_element(t.per_orientation.begin(), t.per_orientation.end());
  t.spread = *hi - *lo;
  return t;
}

}  // namespace qdm
