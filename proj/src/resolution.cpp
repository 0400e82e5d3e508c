#include "qdm/resolution.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace qdm {

namespace {

constexpr int kMaxDepth = 48;
constexpr int kScanPoints = 401;
constexpr double kSearchTol = 1e-12;

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                    double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth >= kMaxDepth || std::abs(diff) <= 15.0 * tol) {
    return left + right + diff / 15.0;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

double integrand(double xi, double rho, double phi, double beta) {
  const double r2 = rho * rho + xi * xi;
  const double det = phi - beta / (r2 * std::sqrt(r2));
  return 1.0 / (det * det + 1.0);
}

}  // namespace

void ReducedProfileParams::validate() const {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("tau must be >= 0");
  if (!std::isfinite(beta_s)) throw std::invalid_argument("beta_s must be finite");
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, int panels) {
  if (b == a) return 0.0;
  panels = std::max(panels, 1);
  const double h = (b - a) / panels;
  std::vector<double> x(static_cast<std::size_t>(2 * panels + 1));
  std::vector<double> fx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = i + 1 == x.size() ? b : a + 0.5 * h * static_cast<double>(i);
    fx[i] = f(x[i]);
  }
  std::vector<double> whole(static_cast<std::size_t>(panels));
  double estimate = 0.0;
  for (int p = 0; p < panels; ++p) {
    const std::size_t i = 2 * static_cast<std::size_t>(p);
    whole[p] = (x[i + 2] - x[i]) / 6.0 * (fx[i] + 4.0 * fx[i + 1] + fx[i + 2]);
    estimate += whole[p];
  }
  const double tol = rel_tol * std::max(std::abs(estimate), std::numeric_limits<double>::min());
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const std::size_t i = 2 * static_cast<std::size_t>(p);
    total += simpson_step(f, x[i], x[i + 2], fx[i], fx[i + 1], fx[i + 2], whole[p], tol / panels, 0);
  }
  return total;
}

double integrated_fluorescence(double rho, double phi, const ReducedProfileParams& params,
                               double rel_tol) {
  params.validate();
  const double beta = params.beta_s;
  if (params.tau == 0.0) return integrand(1.0, rho, phi, beta);
  // Panels fine enough that the resonant band in xi is sampled.
  const int panels = std::clamp(static_cast<int>(std::ceil(8.0 * params.tau * (1.0 + std::abs(beta)))),
                                16, 4096);
  return adaptive_simpson([&](double xi) { return integrand(xi, rho, phi, beta); }, 1.0,
                          1.0 + params.tau, rel_tol, panels);
}

double peak_shift(double rho, const ReducedProfileParams& params) {
  params.validate();
  const double beta = params.beta_s;
  const double span = 2.0 * std::abs(beta);
  if (span == 0.0) return 0.0;
  auto s = [&](double phi) { return integrated_fluorescence(rho, phi, params, kSearchTol); };

  const double step = 2.0 * span / (kScanPoints - 1);
  int best = 0;
  double best_v = -1.0;
  for (int i = 0; i < kScanPoints; ++i) {
    const double v = s(-span + step * i);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  double a = -span + step * std::max(best - 1, 0);
  double b = -span + step * std::min(best + 1, kScanPoints - 1);
  const double tol = 1e-4 * std::abs(beta);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = s(c);
  double fd = s(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = s(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = s(d);
    }
  }
  return 0.5 * (a + b);
}

std::vector<double> peak_shift_profile(std::span<const double> rho_grid,
                                       const ReducedProfileParams& params) {
  std::vector<double> out(rho_grid.size());
  for (std::size_t i = 0; i < rho_grid.size(); ++i) out[i] = peak_shift(rho_grid[i], params);
  return out;
}

std::optional<double> half_max_radius(const ReducedProfileParams& params, double rho_max) {
  const double peak0 = peak_shift(0.0, params);
  if (peak0 == 0.0) return std::nullopt;
  const double half = 0.5 * peak0;
  auto above = [&](double rho) { return std::abs(peak_shift(rho, params)) > std::abs(half); };
  constexpr double step = 0.05;
  double lo = 0.0;
  for (double rho = step; rho <= rho_max + 1e-12; rho += step) {
    if (!above(rho)) {
      double hi = rho;
      for (int it = 0; it < 30 && hi - lo > 1e-6; ++it) {
        const double mid = 0.5 * (lo + hi);
        (above(mid) ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    lo = rho;
  }
  return std::nullopt;
}

void write_profile_csv(std::ostream& os, std::span<const double> rho, std::span<const double> phi) {
  if (rho.size() != phi.size()) throw std::invalid_argument("rho and phi differ in length");
  os << "rho,phi_pk\n" << std::setprecision(10);
  for (std::size_t i = 0; i < rho.size(); ++i) os << rho[i] << ',' << phi[i] << '\n';
}

}  // namespace qdm
