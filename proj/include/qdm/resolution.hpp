#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace qdm {

struct ReducedProfileParams {
  double tau = 0.0;     // t_NV / d_s-s
  double beta_s = 1.0;  // g mu_b B_s / Gamma_NV

  void validate() const;  // throws std::invalid_argument
};

// Adaptive Simpson quadrature of f over [a, b] to relative tolerance rel_tol,
// starting from `panels` equal panels.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, int panels = 16);

// S(rho, phi) = integral over xi in [1, 1 + tau] of
//   1 / ((phi - beta_s / (rho^2 + xi^2)^(3/2))^2 + 1);
// tau = 0 returns the integrand at xi = 1.
double integrated_fluorescence(double rho, double phi, const ReducedProfileParams& params,
                               double rel_tol = 1e-8);

// argmax over phi of S(rho, phi): coarse scan of [-2|beta|, 2|beta|] then golden
// section to 1e-4 |beta|.
double peak_shift(double rho, const ReducedProfileParams& params);
std::vector<double> peak_shift_profile(std::span<const double> rho_grid,
                                       const ReducedProfileParams& params);

// Smallest rho where phi_pk(rho) falls to half of phi_pk(0), or nullopt if it
// does not within rho_max.
std::optional<double> half_max_radius(const ReducedProfileParams& params, double rho_max = 5.0);

void write_profile_csv(std::ostream& os, std::span<const double> rho, std::span<const double> phi);

}  // namespace qdm
