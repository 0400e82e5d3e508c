#pragma once

#include <functional>
#include <string_view>

#include <Eigen/Core>

namespace qdm {

enum class JacobianMode { analytic, forward_difference };

struct LmOptions {
  int max_iterations = 200;
  double cost_tolerance = 1e-12;   // relative decrease of the cost
  double param_tolerance = 1e-12;  // relative step length
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 10.0;
  JacobianMode jacobian_mode = JacobianMode::analytic;
  double fd_step = 1e-7;    // relative
  double fd_floor = 1e-4;   // step scale used when |p_i| is below this

  // Throws std::invalid_argument when a tolerance or factor is out of range.
  void validate() const;
};

enum class LmStatus {
  cost_converged,
  param_converged,
  gradient_zero,
  stalled,           // no further decrease possible at any damping
  max_iterations,
  numerical_failure, // residuals became non-finite
};

std::string_view to_string(LmStatus status);

struct LmResult {
  Eigen::VectorXd params;
  double cost = 0.0;          // 0.5 * sum r^2
  double initial_cost = 0.0;
  int iterations = 0;
  int evaluations = 0;
  LmStatus status = LmStatus::max_iterations;
  bool converged = false;
};

using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;
using JacobianFn = std::function<void(const Eigen::VectorXd& p, Eigen::MatrixXd& jac)>;

// Minimizes 0.5 |r(p)|^2. Each iteration first tries the undamped Gauss-Newton
// step and keeps it if the achieved reduction is at least half the predicted
// one; otherwise Marquardt steps (J^T J + lambda diag(J^T J)) are tried with
// increasing damping. `jacobian` may be empty, in which case (or when
// opts.jacobian_mode is forward_difference) forward differences are used.
// Throws std::invalid_argument if the residuals are not finite at `init`.
LmResult lm_minimize(const ResidualFn& residuals, const Eigen::VectorXd& init,
                     const LmOptions& opts, const JacobianFn& jacobian = {});

// Forward-difference Jacobian with step fd_step * max(|p_i|, fd_floor).
void forward_difference_jacobian(const ResidualFn& residuals, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& r0, const LmOptions& opts,
                                 Eigen::MatrixXd& jac);

}  // namespace qdm
