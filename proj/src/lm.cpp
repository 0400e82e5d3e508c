#include "qdm/lm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace qdm {

namespace {

constexpr double kMaxDamping = 1e16;

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

void LmOptions::validate() const {
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (!(cost_tolerance > 0.0)) throw std::invalid_argument("cost_tolerance must be > 0");
  if (!(param_tolerance > 0.0)) throw std::invalid_argument("param_tolerance must be > 0");
  if (!(initial_damping > 0.0)) throw std::invalid_argument("initial_damping must be > 0");
  if (!(damping_up > 1.0) || !(damping_down > 1.0)) {
    throw std::invalid_argument("damping factors must be > 1");
  }
  if (!(fd_step > 0.0) || !(fd_floor > 0.0)) {
    throw std::invalid_argument("finite-difference step must be > 0");
  }
}

std::string_view to_string(LmStatus status) {
  switch (status) {
    case LmStatus::cost_converged: return "cost_converged";
    case LmStatus::param_converged: return "param_converged";
    case LmStatus::gradient_zero: return "gradient_zero";
    case LmStatus::stalled: return "stalled";
    case LmStatus::max_iterations: return "max_iterations";
    case LmStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

void forward_difference_jacobian(const ResidualFn& residuals, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& r0, const LmOptions& opts,
                                 Eigen::MatrixXd& jac) {
  jac.resize(r0.size(), p.size());
  Eigen::VectorXd q = p;
  Eigen::VectorXd r(r0.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double h = opts.fd_step * std::max(std::abs(p[i]), opts.fd_floor);
    q[i] = p[i] + h;
    const double step = q[i] - p[i];  // exactly representable step
    residuals(q, r);
    jac.col(i) = (r - r0) / step;
    q[i] = p[i];
  }
}

LmResult lm_minimize(const ResidualFn& residuals, const Eigen::VectorXd& init,
                     const LmOptions& opts, const JacobianFn& jacobian) {
  opts.validate();
  LmResult res;
  res.params = init;

  Eigen::VectorXd r;
  residuals(res.params, r);
  ++res.evaluations;
  if (!all_finite(r)) {
    throw std::invalid_argument("residuals are not finite at the initial parameters");
  }
  double cost = 0.5 * r.squaredNorm();
  res.initial_cost = cost;
  res.cost = cost;

  const bool use_fd = !jacobian || opts.jacobian_mode == JacobianMode::forward_difference;
  const Eigen::Index np = init.size();
  Eigen::MatrixXd jac;
  Eigen::MatrixXd jtj(np, np);
  Eigen::VectorXd grad(np);
  Eigen::VectorXd trial_r;
  Eigen::VectorXd delta(np);
  Eigen::VectorXd trial(np);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(np);
  double lambda = opts.initial_damping;

  if (cost == 0.0) {
    res.status = LmStatus::gradient_zero;
    res.converged = true;
    return res;
  }

  for (int it = 1; it <= opts.max_iterations; ++it) {
    res.iterations = it;
    if (use_fd) {
      forward_difference_jacobian(residuals, res.params, r, opts, jac);
      res.evaluations += static_cast<int>(np);
    } else {
      jacobian(res.params, jac);
    }
    jtj.setZero();
    jtj.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
    jtj.triangularView<Eigen::StrictlyUpper>() = jtj.transpose();
    grad.noalias() = jac.transpose() * r;
    if (!jtj.allFinite() || !grad.allFinite()) {
      res.status = LmStatus::numerical_failure;
      return res;
    }
    if (grad.cwiseAbs().maxCoeff() == 0.0) {
      res.status = LmStatus::gradient_zero;
      res.converged = true;
      return res;
    }

    bool accepted = false;
    double new_cost = cost;

    // Undamped Gauss-Newton attempt.
    ldlt.compute(jtj);
    if (ldlt.info() == Eigen::Success) {
      delta = ldlt.solve(-grad);
      if (delta.allFinite()) {
        trial = res.params + delta;
        residuals(trial, trial_r);
        ++res.evaluations;
        if (all_finite(trial_r)) {
          new_cost = 0.5 * trial_r.squaredNorm();
          const double predicted = -(delta.dot(grad) + 0.5 * delta.dot(jtj * delta));
          if (predicted > 0.0 && new_cost <= cost && (cost - new_cost) >= 0.5 * predicted) {
            accepted = true;
            lambda = std::max(lambda / opts.damping_down, 1e-12);
          }
        }
      }
    }

    // Marquardt steps.
    if (!accepted) {
      const Eigen::VectorXd diag = jtj.diagonal();
      const double floor = std::max(diag.maxCoeff() * 1e-15, 1e-300);
      while (lambda <= kMaxDamping) {
        Eigen::MatrixXd damped = jtj;
        for (Eigen::Index i = 0; i < np; ++i) {
          damped(i, i) += lambda * std::max(diag[i], floor);
        }
        ldlt.compute(damped);
        if (ldlt.info() == Eigen::Success) {
          delta = ldlt.solve(-grad);
          if (delta.allFinite()) {
            trial = res.params + delta;
            residuals(trial, trial_r);
            ++res.evaluations;
            if (all_finite(trial_r)) {
              new_cost = 0.5 * trial_r.squaredNorm();
              if (new_cost < cost) {
                accepted = true;
                lambda = std::max(lambda / opts.damping_down, 1e-12);
                break;
              }
            }
          }
        }
        lambda *= opts.damping_up;
      }
    }

    if (!accepted) {
      // Cannot decrease the cost at any damping: at the floating-point floor.
      res.status = LmStatus::stalled;
      res.converged = true;
      return res;
    }

    const double decrease = cost - new_cost;
    const double step_norm = delta.norm();
    const double param_norm = res.params.norm();
    res.params = trial;
    r.swap(trial_r);
    cost = new_cost;
    res.cost = cost;

    if (cost == 0.0) {
      res.status = LmStatus::gradient_zero;
      res.converged = true;
      return res;
    }
    if (step_norm <= opts.param_tolerance * (param_norm + opts.param_tolerance)) {
      res.status = LmStatus::param_converged;
      res.converged = true;
      return res;
    }
    if (decrease <= opts.cost_tolerance * (cost + decrease)) {
      res.status = LmStatus::cost_converged;
      res.converged = true;
      return res;
    }
  }
  res.status = LmStatus::max_iterations;
  res.converged = false;
  return res;
}

}  // namespace qdm
