#pragma once

// Unconstrained minimisation on R^d: a Nelder-Mead simplex pass followed by
// BFGS with central-difference gradients. Callers map constrained
// parameters onto R^d themselves.

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace longtail {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptimizeOptions {
  double rel_tol = 1e-10;    // relative change in the objective
  double param_tol = 1e-8;   // change in the arguments
  int max_evals = 20000;
  double initial_step = 0.25;
};

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;  // sup-norm of the final gradient estimate
  int evaluations = 0;
  bool converged = false;
};

/// Minimises f from x0. Non-finite objective values are treated as +inf.
OptimizeResult minimize(const Objective& f, const Eigen::VectorXd& x0,
                        const OptimizeOptions& opts = {});

OptimizeResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                           const OptimizeOptions& opts);
OptimizeResult bfgs(const Objective& f, const Eigen::VectorXd& x0, const OptimizeOptions& opts);

/// Central-difference gradient and Hessian with relative step h.
Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double h = 1e-5);
Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double h = 1e-4);

}  // namespace longtail
