// Small L-BFGS minimizer with Armijo backtracking. Used for marginal
// likelihood and ELBO ascent (callers negate their objectives).
#pragma once

#include <Eigen/Core>
#include <functional>

namespace dgpc {

struct OptimOptions {
  int max_iters = 100;
  double grad_tol = 1e-6;      // stop on ||g||_inf below this
  double step_tol = 1e-12;     // stop when the line search stalls
  int memory = 8;
  double armijo_c1 = 1e-4;
  int max_backtracks = 40;
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Objective returns f(x) and fills grad (same size as x).
using Objective =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

OptimResult lbfgs_minimize(const Objective& f, const Eigen::VectorXd& x0,
                           const OptimOptions& opts = {});

}  // namespace dgpc
