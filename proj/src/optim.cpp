#include "optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace dgpc {

OptimResult lbfgs_minimize(const Objective& f, const Eigen::VectorXd& x0,
                           const OptimOptions& opts) {
  const Eigen::Index n = x0.size();
  OptimResult res;
  res.x = x0;

  Eigen::VectorXd g(n);
  double fx = f(res.x, g);
  if (!std::isfinite(fx)) {
    res.value = fx;
    return res;
  }
  res.value = fx;

  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };
  std::deque<Pair> history;

  Eigen::VectorXd q(n), direction(n), x_new(n), g_new(n);
  double h0 = 1.0;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion.
    q = g;
    std::vector<double> alpha(history.size());
    for (int i = static_cast<int>(history.size()) - 1; i >= 0; --i) {
      alpha[i] = history[i].rho * history[i].s.dot(q);
      q -= alpha[i] * history[i].y;
    }
    q *= h0;
    for (size_t i = 0; i < history.size(); ++i) {
      const double beta = history[i].rho * history[i].y.dot(q);
      q += (alpha[i] - beta) * history[i].s;
    }
    direction = -q;

    double dir_deriv = g.dot(direction);
    if (!(dir_deriv < 0.0)) {
      // Fall back to steepest descent when curvature went bad.
      direction = -g;
      dir_deriv = -g.squaredNorm();
      history.clear();
      h0 = 1.0;
    }

    double step = 1.0;
    bool accepted = false;
    double f_new = fx;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      x_new = res.x + step * direction;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) &&
          f_new <= fx + opts.armijo_c1 * step * dir_deriv) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step * direction.lpNorm<Eigen::Infinity>() < opts.step_tol) break;
    }
    if (!accepted) break;

    Pair p;
    p.s = x_new - res.x;
    p.y = g_new - g;
    const double sy = p.s.dot(p.y);
    if (sy > 1e-12 * p.s.norm() * p.y.norm() && sy > 0.0) {
      p.rho = 1.0 / sy;
      h0 = sy / p.y.squaredNorm();
      history.push_back(std::move(p));
      if (static_cast<int>(history.size()) > opts.memory) history.pop_front();
    }

    res.x = x_new;
    fx = f_new;
    g = g_new;
    res.value = fx;
    res.iterations = iter + 1;
  }
  return res;
}

}  // namespace dgpc
