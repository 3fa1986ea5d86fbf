#include "mpc.hpp"

#include <chrono>
#include <cmath>
#include <deque>

namespace dgpc {

// Wichura's AS 241 (PPND16) rational approximation.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
  }
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

void MpcProblem::validate() const {
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    throw std::invalid_argument("MpcProblem: A/B shape mismatch");
  }
  if (horizon < 1) throw std::invalid_argument("MpcProblem: horizon >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("MpcProblem: gamma must lie in (0, 1)");
  }
  if (q.rows() != a.rows() || r.rows() != b.cols() || qf.rows() != a.rows()) {
    throw std::invalid_argument("MpcProblem: weight shape mismatch");
  }
  if (noise_cov.rows() != a.rows() || noise_cov.cols() != a.rows()) {
    throw std::invalid_argument("MpcProblem: noise covariance shape mismatch");
  }
}

namespace {

GaussianInput default_gp_input(const Eigen::VectorXd& mu,
                               const Eigen::MatrixXd& sigma,
                               const Eigen::VectorXd& u) {
  GaussianInput gi;
  const Eigen::Index nx = mu.size(), nu = u.size();
  gi.mean.resize(nx + nu);
  gi.mean << mu, u;
  gi.covariance = Eigen::MatrixXd::Zero(nx + nu, nx + nu);
  gi.covariance.topLeftCorner(nx, nx) = sigma;
  return gi;
}

}  // namespace

GaussianBelief propagate(const GaussianBelief& belief, const Eigen::VectorXd& u,
                         const DualGpModel& model, const MpcProblem& prob,
                         const std::vector<ChannelMomentCache>* caches) {
  const GaussianInput gi =
      prob.gp_input_map ? prob.gp_input_map(belief.mean, belief.covariance, u)
                        : default_gp_input(belief.mean, belief.covariance, u);
  Eigen::VectorXd mu_d, var_d;
  mm_vector(model, gi, mu_d, var_d, caches);

  GaussianBelief next;
  next.mean = prob.a * belief.mean + prob.b * u + mu_d;
  next.covariance = prob.a * belief.covariance * prob.a.transpose() +
                    prob.noise_cov;
  next.covariance.diagonal() += var_d;
  symmetrize(next.covariance);
  return next;
}

double expected_cost(const std::vector<GaussianBelief>& beliefs,
                     const std::vector<Eigen::VectorXd>& inputs,
                     const MpcProblem& prob, const ReferenceWindow* refs) {
  const size_t h = inputs.size();
  if (beliefs.size() != h + 1) {
    throw std::invalid_argument("expected_cost: need H+1 beliefs for H inputs");
  }
  double cost = 0.0;
  for (size_t i = 0; i < h; ++i) {
    Eigen::VectorXd e = beliefs[i].mean;
    if (refs && i < refs->x_ref.size()) e -= refs->x_ref[i];
    Eigen::VectorXd v = inputs[i];
    if (refs && i < refs->u_ref.size()) v -= refs->u_ref[i];
    cost += e.dot(prob.q * e) + v.dot(prob.r * v) +
            (prob.q * beliefs[i].covariance).trace();
  }
  Eigen::VectorXd e = beliefs[h].mean;
  if (refs && h < refs->x_ref.size()) e -= refs->x_ref[h];
  cost += e.dot(prob.qf * e) + (prob.qf * beliefs[h].covariance).trace();
  return cost;
}

Eigen::VectorXd tightened_constraints(const GaussianBelief& belief,
                                      const MpcProblem& prob) {
  const Eigen::Index rows = prob.cx.rows();
  Eigen::VectorXd res(rows);
  const double quantile = normal_quantile(prob.gamma);
  for (Eigen::Index j = 0; j < rows; ++j) {
    double v = prob.cx.row(j) * belief.covariance * prob.cx.row(j).transpose();
    if (v < 0.0) {
      if (v < -1e-6) {
        throw NumericalError("tightened_constraints: negative row variance");
      }
      v = 0.0;
    }
    res(j) = prob.cx_bound(j) - quantile * std::sqrt(v) -
             prob.cx.row(j).dot(belief.mean);
  }
  return res;
}

namespace {

// Projection onto {u : Cu u <= cu}. Boxes (one nonzero per row) project in
// closed form; general polytopes use Dykstra's alternating projections.
class PolytopeProjector {
 public:
  PolytopeProjector(const Eigen::MatrixXd& cu, const Eigen::VectorXd& bound)
      : cu_(cu), bound_(bound) {
    const Eigen::Index nu = cu.cols();
    lo_ = Eigen::VectorXd::Constant(nu, -std::numeric_limits<double>::infinity());
    hi_ = Eigen::VectorXd::Constant(nu, std::numeric_limits<double>::infinity());
    is_box_ = cu.rows() > 0;
    for (Eigen::Index i = 0; i < cu.rows() && is_box_; ++i) {
      Eigen::Index nz = -1;
      for (Eigen::Index j = 0; j < nu; ++j) {
        if (cu(i, j) != 0.0) {
          if (nz >= 0) {
            is_box_ = false;
            break;
          }
          nz = j;
        }
      }
      if (!is_box_ || nz < 0) {
        is_box_ = false;
        break;
      }
      const double c = cu(i, nz);
      const double v = bound(i) / c;
      if (c > 0.0) hi_(nz) = std::min(hi_(nz), v);
      else lo_(nz) = std::max(lo_(nz), v);
    }
    if (cu.rows() == 0) is_box_ = true;  // unconstrained
  }

  Eigen::VectorXd project(const Eigen::VectorXd& u) const {
    if (is_box_) return u.cwiseMax(lo_).cwiseMin(hi_);
    // Dykstra over the halfspaces.
    Eigen::VectorXd x = u;
    Eigen::MatrixXd corrections = Eigen::MatrixXd::Zero(cu_.rows(), u.size());
    for (int sweep = 0; sweep < 64; ++sweep) {
      double max_violation = 0.0;
      for (Eigen::Index i = 0; i < cu_.rows(); ++i) {
        const Eigen::VectorXd y = x + corrections.row(i).transpose();
        const double slack = cu_.row(i).dot(y) - bound_(i);
        Eigen::VectorXd proj = y;
        if (slack > 0.0) {
          proj -= cu_.row(i).transpose() * (slack / cu_.row(i).squaredNorm());
        }
        corrections.row(i) = (y - proj).transpose();
        x = proj;
        max_violation = std::max(max_violation, slack);
      }
      if (max_violation <= 1e-12) break;
    }
    return x;
  }

  bool satisfied(const Eigen::VectorXd& u, double tol) const {
    if (cu_.rows() == 0) return true;
    return ((cu_ * u - bound_).array() <= tol).all();
  }

 private:
  Eigen::MatrixXd cu_;
  Eigen::VectorXd bound_;
  Eigen::VectorXd lo_, hi_;
  bool is_box_ = false;
};

}  // namespace

ControlPlan solve_mpc(const Eigen::VectorXd& x0, const Eigen::VectorXd& u_prev,
                      const DualGpModel& model, const MpcProblem& prob,
                      const ReferenceWindow* refs, const ControlPlan* warm_start,
                      const std::vector<ChannelMomentCache>* caches) {
  prob.validate();
  if (!x0.allFinite()) throw std::invalid_argument("solve_mpc: x0 not finite");
  const Eigen::Index nx = prob.n_x();
  const Eigen::Index nu = prob.n_u();
  const int h = prob.horizon;
  const Eigen::Index dim = static_cast<Eigen::Index>(h) * nu;

  PolytopeProjector projector(prob.cu, prob.cu_bound);
  {
    // An input-infeasible specification cannot be softened.
    const Eigen::VectorXd probe = projector.project(Eigen::VectorXd::Zero(nu));
    if (!projector.satisfied(probe, 1e-6)) {
      throw std::invalid_argument("solve_mpc: input polytope is empty");
    }
  }

  // Decision vector: stacked inputs, warm-started from the shifted previous
  // solution (last input repeated) or the held previous input.
  Eigen::VectorXd u_flat(dim);
  if (warm_start && static_cast<int>(warm_start->inputs.size()) == h) {
    for (int i = 0; i < h - 1; ++i) {
      u_flat.segment(i * nu, nu) = warm_start->inputs[i + 1];
    }
    u_flat.segment((h - 1) * nu, nu) = warm_start->inputs[h - 1];
  } else {
    for (int i = 0; i < h; ++i) u_flat.segment(i * nu, nu) = u_prev;
  }
  for (int i = 0; i < h; ++i) {
    u_flat.segment(i * nu, nu) = projector.project(u_flat.segment(i * nu, nu));
  }

  std::vector<GaussianBelief> beliefs(h + 1);
  std::vector<Eigen::VectorXd> inputs(h);
  double penalty = prob.penalty_weight;

  const auto rollout = [&](const Eigen::VectorXd& flat,
                           std::vector<GaussianBelief>& bel,
                           std::vector<Eigen::VectorXd>& ins) {
    bel[0].mean = x0;
    bel[0].covariance = Eigen::MatrixXd::Zero(nx, nx);
    for (int i = 0; i < h; ++i) {
      ins[i] = flat.segment(i * nu, nu);
      bel[i + 1] = propagate(bel[i], ins[i], model, prob, caches);
    }
  };

  const auto objective = [&](const Eigen::VectorXd& flat) {
    rollout(flat, beliefs, inputs);
    double value = expected_cost(beliefs, inputs, prob, refs);
    if (prob.cx.rows() > 0) {
      for (int i = 1; i <= h; ++i) {
        const Eigen::VectorXd res = tightened_constraints(beliefs[i], prob);
        value += penalty * (-res.array()).max(0.0).sum();
      }
    }
    return value;
  };

  const auto fd_gradient = [&](const Eigen::VectorXd& flat, Eigen::VectorXd& g) {
    const double hstep = prob.fd_step;
    Eigen::VectorXd pert = flat;
    for (Eigen::Index k = 0; k < dim; ++k) {
      const double step = hstep * std::max(1.0, std::abs(flat(k)));
      pert(k) = flat(k) + step;
      const double fp = objective(pert);
      pert(k) = flat(k) - step;
      const double fm = objective(pert);
      pert(k) = flat(k);
      g(k) = (fp - fm) / (2.0 * step);
    }
  };

  const auto run_solver = [&](Eigen::VectorXd& u_opt) {
    double f = objective(u_opt);
    Eigen::VectorXd best = u_opt;
    double f_best = f;
    Eigen::VectorXd g(dim), g_new(dim);
    fd_gradient(u_opt, g);

    struct Pair {
      Eigen::VectorXd s, y;
      double rho;
    };
    std::deque<Pair> mem;
    bool converged = false;

    for (int iter = 0; iter < prob.max_iters; ++iter) {
      // Projected-gradient stationarity check.
      Eigen::VectorXd pg = u_opt;
      for (int i = 0; i < h; ++i) {
        pg.segment(i * nu, nu) =
            projector.project((u_opt - g).segment(i * nu, nu));
      }
      if ((pg - u_opt).lpNorm<Eigen::Infinity>() < prob.grad_tol) {
        converged = true;
        break;
      }

      Eigen::VectorXd d = g;
      std::vector<double> alpha(mem.size());
      for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
        alpha[i] = mem[i].rho * mem[i].s.dot(d);
        d -= alpha[i] * mem[i].y;
      }
      if (!mem.empty()) {
        d *= mem.back().s.dot(mem.back().y) / mem.back().y.squaredNorm();
      }
      for (size_t i = 0; i < mem.size(); ++i) {
        const double beta = mem[i].rho * mem[i].y.dot(d);
        d += (alpha[i] - beta) * mem[i].s;
      }
      d = -d;
      if (g.dot(d) >= 0.0) {
        d = -g;
        mem.clear();
      }

      double step = 1.0;
      bool accepted = false;
      Eigen::VectorXd candidate(dim);
      double f_cand = f;
      for (int bt = 0; bt < 32; ++bt) {
        candidate = u_opt + step * d;
        for (int i = 0; i < h; ++i) {
          candidate.segment(i * nu, nu) =
              projector.project(candidate.segment(i * nu, nu));
        }
        f_cand = objective(candidate);
        const double slope = g.dot(candidate - u_opt);
        if (std::isfinite(f_cand) && f_cand <= f + 1e-4 * std::min(slope, 0.0)) {
          accepted = true;
          break;
        }
        step *= 0.5;
        if (step < 1e-14) break;
      }
      if (!accepted) break;

      fd_gradient(candidate, g_new);
      Pair p;
      p.s = candidate - u_opt;
      p.y = g_new - g;
      const double sy = p.s.dot(p.y);
      if (sy > 1e-12 * p.s.norm() * p.y.norm()) {
        p.rho = 1.0 / sy;
        mem.push_back(std::move(p));
        if (mem.size() > 8) mem.pop_front();
      }
      u_opt = candidate;
      f = f_cand;
      g = g_new;
      if (f < f_best) {
        f_best = f;
        best = u_opt;
      }
    }
    u_opt = best;
    return converged;
  };

  bool converged = run_solver(u_flat);

  // Escalate the exact penalty once if the solution still violates the
  // tightened constraints, then re-solve from the current iterate.
  double worst_violation = 0.0;
  rollout(u_flat, beliefs, inputs);
  if (prob.cx.rows() > 0) {
    for (int i = 1; i <= h; ++i) {
      const Eigen::VectorXd res = tightened_constraints(beliefs[i], prob);
      worst_violation = std::max(worst_violation, (-res.array()).maxCoeff());
    }
    if (worst_violation > 1e-8) {
      penalty *= 10.0;
      converged = run_solver(u_flat);
      rollout(u_flat, beliefs, inputs);
      worst_violation = 0.0;
      for (int i = 1; i <= h; ++i) {
        const Eigen::VectorXd res = tightened_constraints(beliefs[i], prob);
        worst_violation = std::max(worst_violation, (-res.array()).maxCoeff());
      }
    }
  }

  ControlPlan plan;
  plan.inputs = inputs;
  plan.predicted_beliefs = beliefs;
  plan.cost = expected_cost(beliefs, inputs, prob, refs);
  if (worst_violation > 1e-6) {
    plan.solver_status = SolverStatus::infeasible_relaxed;
  } else if (converged) {
    plan.solver_status = SolverStatus::optimal;
  } else {
    plan.solver_status = SolverStatus::max_iter;
  }
  return plan;
}

MissionResult run_closed_loop(ClosedLoopPlant& plant, DualGpModel& model,
                              const MpcProblem& prob,
                              const ReferenceProvider& reference, int steps) {
  prob.validate();
  const Eigen::Index nx = prob.n_x();
  const Eigen::Index nu = prob.n_u();
  const int h = prob.horizon;

  MissionResult out;
  out.states.resize(steps + 1, nx);
  out.inputs.resize(steps, nu);
  out.x_refs.resize(steps, nx);
  out.estimation_error.resize(steps, nx);
  out.times.reserve(steps);

  const std::vector<ChannelMomentCache> caches = build_moment_cache(model);

  Eigen::VectorXd x = plant.state();
  out.states.row(0) = x.transpose();

  Eigen::VectorXd x_ref(nx), u_ref(nu);
  reference(plant.time(), x_ref, u_ref);
  Eigen::VectorXd u_prev = u_ref;

  ControlPlan prev_plan;
  bool have_plan = false;

  Eigen::MatrixXd log_inputs(steps, model.input_dim);
  Eigen::MatrixXd log_outputs(steps, nx);

  Eigen::VectorXd x_prev(nx), z_prev(model.input_dim);
  for (int k = 0; k < steps; ++k) {
    const double t = plant.time();
    if (k > 0) {
      observe(model, z_prev, x_prev, u_prev, x, prob.a, prob.b);
      log_inputs.row(k - 1) = z_prev.transpose();
      log_outputs.row(k - 1) =
          (x - prob.a * x_prev - prob.b * u_prev).transpose();
    }

    ReferenceWindow refs;
    refs.x_ref.resize(h + 1);
    refs.u_ref.resize(h);
    for (int i = 0; i <= h; ++i) {
      Eigen::VectorXd xr(nx), ur(nu);
      reference(t + i * plant.step_size(), xr, ur);
      refs.x_ref[i] = xr;
      if (i < h) refs.u_ref[i] = ur;
    }

    const auto start = std::chrono::steady_clock::now();
    ControlPlan plan;
    try {
      plan = solve_mpc(x, u_prev, model, prob, &refs,
                       have_plan ? &prev_plan : nullptr, &caches);
    } catch (const std::exception& e) {
      out.aborted = true;
      out.abort_reason = e.what();
      out.states.conservativeResize(k + 1, Eigen::NoChange);
      out.inputs.conservativeResize(k, Eigen::NoChange);
      break;
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  start)
            .count();

    const Eigen::VectorXd u = plan.inputs.front();
    const Eigen::VectorXd z = plant.gp_input(u);

    // Model estimation error at the measured input, against the realized
    // noise-free residual.
    Eigen::VectorXd mu_pred(nx);
    for (Eigen::Index c = 0; c < nx; ++c) {
      mu_pred(c) = predict_dgp(model.channels[c], z).first;
    }

    try {
      plant.step(u);
    } catch (const std::exception& e) {
      out.aborted = true;
      out.abort_reason = e.what();
      out.states.conservativeResize(k + 1, Eigen::NoChange);
      out.inputs.conservativeResize(k, Eigen::NoChange);
      break;
    }
    const Eigen::VectorXd x_next = plant.state();
    const Eigen::VectorXd delta_true =
        x_next - prob.a * x - prob.b * u - plant.last_noise();

    out.states.row(k + 1) = x_next.transpose();
    out.inputs.row(k) = u.transpose();
    out.x_refs.row(k) = refs.x_ref[0].transpose();
    out.times.push_back(t);
    out.costs.push_back(plan.cost);
    out.solve_ms.push_back(ms);
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < prob.cx.rows(); ++j) {
      margin = std::min(margin, prob.cx_bound(j) - prob.cx.row(j).dot(x_next));
    }
    out.margins.push_back(margin);
    out.estimation_error.row(k) = (mu_pred - delta_true).cwiseAbs().transpose();

    x_prev = x;
    z_prev = z;
    u_prev = u;
    x = x_next;
    prev_plan = plan;
    have_plan = true;
  }

  if (!out.aborted) {
    observe(model, z_prev, x_prev, u_prev, x, prob.a, prob.b);
    log_inputs.row(steps - 1) = z_prev.transpose();
    log_outputs.row(steps - 1) =
        (x - prob.a * x_prev - prob.b * u_prev).transpose();
    out.log.inputs = log_inputs;
    out.log.outputs = log_outputs;
  } else {
    const Eigen::Index done = out.inputs.rows();
    out.log.inputs = log_inputs.topRows(std::max<Eigen::Index>(done - 1, 0));
    out.log.outputs = log_outputs.topRows(std::max<Eigen::Index>(done - 1, 0));
  }
  return out;
}

}  // namespace dgpc
