// Chance-constrained stochastic MPC over the dual-GP prediction model:
// belief propagation, expected quadratic cost, constraint tightening and the
// single-shooting NLP solve.
#pragma once

#include <functional>

#include "moment_matching.hpp"

namespace dgpc {

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// Standard normal quantile (inverse CDF), accurate to ~1e-15 (AS 241).
double normal_quantile(double p);

struct MpcProblem {
  Eigen::MatrixXd a, b;  // dynamics
  Eigen::MatrixXd q, qf, r;
  int horizon = 5;
  Eigen::MatrixXd cx;       // state polytope Cx x <= cx_bound
  Eigen::VectorXd cx_bound;
  Eigen::MatrixXd cu;       // input polytope Cu u <= cu_bound
  Eigen::VectorXd cu_bound;
  double gamma = 0.95;      // chance-constraint level
  Eigen::MatrixXd noise_cov;
  double penalty_weight = 1e4;
  int max_iters = 60;
  double grad_tol = 1e-6;
  double fd_step = 1e-5;
  // Maps (state mean, state covariance, input) to the GP input distribution.
  // Unset: z = [x; u] with the input block deterministic.
  std::function<GaussianInput(const Eigen::VectorXd&, const Eigen::MatrixXd&,
                              const Eigen::VectorXd&)>
      gp_input_map;

  Eigen::Index n_x() const { return a.rows(); }
  Eigen::Index n_u() const { return b.cols(); }
  void validate() const;
};

enum class SolverStatus { optimal, max_iter, infeasible_relaxed };

struct ControlPlan {
  std::vector<Eigen::VectorXd> inputs;          // H
  std::vector<GaussianBelief> predicted_beliefs;  // H+1
  double cost = 0.0;
  SolverStatus solver_status = SolverStatus::optimal;
};

// Reference window over the horizon; absent entries mean regulation to zero.
struct ReferenceWindow {
  std::vector<Eigen::VectorXd> x_ref;  // H+1
  std::vector<Eigen::VectorXd> u_ref;  // H
};

GaussianBelief propagate(const GaussianBelief& belief, const Eigen::VectorXd& u,
                         const DualGpModel& model, const MpcProblem& prob,
                         const std::vector<ChannelMomentCache>* caches = nullptr);

double expected_cost(const std::vector<GaussianBelief>& beliefs,
                     const std::vector<Eigen::VectorXd>& inputs,
                     const MpcProblem& prob,
                     const ReferenceWindow* refs = nullptr);

// Residuals cx_j - quantile(gamma) sqrt(Cj Sigma Cj') - Cj mu; feasible
// rows are nonnegative.
Eigen::VectorXd tightened_constraints(const GaussianBelief& belief,
                                      const MpcProblem& prob);

ControlPlan solve_mpc(const Eigen::VectorXd& x0, const Eigen::VectorXd& u_prev,
                      const DualGpModel& model, const MpcProblem& prob,
                      const ReferenceWindow* refs = nullptr,
                      const ControlPlan* warm_start = nullptr,
                      const std::vector<ChannelMomentCache>* caches = nullptr);

// Plant abstraction for the closed loop. The state is the MPC state; the GP
// input may be a different measured vector (e.g. attitude/velocity/thrust).
class ClosedLoopPlant {
 public:
  virtual ~ClosedLoopPlant() = default;
  virtual Eigen::VectorXd state() const = 0;
  virtual Eigen::VectorXd gp_input(const Eigen::VectorXd& u) const = 0;
  virtual void step(const Eigen::VectorXd& u) = 0;
  virtual double time() const = 0;
  virtual double step_size() const = 0;
  // Process noise injected on the last step, for estimation-error metrics.
  virtual Eigen::VectorXd last_noise() const = 0;
};

using ReferenceProvider =
    std::function<void(double t, Eigen::VectorXd& x_ref, Eigen::VectorXd& u_ref)>;

struct MissionResult {
  Dataset log;                 // (z, y) pairs, one per executed step
  Eigen::MatrixXd states;      // (steps+1) x n_x
  Eigen::MatrixXd inputs;      // steps x n_u
  Eigen::MatrixXd x_refs;      // steps x n_x (reference at each step)
  std::vector<double> times;   // steps
  std::vector<double> costs;
  std::vector<double> solve_ms;
  std::vector<double> margins;  // realized nominal constraint margin
  // |mu_Delta,i(z(k)) - Delta_i(k)| with the noise-free realized residual.
  Eigen::MatrixXd estimation_error;  // steps x n_channels
  bool aborted = false;
  std::string abort_reason;
};

MissionResult run_closed_loop(ClosedLoopPlant& plant, DualGpModel& model,
                              const MpcProblem& prob,
                              const ReferenceProvider& reference, int steps);

}  // namespace dgpc
