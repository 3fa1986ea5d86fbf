// Exact dense GP regression per output channel: predictive equations and
// marginal-likelihood hyperparameter training.
#pragma once

#include <json.hpp>

#include "dataset.hpp"
#include "kernel.hpp"

namespace dgpc {

struct FullGpModel {
  KernelParams params;
  Eigen::MatrixXd inputs;   // N x D
  Eigen::VectorXd targets;  // N, one channel
  Eigen::VectorXd alpha;    // (K_N + sn2 I)^{-1} Y
};

struct FitOptions {
  int max_iters = 100;
  int restarts = 3;           // random restarts on top of the provided init
  uint64_t seed = 0;
  double restart_log_lo = std::log(1e-2);
  double restart_log_hi = std::log(1e2);
};

// log P(Y) = -N/2 log 2pi - 1/2 log|K+sn2 I| - 1/2 Y'(K+sn2 I)^{-1}Y.
double log_marginal_likelihood(const KernelParams& params,
                               const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& targets);
double log_marginal_likelihood(const FullGpModel& model);

// Gradient of the log marginal likelihood w.r.t. the log-hyperparameter
// vector [log sf2, log l_1..l_D, log sn2].
Eigen::VectorXd nlml_log_gradient(const KernelParams& params,
                                  const Eigen::MatrixXd& inputs,
                                  const Eigen::VectorXd& targets);

FullGpModel fit_full(const Dataset& data, int channel, const KernelParams& init,
                     const FitOptions& opts = {});

std::pair<double, double> predict_full(const FullGpModel& model,
                                       const Eigen::VectorXd& z);

nlohmann::json full_gp_to_json(const FullGpModel& model);
FullGpModel full_gp_from_json(const nlohmann::json& j);

}  // namespace dgpc
