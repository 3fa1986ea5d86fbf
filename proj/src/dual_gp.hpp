// Dual long/short-term GP: a frozen offline-trained sparse posterior plus a
// recursively updated short-term posterior, combined additively per output
// channel.
#pragma once

#include <json.hpp>
#include <optional>

#include "online_update.hpp"
#include "svgp.hpp"

namespace dgpc {

struct DualGpChannel {
  std::optional<SparsePosterior> long_term;  // frozen between missions
  bool short_active = false;
  OnlineState short_term;  // meaningful only when short_active

  // Caches kept consistent with the posteriors:
  //   beta = K_M^{-1} m_u,  b = K_M^{-1} - K_M^{-1} S_u K_M^{-1}.
  Eigen::VectorXd beta_l, beta_s;
  Eigen::MatrixXd b_l, b_s;

  void refresh_long_cache();
  void refresh_short_cache();
};

struct DualGpModel {
  std::vector<DualGpChannel> channels;
  int input_dim = 0;
  double forgetting = 0.95;
  double beta_init = 0.01;
  // Online measurements are regressed on the residual around the long-term
  // predictive mean (vs. the raw output) when set.
  bool residual_online = true;

  Eigen::Index n_channels() const {
    return static_cast<Eigen::Index>(channels.size());
  }
};

// Optimal short-term variational posterior for a frozen long-term component:
//   m_us = V_M (V_M + V_MN Qt^{-1} V_NM)^{-1} V_MN Qt^{-1} Y
//   S_us = V_M (V_M + sn^{-2} V_MN V_NM)^{-1} V_M
// with Qt = Q_N + sn2 I built from the long-term kernel. The likelihood
// noise is taken from the short-term kernel nu.
SparsePosterior fit_short_term_batch(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y,
                                     const Eigen::MatrixXd& inducing_s,
                                     const KernelParams& nu,
                                     const SparsePosterior& long_term);

// Collapsed dual-GP bound (long-term marginal around the short-term mean,
// two trace penalties, short-term KL).
double dgp_elbo(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                const SparsePosterior& long_term,
                const SparsePosterior& short_term);

// Additive prediction, equal to the sum of the two sparse predictors.
std::pair<double, double> predict_dgp(const DualGpChannel& ch,
                                      const Eigen::VectorXd& z);

// One online measurement: per-channel residual y = x_next - A x - B u fed to
// the short-term recursive update (minus the long-term mean when the model
// regresses residuals).
void observe(DualGpModel& model, const Eigen::VectorXd& z,
             const Eigen::VectorXd& x, const Eigen::VectorXd& u,
             const Eigen::VectorXd& x_next, const Eigen::MatrixXd& a,
             const Eigen::MatrixXd& b);

struct ConsolidateOptions {
  int m_inducing = 20;
  Eigen::Index max_points = 5000;
  SvgpOptions svgp;
};

// Retrains the long-term posterior per channel on the accumulated dataset
// and resets the short-term states to their initial values.
DualGpModel consolidate(const DualGpModel& model, const Dataset& accumulated,
                        const ConsolidateOptions& opts);

nlohmann::json dual_gp_to_json(const DualGpModel& model);
DualGpModel dual_gp_from_json(const nlohmann::json& j);

void save_dual_gp(const DualGpModel& model, const std::string& path);
DualGpModel load_dual_gp(const std::string& path);

}  // namespace dgpc
