// Recursive online update of a sparse posterior from streaming scalar
// measurements: weight-space RLS with a forgetting factor.
#pragma once

#include "svgp.hpp"

namespace dgpc {

struct OnlineState {
  SparsePosterior posterior;  // m_u, S_u mutable; Z_u and kernel fixed
  double forgetting = 0.95;   // lambda in (0, 1]
  long step_count = 0;

  // Factor of K_M, built once (inducing set and kernel are frozen online).
  Eigen::MatrixXd km_factor_lower;  // L with L L' = K_M + jitter

  void validate() const;
};

// Phi(z) = K_zM K_M^{-1}: the row of weights such that the predictive mean
// is Phi(z) m_u.
Eigen::RowVectorXd feature_row(const OnlineState& state, const Eigen::VectorXd& z);

// Standalone variant that factorizes K_M on the fly.
Eigen::RowVectorXd feature_row(const SparsePosterior& post, const Eigen::VectorXd& z);

// One RLS step:
//   r = y - Phi m;  G = lambda + Phi S Phi';  L = S Phi' / G;
//   m <- m + L r;   S <- (S - L G L') / lambda, then symmetrized.
void recursive_update(OnlineState& state, const Eigen::VectorXd& z, double y);

// m0 = offline mean (optional) or zero; S0 = beta^{-1} I.
OnlineState init_online(const SparsePosterior& offline, double beta,
                        bool use_offline_mean, double forgetting = 0.95);

}  // namespace dgpc
