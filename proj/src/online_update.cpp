#include "online_update.hpp"

#include <cmath>

namespace dgpc {

void OnlineState::validate() const {
  posterior.validate();
  if (!(forgetting > 0.0) || forgetting > 1.0) {
    throw std::invalid_argument("OnlineState: forgetting must lie in (0, 1]");
  }
}

namespace {

Eigen::RowVectorXd feature_row_impl(const SparsePosterior& post,
                                    const Eigen::MatrixXd& l_factor,
                                    const Eigen::VectorXd& z) {
  if (z.size() != post.inducing_inputs.cols()) {
    throw std::invalid_argument("feature_row: dimension mismatch");
  }
  const Eigen::VectorXd k = gram_vector(post.kernel, post.inducing_inputs, z);
  const Eigen::VectorXd w =
      l_factor.triangularView<Eigen::Lower>().solve(k);
  Eigen::VectorXd phi =
      l_factor.transpose().triangularView<Eigen::Upper>().solve(w);
  return phi.transpose();
}

}  // namespace

Eigen::RowVectorXd feature_row(const OnlineState& state,
                               const Eigen::VectorXd& z) {
  return feature_row_impl(state.posterior, state.km_factor_lower, z);
}

Eigen::RowVectorXd feature_row(const SparsePosterior& post,
                               const Eigen::VectorXd& z) {
  JitteredChol chol(gram(post.kernel, post.inducing_inputs, post.inducing_inputs),
                    0.0);
  return feature_row_impl(post, chol.matrix_l(), z);
}

void recursive_update(OnlineState& state, const Eigen::VectorXd& z, double y) {
  if (!std::isfinite(y) || !z.allFinite()) {
    throw std::invalid_argument("recursive_update: non-finite observation");
  }
  const Eigen::RowVectorXd phi = feature_row(state, z);
  Eigen::VectorXd& m = state.posterior.mean;
  Eigen::MatrixXd& s = state.posterior.covariance;

  const double r = y - phi.dot(m);
  const double g = state.forgetting + phi * s * phi.transpose();
  if (!(g > 0.0) || !std::isfinite(g)) {
    throw NumericalError("recursive_update: non-positive innovation variance");
  }
  const Eigen::VectorXd gain = (s * phi.transpose()) / g;
  m += gain * r;
  s = (s - gain * g * gain.transpose()) / state.forgetting;
  symmetrize(s);
  ++state.step_count;
}

OnlineState init_online(const SparsePosterior& offline, double beta,
                        bool use_offline_mean, double forgetting) {
  if (!(beta > 0.0) || beta > 1.0) {
    throw std::invalid_argument("init_online: beta must lie in (0, 1]");
  }
  OnlineState state;
  state.posterior.kernel = offline.kernel;
  state.posterior.inducing_inputs = offline.inducing_inputs;
  state.posterior.mean = use_offline_mean
                             ? offline.mean
                             : Eigen::VectorXd::Zero(offline.size());
  state.posterior.covariance =
      Eigen::MatrixXd::Identity(offline.size(), offline.size()) / beta;
  state.forgetting = forgetting;
  state.step_count = 0;
  state.km_factor_lower =
      JitteredChol(gram(offline.kernel, offline.inducing_inputs,
                        offline.inducing_inputs),
                   default_jitter(offline.kernel))
          .matrix_l();
  state.validate();
  return state;
}

}  // namespace dgpc
