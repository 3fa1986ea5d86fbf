// Exact first and second moments of the dual-GP predictive distribution at a
// Gaussian-distributed input.
#pragma once

#include "dual_gp.hpp"

namespace dgpc {

struct GaussianInput {
  Eigen::VectorXd mean;        // mu_tilde
  Eigen::MatrixXd covariance;  // Sigma_tilde, symmetric PSD

  void validate() const;
};

struct MomentResult {
  double mean = 0.0;
  double variance = 0.0;
};

// Input-independent pairwise kernel factors of one channel; valid as long as
// kernels and inducing sets stay fixed (they are frozen during a mission).
struct ChannelMomentCache {
  bool shared_short = false;    // short term reuses the long term's factors
  Eigen::MatrixXd pre_l;        // sf_l^4 exp(-1/4 d' Lambda_l^{-1} d)
  Eigen::MatrixXd pre_s;
  Eigen::MatrixXd pre_cross;    // sf_l^2 sf_s^2 exp(-1/2 d' (L_l+L_s)^{-1} d)
};

ChannelMomentCache build_moment_cache(const DualGpChannel& ch);
std::vector<ChannelMomentCache> build_moment_cache(const DualGpModel& model);

MomentResult mm_moments(const DualGpChannel& ch, const GaussianInput& input,
                        const ChannelMomentCache* cache = nullptr);

double mm_mean(const DualGpChannel& ch, const GaussianInput& input);
double mm_variance(const DualGpChannel& ch, const GaussianInput& input);

// Stacks per-channel moments into a mean vector and a diagonal covariance.
void mm_vector(const DualGpModel& model, const GaussianInput& input,
               Eigen::VectorXd& mean_out, Eigen::VectorXd& var_diag_out,
               const std::vector<ChannelMomentCache>* caches = nullptr);

}  // namespace dgpc
