// Sparse variational GP: optimal variational posterior over inducing
// outputs, collapsed evidence lower bound with analytic gradients, and
// sparse prediction.
#pragma once

#include <functional>
#include <json.hpp>
#include <optional>

#include "dataset.hpp"
#include "kernel.hpp"

namespace dgpc {

struct SparsePosterior {
  KernelParams kernel;
  Eigen::MatrixXd inducing_inputs;  // M x D
  Eigen::VectorXd mean;             // m_u
  Eigen::MatrixXd covariance;       // S_u

  Eigen::Index size() const { return inducing_inputs.rows(); }
  void validate() const;
};

void to_json(nlohmann::json& j, const SparsePosterior& p);
void from_json(const nlohmann::json& j, SparsePosterior& p);

// Optimal q(u) for fixed inducing set and kernel:
//   m_u = sn^{-2} S_u K_M^{-1} K_MN Y,  S_u = K_M (K_M + sn^{-2} K_MN K_NM)^{-1} K_M.
SparsePosterior optimal_variational(const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& y,
                                    const Eigen::MatrixXd& inducing,
                                    const KernelParams& kernel,
                                    double jitter = 0.0);

// Collapsed bound log N(Y | 0, Q_N + sn2 I) - tr(K_N - Q_N)/(2 sn2).
double elbo(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
            const Eigen::MatrixXd& inducing, const KernelParams& kernel,
            double jitter = 0.0);

struct ElboGradient {
  double value = 0.0;
  Eigen::VectorXd log_params;  // [log sf2, log l_1..D, log sn2]
  Eigen::MatrixXd inducing;    // M x D
};

ElboGradient elbo_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const Eigen::MatrixXd& inducing,
                           const KernelParams& kernel, double jitter = 0.0);

struct SvgpOptions {
  int rounds = 4;              // alternating optimization rounds
  int hyper_steps = 25;        // L-BFGS iterations per hyperparameter block
  int inducing_steps = 25;     // L-BFGS iterations per inducing block
  uint64_t seed = 0;
  int kmeans_max_iters = 100;
  // Reports the training bound after each accepted block.
  std::function<void(double)> progress;
};

// Joint ascent of the collapsed bound over (Z_u, log theta); M <= N.
SparsePosterior train_svgp(const Dataset& data, int channel, int m_inducing,
                           const KernelParams& init, const SvgpOptions& opts = {});

std::pair<double, double> predict_sparse(const SparsePosterior& post,
                                         const Eigen::VectorXd& z);

// KL(q(u) || p(u)) with p(u) = N(0, K_M).
double kl_to_prior(const SparsePosterior& post);

// Lloyd k-means centroids of the rows of x; falls back to a random subset
// without replacement if not converged within max_iters.
Eigen::MatrixXd kmeans_centroids(const Eigen::MatrixXd& x, int k, uint64_t seed,
                                 int max_iters = 100);

}  // namespace dgpc
