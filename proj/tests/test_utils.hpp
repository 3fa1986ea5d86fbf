// Shared helpers for the test suites.
#pragma once

#include <Eigen/Core>

#include "kernel.hpp"
#include "rng.hpp"
#include "svgp.hpp"

namespace dgpc::testing {

inline KernelParams random_kernel(Rng& rng, int dim, double scale = 1.0) {
  KernelParams p;
  p.signal_variance = scale * rng.uniform(0.5, 3.0);
  p.length_scales.resize(dim);
  for (int d = 0; d < dim; ++d) p.length_scales(d) = rng.uniform(0.5, 2.0);
  p.noise_variance = rng.uniform(0.01, 0.1);
  return p;
}

inline Eigen::MatrixXd random_points(Rng& rng, int n, int dim, double span = 3.0) {
  Eigen::MatrixXd x(n, dim);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) x(i, d) = rng.uniform(-span, span);
  return x;
}

// Random symmetric positive definite matrix with controlled scale.
inline Eigen::MatrixXd random_spd(Rng& rng, int n, double scale = 1.0) {
  const Eigen::MatrixXd a = rng.normal_matrix(n, n);
  return scale * (a * a.transpose() / n +
                  0.1 * Eigen::MatrixXd::Identity(n, n));
}

// Well-separated random inputs (min pairwise distance enforced) so that the
// exactness identities are tested on reasonably conditioned instances.
inline Eigen::MatrixXd separated_points(Rng& rng, int n, int dim,
                                        double span = 4.0, double min_dist = 0.35) {
  Eigen::MatrixXd x(n, dim);
  int placed = 0;
  int guard = 0;
  while (placed < n && guard < 100000) {
    ++guard;
    Eigen::RowVectorXd cand(dim);
    for (int d = 0; d < dim; ++d) cand(d) = rng.uniform(-span, span);
    bool ok = true;
    for (int i = 0; i < placed && ok; ++i) {
      if ((x.row(i) - cand).norm() < min_dist) ok = false;
    }
    if (ok) x.row(placed++) = cand;
  }
  if (placed < n) throw std::runtime_error("separated_points: packing failed");
  return x;
}

// Sample targets from the GP prior with observation noise.
inline Eigen::VectorXd sample_gp_targets(Rng& rng, const KernelParams& params,
                                         const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k = gram(params, x, x);
  k.diagonal().array() += 1e-10 * params.signal_variance;
  const Eigen::LLT<Eigen::MatrixXd> llt(k);
  Eigen::VectorXd y = llt.matrixL() * rng.normal_vector(n);
  y += std::sqrt(params.noise_variance) * rng.normal_vector(n);
  return y;
}

inline SparsePosterior random_posterior(Rng& rng, int m, int dim) {
  SparsePosterior post;
  post.kernel = random_kernel(rng, dim);
  post.inducing_inputs = separated_points(rng, m, dim, 2.5, 0.5);
  post.mean = rng.normal_vector(m);
  post.covariance = random_spd(rng, m, 0.5 * post.kernel.signal_variance);
  return post;
}

}  // namespace dgpc::testing
