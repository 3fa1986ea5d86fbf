// SEARD covariance function, its Gaussian-density form, and kernel-matrix
// assembly. Inputs are stored as row-per-point matrices.
#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include "linalg.hpp"

namespace dgpc {

// Hyperparameters of one scalar output channel: sigma_f^2, per-dimension
// length scales and the observation noise variance sigma_eps^2.
struct KernelParams {
  double signal_variance = 1.0;
  Eigen::VectorXd length_scales;
  double noise_variance = 1e-2;

  int input_dim() const { return static_cast<int>(length_scales.size()); }

  void validate() const;

  // Log-space packing used by the trainers: [log sf2, log l_1..l_D, log sn2].
  Eigen::VectorXd to_log_vector() const;
  static KernelParams from_log_vector(const Eigen::VectorXd& v);
};

void to_json(nlohmann::json& j, const KernelParams& p);
void from_json(const nlohmann::json& j, KernelParams& p);

// Eq.-style SEARD value sf2 * exp(-1/2 (z-z2)' Lambda^{-1} (z-z2)) with
// Lambda = diag(length_scales^2).
double seard(const KernelParams& params, const Eigen::VectorXd& z,
             const Eigen::VectorXd& z2);

// Decomposition k(z,z2) = c * N(z | z2, Lambda) with
// c = sf2 (2 pi)^{D/2} |Lambda|^{1/2}. Returns {c, density}.
std::pair<double, double> seard_as_gaussian(const KernelParams& params,
                                            const Eigen::VectorXd& z,
                                            const Eigen::VectorXd& z2);

// |A| x |B| kernel matrix; points are rows.
Eigen::MatrixXd gram(const KernelParams& params, const Eigen::MatrixXd& a,
                     const Eigen::MatrixXd& b);

// Kernel vector k(A_i, z), i.e. gram(A, z) as a column.
Eigen::VectorXd gram_vector(const KernelParams& params, const Eigen::MatrixXd& a,
                            const Eigen::VectorXd& z);

// Derivatives of the kernel value w.r.t. log hyperparameters, used by the
// finite-difference checks. d/dlog(sf2) = k, d/dlog(l_d) = k * (dz_d/l_d)^2.
Eigen::VectorXd seard_log_gradient(const KernelParams& params,
                                   const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& z2);

inline double default_jitter(const KernelParams& params) {
  return 1e-8 * params.signal_variance;
}

}  // namespace dgpc
