#include "kernel.hpp"

#include <cmath>

namespace dgpc {

void KernelParams::validate() const {
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw std::invalid_argument("KernelParams: signal_variance must be positive");
  }
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw std::invalid_argument("KernelParams: noise_variance must be positive");
  }
  if (length_scales.size() == 0) {
    throw std::invalid_argument("KernelParams: length_scales must be non-empty");
  }
  for (Eigen::Index d = 0; d < length_scales.size(); ++d) {
    if (!(length_scales(d) > 0.0) || !std::isfinite(length_scales(d))) {
      throw std::invalid_argument("KernelParams: length_scales must be positive");
    }
  }
}

Eigen::VectorXd KernelParams::to_log_vector() const {
  Eigen::VectorXd v(length_scales.size() + 2);
  v(0) = std::log(signal_variance);
  v.segment(1, length_scales.size()) = length_scales.array().log();
  v(v.size() - 1) = std::log(noise_variance);
  return v;
}

KernelParams KernelParams::from_log_vector(const Eigen::VectorXd& v) {
  KernelParams p;
  p.signal_variance = std::exp(v(0));
  p.length_scales = v.segment(1, v.size() - 2).array().exp();
  p.noise_variance = std::exp(v(v.size() - 1));
  return p;
}

void to_json(nlohmann::json& j, const KernelParams& p) {
  j = nlohmann::json{
      {"signal_variance", p.signal_variance},
      {"length_scales", std::vector<double>(p.length_scales.begin(), p.length_scales.end())},
      {"noise_variance", p.noise_variance}};
}

void from_json(const nlohmann::json& j, KernelParams& p) {
  p.signal_variance = j.at("signal_variance").get<double>();
  const auto ls = j.at("length_scales").get<std::vector<double>>();
  p.length_scales = Eigen::Map<const Eigen::VectorXd>(ls.data(), ls.size());
  p.noise_variance = j.at("noise_variance").get<double>();
}

namespace {

void check_dims(const KernelParams& params, const Eigen::VectorXd& z,
                const Eigen::VectorXd& z2) {
  if (z.size() != params.input_dim() || z2.size() != params.input_dim()) {
    throw std::invalid_argument("seard: input dimension mismatch");
  }
}

}  // namespace

double seard(const KernelParams& params, const Eigen::VectorXd& z,
             const Eigen::VectorXd& z2) {
  check_dims(params, z, z2);
  const double q =
      ((z - z2).array() / params.length_scales.array()).square().sum();
  return params.signal_variance * std::exp(-0.5 * q);
}

std::pair<double, double> seard_as_gaussian(const KernelParams& params,
                                            const Eigen::VectorXd& z,
                                            const Eigen::VectorXd& z2) {
  check_dims(params, z, z2);
  const int d = params.input_dim();
  const double half_log_det_lambda = params.length_scales.array().log().sum();
  const double c = params.signal_variance *
                   std::pow(2.0 * M_PI, 0.5 * d) * std::exp(half_log_det_lambda);
  const double q =
      ((z - z2).array() / params.length_scales.array()).square().sum();
  const double density = std::exp(-0.5 * q - 0.5 * d * std::log(2.0 * M_PI) -
                                  half_log_det_lambda);
  return {c, density};
}

Eigen::MatrixXd gram(const KernelParams& params, const Eigen::MatrixXd& a,
                     const Eigen::MatrixXd& b) {
  if (a.cols() != params.input_dim() || b.cols() != params.input_dim()) {
    throw std::invalid_argument("gram: input dimension mismatch");
  }
  // Scaled squared distances via the expansion |x-y|^2 = |x|^2 - 2x'y + |y|^2.
  const Eigen::MatrixXd as = a.array().rowwise() /
                             params.length_scales.transpose().array();
  const Eigen::MatrixXd bs = b.array().rowwise() /
                             params.length_scales.transpose().array();
  const Eigen::VectorXd an = as.rowwise().squaredNorm();
  const Eigen::VectorXd bn = bs.rowwise().squaredNorm();
  Eigen::MatrixXd q = -2.0 * as * bs.transpose();
  q.colwise() += an;
  q.rowwise() += bn.transpose();
  Eigen::MatrixXd k = params.signal_variance *
                      (-0.5 * q.array().max(0.0)).exp().matrix();
  if (&a == &b) {
    k.diagonal().setConstant(params.signal_variance);
    k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  }
  return k;
}

Eigen::VectorXd gram_vector(const KernelParams& params, const Eigen::MatrixXd& a,
                            const Eigen::VectorXd& z) {
  if (a.cols() != params.input_dim() || z.size() != params.input_dim()) {
    throw std::invalid_argument("gram_vector: input dimension mismatch");
  }
  Eigen::VectorXd out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double q = ((a.row(i).transpose() - z).array() /
                      params.length_scales.array()).square().sum();
    out(i) = params.signal_variance * std::exp(-0.5 * q);
  }
  return out;
}

Eigen::VectorXd seard_log_gradient(const KernelParams& params,
                                   const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& z2) {
  const double k = seard(params, z, z2);
  Eigen::VectorXd g(params.input_dim() + 1);
  g(0) = k;  // d/dlog(sf2)
  const Eigen::ArrayXd scaled =
      ((z - z2).array() / params.length_scales.array()).square();
  g.tail(params.input_dim()) = k * scaled;
  return g;
}

}  // namespace dgpc
