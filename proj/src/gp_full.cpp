#include "gp_full.hpp"

#include <cmath>

#include "optim.hpp"
#include "rng.hpp"

namespace dgpc {

namespace {

Eigen::MatrixXd noisy_gram(const KernelParams& params, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd k = gram(params, x, x);
  k.diagonal().array() += params.noise_variance;
  return k;
}

}  // namespace

double log_marginal_likelihood(const KernelParams& params,
                               const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& targets) {
  params.validate();
  const Eigen::Index n = inputs.rows();
  JitteredChol chol(noisy_gram(params, inputs), 0.0);
  const Eigen::VectorXd w = chol.whiten(targets);
  return -0.5 * (n * std::log(2.0 * M_PI) + chol.log_det() + w.squaredNorm());
}

double log_marginal_likelihood(const FullGpModel& model) {
  return log_marginal_likelihood(model.params, model.inputs, model.targets);
}

Eigen::VectorXd nlml_log_gradient(const KernelParams& params,
                                  const Eigen::MatrixXd& inputs,
                                  const Eigen::VectorXd& targets) {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index d = params.input_dim();
  const Eigen::MatrixXd k = gram(params, inputs, inputs);
  Eigen::MatrixXd khat = k;
  khat.diagonal().array() += params.noise_variance;
  JitteredChol chol(khat, 0.0);
  const Eigen::VectorXd alpha = chol.solve(targets);
  // M1 = alpha alpha' - Khat^{-1}; dL/dtheta = 1/2 tr(M1 dK/dtheta).
  const Eigen::MatrixXd kinv = chol.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd m1 = alpha * alpha.transpose() - kinv;

  Eigen::VectorXd grad(d + 2);
  grad(0) = 0.5 * (m1.array() * k.array()).sum();  // d/dlog sf2
  const Eigen::MatrixXd mk = m1.array() * k.array();
  for (Eigen::Index dim = 0; dim < d; ++dim) {
    const double inv_l2 =
        1.0 / (params.length_scales(dim) * params.length_scales(dim));
    const Eigen::VectorXd col = inputs.col(dim);
    // sum_ij mk_ij (x_i - x_j)^2 / l^2 expanded through row/col sums.
    const Eigen::VectorXd row_sums = mk.rowwise().sum();
    const Eigen::VectorXd col_sums = mk.colwise().sum();
    const double term = (col.array().square() * row_sums.array()).sum() -
                        2.0 * col.dot(mk * col) +
                        (col.array().square() * col_sums.array()).sum();
    grad(1 + dim) = 0.5 * inv_l2 * term;
  }
  grad(d + 1) = 0.5 * params.noise_variance * m1.trace();
  return grad;
}

FullGpModel fit_full(const Dataset& data, int channel, const KernelParams& init,
                     const FitOptions& opts) {
  data.validate();
  init.validate();
  if (data.size() < 2) throw std::invalid_argument("fit_full: need N >= 2");
  if (opts.max_iters < 1) throw std::invalid_argument("fit_full: max_iters >= 1");
  if (channel < 0 || channel >= data.channels()) {
    throw std::invalid_argument("fit_full: channel out of range");
  }
  const Eigen::MatrixXd& x = data.inputs;
  const Eigen::VectorXd y = data.outputs.col(channel);
  if ((y.array() - y(0)).abs().maxCoeff() == 0.0 && y(0) == 0.0) {
    throw NumericalError("fit_full: degenerate data (all outputs zero)");
  }

  const auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
    const KernelParams p = KernelParams::from_log_vector(v);
    double value;
    try {
      value = -log_marginal_likelihood(p, x, y);
      g = -nlml_log_gradient(p, x, y);
    } catch (const NumericalError&) {
      g.setZero(v.size());
      return std::numeric_limits<double>::infinity();
    }
    return value;
  };

  OptimOptions oopts;
  oopts.max_iters = opts.max_iters;

  Rng rng = Rng(opts.seed).split("fit_full_restarts");
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(init.to_log_vector());
  for (int r = 0; r < opts.restarts; ++r) {
    Eigen::VectorXd v(init.input_dim() + 2);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v(i) = rng.uniform(opts.restart_log_lo, opts.restart_log_hi);
    }
    starts.push_back(v);
  }

  Eigen::VectorXd best = starts.front();
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    const OptimResult res = lbfgs_minimize(objective, start, oopts);
    if (!std::isfinite(res.value)) continue;
    const bool better =
        res.value < best_value - 1e-12 ||
        (std::abs(res.value - best_value) <= 1e-12 && res.x.norm() < best.norm());
    if (better) {
      best_value = res.value;
      best = res.x;
    }
  }

  FullGpModel model;
  model.params = KernelParams::from_log_vector(best);
  model.inputs = x;
  model.targets = y;
  model.alpha = JitteredChol(noisy_gram(model.params, x), 0.0).solve(y);
  return model;
}

std::pair<double, double> predict_full(const FullGpModel& model,
                                       const Eigen::VectorXd& z) {
  if (z.size() != model.inputs.cols()) {
    throw std::invalid_argument("predict_full: dimension mismatch");
  }
  const Eigen::VectorXd k_star = gram_vector(model.params, model.inputs, z);
  const double mean = k_star.dot(model.alpha);
  JitteredChol chol(noisy_gram(model.params, model.inputs), 0.0);
  const Eigen::VectorXd w = chol.whiten(k_star);
  double var = model.params.signal_variance - w.squaredNorm();
  if (var < 0.0) var = 0.0;
  return {mean, var};
}

nlohmann::json full_gp_to_json(const FullGpModel& model) {
  nlohmann::json j;
  j["kernel"] = model.params;
  std::vector<std::vector<double>> inputs(model.inputs.rows());
  for (Eigen::Index i = 0; i < model.inputs.rows(); ++i) {
    inputs[i].assign(model.inputs.row(i).begin(), model.inputs.row(i).end());
  }
  j["inputs"] = inputs;
  j["outputs"] = std::vector<double>(model.targets.begin(), model.targets.end());
  return j;
}

FullGpModel full_gp_from_json(const nlohmann::json& j) {
  FullGpModel model;
  model.params = j.at("kernel").get<KernelParams>();
  const auto inputs = j.at("inputs").get<std::vector<std::vector<double>>>();
  const auto outputs = j.at("outputs").get<std::vector<double>>();
  model.inputs.resize(inputs.size(), inputs.empty() ? 0 : inputs[0].size());
  for (size_t i = 0; i < inputs.size(); ++i) {
    model.inputs.row(i) =
        Eigen::Map<const Eigen::RowVectorXd>(inputs[i].data(), inputs[i].size());
  }
  model.targets = Eigen::Map<const Eigen::VectorXd>(outputs.data(), outputs.size());
  model.alpha = JitteredChol(noisy_gram(model.params, model.inputs), 0.0)
                    .solve(model.targets);
  return model;
}

}  // namespace dgpc
