#include "moment_matching.hpp"

#include <cmath>

namespace dgpc {

void GaussianInput::validate() const {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw std::invalid_argument("GaussianInput: covariance shape mismatch");
  }
  if (!mean.allFinite() || !covariance.allFinite()) {
    throw std::invalid_argument("GaussianInput: non-finite entries");
  }
}

namespace {

bool same_component(const SparsePosterior& a, const SparsePosterior& b) {
  return a.kernel.signal_variance == b.kernel.signal_variance &&
         a.kernel.length_scales == b.kernel.length_scales &&
         a.inducing_inputs.rows() == b.inducing_inputs.rows() &&
         a.inducing_inputs == b.inducing_inputs;
}

// sf^4 exp(-1/4 (zi-zj)' Lambda^{-1} (zi-zj)) for all inducing pairs.
Eigen::MatrixXd self_pair_factor(const KernelParams& p, const Eigen::MatrixXd& z) {
  const Eigen::Index m = z.rows();
  Eigen::MatrixXd out(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    out(i, i) = p.signal_variance * p.signal_variance;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double q = ((z.row(i) - z.row(j)).transpose().array() /
                        p.length_scales.array()).square().sum();
      out(i, j) = out(j, i) =
          p.signal_variance * p.signal_variance * std::exp(-0.25 * q);
    }
  }
  return out;
}

Eigen::MatrixXd cross_pair_factor(const KernelParams& pl, const Eigen::MatrixXd& zl,
                                  const KernelParams& ps, const Eigen::MatrixXd& zs) {
  const Eigen::ArrayXd sum_lambda = pl.length_scales.array().square() +
                                    ps.length_scales.array().square();
  Eigen::MatrixXd out(zl.rows(), zs.rows());
  for (Eigen::Index i = 0; i < zl.rows(); ++i) {
    for (Eigen::Index j = 0; j < zs.rows(); ++j) {
      const double q = ((zl.row(i) - zs.row(j)).transpose().array().square() /
                        sum_lambda).sum();
      out(i, j) = pl.signal_variance * ps.signal_variance * std::exp(-0.5 * q);
    }
  }
  return out;
}

// Expected kernel vector L^(1): scale * exp(-1/2 q_j) with covariance
// Lambda + Sigma.
Eigen::VectorXd expected_kernel_vector(const KernelParams& p,
                                       const Eigen::MatrixXd& z,
                                       const Eigen::VectorXd& mu,
                                       const Eigen::MatrixXd& sigma) {
  Eigen::MatrixXd c = sigma;
  c.diagonal() += p.length_scales.array().square().matrix();
  JitteredChol chol(c, 0.0);
  const double log_scale = p.length_scales.array().log().sum() - 0.5 * chol.log_det();
  const double scale = p.signal_variance * std::exp(log_scale);
  Eigen::VectorXd out(z.rows());
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    const Eigen::VectorXd w = chol.whiten((mu - z.row(j).transpose()).eval());
    out(j) = scale * std::exp(-0.5 * w.squaredNorm());
  }
  return out;
}

// Second-moment matrix L^(2) = pre .* scale * exp(-1/2 Q) with
// Q_ij = 1/4 ||w_i + w_j||^2 under covariance Sigma + Lambda/2.
Eigen::MatrixXd second_moment_matrix(const KernelParams& p,
                                     const Eigen::MatrixXd& z,
                                     const Eigen::VectorXd& mu,
                                     const Eigen::MatrixXd& sigma,
                                     const Eigen::MatrixXd& pre) {
  const Eigen::Index m = z.rows();
  Eigen::MatrixXd c = sigma;
  c.diagonal() += (0.5 * p.length_scales.array().square()).matrix();
  JitteredChol chol(c, 0.0);
  // sqrt(|Lambda/2| / |C|)
  const double log_scale = p.length_scales.array().log().sum() -
                           0.5 * p.input_dim() * std::log(2.0) -
                           0.5 * chol.log_det();
  const double scale = std::exp(log_scale);

  Eigen::MatrixXd diffs = z.transpose();
  diffs.colwise() -= mu;
  const Eigen::MatrixXd w = chol.whiten(diffs);      // D x M
  const Eigen::VectorXd s = w.colwise().squaredNorm();
  Eigen::MatrixXd q = 2.0 * w.transpose() * w;
  q.colwise() += s;
  q.rowwise() += s.transpose();
  return scale * pre.array() * (-0.125 * q.array()).exp();
}

// Cross matrix Lbar between the two components.
Eigen::MatrixXd cross_moment_matrix(const KernelParams& pl,
                                    const Eigen::MatrixXd& zl,
                                    const KernelParams& ps,
                                    const Eigen::MatrixXd& zs,
                                    const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& sigma,
                                    const Eigen::MatrixXd& pre) {
  const Eigen::ArrayXd ll = pl.length_scales.array().square();
  const Eigen::ArrayXd ls = ps.length_scales.array().square();
  const Eigen::ArrayXd sum_lambda = ll + ls;
  // Xi = (Ll^{-1} + Ls^{-1})^{-1} + Sigma; the harmonic part is diagonal.
  Eigen::MatrixXd xi = sigma;
  xi.diagonal() += (ll * ls / sum_lambda).matrix();
  JitteredChol chol(xi, 0.0);
  // sqrt(|Ll| |Ls| / (|Ll + Ls| |Xi|))
  const double log_scale = 0.5 * (ll.log().sum() + ls.log().sum() -
                                  sum_lambda.log().sum()) -
                           0.5 * chol.log_det();
  const double scale = std::exp(log_scale);

  // mu - xi_ij = P (mu - zl_i) + Q (mu - zs_j) with diagonal P, Q summing to I.
  const Eigen::ArrayXd pw = ls / sum_lambda;
  const Eigen::ArrayXd qw = ll / sum_lambda;
  Eigen::MatrixXd da = -zl.transpose();
  da.colwise() += mu;
  da.array().colwise() *= pw;
  Eigen::MatrixXd db = -zs.transpose();
  db.colwise() += mu;
  db.array().colwise() *= qw;
  const Eigen::MatrixXd wa = chol.whiten(da);  // D x Ml
  const Eigen::MatrixXd wb = chol.whiten(db);  // D x Ms
  const Eigen::VectorXd sa = wa.colwise().squaredNorm();
  const Eigen::VectorXd sb = wb.colwise().squaredNorm();
  Eigen::MatrixXd q = 2.0 * wa.transpose() * wb;
  q.colwise() += sa;
  q.rowwise() += sb.transpose();
  return scale * pre.array() * (-0.5 * q.array()).exp();
}

}  // namespace

ChannelMomentCache build_moment_cache(const DualGpChannel& ch) {
  ChannelMomentCache cache;
  if (ch.long_term) {
    cache.pre_l = self_pair_factor(ch.long_term->kernel,
                                   ch.long_term->inducing_inputs);
  }
  if (ch.short_active) {
    const SparsePosterior& sp = ch.short_term.posterior;
    if (ch.long_term && same_component(*ch.long_term, sp)) {
      cache.shared_short = true;
      cache.pre_s = cache.pre_l;
      cache.pre_cross = cache.pre_l;
    } else {
      cache.pre_s = self_pair_factor(sp.kernel, sp.inducing_inputs);
      if (ch.long_term) {
        cache.pre_cross =
            cross_pair_factor(ch.long_term->kernel, ch.long_term->inducing_inputs,
                              sp.kernel, sp.inducing_inputs);
      }
    }
  }
  return cache;
}

std::vector<ChannelMomentCache> build_moment_cache(const DualGpModel& model) {
  std::vector<ChannelMomentCache> caches;
  caches.reserve(model.channels.size());
  for (const DualGpChannel& ch : model.channels) {
    caches.push_back(build_moment_cache(ch));
  }
  return caches;
}

MomentResult mm_moments(const DualGpChannel& ch, const GaussianInput& input,
                        const ChannelMomentCache* cache) {
  input.validate();
  ChannelMomentCache local;
  if (!cache) {
    local = build_moment_cache(ch);
    cache = &local;
  }
  const Eigen::VectorXd& mu = input.mean;
  const Eigen::MatrixXd& sigma = input.covariance;

  MomentResult res;
  double second_moment_terms = 0.0;

  Eigen::MatrixXd l2_l;  // reused when the components share kernel+inducing
  if (ch.long_term) {
    const SparsePosterior& lp = *ch.long_term;
    if (mu.size() != lp.inducing_inputs.cols()) {
      throw std::invalid_argument("mm_moments: input dimension mismatch");
    }
    const Eigen::VectorXd l1 =
        expected_kernel_vector(lp.kernel, lp.inducing_inputs, mu, sigma);
    res.mean += ch.beta_l.dot(l1);
    l2_l = second_moment_matrix(lp.kernel, lp.inducing_inputs, mu, sigma,
                                cache->pre_l);
    const Eigen::MatrixXd bl_centered =
        ch.b_l - ch.beta_l * ch.beta_l.transpose();
    second_moment_terms += lp.kernel.signal_variance -
                           (bl_centered.cwiseProduct(l2_l)).sum();
  }
  if (ch.short_active) {
    const SparsePosterior& sp = ch.short_term.posterior;
    if (mu.size() != sp.inducing_inputs.cols()) {
      throw std::invalid_argument("mm_moments: input dimension mismatch");
    }
    const Eigen::VectorXd l1 =
        expected_kernel_vector(sp.kernel, sp.inducing_inputs, mu, sigma);
    res.mean += ch.beta_s.dot(l1);
    const Eigen::MatrixXd l2_s =
        cache->shared_short
            ? l2_l
            : second_moment_matrix(sp.kernel, sp.inducing_inputs, mu, sigma,
                                   cache->pre_s);
    const Eigen::MatrixXd bs_centered =
        ch.b_s - ch.beta_s * ch.beta_s.transpose();
    second_moment_terms += sp.kernel.signal_variance -
                           (bs_centered.cwiseProduct(l2_s)).sum();
    if (ch.long_term) {
      const Eigen::MatrixXd lbar =
          cache->shared_short
              ? l2_s
              : cross_moment_matrix(ch.long_term->kernel,
                                    ch.long_term->inducing_inputs, sp.kernel,
                                    sp.inducing_inputs, mu, sigma,
                                    cache->pre_cross);
      second_moment_terms += 2.0 * ch.beta_l.dot(lbar * ch.beta_s);
    }
  }

  res.variance = second_moment_terms - res.mean * res.mean;
  if (!ch.long_term && !ch.short_active) res.variance = 0.0;
  if (res.variance < 0.0) res.variance = 0.0;
  return res;
}

double mm_mean(const DualGpChannel& ch, const GaussianInput& input) {
  return mm_moments(ch, input).mean;
}

double mm_variance(const DualGpChannel& ch, const GaussianInput& input) {
  return mm_moments(ch, input).variance;
}

void mm_vector(const DualGpModel& model, const GaussianInput& input,
               Eigen::VectorXd& mean_out, Eigen::VectorXd& var_diag_out,
               const std::vector<ChannelMomentCache>* caches) {
  const Eigen::Index n = model.n_channels();
  mean_out.resize(n);
  var_diag_out.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ChannelMomentCache* cache =
        caches ? &(*caches)[static_cast<size_t>(i)] : nullptr;
    const MomentResult r = mm_moments(model.channels[i], input, cache);
    mean_out(i) = r.mean;
    var_diag_out(i) = r.variance;
  }
}

}  // namespace dgpc
