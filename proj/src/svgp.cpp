#include "svgp.hpp"

#include <cmath>
#include <vector>

#include "optim.hpp"
#include "rng.hpp"

namespace dgpc {

void SparsePosterior::validate() const {
  kernel.validate();
  if (mean.size() != size() || covariance.rows() != size() ||
      covariance.cols() != size()) {
    throw std::invalid_argument("SparsePosterior: inconsistent sizes");
  }
}

void to_json(nlohmann::json& j, const SparsePosterior& p) {
  std::vector<std::vector<double>> zu(p.inducing_inputs.rows());
  for (Eigen::Index i = 0; i < p.inducing_inputs.rows(); ++i) {
    zu[i].assign(p.inducing_inputs.row(i).begin(), p.inducing_inputs.row(i).end());
  }
  std::vector<std::vector<double>> cov(p.covariance.rows());
  for (Eigen::Index i = 0; i < p.covariance.rows(); ++i) {
    cov[i].assign(p.covariance.row(i).begin(), p.covariance.row(i).end());
  }
  j = nlohmann::json{{"kernel", p.kernel},
                     {"inducing_inputs", zu},
                     {"mean", std::vector<double>(p.mean.begin(), p.mean.end())},
                     {"covariance", cov}};
}

void from_json(const nlohmann::json& j, SparsePosterior& p) {
  p.kernel = j.at("kernel").get<KernelParams>();
  const auto zu = j.at("inducing_inputs").get<std::vector<std::vector<double>>>();
  p.inducing_inputs.resize(zu.size(), zu.empty() ? 0 : zu[0].size());
  for (size_t i = 0; i < zu.size(); ++i) {
    p.inducing_inputs.row(i) =
        Eigen::Map<const Eigen::RowVectorXd>(zu[i].data(), zu[i].size());
  }
  const auto mean = j.at("mean").get<std::vector<double>>();
  p.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  const auto cov = j.at("covariance").get<std::vector<std::vector<double>>>();
  p.covariance.resize(cov.size(), cov.empty() ? 0 : cov[0].size());
  for (size_t i = 0; i < cov.size(); ++i) {
    p.covariance.row(i) =
        Eigen::Map<const Eigen::RowVectorXd>(cov[i].data(), cov[i].size());
  }
}

namespace {

// Shared whitened quantities of the collapsed bound.
struct CollapsedParts {
  JitteredChol chol_km;     // of K_M (+ jitter)
  Eigen::MatrixXd kmn;      // M x N
  Eigen::MatrixXd aw;       // L^{-1} K_MN
  JitteredChol chol_b;      // of B = I + sn^{-2} Aw Aw'
  Eigen::VectorXd awy;      // Aw y
  double trace_kn;          // tr K_N = N sf2

  CollapsedParts(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const Eigen::MatrixXd& inducing, const KernelParams& kernel,
                 double jitter)
      : chol_km(gram(kernel, inducing, inducing), jitter),
        kmn(gram(kernel, inducing, x)),
        aw(chol_km.whiten(kmn)),
        chol_b(Eigen::MatrixXd(Eigen::MatrixXd::Identity(inducing.rows(),
                                                         inducing.rows()) +
                               aw * aw.transpose() / kernel.noise_variance),
               0.0),
        awy(aw * y),
        trace_kn(static_cast<double>(x.rows()) * kernel.signal_variance) {}
};

}  // namespace

SparsePosterior optimal_variational(const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& y,
                                    const Eigen::MatrixXd& inducing,
                                    const KernelParams& kernel, double jitter) {
  kernel.validate();
  if (x.rows() < 1 || inducing.rows() < 1) {
    throw std::invalid_argument("optimal_variational: need N >= 1 and M >= 1");
  }
  if (x.rows() != y.size()) {
    throw std::invalid_argument("optimal_variational: X/Y size mismatch");
  }
  CollapsedParts parts(x, y, inducing, kernel, jitter);
  const Eigen::MatrixXd l = parts.chol_km.matrix_l();
  const Eigen::VectorXd binv_awy = parts.chol_b.solve(parts.awy);
  const Eigen::MatrixXd binv = parts.chol_b.solve(
      Eigen::MatrixXd::Identity(inducing.rows(), inducing.rows()));

  SparsePosterior post;
  post.kernel = kernel;
  post.inducing_inputs = inducing;
  post.mean = l * binv_awy / kernel.noise_variance;
  post.covariance = l * binv * l.transpose();
  symmetrize(post.covariance);
  return post;
}

double elbo(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
            const Eigen::MatrixXd& inducing, const KernelParams& kernel,
            double jitter) {
  kernel.validate();
  if (x.rows() != y.size()) {
    throw std::invalid_argument("elbo: X/Y size mismatch");
  }
  const Eigen::Index n = x.rows();
  const double sn2 = kernel.noise_variance;
  CollapsedParts parts(x, y, inducing, kernel, jitter);
  const Eigen::VectorXd c = parts.chol_b.whiten(parts.awy);
  const double log_det_qhat = parts.chol_b.log_det() + n * std::log(sn2);
  const double quad = (y.squaredNorm() - c.squaredNorm() / sn2) / sn2;
  const double lml_part =
      -0.5 * (n * std::log(2.0 * M_PI) + log_det_qhat + quad);
  const double trace_qn = parts.aw.squaredNorm();
  return lml_part - 0.5 * (parts.trace_kn - trace_qn) / sn2;
}

ElboGradient elbo_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const Eigen::MatrixXd& inducing,
                           const KernelParams& kernel, double jitter) {
  kernel.validate();
  const Eigen::Index n = x.rows();
  const Eigen::Index m = inducing.rows();
  const Eigen::Index d = kernel.input_dim();
  const double sn2 = kernel.noise_variance;
  const double inv_sn2 = 1.0 / sn2;

  CollapsedParts parts(x, y, inducing, kernel, jitter);
  const Eigen::MatrixXd& kmn = parts.kmn;
  const Eigen::MatrixXd km = gram(kernel, inducing, inducing);
  const Eigen::MatrixXd identity_m = Eigen::MatrixXd::Identity(m, m);

  // Value (same path as elbo()).
  const Eigen::VectorXd c = parts.chol_b.whiten(parts.awy);
  const double log_det_qhat = parts.chol_b.log_det() + n * std::log(sn2);
  const double quad = (y.squaredNorm() - c.squaredNorm() * inv_sn2) * inv_sn2;
  const double trace_qn = parts.aw.squaredNorm();
  const double value =
      -0.5 * (n * std::log(2.0 * M_PI) + log_det_qhat + quad) -
      0.5 * (parts.trace_kn - trace_qn) * inv_sn2;

  // alpha = Qhat^{-1} y  (Woodbury, O(NM)).
  const Eigen::VectorXd binv_awy = parts.chol_b.solve(parts.awy);
  const Eigen::VectorXd alpha =
      inv_sn2 * (y - inv_sn2 * parts.aw.transpose() * binv_awy);

  // A^{-1} = L^{-T} B^{-1} L^{-1} with A = K_M + sn^{-2} C, C = Kmn Kmn'.
  const Eigen::MatrixXd cmat = kmn * kmn.transpose();
  const Eigen::MatrixXd ainv =
      parts.chol_km.matrix_l().transpose().triangularView<Eigen::Upper>().solve(
          Eigen::MatrixXd(parts.chol_b.solve(parts.chol_km.whiten(identity_m))));
  const Eigen::MatrixXd t2 = inv_sn2 * identity_m -
                             inv_sn2 * inv_sn2 * cmat * ainv;

  const Eigen::VectorXd g = kmn * alpha;

  // dL1/dKmn = K_M^{-1} (g alpha' - T2 Kmn); dL2/dKmn = sn^{-2} K_M^{-1} Kmn.
  const Eigen::MatrixXd inner = g * alpha.transpose() - t2 * kmn + inv_sn2 * kmn;
  const Eigen::MatrixXd w_kmn = parts.chol_km.solve(inner);

  // dL1/dK_M = -K_M^{-1} (1/2)(g g' - T2 C) K_M^{-1};
  // dL2/dK_M = -(1/(2 sn2)) K_M^{-1} C K_M^{-1}.
  Eigen::MatrixXd mid = 0.5 * (g * g.transpose() - t2 * cmat) +
                        0.5 * inv_sn2 * cmat;
  symmetrize(mid);
  Eigen::MatrixXd v_km = -parts.chol_km.solve(
      Eigen::MatrixXd(parts.chol_km.solve(mid).transpose()));
  symmetrize(v_km);

  // Elementwise products with the kernel matrices.
  const Eigen::MatrixXd e = w_kmn.cwiseProduct(kmn);   // M x N
  const Eigen::MatrixXd f = v_km.cwiseProduct(km);     // M x M, symmetric

  const Eigen::VectorXd e_row = e.rowwise().sum();
  const Eigen::VectorXd e_col = e.colwise().sum();
  const Eigen::VectorXd f_row = f.rowwise().sum();
  const Eigen::MatrixXd ex = e * x;        // M x D
  const Eigen::MatrixXd fz = f * inducing; // M x D

  ElboGradient out;
  out.value = value;
  out.log_params.resize(d + 2);

  // d/dlog sf2: every kernel entry scales with sf2; diag K_N contributes
  // -N sf2 / (2 sn2) through the trace penalty.
  out.log_params(0) =
      e.sum() + f.sum() - 0.5 * n * kernel.signal_variance * inv_sn2;

  for (Eigen::Index dim = 0; dim < d; ++dim) {
    const double inv_l2 =
        1.0 / (kernel.length_scales(dim) * kernel.length_scales(dim));
    const Eigen::VectorXd zu_d = inducing.col(dim);
    const Eigen::VectorXd x_d = x.col(dim);
    const double cross_term =
        (zu_d.array().square() * e_row.array()).sum() -
        2.0 * zu_d.dot(ex.col(dim)) +
        (x_d.array().square() * e_col.array()).sum();
    const double ind_term =
        2.0 * ((zu_d.array().square() * f_row.array()).sum() -
               zu_d.dot(fz.col(dim)));
    out.log_params(1 + dim) = inv_l2 * (cross_term + ind_term);
  }

  // d/dlog sn2.
  const double tr_ainv_c = (ainv.cwiseProduct(cmat)).sum();
  const double tr_qhat_inv = inv_sn2 * n - inv_sn2 * inv_sn2 * tr_ainv_c;
  const double dl_dsn2 = 0.5 * (alpha.squaredNorm() - tr_qhat_inv) +
                         0.5 * (parts.trace_kn - trace_qn) * inv_sn2 * inv_sn2;
  out.log_params(d + 1) = sn2 * dl_dsn2;

  // d/dZu.
  out.inducing = ex + 2.0 * fz;
  out.inducing.noalias() -= (e_row + 2.0 * f_row).asDiagonal() * inducing;
  out.inducing.array().rowwise() /=
      kernel.length_scales.transpose().array().square();

  return out;
}

Eigen::MatrixXd kmeans_centroids(const Eigen::MatrixXd& x, int k, uint64_t seed,
                                 int max_iters) {
  const Eigen::Index n = x.rows();
  if (k <= 0 || k > n) {
    throw std::invalid_argument("kmeans_centroids: need 0 < k <= N");
  }
  Rng rng = Rng(seed).split("kmeans");

  auto random_subset = [&](Rng& r) {
    std::vector<Eigen::Index> idx(n);
    for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k; ++i) {
      const Eigen::Index j = r.uniform_int(i, n - 1);
      std::swap(idx[i], idx[j]);
    }
    Eigen::MatrixXd c(k, x.cols());
    for (int i = 0; i < k; ++i) c.row(i) = x.row(idx[i]);
    return c;
  };

  Eigen::MatrixXd centroids = random_subset(rng);
  std::vector<int> assign(n, -1);
  bool converged = false;
  for (int iter = 0; iter < max_iters && !converged; ++iter) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (x.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dist = (x.row(i) - centroids.row(c)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        converged = false;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += x.row(i);
      counts(assign[i]) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0.0) {
        centroids.row(c) = sums.row(c) / counts(c);
      } else {
        centroids.row(c) = x.row(rng.uniform_int(0, n - 1));
        converged = false;
      }
    }
  }
  if (!converged) return random_subset(rng);
  return centroids;
}

SparsePosterior train_svgp(const Dataset& data, int channel, int m_inducing,
                           const KernelParams& init, const SvgpOptions& opts) {
  data.validate();
  init.validate();
  if (m_inducing > data.size()) {
    throw std::invalid_argument("train_svgp: M must not exceed N");
  }
  if (opts.rounds < 1 || opts.hyper_steps < 0 || opts.inducing_steps < 0 ||
      (opts.hyper_steps == 0 && opts.inducing_steps == 0)) {
    throw std::invalid_argument("train_svgp: empty optimization schedule");
  }
  if (channel < 0 || channel >= data.channels()) {
    throw std::invalid_argument("train_svgp: channel out of range");
  }
  const Eigen::MatrixXd& x = data.inputs;
  const Eigen::VectorXd y = data.outputs.col(channel);
  const Eigen::Index d = x.cols();

  Eigen::MatrixXd inducing =
      kmeans_centroids(x, m_inducing, opts.seed, opts.kmeans_max_iters);
  KernelParams params = init;

  const auto report = [&](double bound) {
    if (opts.progress) opts.progress(bound);
  };

  OptimOptions hyper_opts;
  hyper_opts.max_iters = opts.hyper_steps;
  OptimOptions ind_opts;
  ind_opts.max_iters = opts.inducing_steps;

  for (int round = 0; round < opts.rounds; ++round) {
    if (opts.hyper_steps > 0) {
      const auto hyper_obj = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
        const KernelParams p = KernelParams::from_log_vector(v);
        try {
          const ElboGradient eg =
              elbo_gradient(x, y, inducing, p, default_jitter(p));
          g = -eg.log_params;
          return -eg.value;
        } catch (const NumericalError&) {
          g.setZero(v.size());
          return std::numeric_limits<double>::infinity();
        }
      };
      const OptimResult res =
          lbfgs_minimize(hyper_obj, params.to_log_vector(), hyper_opts);
      if (std::isfinite(res.value)) {
        params = KernelParams::from_log_vector(res.x);
        report(-res.value);
      }
    }
    if (opts.inducing_steps > 0) {
      const auto ind_obj = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
        const Eigen::MatrixXd z =
            Eigen::Map<const Eigen::MatrixXd>(v.data(), m_inducing, d);
        try {
          const ElboGradient eg =
              elbo_gradient(x, y, z, params, default_jitter(params));
          g = -Eigen::Map<const Eigen::VectorXd>(eg.inducing.data(),
                                                 eg.inducing.size());
          return -eg.value;
        } catch (const NumericalError&) {
          g.setZero(v.size());
          return std::numeric_limits<double>::infinity();
        }
      };
      const Eigen::VectorXd z0 =
          Eigen::Map<const Eigen::VectorXd>(inducing.data(), inducing.size());
      const OptimResult res = lbfgs_minimize(ind_obj, z0, ind_opts);
      if (std::isfinite(res.value)) {
        inducing = Eigen::Map<const Eigen::MatrixXd>(res.x.data(), m_inducing, d);
        report(-res.value);
      }
    }
  }

  return optimal_variational(x, y, inducing, params, default_jitter(params));
}

std::pair<double, double> predict_sparse(const SparsePosterior& post,
                                         const Eigen::VectorXd& z) {
  if (z.size() != post.inducing_inputs.cols()) {
    throw std::invalid_argument("predict_sparse: dimension mismatch");
  }
  const Eigen::VectorXd k_star =
      gram_vector(post.kernel, post.inducing_inputs, z);
  JitteredChol chol(gram(post.kernel, post.inducing_inputs, post.inducing_inputs),
                    0.0);
  const Eigen::VectorXd u = chol.solve(k_star);  // K_M^{-1} K_M*
  const double mean = u.dot(post.mean);
  double var = post.kernel.signal_variance - u.dot(k_star) +
               u.dot(post.covariance * u);
  if (var < 0.0) var = 0.0;
  return {mean, var};
}

double kl_to_prior(const SparsePosterior& post) {
  post.validate();
  const Eigen::Index m = post.size();
  JitteredChol chol_k(gram(post.kernel, post.inducing_inputs, post.inducing_inputs),
                      0.0);
  JitteredChol chol_s(post.covariance, 0.0);
  const Eigen::MatrixXd kinv_s = chol_k.solve(post.covariance);
  const Eigen::VectorXd w = chol_k.whiten(post.mean);
  const double kl = 0.5 * (chol_k.log_det() - chol_s.log_det() -
                           static_cast<double>(m) + kinv_s.trace() +
                           w.squaredNorm());
  return kl;
}

}  // namespace dgpc
