#include "dual_gp.hpp"

#include <cmath>
#include <fstream>

#include "rng.hpp"

namespace dgpc {

namespace {

void posterior_cache(const SparsePosterior& post, Eigen::VectorXd& beta,
                     Eigen::MatrixXd& b) {
  JitteredChol chol(gram(post.kernel, post.inducing_inputs, post.inducing_inputs),
                    default_jitter(post.kernel));
  beta = chol.solve(post.mean);
  const Eigen::Index m = post.size();
  const Eigen::MatrixXd kinv = chol.solve(Eigen::MatrixXd::Identity(m, m));
  b = kinv - kinv * post.covariance * kinv;
  symmetrize(b);
}

}  // namespace

void DualGpChannel::refresh_long_cache() {
  if (long_term) {
    posterior_cache(*long_term, beta_l, b_l);
  } else {
    beta_l.resize(0);
    b_l.resize(0, 0);
  }
}

void DualGpChannel::refresh_short_cache() {
  if (short_active) {
    posterior_cache(short_term.posterior, beta_s, b_s);
  } else {
    beta_s.resize(0);
    b_s.resize(0, 0);
  }
}

SparsePosterior fit_short_term_batch(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y,
                                     const Eigen::MatrixXd& inducing_s,
                                     const KernelParams& nu,
                                     const SparsePosterior& long_term) {
  nu.validate();
  if (inducing_s.rows() < 1) {
    throw std::invalid_argument("fit_short_term_batch: need M_s >= 1");
  }
  const Eigen::Index ms = inducing_s.rows();
  const double sn2 = nu.noise_variance;
  const double inv_sn2 = 1.0 / sn2;

  // Qt^{-1} acting on an N-column matrix, through the long-term Nystrom
  // factorization (Woodbury; never forms an N x N matrix).
  const KernelParams& kl = long_term.kernel;
  JitteredChol chol_km(gram(kl, long_term.inducing_inputs, long_term.inducing_inputs),
                       default_jitter(kl));
  const Eigen::MatrixXd kmn = gram(kl, long_term.inducing_inputs, x);
  const Eigen::MatrixXd aw = chol_km.whiten(kmn);
  const Eigen::Index ml = long_term.size();
  JitteredChol chol_b(
      Eigen::MatrixXd(Eigen::MatrixXd::Identity(ml, ml) +
                      inv_sn2 * aw * aw.transpose()),
      0.0);
  const auto qt_solve = [&](const Eigen::MatrixXd& rhs) {
    return (inv_sn2 *
            (rhs - inv_sn2 * aw.transpose() * chol_b.solve(Eigen::MatrixXd(aw * rhs))))
        .eval();
  };

  const Eigen::MatrixXd vmn = gram(nu, inducing_s, x);
  const Eigen::MatrixXd vm = gram(nu, inducing_s, inducing_s);
  JitteredChol chol_vm(vm, default_jitter(nu));

  const Eigen::MatrixXd qt_vnm = qt_solve(vmn.transpose());  // N x Ms
  const Eigen::MatrixXd w = vmn * qt_vnm;                    // Ms x Ms
  const Eigen::VectorXd r = vmn * qt_solve(y);

  // m = L_v (I + L_v^{-1} W L_v^{-T})^{-1} L_v^{-1} r.
  const Eigen::MatrixXd lw =
      chol_vm.whiten(Eigen::MatrixXd(chol_vm.whiten(w).transpose()));
  JitteredChol chol_inner(
      Eigen::MatrixXd(Eigen::MatrixXd::Identity(ms, ms) + lw), 0.0);
  const Eigen::MatrixXd lv = chol_vm.matrix_l();

  SparsePosterior post;
  post.kernel = nu;
  post.inducing_inputs = inducing_s;
  post.mean = lv * chol_inner.solve(chol_vm.whiten(r));

  // S = L_v (I + sn^{-2} Awv Awv')^{-1} L_v'.
  const Eigen::MatrixXd awv = chol_vm.whiten(vmn);
  JitteredChol chol_bs(
      Eigen::MatrixXd(Eigen::MatrixXd::Identity(ms, ms) +
                      inv_sn2 * awv * awv.transpose()),
      0.0);
  post.covariance =
      lv * chol_bs.solve(Eigen::MatrixXd(lv.transpose()));
  symmetrize(post.covariance);
  return post;
}

double dgp_elbo(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                const SparsePosterior& long_term,
                const SparsePosterior& short_term) {
  const Eigen::Index n = x.rows();
  const double sn2 = short_term.kernel.noise_variance;
  const double inv_sn2 = 1.0 / sn2;

  // Long-term Nystrom pieces.
  const KernelParams& kl = long_term.kernel;
  JitteredChol chol_km(gram(kl, long_term.inducing_inputs, long_term.inducing_inputs),
                       default_jitter(kl));
  const Eigen::MatrixXd kmn = gram(kl, long_term.inducing_inputs, x);
  const Eigen::MatrixXd aw = chol_km.whiten(kmn);
  const Eigen::Index ml = long_term.size();
  JitteredChol chol_b(
      Eigen::MatrixXd(Eigen::MatrixXd::Identity(ml, ml) +
                      inv_sn2 * aw * aw.transpose()),
      0.0);

  // Short-term marginal mean m_s = V_NM V_M^{-1} m_us and the trace of
  // S_s = V_N + V_NM V_M^{-1} (S_us - V_M) V_M^{-1} V_MN.
  const KernelParams& nu = short_term.kernel;
  JitteredChol chol_vm(gram(nu, short_term.inducing_inputs, short_term.inducing_inputs),
                       default_jitter(nu));
  const Eigen::MatrixXd vmn = gram(nu, short_term.inducing_inputs, x);
  const Eigen::MatrixXd phi_n = chol_vm.solve(vmn).transpose();  // N x Ms
  const Eigen::VectorXd m_s = phi_n * short_term.mean;
  const double trace_o = (phi_n.transpose().cwiseProduct(vmn)).sum();
  const double trace_phi_s =
      (phi_n * short_term.covariance).cwiseProduct(phi_n).sum();
  const double trace_ss =
      n * nu.signal_variance - trace_o + trace_phi_s;

  // log N(Y | m_s, Q_N + sn2 I).
  const Eigen::VectorXd e = y - m_s;
  const Eigen::VectorXd awe = aw * e;
  const Eigen::VectorXd ce = chol_b.whiten(awe);
  const double log_det = chol_b.log_det() + n * std::log(sn2);
  const double quad = (e.squaredNorm() - ce.squaredNorm() * inv_sn2) * inv_sn2;
  const double lml = -0.5 * (n * std::log(2.0 * M_PI) + log_det + quad);

  const double trace_kn_qn =
      n * kl.signal_variance - aw.squaredNorm();

  return lml - 0.5 * inv_sn2 * trace_kn_qn - 0.5 * inv_sn2 * trace_ss -
         kl_to_prior(short_term);
}

std::pair<double, double> predict_dgp(const DualGpChannel& ch,
                                      const Eigen::VectorXd& z) {
  double mean = 0.0;
  double var = 0.0;
  if (ch.long_term) {
    const Eigen::VectorXd k =
        gram_vector(ch.long_term->kernel, ch.long_term->inducing_inputs, z);
    mean += k.dot(ch.beta_l);
    var += ch.long_term->kernel.signal_variance - k.dot(ch.b_l * k);
  }
  if (ch.short_active) {
    const SparsePosterior& sp = ch.short_term.posterior;
    const Eigen::VectorXd v = gram_vector(sp.kernel, sp.inducing_inputs, z);
    mean += v.dot(ch.beta_s);
    var += sp.kernel.signal_variance - v.dot(ch.b_s * v);
  }
  if (var < 0.0) var = 0.0;
  return {mean, var};
}

void observe(DualGpModel& model, const Eigen::VectorXd& z,
             const Eigen::VectorXd& x, const Eigen::VectorXd& u,
             const Eigen::VectorXd& x_next, const Eigen::MatrixXd& a,
             const Eigen::MatrixXd& b) {
  if (z.size() != model.input_dim ||
      x_next.size() != model.n_channels()) {
    throw std::invalid_argument("observe: dimension mismatch");
  }
  const Eigen::VectorXd y = x_next - a * x - b * u;
  for (Eigen::Index i = 0; i < model.n_channels(); ++i) {
    DualGpChannel& ch = model.channels[i];
    if (!ch.short_active) continue;
    double target = y(i);
    if (model.residual_online && ch.long_term) {
      const Eigen::VectorXd k =
          gram_vector(ch.long_term->kernel, ch.long_term->inducing_inputs, z);
      target -= k.dot(ch.beta_l);
    }
    recursive_update(ch.short_term, z, target);
    ch.refresh_short_cache();
  }
}

DualGpModel consolidate(const DualGpModel& model, const Dataset& accumulated,
                        const ConsolidateOptions& opts) {
  if (accumulated.size() == 0) {
    throw std::invalid_argument("consolidate: empty mission log");
  }
  if (accumulated.channels() != model.n_channels()) {
    throw std::invalid_argument("consolidate: channel count mismatch");
  }
  const Dataset data = accumulated.subsample(opts.max_points, opts.svgp.seed);

  DualGpModel out = model;
  for (Eigen::Index i = 0; i < model.n_channels(); ++i) {
    const DualGpChannel& ch = model.channels[i];
    KernelParams init;
    if (ch.long_term) {
      init = ch.long_term->kernel;
    } else if (ch.short_active) {
      init = ch.short_term.posterior.kernel;
    } else {
      continue;  // nothing to retrain for a zero-GP channel
    }
    SvgpOptions svgp_opts = opts.svgp;
    svgp_opts.seed = Rng(opts.svgp.seed).split(static_cast<uint64_t>(i)).next_u64();
    const SparsePosterior trained =
        train_svgp(data, static_cast<int>(i), opts.m_inducing, init, svgp_opts);

    DualGpChannel& nc = out.channels[i];
    if (ch.long_term) {
      nc.long_term = trained;
      nc.refresh_long_cache();
    }
    if (ch.short_active) {
      const bool use_offline_mean = !ch.long_term;  // OGP folds memory into m0
      nc.short_term = init_online(trained, model.beta_init, use_offline_mean,
                                  model.forgetting);
      nc.refresh_short_cache();
    }
  }
  return out;
}

nlohmann::json dual_gp_to_json(const DualGpModel& model) {
  nlohmann::json channels = nlohmann::json::array();
  for (const DualGpChannel& ch : model.channels) {
    nlohmann::json c;
    c["long_term"] = ch.long_term ? nlohmann::json(*ch.long_term)
                                  : nlohmann::json(nullptr);
    if (ch.short_active) {
      c["short_term_posterior"] = ch.short_term.posterior;
      c["short_step_count"] = ch.short_term.step_count;
    } else {
      c["short_term_posterior"] = nullptr;
    }
    c["forgetting"] = model.forgetting;
    c["beta"] = model.beta_init;
    channels.push_back(std::move(c));
  }
  return nlohmann::json{{"channels", channels},
                        {"input_dim", model.input_dim},
                        {"residual_online", model.residual_online}};
}

DualGpModel dual_gp_from_json(const nlohmann::json& j) {
  DualGpModel model;
  model.input_dim = j.at("input_dim").get<int>();
  model.residual_online = j.value("residual_online", true);
  for (const auto& c : j.at("channels")) {
    DualGpChannel ch;
    model.forgetting = c.at("forgetting").get<double>();
    model.beta_init = c.at("beta").get<double>();
    if (!c.at("long_term").is_null()) {
      ch.long_term = c.at("long_term").get<SparsePosterior>();
    }
    if (!c.at("short_term_posterior").is_null()) {
      ch.short_active = true;
      const SparsePosterior sp = c.at("short_term_posterior").get<SparsePosterior>();
      // Rebuild the online state around the stored posterior.
      ch.short_term = init_online(sp, model.beta_init, false, model.forgetting);
      ch.short_term.posterior = sp;
      ch.short_term.step_count = c.value("short_step_count", 0L);
    }
    ch.refresh_long_cache();
    ch.refresh_short_cache();
    model.channels.push_back(std::move(ch));
  }
  return model;
}

void save_dual_gp(const DualGpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dual_gp: cannot open " + path);
  out << dual_gp_to_json(model).dump(2) << "\n";
}

DualGpModel load_dual_gp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dual_gp: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return dual_gp_from_json(j);
}

}  // namespace dgpc
