#include "experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dgpc {

namespace fs = std::filesystem;

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::baseline: return "baseline";
    case ControllerKind::lgp: return "lgp";
    case ControllerKind::ogp: return "ogp";
    case ControllerKind::dgp: return "dgp";
  }
  return "unknown";
}

ControllerKind controller_from_string(const std::string& s) {
  if (s == "baseline") return ControllerKind::baseline;
  if (s == "lgp") return ControllerKind::lgp;
  if (s == "ogp") return ControllerKind::ogp;
  if (s == "dgp") return ControllerKind::dgp;
  throw std::invalid_argument("unknown controller kind: " + s);
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void to_json_wind(nlohmann::json& j, const WindModel& w) {
  j = nlohmann::json{
      {"phase1", std::vector<double>{w.phase1(0), w.phase1(1), w.phase1(2)}},
      {"switch_time", std::isfinite(w.switch_time) ? w.switch_time : -1.0},
      {"time_varying", w.time_varying}};
}

WindModel wind_from_json(const nlohmann::json& j) {
  WindModel w;
  if (j.contains("phase1")) {
    const auto v = j.at("phase1").get<std::vector<double>>();
    w.phase1 = Eigen::Vector3d(v.at(0), v.at(1), v.at(2));
  }
  const double sw = j.value("switch_time", -1.0);
  w.switch_time = sw < 0.0 ? std::numeric_limits<double>::infinity() : sw;
  w.time_varying = j.value("time_varying", false);
  return w;
}

uint64_t mission_seed(uint64_t seed, int iteration) {
  return Rng(seed).split("mission").split(static_cast<uint64_t>(iteration)).next_u64();
}

}  // namespace

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json wind;
  to_json_wind(wind, c.wind);
  std::vector<std::string> cmp;
  for (const auto k : c.compare_controllers_list) cmp.push_back(to_string(k));
  j = nlohmann::json{
      {"name", c.name},
      {"controller", to_string(c.controller)},
      {"iterations", c.iterations},
      {"seed", c.seed},
      {"scenario",
       {{"wind", wind},
        {"duration", c.mission_duration},
        {"time_step", c.params.time_step},
        {"noise_std",
         std::vector<double>(c.noise_std.begin(), c.noise_std.end())}}},
      {"collect", {{"duration", c.collect_duration}, {"rate", c.collect_rate}}},
      {"gp",
       {{"m_inducing", c.m_inducing},
        {"forgetting", c.forgetting},
        {"beta", c.beta},
        {"residual_online", c.residual_online},
        {"svgp_rounds", c.svgp_rounds},
        {"svgp_hyper_steps", c.svgp_hyper_steps},
        {"svgp_inducing_steps", c.svgp_inducing_steps}}},
      {"mpc",
       {{"gamma", c.gamma},
        {"max_iters", c.mpc_max_iters},
        {"penalty_weight", c.penalty_weight}}},
      {"compare",
       {{"controllers", cmp}, {"dgp_iterations", c.compare_dgp_iterations}}}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.name = j.value("name", c.name);
  if (j.contains("controller")) {
    c.controller = controller_from_string(j.at("controller").get<std::string>());
  }
  c.iterations = j.value("iterations", c.iterations);
  c.seed = j.value("seed", c.seed);
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    if (s.contains("wind")) c.wind = wind_from_json(s.at("wind"));
    c.mission_duration = s.value("duration", c.mission_duration);
    c.params.time_step = s.value("time_step", c.params.time_step);
    if (s.contains("noise_std")) {
      const auto v = s.at("noise_std").get<std::vector<double>>();
      c.noise_std = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
    }
  }
  if (j.contains("collect")) {
    c.collect_duration = j.at("collect").value("duration", c.collect_duration);
    c.collect_rate = j.at("collect").value("rate", c.collect_rate);
  }
  if (j.contains("gp")) {
    const auto& g = j.at("gp");
    c.m_inducing = g.value("m_inducing", c.m_inducing);
    c.forgetting = g.value("forgetting", c.forgetting);
    c.beta = g.value("beta", c.beta);
    c.residual_online = g.value("residual_online", c.residual_online);
    c.svgp_rounds = g.value("svgp_rounds", c.svgp_rounds);
    c.svgp_hyper_steps = g.value("svgp_hyper_steps", c.svgp_hyper_steps);
    c.svgp_inducing_steps = g.value("svgp_inducing_steps", c.svgp_inducing_steps);
  }
  if (j.contains("mpc")) {
    const auto& m = j.at("mpc");
    c.gamma = m.value("gamma", c.gamma);
    c.mpc_max_iters = m.value("max_iters", c.mpc_max_iters);
    c.penalty_weight = m.value("penalty_weight", c.penalty_weight);
  }
  if (j.contains("compare")) {
    const auto& cm = j.at("compare");
    if (cm.contains("controllers")) {
      c.compare_controllers_list.clear();
      for (const auto& s : cm.at("controllers")) {
        c.compare_controllers_list.push_back(
            controller_from_string(s.get<std::string>()));
      }
    }
    c.compare_dgp_iterations =
        cm.value("dgp_iterations", c.compare_dgp_iterations);
  }
}

Dataset collect_dataset(const ExperimentConfig& config) {
  CollectOptions opts;
  opts.duration = config.collect_duration;
  opts.rate = config.collect_rate;
  opts.seed = Rng(config.seed).split("collect").next_u64();
  opts.noise_std = config.noise_std;
  opts.params = config.params;
  opts.gains = config.gains;
  return collect_training_data(config.wind, opts);
}

namespace {

KernelParams data_driven_init(const Dataset& data, int channel) {
  const Eigen::VectorXd y = data.outputs.col(channel);
  const double var_y =
      std::max((y.array() - y.mean()).square().mean(), 1e-8);
  KernelParams init;
  init.signal_variance = var_y;
  init.noise_variance = std::max(0.25 * var_y, 1e-10);
  init.length_scales.resize(data.input_dim());
  for (Eigen::Index d = 0; d < data.input_dim(); ++d) {
    const Eigen::VectorXd col = data.inputs.col(d);
    const double sd = std::sqrt((col.array() - col.mean()).square().mean());
    init.length_scales(d) = std::max(sd, 1e-3);
  }
  return init;
}

SvgpOptions svgp_options_from(const ExperimentConfig& config, int channel) {
  SvgpOptions opts;
  opts.rounds = config.svgp_rounds;
  opts.hyper_steps = config.svgp_hyper_steps;
  opts.inducing_steps = config.svgp_inducing_steps;
  opts.seed = Rng(config.seed)
                  .split("train")
                  .split(static_cast<uint64_t>(channel))
                  .next_u64();
  return opts;
}

}  // namespace

LongTermMemory train_long_term(const Dataset& data,
                               const ExperimentConfig& config) {
  LongTermMemory memory;
  for (Eigen::Index c = 0; c < data.channels(); ++c) {
    memory.channels.push_back(train_svgp(
        data, static_cast<int>(c), config.m_inducing,
        data_driven_init(data, static_cast<int>(c)),
        svgp_options_from(config, static_cast<int>(c))));
  }
  return memory;
}

DualGpModel build_controller_model(ControllerKind kind,
                                   const LongTermMemory* memory,
                                   const ExperimentConfig& config) {
  DualGpModel model;
  model.input_dim = 7;
  model.forgetting = config.forgetting;
  model.beta_init = config.beta;
  model.residual_online = config.residual_online;

  const Eigen::Index n = memory ? memory->channels.size() : 6;
  model.channels.resize(n);
  if (kind == ControllerKind::baseline) return model;
  if (!memory) {
    throw std::invalid_argument(
        "build_controller_model: trained memory required for " +
        to_string(kind));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    DualGpChannel& ch = model.channels[i];
    const SparsePosterior& trained = memory->channels[i];
    switch (kind) {
      case ControllerKind::lgp:
        ch.long_term = trained;
        break;
      case ControllerKind::ogp:
        ch.short_active = true;
        ch.short_term =
            init_online(trained, config.beta, true, config.forgetting);
        break;
      case ControllerKind::dgp:
        ch.long_term = trained;
        ch.short_active = true;
        ch.short_term =
            init_online(trained, config.beta, false, config.forgetting);
        break;
      case ControllerKind::baseline:
        break;
    }
    ch.refresh_long_cache();
    ch.refresh_short_cache();
  }
  if (kind == ControllerKind::ogp) model.residual_online = false;
  return model;
}

namespace {

MpcProblem mission_problem(const ExperimentConfig& config,
                           const DualGpModel& model) {
  MpcProblem prob = default_quadrotor_mpc(config.params);
  prob.gamma = config.gamma;
  prob.max_iters = config.mpc_max_iters;
  prob.penalty_weight = config.penalty_weight;
  prob.noise_cov = Eigen::MatrixXd::Zero(6, 6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    const DualGpChannel& ch = model.channels[i];
    if (ch.long_term) {
      prob.noise_cov(i, i) = ch.long_term->kernel.noise_variance;
    } else if (ch.short_active) {
      prob.noise_cov(i, i) = ch.short_term.posterior.kernel.noise_variance;
    } else {
      prob.noise_cov(i, i) = config.noise_std(i) * config.noise_std(i);
    }
  }
  return prob;
}

IterationMetrics run_mission(DualGpModel& model, const ExperimentConfig& config,
                             int iteration) {
  const double total = config.mission_duration;
  const TrajectoryFn traj = [total](double t) {
    return helix_reference(t, total);
  };
  QuadrotorPlant plant(initial_state_on(traj, config.params), config.params,
                       config.wind, config.gains, config.noise_std,
                       mission_seed(config.seed, iteration));
  const MpcProblem prob = mission_problem(config, model);
  const int steps =
      static_cast<int>(std::llround(total / config.params.time_step));

  IterationMetrics metrics;
  metrics.iteration = iteration;
  metrics.mission = run_closed_loop(
      plant, model, prob, reference_provider_for(traj, config.params), steps);
  if (metrics.mission.aborted) {
    throw SimulationError("mission aborted: " + metrics.mission.abort_reason);
  }

  const MissionResult& m = metrics.mission;
  Eigen::Vector3d sq_sum = Eigen::Vector3d::Zero();
  for (int k = 0; k < steps; ++k) {
    const Eigen::Vector3d err =
        m.states.row(k).head<3>() - m.x_refs.row(k).head<3>();
    sq_sum += err.cwiseProduct(err);
  }
  metrics.mse_xyz = sq_sum / static_cast<double>(steps);

  double e1 = 0.0, e2 = 0.0, s1 = 0.0, s2 = 0.0;
  int n1 = 0, n2 = 0;
  for (int k = 0; k < steps; ++k) {
    const double abs_err = m.estimation_error.row(k).tail<3>().mean();
    const double sq_err =
        m.estimation_error.row(k).tail<3>().array().square().mean();
    if (m.times[k] < config.wind.switch_time) {
      e1 += abs_err;
      s1 += sq_err;
      ++n1;
    } else {
      e2 += abs_err;
      s2 += sq_err;
      ++n2;
    }
  }
  metrics.est_err_phase1 = n1 > 0 ? e1 / n1 : 0.0;
  metrics.est_err_phase2 = n2 > 0 ? e2 / n2 : 0.0;
  metrics.est_mse_phase1 = n1 > 0 ? s1 / n1 : 0.0;
  metrics.est_mse_phase2 = n2 > 0 ? s2 / n2 : 0.0;

  std::vector<double> ms = m.solve_ms;
  std::sort(ms.begin(), ms.end());
  metrics.median_solve_ms = ms.empty() ? 0.0 : ms[ms.size() / 2];
  metrics.max_solve_ms = ms.empty() ? 0.0 : ms.back();
  return metrics;
}

nlohmann::json memory_to_json(const LongTermMemory& memory) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : memory.channels) arr.push_back(p);
  return nlohmann::json{{"channels", arr}};
}

LongTermMemory memory_from_json(const nlohmann::json& j) {
  LongTermMemory memory;
  for (const auto& p : j.at("channels")) {
    memory.channels.push_back(p.get<SparsePosterior>());
  }
  return memory;
}

}  // namespace

std::string metrics_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "controller,iteration,mse_x,mse_y,mse_z,est_err_phase1,est_err_phase2,"
         "est_mse_phase1,est_mse_phase2\n";
  for (const auto& it : report.iterations) {
    out << to_string(report.controller) << "," << it.iteration << ","
        << fmt(it.mse_xyz(0)) << "," << fmt(it.mse_xyz(1)) << ","
        << fmt(it.mse_xyz(2)) << "," << fmt(it.est_err_phase1) << ","
        << fmt(it.est_err_phase2) << "," << fmt(it.est_mse_phase1) << ","
        << fmt(it.est_mse_phase2) << "\n";
  }
  return out.str();
}

void write_mission_logs(const MetricsReport& report,
                        const std::filesystem::path& run_dir) {
  fs::create_directories(run_dir / "logs");
  for (const auto& it : report.iterations) {
    const MissionResult& m = it.mission;
    const int steps = static_cast<int>(m.inputs.rows());
    {
      std::ofstream out(run_dir / "logs" /
                        ("mission_" + std::to_string(it.iteration) + ".csv"));
      out << "t";
      for (int i = 0; i < m.states.cols(); ++i) out << ",x" << i;
      for (int i = 0; i < m.inputs.cols(); ++i) out << ",u" << i;
      out << ",cost,solve_ms,constraint_margin\n";
      for (int k = 0; k < steps; ++k) {
        out << fmt(m.times[k]);
        for (int i = 0; i < m.states.cols(); ++i) out << "," << fmt(m.states(k, i));
        for (int i = 0; i < m.inputs.cols(); ++i) out << "," << fmt(m.inputs(k, i));
        out << "," << fmt(m.costs[k]) << "," << fmt(m.solve_ms[k]) << ","
            << fmt(m.margins[k]) << "\n";
      }
    }
    {
      std::ofstream out(run_dir / "logs" /
                        ("estimation_" + std::to_string(it.iteration) + ".csv"));
      out << "t";
      for (int i = 0; i < m.estimation_error.cols(); ++i) out << ",e" << i;
      out << "\n";
      for (int k = 0; k < steps; ++k) {
        out << fmt(m.times[k]);
        for (int i = 0; i < m.estimation_error.cols(); ++i) {
          out << "," << fmt(m.estimation_error(k, i));
        }
        out << "\n";
      }
    }
    {
      std::ofstream out(run_dir / "logs" /
                        ("reference_" + std::to_string(it.iteration) + ".csv"));
      out << "t";
      for (int i = 0; i < m.x_refs.cols(); ++i) out << ",r" << i;
      out << "\n";
      for (int k = 0; k < steps; ++k) {
        out << fmt(m.times[k]);
        for (int i = 0; i < m.x_refs.cols(); ++i) out << "," << fmt(m.x_refs(k, i));
        out << "\n";
      }
    }
    {
      // All steps+1 state samples, including the terminal one.
      std::ofstream out(run_dir / "logs" /
                        ("states_" + std::to_string(it.iteration) + ".csv"));
      out << "t";
      for (int i = 0; i < m.states.cols(); ++i) out << ",x" << i;
      out << "\n";
      const double dt = steps >= 2 ? m.times[1] - m.times[0] : 0.0;
      for (int k = 0; k <= steps; ++k) {
        const double t = k < steps ? m.times[k] : m.times[steps - 1] + dt;
        out << fmt(t);
        for (int i = 0; i < m.states.cols(); ++i) out << "," << fmt(m.states(k, i));
        out << "\n";
      }
    }
  }
}

MetricsReport run_experiment(const ExperimentConfig& config,
                             const std::filesystem::path& out_dir,
                             const Dataset* shared_data,
                             const LongTermMemory* shared_memory) {
  const fs::path run_dir = out_dir / config.name;
  fs::create_directories(run_dir / "checkpoints");
  fs::create_directories(run_dir / "logs");
  {
    std::ofstream out(run_dir / "config.json");
    out << nlohmann::json(config).dump(2) << "\n";
  }

  Dataset data;
  if (shared_data) {
    data = *shared_data;
  } else {
    data = collect_dataset(config);
  }
  data.save_csv((run_dir / "dataset.csv").string());

  LongTermMemory memory;
  const bool needs_memory = config.controller != ControllerKind::baseline;
  if (needs_memory) {
    if (shared_memory) {
      memory = *shared_memory;
    } else {
      memory = train_long_term(data, config);
    }
    std::ofstream out(run_dir / "checkpoints" / "long_term.json");
    out << memory_to_json(memory).dump(2) << "\n";
  }

  DualGpModel model = build_controller_model(
      config.controller, needs_memory ? &memory : nullptr, config);

  MetricsReport report;
  report.controller = config.controller;

  Dataset accumulated = data;
  for (int iter = 0; iter < config.iterations; ++iter) {
    if (iter > 0 && config.controller == ControllerKind::ogp) {
      // Fresh start from the offline posterior; nothing persists.
      model = build_controller_model(config.controller, &memory, config);
    }
    report.iterations.push_back(run_mission(model, config, iter));
    accumulated.append(report.iterations.back().mission.log);
    save_dual_gp(model, (run_dir / "checkpoints" /
                         ("model_iter" + std::to_string(iter) + ".json"))
                            .string());
    if (config.controller == ControllerKind::dgp &&
        iter + 1 < config.iterations) {
      ConsolidateOptions copts;
      copts.m_inducing = config.m_inducing;
      copts.svgp.rounds = config.svgp_rounds;
      copts.svgp.hyper_steps = config.svgp_hyper_steps;
      copts.svgp.inducing_steps = config.svgp_inducing_steps;
      copts.svgp.seed = Rng(config.seed)
                            .split("consolidate")
                            .split(static_cast<uint64_t>(iter))
                            .next_u64();
      model = consolidate(model, accumulated, copts);
    }
  }

  {
    std::ofstream out(run_dir / "metrics.csv");
    out << metrics_csv(report);
  }
  {
    std::ofstream out(run_dir / "timing.csv");
    out << "controller,iteration,median_solve_ms,max_solve_ms\n";
    for (const auto& it : report.iterations) {
      out << to_string(report.controller) << "," << it.iteration << ","
          << fmt(it.median_solve_ms) << "," << fmt(it.max_solve_ms) << "\n";
    }
  }
  write_mission_logs(report, run_dir);
  return report;
}

ComparisonResult compare_controllers(const ExperimentConfig& base,
                                     const std::filesystem::path& out_dir) {
  if (base.compare_controllers_list.size() < 2) {
    throw std::invalid_argument("compare_controllers: need at least 2 configs");
  }
  fs::create_directories(out_dir);

  const Dataset data = collect_dataset(base);
  const LongTermMemory memory = train_long_term(data, base);

  ComparisonResult result;
  std::map<ControllerKind, MetricsReport> by_kind;
  for (const ControllerKind kind : base.compare_controllers_list) {
    ExperimentConfig cfg = base;
    cfg.controller = kind;
    cfg.name = to_string(kind);
    cfg.iterations = (kind == ControllerKind::dgp ||
                      kind == ControllerKind::ogp)
                         ? base.compare_dgp_iterations
                         : 1;
    const MetricsReport report =
        run_experiment(cfg, out_dir, &data, &memory);
    by_kind[kind] = report;
    result.reports[to_string(kind)] = report;
  }

  const auto add_row = [&](const std::string& label, const IterationMetrics& m) {
    result.rows.push_back({label, m.mse_xyz});
  };
  if (by_kind.count(ControllerKind::baseline)) {
    add_row("baseline", by_kind[ControllerKind::baseline].iterations.front());
  }
  if (by_kind.count(ControllerKind::lgp)) {
    add_row("lgp", by_kind[ControllerKind::lgp].iterations.front());
  }
  if (by_kind.count(ControllerKind::ogp)) {
    add_row("ogp", by_kind[ControllerKind::ogp].iterations.front());
  }
  if (by_kind.count(ControllerKind::dgp)) {
    const auto& iters = by_kind[ControllerKind::dgp].iterations;
    for (size_t i = 0; i < iters.size(); ++i) {
      add_row("dgp_iter" + std::to_string(i + 1), iters[i]);
    }
  }

  // Strict per-axis ordering baseline > lgp > ogp > dgp(last iteration).
  const auto mse_of = [&](ControllerKind kind, bool last) -> Eigen::Vector3d {
    const auto& iters = by_kind[kind].iterations;
    return last ? iters.back().mse_xyz : iters.front().mse_xyz;
  };
  if (by_kind.count(ControllerKind::baseline) &&
      by_kind.count(ControllerKind::lgp) &&
      by_kind.count(ControllerKind::ogp) &&
      by_kind.count(ControllerKind::dgp)) {
    const Eigen::Vector3d b = mse_of(ControllerKind::baseline, false);
    const Eigen::Vector3d l = mse_of(ControllerKind::lgp, false);
    const Eigen::Vector3d o = mse_of(ControllerKind::ogp, false);
    const Eigen::Vector3d d = mse_of(ControllerKind::dgp, true);
    result.x_ordering_ok = b(0) > l(0) && l(0) > o(0) && o(0) > d(0);
    result.y_ordering_ok = b(1) > l(1) && l(1) > o(1) && o(1) > d(1);
    const auto& dgp_iters = by_kind[ControllerKind::dgp].iterations;
    if (dgp_iters.size() >= 2) {
      result.dgp_improves =
          dgp_iters.back().mse_xyz(0) < dgp_iters.front().mse_xyz(0) &&
          dgp_iters.back().mse_xyz(1) < dgp_iters.front().mse_xyz(1);
    }
  }

  {
    std::ofstream out(out_dir / "comparison.csv");
    out << "controller,mse_x_1e3,mse_y_1e3,mse_z_1e3\n";
    for (const auto& row : result.rows) {
      out << row.label << "," << fmt(1e3 * row.mse_xyz(0)) << ","
          << fmt(1e3 * row.mse_xyz(1)) << "," << fmt(1e3 * row.mse_xyz(2))
          << "\n";
    }
  }
  {
    nlohmann::json verdict{{"x_ordering_ok", result.x_ordering_ok},
                           {"y_ordering_ok", result.y_ordering_ok},
                           {"dgp_improves", result.dgp_improves}};
    std::ofstream out(out_dir / "verdict.json");
    out << verdict.dump(2) << "\n";
  }
  return result;
}

namespace {

std::vector<std::vector<double>> read_csv(const fs::path& path,
                                          std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::vector<std::vector<double>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (first) {
      while (std::getline(ss, cell, ',')) {
        if (header) header->push_back(cell);
      }
      first = false;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void export_plotdata(const std::filesystem::path& run_dir,
                     const std::filesystem::path& out_dir) {
  fs::create_directories(out_dir);
  for (int iter = 0;; ++iter) {
    const fs::path mission =
        run_dir / "logs" / ("mission_" + std::to_string(iter) + ".csv");
    if (!fs::exists(mission)) break;
    const fs::path states =
        run_dir / "logs" / ("states_" + std::to_string(iter) + ".csv");
    const fs::path estimation =
        run_dir / "logs" / ("estimation_" + std::to_string(iter) + ".csv");

    const auto m = read_csv(mission, nullptr);
    const auto s = read_csv(states, nullptr);
    const auto e = read_csv(estimation, nullptr);
    if (m.empty()) continue;

    const std::string suffix = "_" + std::to_string(iter) + ".csv";
    {
      std::ofstream out(out_dir / ("trajectory3d" + suffix));
      out << "t,x,y,z\n";
      for (size_t k = 0; k < s.size(); ++k) {
        out << fmt(s[k][0]) << "," << fmt(s[k][1]) << "," << fmt(s[k][2]) << ","
            << fmt(s[k][3]) << "\n";
      }
    }
    {
      std::ofstream out(out_dir / ("xy_projection" + suffix));
      out << "t,x,y\n";
      for (size_t k = 0; k < s.size(); ++k) {
        out << fmt(s[k][0]) << "," << fmt(s[k][1]) << "," << fmt(s[k][2]) << "\n";
      }
    }
    {
      std::ofstream out(out_dir / ("estimation_error" + suffix));
      out << "t,err_x,err_y,err_z\n";
      for (size_t k = 0; k < e.size(); ++k) {
        out << fmt(e[k][0]) << "," << fmt(e[k][4]) << "," << fmt(e[k][5]) << ","
            << fmt(e[k][6]) << "\n";
      }
    }
    {
      // Phase-split MSE of the estimation error (velocity channels).
      double s1 = 0.0, s2 = 0.0;
      int n1 = 0, n2 = 0;
      for (size_t k = 0; k < e.size(); ++k) {
        const double sq =
            (e[k][4] * e[k][4] + e[k][5] * e[k][5] + e[k][6] * e[k][6]) / 3.0;
        if (e[k][0] < 10.0) {
          s1 += sq;
          ++n1;
        } else {
          s2 += sq;
          ++n2;
        }
      }
      std::ofstream out(out_dir / ("phase_mse" + suffix));
      out << "phase,mse\n";
      out << "0-10s," << fmt(n1 > 0 ? s1 / n1 : 0.0) << "\n";
      out << "10-20s," << fmt(n2 > 0 ? s2 / n2 : 0.0) << "\n";
    }
  }
}

}  // namespace dgpc
