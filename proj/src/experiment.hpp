// End-to-end study orchestration: configuration, the offline/online mission
// loop, the four-controller comparison and plot-data export.
#pragma once

#include <filesystem>
#include <json.hpp>

#include "quadrotor.hpp"

namespace dgpc {

enum class ControllerKind { baseline, lgp, ogp, dgp };

std::string to_string(ControllerKind kind);
ControllerKind controller_from_string(const std::string& s);

struct ExperimentConfig {
  std::string name = "run";
  ControllerKind controller = ControllerKind::dgp;
  int iterations = 1;
  uint64_t seed = 0;

  // Scenario.
  WindModel wind = WindModel::paper_scenario();
  double mission_duration = 20.0;
  QuadrotorParams params;
  PdGains gains;
  Eigen::VectorXd noise_std = default_process_noise_std();

  // Offline data collection.
  double collect_duration = 50.0;
  double collect_rate = 20.0;

  // GP settings.
  int m_inducing = 20;
  double forgetting = 0.95;
  double beta = 0.01;
  bool residual_online = true;
  int svgp_rounds = 3;
  int svgp_hyper_steps = 20;
  int svgp_inducing_steps = 20;

  // MPC settings.
  double gamma = 0.95;
  int mpc_max_iters = 25;
  double penalty_weight = 1e4;

  // Controllers for `compare`.
  std::vector<ControllerKind> compare_controllers_list = {
      ControllerKind::baseline, ControllerKind::lgp, ControllerKind::ogp,
      ControllerKind::dgp};
  int compare_dgp_iterations = 2;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct IterationMetrics {
  int iteration = 0;
  Eigen::Vector3d mse_xyz = Eigen::Vector3d::Zero();  // position tracking MSE
  // GP estimation error |mu_Delta - Delta| averaged over the velocity
  // channels, split at the wind switch.
  double est_err_phase1 = 0.0;
  double est_err_phase2 = 0.0;
  double est_mse_phase1 = 0.0;
  double est_mse_phase2 = 0.0;
  double median_solve_ms = 0.0;
  double max_solve_ms = 0.0;
  MissionResult mission;
};

struct MetricsReport {
  ControllerKind controller = ControllerKind::baseline;
  std::vector<IterationMetrics> iterations;
  // Estimation-error series per iteration live in iterations[i].mission.
};

// Deterministic rows of metrics.csv (timing excluded by design).
std::string metrics_csv(const MetricsReport& report);

// Trained long-term posteriors, one per residual channel.
struct LongTermMemory {
  std::vector<SparsePosterior> channels;
};

Dataset collect_dataset(const ExperimentConfig& config);
LongTermMemory train_long_term(const Dataset& data, const ExperimentConfig& config);

DualGpModel build_controller_model(ControllerKind kind,
                                   const LongTermMemory* memory,
                                   const ExperimentConfig& config);

// Runs the configured controller for config.iterations missions on the helix
// scenario, consolidating the long-term memory between missions for the DGP.
// `data`/`memory` may be supplied to share the offline phase across
// controllers; both are produced internally otherwise.
MetricsReport run_experiment(const ExperimentConfig& config,
                             const std::filesystem::path& out_dir,
                             const Dataset* shared_data = nullptr,
                             const LongTermMemory* shared_memory = nullptr);

struct ComparisonRow {
  std::string label;
  Eigen::Vector3d mse_xyz;
};

struct ComparisonResult {
  std::vector<ComparisonRow> rows;  // one per controller (+ per DGP iteration)
  bool x_ordering_ok = false;   // baseline > lgp > ogp > dgp(last)
  bool y_ordering_ok = false;
  bool dgp_improves = false;    // last DGP iteration better than the first
  std::map<std::string, MetricsReport> reports;
};

ComparisonResult compare_controllers(const ExperimentConfig& base,
                                     const std::filesystem::path& out_dir);

// Plot-ready CSV series from a finished run directory; byte-idempotent.
void export_plotdata(const std::filesystem::path& run_dir,
                     const std::filesystem::path& out_dir);

void write_mission_logs(const MetricsReport& report,
                        const std::filesystem::path& run_dir);

}  // namespace dgpc
