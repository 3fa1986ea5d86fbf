// extern-C surface over the experiment pipeline and model handles.
#include "dgpc/dgpc.h"

#include <cstring>
#include <fstream>
#include <string>

#include "experiment.hpp"

namespace {

thread_local std::string g_last_error;

dgpc_status fail(dgpc_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

dgpc_status guard(const std::function<void()>& body) {
  try {
    body();
    return DGPC_OK;
  } catch (const std::invalid_argument& e) {
    return fail(DGPC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const dgpc::NumericalError& e) {
    return fail(DGPC_ERR_NUMERICAL, e.what());
  } catch (const dgpc::SimulationError& e) {
    return fail(DGPC_ERR_SIMULATION, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(DGPC_ERR_IO, e.what());
  } catch (const std::runtime_error& e) {
    return fail(DGPC_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(DGPC_ERR_UNKNOWN, e.what());
  }
}

dgpc::ExperimentConfig load_config(const char* config_path, uint64_t seed) {
  dgpc::ExperimentConfig config;
  if (config_path != nullptr && std::strlen(config_path) > 0) {
    std::ifstream in(config_path);
    if (!in) {
      throw std::runtime_error(std::string("cannot open config: ") + config_path);
    }
    nlohmann::json j;
    in >> j;
    config = j.get<dgpc::ExperimentConfig>();
  }
  config.seed = seed;
  return config;
}

}  // namespace

struct dgpc_model {
  dgpc::DualGpModel model;
};

extern "C" {

const char* dgpc_version(void) { return "0.1.0"; }

const char* dgpc_last_error(void) { return g_last_error.c_str(); }

dgpc_status dgpc_collect(const char* config_path, uint64_t seed,
                         const char* out_dir) {
  if (!out_dir) return fail(DGPC_ERR_INVALID_ARGUMENT, "out_dir is null");
  return guard([&] {
    const dgpc::ExperimentConfig config = load_config(config_path, seed);
    const std::filesystem::path run_dir =
        std::filesystem::path(out_dir) / config.name;
    std::filesystem::create_directories(run_dir);
    const dgpc::Dataset data = dgpc::collect_dataset(config);
    data.save_csv((run_dir / "dataset.csv").string());
  });
}

dgpc_status dgpc_train(const char* config_path, uint64_t seed,
                       const char* out_dir) {
  if (!out_dir) return fail(DGPC_ERR_INVALID_ARGUMENT, "out_dir is null");
  return guard([&] {
    const dgpc::ExperimentConfig config = load_config(config_path, seed);
    const std::filesystem::path run_dir =
        std::filesystem::path(out_dir) / config.name;
    const auto dataset_path = run_dir / "dataset.csv";
    if (!std::filesystem::exists(dataset_path)) {
      throw std::runtime_error("missing dataset: " + dataset_path.string() +
                               " (run collect first)");
    }
    const dgpc::Dataset data = dgpc::Dataset::load_csv(dataset_path.string());
    const dgpc::LongTermMemory memory = dgpc::train_long_term(data, config);
    std::filesystem::create_directories(run_dir / "checkpoints");
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : memory.channels) arr.push_back(p);
    std::ofstream out(run_dir / "checkpoints" / "long_term.json");
    out << nlohmann::json{{"channels", arr}}.dump(2) << "\n";
  });
}

dgpc_status dgpc_run(const char* config_path, uint64_t seed,
                     const char* out_dir) {
  if (!out_dir) return fail(DGPC_ERR_INVALID_ARGUMENT, "out_dir is null");
  return guard([&] {
    const dgpc::ExperimentConfig config = load_config(config_path, seed);
    const std::filesystem::path run_dir =
        std::filesystem::path(out_dir) / config.name;

    const auto dataset_path = run_dir / "dataset.csv";
    const auto memory_path = run_dir / "checkpoints" / "long_term.json";

    dgpc::Dataset data;
    const dgpc::Dataset* data_ptr = nullptr;
    if (std::filesystem::exists(dataset_path)) {
      data = dgpc::Dataset::load_csv(dataset_path.string());
      data_ptr = &data;
    }

    dgpc::LongTermMemory memory;
    const dgpc::LongTermMemory* memory_ptr = nullptr;
    if (config.controller != dgpc::ControllerKind::baseline) {
      if (!std::filesystem::exists(memory_path)) {
        throw std::runtime_error("missing checkpoint: " + memory_path.string() +
                                 " (run collect and train first)");
      }
      std::ifstream in(memory_path);
      nlohmann::json j;
      in >> j;
      for (const auto& p : j.at("channels")) {
        memory.channels.push_back(p.get<dgpc::SparsePosterior>());
      }
      memory_ptr = &memory;
      if (!data_ptr) {
        throw std::runtime_error("missing dataset: " + dataset_path.string() +
                                 " (run collect first)");
      }
    }
    dgpc::run_experiment(config, out_dir, data_ptr, memory_ptr);
  });
}

dgpc_status dgpc_compare(const char* config_path, uint64_t seed,
                         const char* out_dir) {
  if (!out_dir) return fail(DGPC_ERR_INVALID_ARGUMENT, "out_dir is null");
  return guard([&] {
    const dgpc::ExperimentConfig config = load_config(config_path, seed);
    dgpc::compare_controllers(config, out_dir);
  });
}

dgpc_status dgpc_export(const char* run_dir, const char* out_dir) {
  if (!run_dir || !out_dir) {
    return fail(DGPC_ERR_INVALID_ARGUMENT, "run_dir/out_dir is null");
  }
  return guard([&] { dgpc::export_plotdata(run_dir, out_dir); });
}

dgpc_status dgpc_model_load(const char* path, dgpc_model** out) {
  if (!path || !out) return fail(DGPC_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guard([&] {
    auto handle = std::make_unique<dgpc_model>();
    handle->model = dgpc::load_dual_gp(path);
    *out = handle.release();
  });
}

dgpc_status dgpc_model_save(const dgpc_model* model, const char* path) {
  if (!model || !path) return fail(DGPC_ERR_INVALID_ARGUMENT, "null argument");
  return guard([&] { dgpc::save_dual_gp(model->model, path); });
}

void dgpc_model_free(dgpc_model* model) { delete model; }

dgpc_status dgpc_model_dims(const dgpc_model* model, int32_t* input_dim,
                            int32_t* n_channels) {
  if (!model || !input_dim || !n_channels) {
    return fail(DGPC_ERR_INVALID_ARGUMENT, "null argument");
  }
  *input_dim = model->model.input_dim;
  *n_channels = static_cast<int32_t>(model->model.n_channels());
  return DGPC_OK;
}

dgpc_status dgpc_model_predict(const dgpc_model* model, const double* z,
                               int32_t input_dim, double* mean_out,
                               double* var_out) {
  if (!model || !z || !mean_out || !var_out) {
    return fail(DGPC_ERR_INVALID_ARGUMENT, "null argument");
  }
  if (input_dim != model->model.input_dim) {
    return fail(DGPC_ERR_INVALID_ARGUMENT, "input_dim mismatch");
  }
  return guard([&] {
    const Eigen::Map<const Eigen::VectorXd> zv(z, input_dim);
    for (Eigen::Index i = 0; i < model->model.n_channels(); ++i) {
      const auto [mean, var] =
          dgpc::predict_dgp(model->model.channels[i], zv);
      mean_out[i] = mean;
      var_out[i] = var;
    }
  });
}

dgpc_status dgpc_model_observe(dgpc_model* model, const double* z,
                               int32_t input_dim, const double* y,
                               int32_t n_channels) {
  if (!model || !z || !y) return fail(DGPC_ERR_INVALID_ARGUMENT, "null argument");
  if (input_dim != model->model.input_dim ||
      n_channels != model->model.n_channels()) {
    return fail(DGPC_ERR_INVALID_ARGUMENT, "dimension mismatch");
  }
  return guard([&] {
    const Eigen::Map<const Eigen::VectorXd> zv(z, input_dim);
    for (Eigen::Index i = 0; i < model->model.n_channels(); ++i) {
      dgpc::DualGpChannel& ch = model->model.channels[i];
      if (!ch.short_active) continue;
      double target = y[i];
      if (model->model.residual_online && ch.long_term) {
        const Eigen::VectorXd k = dgpc::gram_vector(
            ch.long_term->kernel, ch.long_term->inducing_inputs, zv);
        target -= k.dot(ch.beta_l);
      }
      dgpc::recursive_update(ch.short_term, zv, target);
      ch.refresh_short_cache();
    }
  });
}

}  // extern "C"
