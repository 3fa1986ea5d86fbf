// Command-line front end over the shared-library C API.
#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "dgpc/dgpc.h"

namespace {

int report(dgpc_status status, const std::string& verb) {
  if (status == DGPC_OK) return 0;
  std::fprintf(stderr, "{\"error\":{\"verb\":\"%s\",\"code\":%d,\"message\":\"%s\"}}\n",
               verb.c_str(), static_cast<int>(status), dgpc_last_error());
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-GP learning-based MPC toolkit"};
  app.require_subcommand(1);

  std::string config;
  std::string out = "runs";
  std::string run_dir;
  uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd, bool with_config = true) {
    if (with_config) {
      cmd->add_option("--config", config, "JSON experiment configuration");
    }
    cmd->add_option("--seed", seed, "root random seed");
    cmd->add_option("--out", out, "output directory");
  };

  auto* collect = app.add_subcommand("collect", "fly the data-collection mission");
  add_common(collect);
  auto* train = app.add_subcommand("train", "train the long-term GP from a dataset");
  add_common(train);
  auto* run = app.add_subcommand("run", "run the configured controller study");
  add_common(run);
  auto* compare = app.add_subcommand("compare", "run the controller comparison");
  add_common(compare);
  auto* exp = app.add_subcommand("export", "export plot-ready CSV series");
  exp->add_option("--run-dir", run_dir, "finished run directory")->required();
  exp->add_option("--out", out, "output directory");

  CLI11_PARSE(app, argc, argv);

  const char* cfg = config.empty() ? nullptr : config.c_str();
  if (collect->parsed()) return report(dgpc_collect(cfg, seed, out.c_str()), "collect");
  if (train->parsed()) return report(dgpc_train(cfg, seed, out.c_str()), "train");
  if (run->parsed()) return report(dgpc_run(cfg, seed, out.c_str()), "run");
  if (compare->parsed()) return report(dgpc_compare(cfg, seed, out.c_str()), "compare");
  if (exp->parsed()) return report(dgpc_export(run_dir.c_str(), out.c_str()), "export");
  return 1;
}
