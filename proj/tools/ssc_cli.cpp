#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "sscdr/harness.hpp"

namespace {

sscdr::ExperimentConfig read_config(const std::string& path, bool has_seed, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw sscdr::Error("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  sscdr::ExperimentConfig config = sscdr::config_from_json(j);
  if (has_seed) config.seed = seed;
  return config;
}

long count_failures(const sscdr::RunOutput& output) {
  long n = 0;
  for (const sscdr::ResultRecord& r : output.records) {
    n += r.solver_failures;
    if (!r.error.empty()) ++n;
  }
  return n;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse subspace clustering on dimensionality-reduced data"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  int threads = 0;
  std::uint64_t seed = 0;
  bool has_seed = false;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--config", config_path, "experiment config (json)")->required();
    if (needs_out) cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--threads", threads, "worker threads (0 = SSC_THREADS or hardware)");
    cmd->add_option("--seed", seed, "override the config master seed")
        ->each([&](const std::string&) { has_seed = true; });
  };

  CLI::App* run_cmd = app.add_subcommand("run", "execute the sweep and write results");
  add_common(run_cmd, true);
  CLI::App* phase_cmd =
      app.add_subcommand("phase", "run a (p, lambda) grid and write phase diagrams");
  add_common(phase_cmd, true);
  CLI::App* check_cmd = app.add_subcommand("check", "validate a config without running it");
  add_common(check_cmd, false);

  CLI11_PARSE(app, argc, argv);

  try {
    sscdr::ExperimentConfig config = read_config(config_path, has_seed, seed);
    const long P = config.project ? static_cast<long>(config.p_grid.size()) : 1;
    const long L = static_cast<long>(config.lambda_grid.size());
    const long total = P * L * config.replicates;

    if (app.got_subcommand(check_cmd)) {
      std::printf("config ok: %ld p values x %ld lambdas x %ld replicates = %ld records\n", P, L,
                  config.replicates, total);
      return 0;
    }

    if (app.got_subcommand(phase_cmd)) {
      sscdr::RunOutput output;
      sscdr::phase_diagram(config, threads, out_dir, &output);
      long failures = count_failures(output);
      std::printf("wrote %zu records and 3 phase matrices to %s (%ld failures)\n",
                  output.records.size(), out_dir.c_str(), failures);
      return failures == 0 ? 0 : 1;
    }

    sscdr::RunOutput output = sscdr::run_pipeline(config, threads);
    sscdr::write_run(output, config, out_dir);
    long failures = count_failures(output);
    std::printf("wrote %zu records to %s (%ld failures)\n", output.records.size(), out_dir.c_str(),
                failures);
    return failures == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
