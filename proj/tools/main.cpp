// adhmc: experiment front-end.
//
//   adhmc <sample|error-sweep|converge|diagnose|advise> --config c.json
//         [--out dir] [--seed N]
//
// Exit status: 0 ok, 1 asserted invariant failed, 2 invalid config,
// 3 computation or I/O error.

#include "adhmc/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

int run(const std::string& command, const std::string& config_path,
        std::string out_dir, std::optional<std::uint64_t> seed) {
  using namespace adhmc;
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot read config " << config_path << '\n';
    return kExitConfig;
  }
  std::stringstream text;
  text << in.rdbuf();

  ExperimentConfig config;
  try {
    config = parse_config(text.str(), seed);
  } catch (const ConfigError& e) {
    std::cerr << "invalid config " << config_path << ":\n";
    for (const auto& m : e.messages()) std::cerr << "  " << m << '\n';
    return kExitConfig;
  }
  const auto kind = parse_experiment_kind(command);
  if (config.kind != *kind) {
    // The subcommand decides what runs; the config section only supplies
    // the parameters.
    config.kind = *kind;
    try {
      config = parse_config(config_to_json(config));
    } catch (const ConfigError& e) {
      std::cerr << "invalid config for " << command << ":\n";
      for (const auto& m : e.messages()) std::cerr << "  " << m << '\n';
      return kExitConfig;
    }
  }
  if (out_dir.empty()) out_dir = config.output_dir;
  if (out_dir.empty()) {
    std::cerr << "error: no output directory (use --out or output.dir)\n";
    return kExitConfig;
  }

  try {
    const auto outcome = run_experiment(config, out_dir, std::cout);
    return outcome.invariants_passed ? kExitOk : kExitInvariant;
  } catch (const ConfigError& e) {
    for (const auto& m : e.messages()) std::cerr << "invalid: " << m << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SGHMC / AD-HMC sampler experiments"};
  app.set_version_flag("--version", std::string(adhmc::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  for (const char* name : {"sample", "error-sweep", "converge", "diagnose", "advise"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "overrides sampler.seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : adhmc::kExitConfig;
  }
  const auto* sub = app.get_subcommands().front();
  std::optional<std::uint64_t> seed_override;
  if (sub->count("--seed") > 0) seed_override = seed;
  return run(sub->get_name(), config_path, out_dir, seed_override);
}
