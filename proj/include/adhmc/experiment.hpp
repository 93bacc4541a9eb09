#pragma once

#include "adhmc/diagnostics.hpp"
#include "adhmc/model.hpp"
#include "adhmc/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace adhmc {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { sample, error_sweep, converge, diagnose, advise };

const char* to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment_kind(std::string_view text);

struct ExperimentConfig {
  // model
  std::string potential = std::string(kGaussIso);
  std::string kinetic = std::string(kKinGauss);
  ModelParams params;
  // oracle, sampler
  SamplerConfig sampler;
  int n_steps = 1000;
  // experiment
  ExperimentKind kind = ExperimentKind::sample;
  std::vector<double> etas{0.02, 0.04, 0.08, 0.16};
  int samples = 10000;
  double rho = 0.9;
  double delta = 0.1;
  int n_chains = 10000;
  int horizon = 20;
  int draws = 10000;
  int burn_in = 0;
  SigmaVReading reading = SigmaVReading::squared;
  // output
  std::string output_dir;
};

/// Document format: JSON with sections `model`, `oracle`, `sampler`,
/// `experiment` and `output`. Every problem found is reported at once, each
/// prefixed with its dotted path (e.g. `sampler.eta`). Throws ConfigError.
/// `seed_override` replaces `sampler.seed`, which is otherwise mandatory.
ExperimentConfig parse_config(
    const std::string& text,
    std::optional<std::uint64_t> seed_override = std::nullopt);

/// Canonical JSON echo; parse_config(config_to_json(c)) reproduces c.
std::string config_to_json(const ExperimentConfig& config);

/// Git blob id: hex SHA-1 of "blob <len>\0" + text.
std::string git_blob_hash(const std::string& text);

/// git_blob_hash of the canonical echo.
std::string config_hash(const ExperimentConfig& config);

/// A failure inside one stage of an experiment.
class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ExperimentOutcome {
  bool invariants_passed = true;
  std::vector<std::string> files;  // written, relative to the output dir
};

/// Runs the configured experiment, writes its CSVs and meta.json into
/// `out_dir`, and prints a summary block to `log`.
ExperimentOutcome run_experiment(const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir,
                                 std::ostream& log);

/// Exit codes: 0 ok, 1 asserted invariant failed, 2 invalid config,
/// 3 computation or I/O error.
enum ExitCode : int { kExitOk = 0, kExitInvariant = 1, kExitConfig = 2, kExitRuntime = 3 };

}  // namespace adhmc
