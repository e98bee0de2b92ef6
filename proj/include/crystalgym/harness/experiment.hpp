#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "crystalgym/agents/agent.hpp"
#include "crystalgym/agents/train.hpp"
#include "crystalgym/calc/cache.hpp"
#include "crystalgym/calc/qe.hpp"
#include "crystalgym/env/environment.hpp"

namespace crystalgym::harness {

// "surrogate" selects the desk-scale calculator of the property (analytic
// density, pair-potential bulk modulus, band-gap mock); "exact" is only
// defined for density; "qe" runs the external DFT adapter.
enum class CalculatorKind { surrogate, exact, qe };
std::string_view to_string(CalculatorKind k) noexcept;
CalculatorKind parse_calculator_kind(std::string_view name);  // ConfigError

struct ExperimentSpec {
  std::string id = "custom";
  EpisodeMode mode = EpisodeMode::completion;
  std::vector<std::string> train_structures{"C1"};
  std::vector<std::string> eval_structures{"C1"};  // same as train for single-structure runs
  Difficulty difficulty = Difficulty::easy;
  std::optional<double> target;  // overrides the difficulty table
  std::string action_space = "small";
  Property property = Property::density;
  CalculatorKind calculator = CalculatorKind::surrogate;
  std::uint64_t mock_seed = 0;    // band-gap mock hash seed
  agents::AgentConfig agent;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t episodes = 2000;
  std::size_t eval_rollouts = 5;
  std::size_t threads = 0;        // concurrent seeds, 0 = hardware concurrency
  double cutoff = 6.0;            // graph cutoff, Angstrom
  double rho = 4.0;               // gaussian edge width, Angstrom^2
  std::filesystem::path output = "runs";  // run directory
  std::filesystem::path cache;    // empty: <output>/cache.tsv
  QeOptions qe;

  bool mixed() const noexcept { return train_structures.size() > 1 || train_structures != eval_structures; }
  double resolved_target() const;
  // ConfigError: unknown structure or action space, overlapping mixed lists,
  // no seeds, an "exact" calculator for a property other than density.
  void validate() const;
};

// Names of the built-in presets, "exp1".."exp6".
std::vector<std::string> preset_names();
ExperimentSpec preset(std::string_view name);  // ConfigError

nlohmann::json to_json(const ExperimentSpec& spec);
// Starts from j["preset"] when present (else defaults) and applies the keys
// of `j`. Unknown keys raise ConfigError naming the key.
ExperimentSpec spec_from_json(const nlohmann::json& j);
// A file path, or a preset name when no such file exists.
ExperimentSpec load_spec(const std::string& path_or_preset);

// Calculator for the spec, wrapped in `cache` when given.
std::shared_ptr<const PropertyCalculator> make_calculator(const ExperimentSpec& spec,
                                                          std::shared_ptr<ResultCache> cache = nullptr);
// Environment config for training (train list, fixed traversal) or
// evaluation (eval list, random traversal).
EpisodeConfig episode_config(const ExperimentSpec& spec, bool evaluation, std::uint64_t seed);

// A standalone environment described by a JSON object (see crystalgym.h for
// the keys). "property" is required; unknown keys raise ConfigError naming
// the key.
struct EnvSetup {
  EpisodeConfig config;
  std::shared_ptr<const PropertyCalculator> calculator;
  std::shared_ptr<ResultCache> cache;  // null without a "cache" key
};
EnvSetup env_from_json(const nlohmann::json& j);

struct RolloutResult {
  std::uint64_t seed = 0;
  std::string structure;
  std::string composition;
  std::string reduced;
  std::optional<double> value;
  double reward = 0.0;
  bool failed = false;
};

struct EvalReport {
  std::vector<RolloutResult> rollouts;
  std::size_t successes = 0;
  std::size_t failures = 0;
  double mean_value = 0.0;  // over successes; NaN when none
  double std_value = 0.0;   // population std over successes
  double mean_reward = 0.0;
  double uniqueness = 0.0;  // distinct reduced compositions / rollouts
};

// Rebuilds the report aggregates from its rollouts.
void summarise(EvalReport& report);
nlohmann::json to_json(const EvalReport& report);

// Greedy rollouts for value-based agents, sampled ones for policy-based
// agents, with random traversal and (mixed) random eval-list structures.
// Throws CheckpointMismatchError when the checkpoint does not fit the spec.
EvalReport evaluate(const nlohmann::json& checkpoint, const ExperimentSpec& spec, std::size_t rollouts,
                    std::uint64_t seed, std::shared_ptr<const PropertyCalculator> calculator = nullptr);
// Uses the spec stored in the checkpoint.
EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint, std::size_t rollouts, std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool resumed = false;           // checkpoint existed, nothing trained
  std::size_t episodes_run = 0;   // episodes trained in this call
  std::optional<std::string> error;
  std::string error_kind;
};

struct RunResult {
  std::filesystem::path directory;
  std::vector<SeedOutcome> seeds;
  nlohmann::json summary;
};

// Trains every seed (concurrently, sharing one result cache), writes
//   <output>/spec.json, <output>/summary.json,
//   <output>/seed_<n>/{train_log.tsv, trace.tsv, checkpoint.json, eval.tsv}.
// Seeds whose checkpoint already exists are skipped. A failing seed is
// recorded in the summary without stopping the others.
RunResult run_experiment(const ExperimentSpec& spec);

// Aggregates of one training log; every number is recomputable from it.
nlohmann::json log_summary(std::span<const agents::EpisodeRecord> log);

// Per-seed smoothed learning curves (valid-mode moving average; one point
// when the log is shorter than the window) as <run>/curves.csv and
// <run>/curves.svg. Throws IoError when the run directory has no logs.
struct CurvePoint {
  std::size_t episode = 0;  // last episode of the window
  double reward = 0.0;
};
std::vector<CurvePoint> smooth(std::span<const agents::EpisodeRecord> log, std::size_t window);
std::vector<std::filesystem::path> emit_curves(const std::filesystem::path& run, std::size_t window = 50);

}  // namespace crystalgym::harness
