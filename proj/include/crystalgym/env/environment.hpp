#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "crystalgym/calc/calculator.hpp"
#include "crystalgym/env/reward.hpp"
#include "crystalgym/env/state.hpp"
#include "crystalgym/features/graph.hpp"

namespace crystalgym {

enum class EpisodeMode { completion, substitution };
enum class Traversal { fixed, random };

std::string_view to_string(EpisodeMode m) noexcept;
std::string_view to_string(Traversal t) noexcept;
EpisodeMode parse_episode_mode(std::string_view name);  // ConfigError
Traversal parse_traversal(std::string_view name);       // ConfigError

using StructurePool = std::vector<std::shared_ptr<const Structure>>;

// Copies of the named benchmark skeletons ("C1".."C7"). Throws LookupError.
StructurePool make_pool(const std::vector<std::string>& names);

struct EpisodeConfig {
  Property property = Property::density;
  double target = 3.0;
  EpisodeMode mode = EpisodeMode::completion;
  StructurePool pool;
  Traversal traversal = Traversal::fixed;
  ActionSpace action_space = ActionSpace::preset(ActionSpaceId::small);
  std::uint64_t seed = 0;
  FeaturizeOptions features;

  // ConfigError on an empty pool, a non-positive target, or a pool structure
  // larger than the focus width.
  void validate() const;
};

struct StepInfo {
  std::string structure;
  std::string composition;  // per site, "-" for empty
  // Present on the terminal step only.
  std::optional<CalculatorResult> result;
};

struct StepResult {
  GraphFeatures observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// The composition MDP. One episode fills (or rewrites) every site of a pool
// skeleton, one site per step, and is scored once at the end. Instances are
// single threaded; several may share one calculator.
class CrystalEnv {
 public:
  // The calculator must evaluate config.property (ConfigError otherwise).
  CrystalEnv(EpisodeConfig config, std::shared_ptr<const PropertyCalculator> calculator);

  const GraphFeatures& reset();
  // Throws EpisodeDoneError after the terminal step or before the first reset,
  // ActionError for an action outside the action space.
  StepResult step(std::size_t action);

  const EpisodeConfig& config() const noexcept { return config_; }
  const CrystalState& state() const noexcept { return state_; }
  const GraphFeatures& observation() const noexcept { return observation_; }
  const PropertyCalculator& calculator() const noexcept { return *calculator_; }
  std::size_t action_count() const noexcept { return config_.action_space.size(); }
  bool done() const noexcept { return !active_; }
  std::size_t episode_index() const noexcept { return episode_; }
  const std::vector<std::size_t>& traversal_order() const noexcept { return order_; }

  // Optional episode log: one tab separated line per finished episode.
  void set_trace(std::ostream* out) noexcept { trace_ = out; }

 private:
  std::shared_ptr<const EdgeSet> edges_for(const std::shared_ptr<const Structure>& s);
  void refresh_observation();

  EpisodeConfig config_;
  std::shared_ptr<const PropertyCalculator> calculator_;
  std::mt19937_64 rng_;
  std::map<const Structure*, std::shared_ptr<const EdgeSet>> edge_cache_;
  CrystalState state_;
  GraphFeatures observation_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t episode_ = 0;  // episodes started so far
  bool active_ = false;
  std::ostream* trace_ = nullptr;
};

// Header line of the episode log.
std::string_view trace_header() noexcept;

}  // namespace crystalgym
