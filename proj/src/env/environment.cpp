#include "crystalgym/env/environment.hpp"

#include <chrono>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "crystalgym/core/errors.hpp"
#include "crystalgym/core/pool.hpp"

namespace crystalgym {

std::string_view to_string(EpisodeMode m) noexcept {
  return m == EpisodeMode::completion ? "completion" : "substitution";
}

std::string_view to_string(Traversal t) noexcept { return t == Traversal::fixed ? "fixed" : "random"; }

EpisodeMode parse_episode_mode(std::string_view name) {
  if (name == "completion") return EpisodeMode::completion;
  if (name == "substitution") return EpisodeMode::substitution;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected completion or substitution)");
}

Traversal parse_traversal(std::string_view name) {
  if (name == "fixed") return Traversal::fixed;
  if (name == "random") return Traversal::random;
  throw ConfigError("unknown traversal '" + std::string(name) + "' (expected fixed or random)");
}

StructurePool make_pool(const std::vector<std::string>& names) {
  StructurePool pool;
  for (const auto& n : names) pool.push_back(std::make_shared<Structure>(benchmark_structure(n)));
  return pool;
}

void EpisodeConfig::validate() const {
  if (pool.empty()) throw ConfigError("structure pool is empty");
  if (!(target > 0.0)) throw ConfigError("target must be positive");
  for (const auto& s : pool) {
    if (!s) throw ConfigError("structure pool contains a null entry");
    if (s->site_count() > features.focus_width) {
      throw ConfigError("structure " + s->name() + " has more sites than the focus width " +
                        std::to_string(features.focus_width));
    }
  }
}

std::string_view trace_header() noexcept { return "episode\tstructure\tcomposition\tvalue\treward\twall_time"; }

CrystalEnv::CrystalEnv(EpisodeConfig config, std::shared_ptr<const PropertyCalculator> calculator)
    : config_(std::move(config)), calculator_(std::move(calculator)), rng_(config_.seed) {
  config_.validate();
  if (!calculator_) throw ConfigError("environment needs a calculator");
  if (calculator_->property() != config_.property) {
    throw ConfigError("calculator " + std::string(calculator_->id()) + " computes " +
                      std::string(to_string(calculator_->property())) + ", episode wants " +
                      std::string(to_string(config_.property)));
  }
}

std::shared_ptr<const EdgeSet> CrystalEnv::edges_for(const std::shared_ptr<const Structure>& s) {
  auto& slot = edge_cache_[s.get()];
  if (!slot) slot = build_edge_set(*s, config_.features.graph);
  return slot;
}

void CrystalEnv::refresh_observation() {
  observation_ = featurize(state_, config_.action_space, config_.property, config_.target, config_.features,
                           edges_for(state_.structure));
}

const GraphFeatures& CrystalEnv::reset() {
  const auto& pool = config_.pool;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const auto& s = pool[pool.size() == 1 ? 0 : pick(rng_)];
  const std::size_t n = s->site_count();

  state_ = CrystalState{};
  state_.structure = s;
  state_.occupancy.assign(n, nullptr);
  if (config_.mode == EpisodeMode::substitution) {
    std::uniform_int_distribution<std::size_t> el(0, config_.action_space.size() - 1);
    for (auto& site : state_.occupancy) site = &config_.action_space.at(el(rng_));
  }

  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (config_.traversal == Traversal::random) std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
  state_.focus = order_[0];

  ++episode_;
  active_ = true;
  refresh_observation();
  return observation_;
}

StepResult CrystalEnv::step(std::size_t action) {
  if (!active_) throw EpisodeDoneError(episode_ == 0 ? "step before reset" : "episode is over; call reset");
  const Element& e = config_.action_space.at(action);  // ActionError

  state_.occupancy[*state_.focus] = &e;
  ++state_.step_count;
  ++cursor_;

  StepResult out;
  out.info.structure = state_.structure->name();
  if (cursor_ < order_.size()) {
    state_.focus = order_[cursor_];
    refresh_observation();
    out.observation = observation_;
    out.info.composition = composition_string(state_.occupancy);
    return out;
  }

  state_.focus.reset();
  active_ = false;
  const auto start = std::chrono::steady_clock::now();
  auto result = calculator_->compute(*state_.structure, state_.occupancy);
  if (result.success && !result.value) result = CalculatorResult::failed(FailureReason::parse, result.wall_time);
  if (result.wall_time == 0.0) {
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  out.reward = reward(config_.property, result, config_.target);
  const auto [lo, hi] = reward_bounds(config_.property);
  if (!(out.reward >= lo && out.reward <= hi)) {
    throw DomainError("terminal reward " + std::to_string(out.reward) + " outside its range");
  }
  out.done = true;
  out.info.composition = composition_string(state_.occupancy);
  out.info.result = result;
  refresh_observation();
  out.observation = observation_;

  if (trace_) {
    char value[32], tail[64];
    if (result.success) {
      std::snprintf(value, sizeof value, "%.10g", *result.value);
    } else {
      std::snprintf(value, sizeof value, "FAIL");
    }
    std::snprintf(tail, sizeof tail, "\t%.10g\t%.6f\n", out.reward, result.wall_time);
    *trace_ << episode_ - 1 << '\t' << out.info.structure << '\t' << out.info.composition << '\t' << value << tail;
  }
  return out;
}

}  // namespace crystalgym
