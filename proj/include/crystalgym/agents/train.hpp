#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crystalgym/agents/agent.hpp"
#include "crystalgym/env/environment.hpp"

namespace crystalgym::agents {

// One finished episode. Columns of the training log, in order:
//   episode structure composition reward value failed failure_reason
//   exploration loss updates
// value/failure_reason are "-" when absent; exploration/loss may be "nan".
// Wall time is left to the environment trace so logs stay reproducible.
struct EpisodeRecord {
  std::size_t episode = 0;
  std::string structure;
  std::string composition;
  double reward = 0.0;
  std::optional<double> value;
  bool failed = false;
  std::string failure_reason;
  double exploration = 0.0;
  double loss = 0.0;
  std::size_t updates = 0;

  bool operator==(const EpisodeRecord&) const;  // NaN fields compare equal
};

std::string_view train_log_header() noexcept;
// Doubles are written with %.17g so logs re-read bit-exactly.
void write_record(std::ostream& out, const EpisodeRecord& r);
std::vector<EpisodeRecord> read_train_log(std::istream& in);  // ParseError
std::vector<EpisodeRecord> read_train_log(const std::filesystem::path& path);  // IoError, ParseError

struct TrainOptions {
  std::size_t budget = 0;     // episodes
  std::ostream* log = nullptr;  // receives the header and one line per episode
  // Checked after every episode; returning true ends training early.
  std::function<bool(std::span<const EpisodeRecord>)> stop;
};

// Plays one episode. In train mode the agent observes every transition and
// its end_episode statistics land in the record.
EpisodeRecord run_episode(Agent& agent, CrystalEnv& env, ActMode mode);

// Collect/update loop. Errors from the environment or calculator are
// rethrown with the same category and the episode index prefixed.
std::vector<EpisodeRecord> train(Agent& agent, CrystalEnv& env, const TrainOptions& options);

// Uniform random actions from `seed`; the null baseline for learning checks.
std::vector<EpisodeRecord> run_random(CrystalEnv& env, std::size_t episodes, std::uint64_t seed);

// Mean reward of the last `window` records (all of them when fewer).
double trailing_mean(std::span<const EpisodeRecord> log, std::size_t window);
double mean_reward(std::span<const EpisodeRecord> log);

}  // namespace crystalgym::agents
