#include "crystalgym/agents/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "crystalgym/core/errors.hpp"

namespace crystalgym::agents {

namespace {

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, std::size_t line) {
  if (s == "nan") return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("training log line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

std::size_t parse_count(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError("training log line " + std::to_string(line) + ": bad integer '" + s + "'");
  }
}

}  // namespace

bool EpisodeRecord::operator==(const EpisodeRecord& o) const {
  const bool values = value.has_value() == o.value.has_value() && (!value || same(*value, *o.value));
  return episode == o.episode && structure == o.structure && composition == o.composition && same(reward, o.reward) &&
         values && failed == o.failed && failure_reason == o.failure_reason && same(exploration, o.exploration) &&
         same(loss, o.loss) && updates == o.updates;
}

std::string_view train_log_header() noexcept {
  return "episode\tstructure\tcomposition\treward\tvalue\tfailed\tfailure_reason\texploration\tloss\tupdates";
}

void write_record(std::ostream& out, const EpisodeRecord& r) {
  out << r.episode << '\t' << r.structure << '\t' << r.composition << '\t' << fmt(r.reward) << '\t'
      << (r.value ? fmt(*r.value) : "-") << '\t' << (r.failed ? 1 : 0) << '\t'
      << (r.failure_reason.empty() ? "-" : r.failure_reason) << '\t' << fmt(r.exploration) << '\t' << fmt(r.loss)
      << '\t' << r.updates << '\n';
}

std::vector<EpisodeRecord> read_train_log(std::istream& in) {
  std::vector<EpisodeRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    if (n == 1) {
      if (line != train_log_header()) throw ParseError("training log has an unexpected header");
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    if (f.size() != 10) throw ParseError("training log line " + std::to_string(n) + ": expected 10 columns");
    EpisodeRecord r;
    r.episode = parse_count(f[0], n);
    r.structure = f[1];
    r.composition = f[2];
    r.reward = parse_double(f[3], n);
    if (f[4] != "-") r.value = parse_double(f[4], n);
    if (f[5] != "0" && f[5] != "1") throw ParseError("training log line " + std::to_string(n) + ": bad failure flag");
    r.failed = f[5] == "1";
    if (f[6] != "-") r.failure_reason = f[6];
    r.exploration = parse_double(f[7], n);
    r.loss = parse_double(f[8], n);
    r.updates = parse_count(f[9], n);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EpisodeRecord> read_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open training log " + path.string());
  return read_train_log(in);
}

EpisodeRecord run_episode(Agent& agent, CrystalEnv& env, ActMode mode) {
  GraphFeatures obs = env.reset();
  EpisodeRecord r;
  r.episode = env.episode_index() - 1;
  while (true) {
    const std::size_t a = agent.act(obs, mode);
    StepResult s = env.step(a);
    if (mode == ActMode::train) agent.observe(obs, a, s.reward, s.observation, s.done);
    if (s.done) {
      r.structure = s.info.structure;
      r.composition = s.info.composition;
      r.reward = s.reward;
      if (s.info.result) {
        r.value = s.info.result->value;
        r.failed = !s.info.result->success;
        if (s.info.result->failure_reason) r.failure_reason = std::string(to_string(*s.info.result->failure_reason));
      }
      break;
    }
    obs = std::move(s.observation);
  }
  if (mode == ActMode::train) {
    const EpisodeStats st = agent.end_episode();
    r.exploration = st.exploration;
    r.loss = st.loss;
    r.updates = st.updates;
  } else {
    r.exploration = std::nan("");
    r.loss = std::nan("");
  }
  return r;
}

std::vector<EpisodeRecord> train(Agent& agent, CrystalEnv& env, const TrainOptions& options) {
  std::vector<EpisodeRecord> log;
  log.reserve(options.budget);
  if (options.log) *options.log << train_log_header() << '\n';
  for (std::size_t e = 0; e < options.budget; ++e) {
    agent.begin_episode(e, static_cast<double>(e) / static_cast<double>(options.budget));
    try {
      log.push_back(run_episode(agent, env, ActMode::train));
    } catch (const Error& ex) {
      throw_error(ex.kind(), "episode " + std::to_string(e) + ": " + ex.what());
    }
    log.back().episode = e;
    if (options.log) write_record(*options.log, log.back());
    if (options.stop && options.stop(log)) break;
  }
  if (options.log) options.log->flush();
  return log;
}

std::vector<EpisodeRecord> run_random(CrystalEnv& env, std::size_t episodes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, env.action_count() - 1);
  std::vector<EpisodeRecord> log;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset();
    StepResult s;
    do {
      s = env.step(pick(rng));
    } while (!s.done);
    EpisodeRecord r;
    r.episode = e;
    r.structure = s.info.structure;
    r.composition = s.info.composition;
    r.reward = s.reward;
    if (s.info.result) {
      r.value = s.info.result->value;
      r.failed = !s.info.result->success;
      if (s.info.result->failure_reason) r.failure_reason = std::string(to_string(*s.info.result->failure_reason));
    }
    r.exploration = 1.0;
    r.loss = std::nan("");
    log.push_back(std::move(r));
  }
  return log;
}

double trailing_mean(std::span<const EpisodeRecord> log, std::size_t window) {
  if (log.empty()) return std::nan("");
  const std::size_t n = std::min(window == 0 ? log.size() : window, log.size());
  double s = 0.0;
  for (std::size_t i = log.size() - n; i < log.size(); ++i) s += log[i].reward;
  return s / static_cast<double>(n);
}

double mean_reward(std::span<const EpisodeRecord> log) { return trailing_mean(log, log.size()); }

}  // namespace crystalgym::agents
