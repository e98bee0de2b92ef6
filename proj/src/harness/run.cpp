#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "crystalgym/agents/serialize.hpp"
#include "crystalgym/core/errors.hpp"
#include "crystalgym/harness/experiment.hpp"

namespace crystalgym::harness {

using agents::EpisodeRecord;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

// Reduced formula from a per-site composition string ("Na Cl - ...").
std::string reduce(const std::string& composition) {
  std::istringstream in(composition);
  Composition c;
  std::string sym;
  while (in >> sym) c.push_back(sym == "-" ? nullptr : &element(sym));
  return reduced_composition(c);
}

fs::path seed_dir(const fs::path& run, std::uint64_t seed) { return run / ("seed_" + std::to_string(seed)); }

// Evaluation rollouts use a stream independent of the training one.
std::uint64_t eval_seed(std::uint64_t seed) { return seed * 0x9E3779B97F4A7C15ULL + 0xE7A1ULL; }

const char* kEvalHeader = "seed\tstructure\tcomposition\treduced\tvalue\treward\tfailed";

void write_eval(const fs::path& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kEvalHeader << '\n';
  for (const auto& x : r.rollouts) {
    out << x.seed << '\t' << x.structure << '\t' << x.composition << '\t' << x.reduced << '\t'
        << (x.value ? fmt(*x.value) : "-") << '\t' << fmt(x.reward) << '\t' << (x.failed ? 1 : 0) << '\n';
  }
}

EvalReport read_eval(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  EvalReport r;
  std::string line;
  std::getline(in, line);
  if (line != kEvalHeader) throw ParseError(path.string() + ": unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    if (f.size() != 7) throw ParseError(path.string() + ": expected 7 columns");
    RolloutResult x;
    try {
      x.seed = std::stoull(f[0]);
      x.structure = f[1];
      x.composition = f[2];
      x.reduced = f[3];
      if (f[4] != "-") x.value = std::stod(f[4]);
      x.reward = std::stod(f[5]);
      x.failed = f[6] == "1";
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad number");
    }
    r.rollouts.push_back(std::move(x));
  }
  summarise(r);
  return r;
}

}  // namespace

json to_json(const EvalReport& r) {
  json rollouts = json::array();
  for (const auto& x : r.rollouts) {
    rollouts.push_back({{"seed", x.seed},
                        {"structure", x.structure},
                        {"composition", x.composition},
                        {"reduced", x.reduced},
                        {"value", x.value ? json(*x.value) : json(nullptr)},
                        {"reward", x.reward},
                        {"failed", x.failed}});
  }
  return {{"rollouts", rollouts},
          {"successes", r.successes},
          {"failures", r.failures},
          {"mean_value", number_or_null(r.mean_value)},
          {"std_value", number_or_null(r.std_value)},
          {"mean_reward", number_or_null(r.mean_reward)},
          {"uniqueness", r.uniqueness}};
}

void summarise(EvalReport& r) {
  r.successes = r.failures = 0;
  double sum = 0.0, sq = 0.0, reward = 0.0;
  std::set<std::string> distinct;
  for (const auto& x : r.rollouts) {
    reward += x.reward;
    distinct.insert(x.reduced);
    if (x.failed || !x.value) {
      ++r.failures;
      continue;
    }
    ++r.successes;
    sum += *x.value;
  }
  const double nan = std::nan("");
  r.mean_value = r.successes ? sum / static_cast<double>(r.successes) : nan;
  for (const auto& x : r.rollouts) {
    if (!x.failed && x.value) sq += (*x.value - r.mean_value) * (*x.value - r.mean_value);
  }
  r.std_value = r.successes ? std::sqrt(sq / static_cast<double>(r.successes)) : nan;
  const auto n = static_cast<double>(r.rollouts.size());
  r.mean_reward = r.rollouts.empty() ? nan : reward / n;
  r.uniqueness = r.rollouts.empty() ? 0.0 : static_cast<double>(distinct.size()) / n;
}

EvalReport evaluate(const json& checkpoint, const ExperimentSpec& spec, std::size_t rollouts, std::uint64_t seed,
                    std::shared_ptr<const PropertyCalculator> calculator) {
  const EpisodeConfig ec = episode_config(spec, true, eval_seed(seed));
  auto agent = agents::make_agent(spec.agent, ec.action_space.size(), eval_seed(seed) + 1);
  agents::restore_checkpoint(checkpoint, *agent);
  if (!calculator) calculator = make_calculator(spec);
  CrystalEnv env(ec, calculator);
  const auto mode = agents::is_value_based(spec.agent.algorithm) ? agents::ActMode::greedy : agents::ActMode::sample;
  EvalReport report;
  for (std::size_t i = 0; i < rollouts; ++i) {
    const EpisodeRecord r = agents::run_episode(*agent, env, mode);
    RolloutResult x;
    x.seed = seed;
    x.structure = r.structure;
    x.composition = r.composition;
    x.reduced = reduce(r.composition);
    x.value = r.value;
    x.reward = r.reward;
    x.failed = r.failed;
    report.rollouts.push_back(std::move(x));
  }
  summarise(report);
  return report;
}

EvalReport evaluate_checkpoint(const fs::path& path, std::size_t rollouts, std::uint64_t seed) {
  const json ckpt = agents::read_checkpoint(path);
  if (!ckpt.contains("meta") || !ckpt["meta"].contains("spec")) {
    throw CheckpointMismatchError("checkpoint " + path.string() + " carries no experiment spec");
  }
  const ExperimentSpec spec = spec_from_json(ckpt["meta"]["spec"]);
  return evaluate(ckpt, spec, rollouts, seed);
}

json log_summary(std::span<const EpisodeRecord> log) {
  std::size_t failures = 0, successes = 0;
  double value_sum = 0.0;
  const EpisodeRecord* best = nullptr;
  for (const auto& r : log) {
    if (r.failed) {
      ++failures;
    } else if (r.value) {
      ++successes;
      value_sum += *r.value;
    }
    if (!best || r.reward > best->reward) best = &r;
  }
  json j;
  j["episodes"] = log.size();
  j["mean_reward"] = number_or_null(agents::mean_reward(log));
  j["trailing_mean_100"] = number_or_null(agents::trailing_mean(log, 100));
  j["failures"] = failures;
  j["failure_rate"] = log.empty() ? 0.0 : static_cast<double>(failures) / static_cast<double>(log.size());
  j["mean_value"] = successes ? json(value_sum / static_cast<double>(successes)) : json(nullptr);
  if (best) {
    j["best_reward"] = best->reward;
    j["best_episode"] = best->episode;
    j["best_composition"] = best->composition;
    j["best_structure"] = best->structure;
  }
  return j;
}

RunResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  RunResult result;
  result.directory = spec.output;
  std::error_code ec;
  fs::create_directories(spec.output, ec);
  if (ec) throw IoError("cannot create run directory " + spec.output.string() + ": " + ec.message());
  {
    std::ofstream out(spec.output / "spec.json");
    if (!out) throw IoError("cannot write spec.json");
    out << to_json(spec).dump(2) << '\n';
  }
  auto cache = std::make_shared<ResultCache>(spec.cache.empty() ? spec.output / "cache.tsv" : spec.cache);
  const auto calculator = make_calculator(spec, cache);

  result.seeds.resize(spec.seeds.size());
  std::vector<json> seed_json(spec.seeds.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < spec.seeds.size(); i = next++) {
      const std::uint64_t seed = spec.seeds[i];
      SeedOutcome& out = result.seeds[i];
      out.seed = seed;
      json sj{{"seed", seed}};
      const fs::path dir = seed_dir(spec.output, seed);
      const fs::path ckpt = dir / "checkpoint.json";
      try {
        fs::create_directories(dir);
        if (fs::exists(ckpt)) {
          out.resumed = true;
        } else {
          const EpisodeConfig ecfg = episode_config(spec, false, seed);
          CrystalEnv env(ecfg, calculator);
          auto agent = agents::make_agent(spec.agent, env.action_count(), seed);
          std::ofstream log(dir / "train_log.tsv");
          std::ofstream trace(dir / "trace.tsv");
          if (!log || !trace) throw IoError("cannot write logs in " + dir.string());
          trace << trace_header() << '\n';
          env.set_trace(&trace);
          agents::TrainOptions opts;
          opts.budget = spec.episodes;
          opts.log = &log;
          const auto records = agents::train(*agent, env, opts);
          out.episodes_run = records.size();
          save_checkpoint(ckpt, *agent, {{"spec", to_json(spec)}, {"seed", seed}, {"episodes", records.size()}});
          write_eval(dir / "eval.tsv", evaluate(agents::read_checkpoint(ckpt), spec, spec.eval_rollouts, seed, calculator));
        }
        const auto log = agents::read_train_log(dir / "train_log.tsv");
        sj["status"] = out.resumed ? "resumed" : "trained";
        sj["log"] = log_summary(log);
        sj["eval"] = to_json(read_eval(dir / "eval.tsv"));
      } catch (const Error& e) {
        out.error = e.what();
        out.error_kind = to_string(e.kind());
      } catch (const std::exception& e) {
        out.error = e.what();
        out.error_kind = "Error";
      }
      if (out.error) {
        sj["status"] = "error";
        sj["error"] = {{"kind", out.error_kind}, {"message", *out.error}};
      }
      seed_json[i] = std::move(sj);
    }
  };
  const std::size_t threads =
      std::max<std::size_t>(1, std::min(spec.seeds.size(), spec.threads ? spec.threads : std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  EvalReport combined;
  for (const auto& o : result.seeds) {
    const fs::path p = seed_dir(spec.output, o.seed) / "eval.tsv";
    if (!o.error && fs::exists(p)) {
      for (auto& x : read_eval(p).rollouts) combined.rollouts.push_back(std::move(x));
    }
  }
  summarise(combined);
  const CacheStats cs = cache->stats();
  json summary;
  summary["id"] = spec.id;
  summary["algorithm"] = std::string(agents::to_string(spec.agent.algorithm));
  summary["property"] = std::string(to_string(spec.property));
  summary["target"] = spec.resolved_target();
  summary["budget"] = spec.episodes;
  summary["seeds"] = seed_json;
  summary["eval"] = to_json(combined);
  summary["cache"] = {{"records", cs.records}, {"successes", cs.successes}, {"failures", cs.failures}};
  {
    std::ofstream out(spec.output / "summary.json");
    if (!out) throw IoError("cannot write summary.json");
    out << summary.dump(2) << '\n';
  }
  result.summary = std::move(summary);
  return result;
}

std::vector<CurvePoint> smooth(std::span<const EpisodeRecord> log, std::size_t window) {
  std::vector<CurvePoint> out;
  if (log.empty()) return out;
  const std::size_t w = std::max<std::size_t>(1, window);
  if (log.size() < w) {
    double s = 0.0;
    for (const auto& r : log) s += r.reward;
    out.push_back({log.back().episode, s / static_cast<double>(log.size())});
    return out;
  }
  // Each mean uses its own window sum so results do not depend on running-sum drift.
  for (std::size_t end = w; end <= log.size(); ++end) {
    double s = 0.0;
    for (std::size_t k = end - w; k < end; ++k) s += log[k].reward;
    out.push_back({log[end - 1].episode, s / static_cast<double>(w)});
  }
  return out;
}

namespace {

void write_svg(const fs::path& path, const std::string& title,
               const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& series) {
  const double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  double x_max = 1, y_min = 0, y_max = 1;
  bool any = false;
  for (const auto& [name, pts] : series) {
    for (const auto& p : pts) {
      if (!any) {
        y_min = y_max = p.reward;
        any = true;
      }
      x_max = std::max(x_max, static_cast<double>(p.episode));
      y_min = std::min(y_min, p.reward);
      y_max = std::max(y_max, p.reward);
    }
  }
  if (y_max - y_min < 1e-9) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  auto sx = [&](double x) { return L + (W - L - R) * x / x_max; };
  auto sy = [&](double y) { return H - B - (H - T - B) * (y - y_min) / (y_max - y_min); };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  char buf[64];
  for (int i = 0; i <= 4; ++i) {
    const double y = y_min + (y_max - y_min) * i / 4.0;
    std::snprintf(buf, sizeof buf, "%.3g", y);
    out << "<text x=\"" << L - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
    const double x = x_max * i / 4.0;
    std::snprintf(buf, sizeof buf, "%.0f", x);
    out << "<text x=\"" << sx(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << buf << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">episode</text>\n";
  out << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
      << ")\" text-anchor=\"middle\">smoothed reward</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& [name, pts] = series[i];
    const char* color = colors[i % 10];
    if (!pts.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& p : pts) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(static_cast<double>(p.episode)), sy(p.reward));
        out << buf;
      }
      out << "\"/>\n";
    }
    out << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (i + 1) << "\" text-anchor=\"end\" fill=\"" << color
        << "\">" << name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace

std::vector<fs::path> emit_curves(const fs::path& run, std::size_t window) {
  std::string algorithm = "unknown";
  std::ifstream spec_in(run / "spec.json");
  if (spec_in) {
    try {
      json j;
      spec_in >> j;
      algorithm = j.value("algorithm", algorithm);
    } catch (const json::exception&) {
    }
  }
  std::vector<std::pair<std::uint64_t, fs::path>> logs;
  std::error_code ec;
  if (!fs::is_directory(run, ec)) throw IoError("run directory " + run.string() + " does not exist");
  static const std::regex seed_re("seed_([0-9]+)");
  for (const auto& entry : fs::directory_iterator(run, ec)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && std::regex_match(name, m, seed_re) && fs::exists(entry.path() / "train_log.tsv")) {
      logs.emplace_back(std::stoull(m[1].str()), entry.path() / "train_log.tsv");
    }
  }
  if (logs.empty()) throw IoError("no training logs under " + run.string());
  std::sort(logs.begin(), logs.end());

  std::vector<std::pair<std::string, std::vector<CurvePoint>>> series;
  const fs::path csv = run / "curves.csv";
  std::ofstream out(csv);
  if (!out) throw IoError("cannot write " + csv.string());
  out << "algorithm,seed,episode,smoothed_reward\n";
  for (const auto& [seed, path] : logs) {
    const auto log = agents::read_train_log(path);
    auto pts = smooth(log, window);
    for (const auto& p : pts) out << algorithm << ',' << seed << ',' << p.episode << ',' << fmt(p.reward) << '\n';
    series.emplace_back(algorithm + " seed " + std::to_string(seed), std::move(pts));
  }
  out.close();
  if (!out) throw IoError("short write to " + csv.string());
  const fs::path svg = run / "curves.svg";
  write_svg(svg, run.filename().string() + " (window " + std::to_string(window) + ")", series);
  return {csv, svg};
}

}  // namespace crystalgym::harness
