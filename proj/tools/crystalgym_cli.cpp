#include <algorithm>
#include <cstdio>
#include <optional>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crystalgym.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 2;

int report(int status) {
  std::cerr << "error [" << cg_status_name(status) << "]: " << cg_last_error() << '\n';
  return status;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  cg_string_free(s);
  return out;
}

std::string num(const json& v, const char* f = "%.4f") {
  if (!v.is_number()) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v.get<double>());
  return buf;
}

void print_summary(const json& s) {
  std::cout << "run " << s.value("id", "") << "  algorithm " << s.value("algorithm", "") << "  property "
            << s.value("property", "") << "  target " << num(s["target"], "%g") << '\n';
  std::cout << "seed  status   episodes  mean_reward  trailing_100  best_reward  eval_mean_value  uniqueness\n";
  for (const auto& seed : s["seeds"]) {
    const std::string status = seed.value("status", "");
    std::printf("%-5s %-8s ", std::to_string(seed["seed"].get<std::uint64_t>()).c_str(), status.c_str());
    if (status == "error") {
      std::printf("%s: %s\n", seed["error"]["kind"].get<std::string>().c_str(),
                  seed["error"]["message"].get<std::string>().c_str());
      continue;
    }
    const auto& l = seed["log"];
    const auto& e = seed["eval"];
    std::printf("%8s  %11s  %12s  %11s  %15s  %10s\n", std::to_string(l["episodes"].get<std::size_t>()).c_str(),
                num(l["mean_reward"]).c_str(), num(l["trailing_mean_100"]).c_str(),
                num(l.value("best_reward", json())).c_str(), num(e["mean_value"]).c_str(),
                num(e["uniqueness"], "%.2f").c_str());
  }
  const auto& c = s["cache"];
  std::cout << "cache: " << c["records"] << " records (" << c["failures"] << " failures)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crystalgym: crystal composition environment, agents and benchmark runner"};
  app.require_subcommand(1);

  std::string config, calculator, algorithm, output;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes, threads;
  bool train_json = false;
  auto* train = app.add_subcommand("train", "Train every seed of an experiment config or preset (exp1..exp6)");
  train->add_option("--config", config, "Config file (JSON) or preset name")->required();
  train->add_option("--seed", seed, "Train only this seed");
  train->add_option("--episodes", episodes, "Episode budget per seed");
  train->add_option("--calculator", calculator, "Property calculator")
      ->check(CLI::IsMember({"exact", "surrogate", "qe"}));
  train->add_option("--algorithm", algorithm, "Agent")->check(CLI::IsMember({"dqn", "rainbow", "ppo", "sac", "reinforce"}));
  train->add_option("--output", output, "Run directory");
  train->add_option("--threads", threads, "Concurrent seeds (0: all cores)");
  train->add_flag("--json", train_json, "Print the full summary as JSON");

  std::string checkpoint;
  std::size_t rollouts = 5;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Roll out a trained checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json of a seed")->required();
  eval->add_option("--rollouts", rollouts, "Number of rollouts")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "Rollout seed");

  std::string run;
  std::size_t window = 50;
  auto* curves = app.add_subcommand("curves", "Write smoothed learning curves (CSV, SVG) of a run");
  curves->add_option("--run", run, "Run directory")->required();
  curves->add_option("--window", window, "Moving-average window")->check(CLI::PositiveNumber);

  std::vector<std::string> cache_paths;
  auto* cache = app.add_subcommand("cache", "Result store utilities");
  cache->require_subcommand(1);
  auto* stats = cache->add_subcommand("stats", "Record counts of result stores (default: runs/*/cache.tsv)");
  stats->add_option("--path", cache_paths, "Store file, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  char* out = nullptr;
  if (*train) {
    json over = json::object();
    if (seed) over["seeds"] = {*seed};
    if (episodes) over["episodes"] = *episodes;
    if (!calculator.empty()) over["calculator"] = calculator;
    if (!algorithm.empty()) over["algorithm"] = algorithm;
    if (!output.empty()) over["output"] = output;
    if (threads) over["threads"] = *threads;
    if (int st = cg_train(config.c_str(), over.dump().c_str(), &out)) return report(st);
    const json summary = json::parse(take(out));
    if (train_json) {
      std::cout << summary.dump(2) << '\n';
    } else {
      print_summary(summary);
    }
    bool any_error = false;
    for (const auto& s : summary["seeds"]) any_error = any_error || s.value("status", "") == "error";
    return any_error ? 1 : 0;
  }
  if (*eval) {
    if (int st = cg_evaluate(checkpoint.c_str(), rollouts, eval_seed, &out)) return report(st);
    const json r = json::parse(take(out));
    for (const auto& x : r["rollouts"]) {
      std::cout << x["structure"].get<std::string>() << '\t' << x["reduced"].get<std::string>() << '\t'
                << num(x["value"]) << '\t' << num(x["reward"]) << (x["failed"].get<bool>() ? "\tfailed" : "") << '\n';
    }
    std::cout << "successes " << r["successes"] << "  failures " << r["failures"] << "  mean_value "
              << num(r["mean_value"]) << "  std_value " << num(r["std_value"]) << "  mean_reward "
              << num(r["mean_reward"]) << "  uniqueness " << num(r["uniqueness"], "%.2f") << '\n';
    return 0;
  }
  if (*curves) {
    if (int st = cg_emit_curves(run.c_str(), window, &out)) return report(st);
    for (const auto& f : json::parse(take(out))) std::cout << f.get<std::string>() << '\n';
    return 0;
  }
  if (*stats) {
    if (cache_paths.empty()) {
      std::error_code ec;
      if (fs::is_directory("runs", ec)) {
        for (const auto& d : fs::directory_iterator("runs", ec)) {
          if (fs::exists(d.path() / "cache.tsv")) cache_paths.push_back((d.path() / "cache.tsv").string());
        }
      }
      std::sort(cache_paths.begin(), cache_paths.end());
      if (cache_paths.empty()) {
        std::cerr << "error [IOError]: no result stores under runs/; pass --path\n";
        return CG_ERR_IO;
      }
    }
    for (const auto& p : cache_paths) {
      if (int st = cg_cache_stats(p.c_str(), &out)) return report(st);
      const json s = json::parse(take(out));
      std::cout << p << ": " << s["records"] << " records, " << s["successes"] << " successes, " << s["failures"]
                << " failures";
      if (s["skipped_lines"].get<std::size_t>()) std::cout << ", " << s["skipped_lines"] << " skipped lines";
      for (const auto& [prop, n] : s["per_property"].items()) std::cout << ", " << prop << " " << n;
      std::cout << '\n';
    }
    return 0;
  }
  return kUsage;
}
