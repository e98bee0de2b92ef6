#include "crystalgym.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "crystalgym/calc/cache.hpp"
#include "crystalgym/core/errors.hpp"
#include "crystalgym/harness/experiment.hpp"

using namespace crystalgym;
using nlohmann::json;

struct cg_env {
  harness::EnvSetup setup;
  CrystalEnv env;
  json info = json::object();

  explicit cg_env(harness::EnvSetup s) : setup(std::move(s)), env(setup.config, setup.calculator) {}
};

namespace {

thread_local std::string last_error;

int status_of(ErrorKind kind) { return CG_ERR_PARSE + static_cast<int>(kind); }

int fail(int status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs f, translating exceptions into status codes.
template <class F>
int guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return CG_OK;
  } catch (const Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const json::exception& e) {
    return fail(CG_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CG_ERR_INTERNAL, "unknown exception");
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_json(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

json state_info(const CrystalEnv& env) {
  const auto& st = env.state();
  json j;
  j["structure"] = st.structure ? st.structure->name() : "";
  j["composition"] = composition_string(st.occupancy);
  j["reduced"] = reduced_composition(st.occupancy);
  j["episode"] = env.episode_index();
  j["step"] = st.step_count;
  j["terminated"] = env.done();
  j["truncated"] = false;
  return j;
}

std::vector<double> flatten(const GraphFeatures& g) {
  std::vector<double> out;
  const std::size_t e = g.edge_count();
  out.reserve(5 + g.node_features.size() + g.global_features.size() + 7 * e);
  out.push_back(CG_OBSERVATION_VERSION);
  out.push_back(static_cast<double>(g.node_count));
  out.push_back(static_cast<double>(g.node_width));
  out.push_back(static_cast<double>(g.global_features.size()));
  out.push_back(static_cast<double>(e));
  out.insert(out.end(), g.node_features.begin(), g.node_features.end());
  out.insert(out.end(), g.global_features.begin(), g.global_features.end());
  for (std::size_t k = 0; k < e; ++k) {
    const Edge& ed = g.edges->edges[k];
    out.insert(out.end(), {static_cast<double>(ed.u), static_cast<double>(ed.v), static_cast<double>(ed.shift.c1),
                           static_cast<double>(ed.shift.c2), static_cast<double>(ed.shift.c3), ed.distance,
                           g.edges->features[k]});
  }
  return out;
}

}  // namespace

extern "C" {

const char* cg_last_error(void) { return last_error.c_str(); }

const char* cg_status_name(int status) {
  if (status == CG_OK) return "OK";
  if (status >= CG_ERR_PARSE && status <= CG_ERR_CHECKPOINT_MISMATCH) {
    return to_string(static_cast<ErrorKind>(status - CG_ERR_PARSE));
  }
  switch (status) {
    case CG_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case CG_ERR_BUFFER_TOO_SMALL: return "BufferTooSmall";
    case CG_ERR_INTERNAL: return "InternalError";
    default: return "UnknownStatus";
  }
}

void cg_string_free(char* s) { std::free(s); }

int cg_env_create(const char* config_json, cg_env** out) {
  if (!config_json || !out) return fail(CG_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new cg_env(harness::env_from_json(parse_json(config_json, "environment config")));
  });
}

void cg_env_destroy(cg_env* env) { delete env; }

int cg_env_reset(cg_env* env) {
  if (!env) return fail(CG_ERR_INVALID_ARGUMENT, "null environment");
  return guarded([&] {
    env->env.reset();
    env->info = state_info(env->env);
    env->info["reward"] = 0.0;
  });
}

int cg_env_step(cg_env* env, size_t action, double* reward, int* terminated) {
  if (!env) return fail(CG_ERR_INVALID_ARGUMENT, "null environment");
  return guarded([&] {
    const StepResult r = env->env.step(action);
    json info = state_info(env->env);
    info["reward"] = r.reward;
    info["terminated"] = r.done;
    if (r.info.result) {
      const auto& res = *r.info.result;
      info["success"] = res.success;
      info["value"] = res.value ? json(*res.value) : json(nullptr);
      info["failure_reason"] = res.failure_reason ? json(std::string(to_string(*res.failure_reason))) : json(nullptr);
    }
    env->info = std::move(info);
    if (reward) *reward = r.reward;
    if (terminated) *terminated = r.done ? 1 : 0;
  });
}

int cg_env_action_count(const cg_env* env, size_t* out) {
  if (!env || !out) return fail(CG_ERR_INVALID_ARGUMENT, "null argument");
  *out = env->env.action_count();
  last_error.clear();
  return CG_OK;
}

int cg_env_observation_size(const cg_env* env, size_t* out) {
  if (!env || !out) return fail(CG_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *out = flatten(env->env.observation()).size(); });
}

int cg_env_observation(const cg_env* env, double* buffer, size_t capacity, size_t* size) {
  if (!env || !size) return fail(CG_ERR_INVALID_ARGUMENT, "null argument");
  if (!buffer && capacity) return fail(CG_ERR_INVALID_ARGUMENT, "null buffer with nonzero capacity");
  std::vector<double> flat;
  const int st = guarded([&] { flat = flatten(env->env.observation()); });
  if (st != CG_OK) return st;
  *size = flat.size();
  if (buffer) std::memcpy(buffer, flat.data(), std::min(capacity, flat.size()) * sizeof(double));
  if (capacity < flat.size() && buffer) {
    return fail(CG_ERR_BUFFER_TOO_SMALL, "observation needs " + std::to_string(flat.size()) + " values");
  }
  return CG_OK;
}

int cg_env_info_json(const cg_env* env, char** out) {
  if (!env || !out) return fail(CG_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *out = dup(env->info.dump()); });
}

int cg_train(const char* config, const char* overrides_json, char** summary_json) {
  if (!config) return fail(CG_ERR_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    json j = harness::to_json(harness::load_spec(config));
    if (overrides_json && *overrides_json) {
      const json patch = parse_json(overrides_json, "overrides");
      if (!patch.is_object()) throw ConfigError("overrides must be a JSON object");
      // A different algorithm starts from its own defaults.
      if (patch.contains("algorithm") && !patch.contains("agent")) j.erase("agent");
      j.merge_patch(patch);
    }
    const auto result = harness::run_experiment(harness::spec_from_json(j));
    if (summary_json) *summary_json = dup(result.summary.dump(2));
  });
}

int cg_evaluate(const char* checkpoint, size_t rollouts, uint64_t seed, char** report_json) {
  if (!checkpoint || !report_json) return fail(CG_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *report_json = dup(harness::to_json(harness::evaluate_checkpoint(checkpoint, rollouts, seed)).dump(2));
  });
}

int cg_emit_curves(const char* run_dir, size_t window, char** files_json) {
  if (!run_dir) return fail(CG_ERR_INVALID_ARGUMENT, "null run directory");
  return guarded([&] {
    json files = json::array();
    for (const auto& p : harness::emit_curves(run_dir, window)) files.push_back(p.string());
    if (files_json) *files_json = dup(files.dump());
  });
}

int cg_cache_stats(const char* path, char** stats_json) {
  if (!path || !stats_json) return fail(CG_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    if (!std::filesystem::exists(path)) throw IoError(std::string("no result store at ") + path);
    const CacheStats s = read_cache_stats(path);
    *stats_json = dup(json{{"path", path},
                           {"records", s.records},
                           {"successes", s.successes},
                           {"failures", s.failures},
                           {"skipped_lines", s.skipped_lines},
                           {"per_property", s.per_property}}
                          .dump(2));
  });
}

}  // extern "C"
