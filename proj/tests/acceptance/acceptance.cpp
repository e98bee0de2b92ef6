// Acceptance run: one PASS/FAIL line per criterion. Expected values come from
// independent closed forms or hand computations, never from the code under test.
// Arguments select criteria by name; no arguments runs all of them.
#include <array>
#include <atomic>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crystalgym/agents/losses.hpp"
#include "crystalgym/agents/replay.hpp"
#include "crystalgym/agents/train.hpp"
#include "crystalgym/calc/cache.hpp"
#include "crystalgym/calc/density.hpp"
#include "crystalgym/calc/eos.hpp"
#include "crystalgym/calc/qe.hpp"
#include "crystalgym/core/element.hpp"
#include "crystalgym/core/pool.hpp"
#include "crystalgym/env/reward.hpp"
#include "crystalgym/harness/experiment.hpp"
#include "support.hpp"

using namespace crystalgym;
using namespace crystalgym::test;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string printf_string(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string printf_string(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

// --- rewards ------------------------------------------------------------------

Outcome rewards() {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  bool in_range = true;
  for (int i = 0; i < 1000; ++i) {
    const double p = 2000 * u(rng), t = 1 + 999 * u(rng);
    const bool ok = u(rng) > 0.2;
    const double r = reward_bulk_modulus(p, t, ok), want = ok ? std::max(-std::abs(p - t) / t, -5.0) : -5.0;
    worst = std::max(worst, std::abs(r - want));
    in_range = in_range && r >= -5.0 && r <= 0.0;
  }
  for (int i = 0; i < 1000; ++i) {
    const double p = 20 * u(rng), t = 0.1 + 10 * u(rng);
    const bool ok = u(rng) > 0.2;
    const double r = reward_density(p, t, ok), want = ok ? std::exp(-(p - t) * (p - t) / t) : -1.0;
    worst = std::max(worst, std::abs(r - want));
    in_range = in_range && (r == -1.0 || (r > 0.0 && r <= 1.0));
  }
  for (int i = 0; i < 1000; ++i) {
    const double p = 5 * u(rng), t = 0.05 + 5 * u(rng);
    const bool ok = u(rng) > 0.2;
    const double r = reward_band_gap(p, t, ok), want = ok ? std::exp(-(p - t) * (p - t)) : -1.0;
    worst = std::max(worst, std::abs(r - want));
    in_range = in_range && (r == -1.0 || (r > 0.0 && r <= 1.0));
  }
  return {worst <= 1e-12 && in_range,
          printf_string("3x1000 triples, max |diff| %.2e, ranges %s", worst, in_range ? "ok" : "violated")};
}

Outcome targets() {
  const auto e = benchmark_targets(Difficulty::easy), h = benchmark_targets(Difficulty::hard);
  const bool ok = e.bulk_modulus == 300.0 && e.density == 3.0 && e.band_gap == 1.12 && h.bulk_modulus == 500.0 &&
                  h.density == 5.0 && h.band_gap == 2.0;
  return {ok, printf_string("easy {%g, %g, %g} hard {%g, %g, %g}", e.bulk_modulus, e.density, e.band_gap,
                            h.bulk_modulus, h.density, h.band_gap)};
}

// --- calculators --------------------------------------------------------------

constexpr double kEvPerA3PerGPa = 1.0 / 160.21766208;

// Murnaghan energy written out independently (GPa converted to eV/A^3).
double murnaghan(double v, double e0, double v0, double b0_gpa, double bp) {
  const double b0 = b0_gpa * kEvPerA3PerGPa;
  return e0 + b0 * v / bp * (std::pow(v0 / v, bp) / (bp - 1.0) + 1.0) - b0 * v0 / (bp - 1.0);
}

Outcome murnaghan_round_trip() {
  const double e0 = -215.3, v0 = 181.0, b0 = 300.0, bp = 4.0;
  std::vector<EnergyVolume> pts;
  for (double s : volume_scan_strains()) {
    const double v = v0 * std::pow(1.0 + s, 3);
    pts.push_back({v, murnaghan(v, e0, v0, b0, bp)});
  }
  const auto fit = fit_murnaghan(pts);
  const double worst = std::max({std::abs(fit.e0 - e0) / std::abs(e0), std::abs(fit.v0 - v0) / v0,
                                 std::abs(fit.bulk_modulus - b0) / b0, std::abs(fit.b0_prime - bp) / bp});
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0.0, 1e-4);
  double noisy_worst = 0.0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    auto p = pts;
    for (auto& x : p) x.energy += noise(rng);
    noisy_worst = std::max(noisy_worst, std::abs(fit_murnaghan(p).bulk_modulus - b0) / b0);
  }
  return {worst < 1e-3 && noisy_worst < 1e-2,
          printf_string("noiseless max rel err %.2e (four params); sigma=1e-4 eV worst B0 rel err %.2e over %d fits",
                        worst, noisy_worst, trials)};
}

Outcome density_oracle() {
  const auto& s = benchmark_structure("C1");
  Composition c;
  for (int i = 0; i < 8; ++i) c.push_back(&element(i < 4 ? "Na" : "Cl"));  // C1 lists the 4 Na sites first
  // Hand value: 4 (22.98977 + 35.453) g/mol / (6.02214076e23 mol^-1 * (5.6402e-8 cm)^3).
  const double a = 5.6402e-8;
  const double hand = 4.0 * (22.98977 + 35.453) / (6.02214076e23 * a * a * a);
  const auto r = compute_density(s, c);
  const double got = r.value.value_or(NAN);
  return {r.success && std::abs(got - 2.163) <= 0.005 && std::abs(got - hand) <= 0.005,
          printf_string("computed %.5f g/cm3, hand %.5f, needed 2.163 +- 0.005", got, hand)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome qe_golden() {
  const fs::path dir = fs::path(CRYSTALGYM_FIXTURES) / "qe";
  Composition nacl;
  for (int i = 0; i < 8; ++i) nacl.push_back(&element(i < 4 ? "Na" : "Cl"));
  const Composition sto{&element("Sr"), &element("Ti"), &element("O"), &element("O"), &element("O")};
  const std::string a = render_qe_input(benchmark_structure("C1"), nacl, Property::band_gap);
  const std::string b = render_qe_input(benchmark_structure("C3"), sto, Property::density);
  const std::string ga = slurp(dir / "C1_Na4Cl4.band_gap.in"), gb = slurp(dir / "C3_SrTiO3.density.in");
  const bool ok = !ga.empty() && !gb.empty() && a == ga && b == gb;
  return {ok, printf_string("C1 Na4Cl4 band_gap %s (%zu bytes), C3 SrTiO3 density %s (%zu bytes)",
                            a == ga ? "identical" : "DIFFERS", ga.size(), b == gb ? "identical" : "DIFFERS", gb.size())};
}

// --- networks and losses ------------------------------------------------------

// Worst relative error over every entry of every input. The step size h and
// estimator are fixed up front: with h = 1e-5 plain central differences the
// round-off in f(x+h) - f(x-h) (~1e-14 here) swamps entries below ~1e-6,
// so each entry uses the fourth-order Richardson estimate (4 D(h/2) - D(h)) / 3
// at its rounding-optimal step h = eps^(1/5).
struct GradCheck {
  double richardson = 0.0;
  double naive = 0.0;  // plain central difference, h = 1e-5
};

GradCheck full_gradient_check(std::vector<Tensor>& inputs, const std::function<Tensor()>& loss_fn) {
  for (auto& t : inputs) t.zero_grad();
  nn::backward(loss_fn());
  GradCheck out;
  const double h = std::pow(std::numeric_limits<double>::epsilon(), 0.2);
  for (auto& t : inputs) {
    const Matrix analytic = t.grad();
    Matrix& v = t.mutable_value();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double x0 = v.data()[i];
      auto central = [&](double step) {
        v.data()[i] = x0 + step;
        const double fp = loss_fn().item();
        v.data()[i] = x0 - step;
        const double fm = loss_fn().item();
        v.data()[i] = x0;
        return (fp - fm) / (2 * step);
      };
      const double r = (4.0 * central(h / 2) - central(h)) / 3.0;
      out.richardson = std::max(out.richardson, rel_error(analytic.data()[i], r));
      out.naive = std::max(out.naive, rel_error(analytic.data()[i], central(1e-5)));
    }
  }
  return out;
}

std::vector<Tensor> tensors_of(const nn::ParameterSet& p) {
  std::vector<Tensor> out;
  for (const auto& e : p) out.push_back(e.tensor);
  return out;
}

Outcome gradients() {
  using namespace agents;
  const auto space = ActionSpace::preset(ActionSpaceId::small);
  const std::vector<GraphFeatures> obs{sample_observation(2, 2, space), sample_observation(5, 5, space),
                                       sample_observation(7, 7, space)};
  std::vector<const GraphFeatures*> ptr;
  for (const auto& o : obs) ptr.push_back(&o);
  const auto batch = nn::make_batch(ptr);
  std::map<std::string, GradCheck> err;
  std::mt19937_64 rng(5);

  for (bool dueling : {false, true}) {
    nn::Megnet net(tiny_config(19, 18, dueling), 21);
    const Tensor w = nn::constant(random_matrix(3, 18, rng));
    auto params = tensors_of(net.parameters());
    err[dueling ? "megnet dueling" : "megnet"] =
        full_gradient_check(params, [&] { return nn::sum(nn::mul(nn::softplus(net.forward(batch)), w)); });
    const int a[] = {3, 0, 17};
    const double y[] = {0.4, -0.2, 1.1}, wt[] = {1.0, 0.3, 0.7};
    err[dueling ? "td dueling+per" : "td"] = full_gradient_check(params, [&] { return td_loss(net.forward(batch), a, y, wt); });
  }
  {
    nn::Megnet policy(tiny_config(19, 18, false), 41), value(tiny_config(19, 1, false), 42);
    const int a[] = {1, 5, 9};
    const Matrix logp = nn::log_softmax(policy.forward(batch)).value();
    const double old[] = {logp(0, 1) - 0.05, logp(1, 5) - 0.6, logp(2, 9) + 0.6};
    const double adv[] = {0.8, 1.3, 0.4}, ret[] = {0.5, 0.9, -0.1};
    auto params = tensors_of(policy.parameters());
    for (const auto& t : tensors_of(value.parameters())) params.push_back(t);
    err["ppo"] = full_gradient_check(params, [&] {
      return ppo_loss(policy.forward(batch), value.forward(batch), a, old, adv, ret, 0.2, 0.5, 0.01).total;
    });
  }
  {
    nn::Megnet policy(tiny_config(19, 18, false), 51), q1(tiny_config(19, 18, false), 52),
        q2(tiny_config(19, 18, false), 53);
    const int a[] = {2, 4, 6};
    const double y[] = {0.3, 0.6, 0.9};
    auto log_alpha = nn::parameter(Matrix::Constant(1, 1, std::log(0.2)));
    auto losses = [&] { return sac_losses(q1.forward(batch), q2.forward(batch), policy.forward(batch), a, y, log_alpha, 2.0); };
    auto p1 = tensors_of(q1.parameters()), p2 = tensors_of(q2.parameters()), pp = tensors_of(policy.parameters());
    std::vector<Tensor> pa{log_alpha};
    err["sac q1"] = full_gradient_check(p1, [&] { return losses().q1; });
    err["sac q2"] = full_gradient_check(p2, [&] { return losses().q2; });
    err["sac policy"] = full_gradient_check(pp, [&] { return losses().policy; });
    err["sac alpha"] = full_gradient_check(pa, [&] { return losses().alpha; });
  }
  {
    nn::Megnet policy(tiny_config(19, 18, false), 61), reference(tiny_config(19, 18, false), 62);
    const Matrix ref = reference.forward(batch).value();
    const int a[] = {0, 8, 16};
    auto params = tensors_of(policy.parameters());
    err["reinforce+kl"] = full_gradient_check(params, [&] { return reinforce_loss(policy.forward(batch), ref, a, 0.6, 0.05, 0.01).total; });
  }
  double worst = 0.0, naive = 0.0;
  std::string name;
  for (const auto& [k, v] : err) {
    naive = std::max(naive, v.naive);
    if (v.richardson >= worst) {
      worst = v.richardson;
      name = k;
    }
  }
  return {worst < 1e-4,
          printf_string("%zu losses/forwards, every parameter entry: worst rel err %.2e (%s); "
                        "plain h=1e-5 differences give %.2e (round-off on entries below 1e-6)",
                        err.size(), worst, name.c_str(), naive)};
}

// New row i holds old row perm[i]; the edge list is reversed.
nn::GraphBatch permuted(const nn::GraphBatch& b, const std::vector<int>& perm) {
  nn::GraphBatch p = b;
  std::vector<int> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    p.nodes.row(static_cast<Eigen::Index>(i)) = b.nodes.row(perm[i]);
    p.node_graph[i] = b.node_graph[perm[i]];
  }
  const auto ne = b.src.size();
  for (std::size_t k = 0; k < ne; ++k) {
    const std::size_t from = ne - 1 - k;
    p.src[k] = inverse[b.src[from]];
    p.dst[k] = inverse[b.dst[from]];
    p.edge_graph[k] = b.edge_graph[from];
    p.edges(static_cast<Eigen::Index>(k), 0) = b.edges(static_cast<Eigen::Index>(from), 0);
  }
  for (auto& f : p.focus_row) f = f < 0 ? -1 : inverse[f];
  return p;
}

Outcome permutation() {
  const auto space = ActionSpace::preset(ActionSpaceId::small);
  nn::MegnetConfig c = tiny_config(19, 18, true);
  c.layers = 3;
  c.width = 32;
  c.hidden = 64;
  c.head_hidden = 64;
  nn::Megnet net(c, 11);
  std::mt19937_64 rng(12);
  double worst = 0.0;
  int trials = 0;
  for (std::size_t filled : {0u, 3u, 7u, 8u}) {
    const auto o = sample_observation(filled, filled < 8 ? std::optional<std::size_t>(filled) : std::nullopt, space, 6.0);
    const auto b = nn::make_batch(o);
    std::vector<int> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    for (int t = 0; t < 10; ++t, ++trials) {
      std::shuffle(perm.begin(), perm.end(), rng);
      worst = std::max(worst, (net.forward(b).value() - net.forward(permuted(b, perm)).value()).cwiseAbs().maxCoeff());
    }
  }
  return {worst < 1e-10, printf_string("%d random node permutations, max |change| %.2e", trials, worst)};
}

Outcome per_sampling() {
  const double alpha = 0.6;
  const std::vector<double> raw{0.5, 1.0, 2.0, 4.0, 0.1, 3.0, 1.5, 0.7, 0.05, 2.5};
  agents::ReplayBuffer b(raw.size(), true, alpha);
  double z = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    b.add({});
    b.set_priority(i, raw[i]);
    z += std::pow(raw[i], alpha);
  }
  std::mt19937_64 rng(2718);
  std::vector<double> count(raw.size(), 0.0);
  const std::size_t draws = 100000;
  for (std::size_t k = 0; k < draws / 50; ++k) {
    for (std::size_t i : b.sample(50, rng).indices) count[i] += 1.0;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    worst = std::max(worst, std::abs(count[i] / draws - std::pow(raw[i], alpha) / z));
  }
  return {worst <= 0.01, printf_string("%zu draws over %zu priorities, max |freq - p^a/sum| %.4f", draws, raw.size(), worst)};
}

// --- learning -----------------------------------------------------------------

Outcome dqn_density() {
  harness::ExperimentSpec spec = harness::preset("exp1");
  spec.calculator = harness::CalculatorKind::exact;
  const auto calc = harness::make_calculator(spec);
  CrystalEnv null_env(harness::episode_config(spec, false, 999), calc);
  const double baseline = agents::mean_reward(agents::run_random(null_env, 2000, 999));
  std::string detail = printf_string("random baseline %.4f; stop episode per seed:", baseline);
  int passed = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CrystalEnv env(harness::episode_config(spec, false, seed), calc);
    auto agent = agents::make_agent(spec.agent, env.action_count(), seed);
    agents::TrainOptions o;
    o.budget = 5000;
    o.stop = [](std::span<const agents::EpisodeRecord> log) {
      return log.size() >= 100 && agents::trailing_mean(log, 100) >= 0.9;
    };
    const auto log = agents::train(*agent, env, o);
    const double tail = agents::trailing_mean(log, 100);
    const bool ok = log.size() >= 100 && tail >= 0.9;
    passed += ok;
    detail += ok ? printf_string(" %zu", log.size()) : printf_string(" none(%.3f)", tail);
  }
  detail += printf_string("; %d/5 seeds reached trailing-100 >= 0.9 within 5000", passed);
  return {passed >= 3, detail};
}

Outcome band_gap_mock() {
  harness::ExperimentSpec spec = harness::preset("exp1");
  spec.property = Property::band_gap;
  spec.mock_seed = 7;
  const auto calc = harness::make_calculator(spec);
  CrystalEnv null_env(harness::episode_config(spec, false, 999), calc);
  const auto random_log = agents::run_random(null_env, 2000, 999);
  std::size_t failures = 0;
  for (const auto& r : random_log) failures += r.failed;
  const double baseline = agents::mean_reward(random_log);
  CrystalEnv env(harness::episode_config(spec, false, 0), calc);
  auto agent = agents::make_agent(spec.agent, env.action_count(), 0);
  agents::TrainOptions o;
  o.budget = 10000;
  const auto log = agents::train(*agent, env, o);
  const double tail = agents::trailing_mean(log, 100);
  return {log.size() == 10000 && tail >= baseline + 0.1,
          printf_string("random baseline %.4f (failure rate %.3f); DQN trailing-100 after %zu episodes %.4f, margin %+.4f",
                        baseline, static_cast<double>(failures) / random_log.size(), log.size(), tail, tail - baseline)};
}

// --- environment ----------------------------------------------------------------

class CountingDensity final : public PropertyCalculator {
 public:
  std::string_view id() const noexcept override { return "counting-density"; }
  Property property() const noexcept override { return Property::density; }
  CalculatorResult compute(const Structure& s, const Composition& c) const override {
    ++calls;
    return compute_density(s, c);
  }
  mutable std::atomic<int> calls{0};
};

void append_bytes(std::string& out, const std::vector<double>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

Outcome env_determinism() {
  EpisodeConfig cfg;
  cfg.pool = make_pool({"C1", "C3", "C6"});
  cfg.traversal = Traversal::random;
  cfg.seed = 4242;
  cfg.features.graph.cutoff = 4.0;
  // Small alphabet so terminal compositions repeat often.
  cfg.action_space = ActionSpace::parse("Na,Cl,K");
  auto run = [&](CrystalEnv& env) {
    std::string bytes;
    std::mt19937_64 rng(31);
    std::ostringstream trace;
    env.set_trace(&trace);
    for (int e = 0; e < 300; ++e) {
      append_bytes(bytes, env.reset().node_features);
      for (bool done = false; !done;) {
        const auto s = env.step(rng() % env.action_count());
        append_bytes(bytes, s.observation.node_features);
        append_bytes(bytes, s.observation.global_features);
        append_bytes(bytes, {s.reward});
        bytes += s.info.structure + '|' + s.info.composition + '\n';
        done = s.done;
      }
    }
    return bytes;
  };
  CrystalEnv a(cfg, std::make_shared<DensityCalculator>()), b(cfg, std::make_shared<DensityCalculator>());
  const std::string ta = run(a), tb = run(b);
  const bool identical = ta.size() == tb.size() && std::memcmp(ta.data(), tb.data(), ta.size()) == 0;

  auto inner = std::make_shared<CountingDensity>();
  auto cached = std::make_shared<CachedCalculator>(inner, std::make_shared<ResultCache>());
  CrystalEnv c(cfg, cached);
  std::set<std::string> distinct;
  std::mt19937_64 rng(31);
  int episodes = 0;
  for (; episodes < 300; ++episodes) {
    c.reset();
    for (bool done = false; !done;) {
      const auto s = c.step(rng() % c.action_count());
      if (s.done) distinct.insert(s.info.structure + '|' + s.info.composition);
      done = s.done;
    }
  }
  const int calls = inner->calls.load();
  const int repeats = calls - static_cast<int>(distinct.size());
  return {identical && repeats == 0,
          printf_string("two runs x 300 episodes %s (%zu bytes); cached: %d episodes, %zu distinct terminals, "
                        "%d calculator calls, %d repeats",
                        identical ? "bit-identical" : "DIFFER", ta.size(), episodes, distinct.size(), calls, repeats)};
}

struct Criterion {
  const char* name;
  double limit_seconds;  // 0: no limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"reward-formulas", 1.0, rewards},
      {"benchmark-targets", 0.0, targets},
      {"murnaghan-round-trip", 1.0, murnaghan_round_trip},
      {"density-oracle", 0.0, density_oracle},
      {"qe-golden-inputs", 0.0, qe_golden},
      {"gradient-suite", 60.0, gradients},
      {"permutation-invariance", 0.0, permutation},
      {"per-sampling", 0.0, per_sampling},
      {"dqn-density-learning", 0.0, dqn_density},
      {"band-gap-mock-robustness", 0.0, band_gap_mock},
      {"env-determinism-cache", 0.0, env_determinism},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.name)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_seconds > 0 && secs > c.limit_seconds) {
      o.pass = false;
      o.detail += printf_string("; over the %.0f s limit", c.limit_seconds);
    }
    failed += !o.pass;
    std::printf("%s %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matches the arguments\n");
    return 2;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed ? 1 : 0;
}
