// Acceptance suite: one PASS/FAIL/SKIPPED line per criterion. Exit status is
// non-zero when any criterion fails.
//
//   acceptance [--only NAME]... [--list]
//
// Dataset-gated criteria read the recipe dataset from $ALCHEMY_DATASET, else
// data/little_alchemy2.json under the source tree.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "alchemy/agents.hpp"
#include "alchemy/analytics.hpp"
#include "alchemy/harness.hpp"
#include "alchemy/logistic.hpp"
#include "alchemy/rng.hpp"
#include "alchemy/sae.hpp"
#include "alchemy/stats.hpp"
#include "alchemy/synthetic.hpp"
#include "alchemy/trace.hpp"
#include "alchemy/valuation.hpp"
#include "oracles.hpp"

using namespace alchemy;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skipped };

struct Verdict {
  Status status;
  std::string detail;
};

Verdict pass(std::string d) { return {Status::Pass, std::move(d)}; }
Verdict fail(std::string d) { return {Status::Fail, std::move(d)}; }
Verdict skipped() { return {Status::Skipped, "dataset absent"}; }

// Collects failed sub-checks so one line can report all of them.
struct Checks {
  std::vector<std::string> failures;
  void operator()(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  Verdict verdict(const std::string& summary) const {
    if (failures.empty()) return pass(summary);
    std::string d = summary + "; failed: " + failures.front();
    if (failures.size() > 1) d += " (+" + std::to_string(failures.size() - 1) + " more)";
    return fail(d);
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path data_path(const std::string& name) { return fs::path(ALCHEMY_TEST_DATA) / name; }

std::optional<fs::path> dataset_path() {
  fs::path p;
  if (const char* env = std::getenv("ALCHEMY_DATASET"); env && *env) {
    p = env;
  } else {
    p = fs::path(ALCHEMY_SOURCE_DIR) / "data" / "little_alchemy2.json";
  }
  if (!fs::exists(p)) return std::nullopt;
  return p;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("alchemy_acceptance_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// ---------------------------------------------------------------- criteria

Verdict difficulty_identity() {
  Checks check;
  std::vector<RecipeGraph> graphs{make_g4()};
  Rng pick(11);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const std::size_t n = 5 + pick.uniform_index(46);  // 5..50
    const std::size_t max_recipes = pair_count(n);
    graphs.push_back(make_random_graph(n, std::min<std::size_t>(max_recipes, 1 + pick.uniform_index(3 * n)), s));
  }
  Rng rng(0);
  std::size_t inventories = 0;
  for (; inventories < 1000; ++inventories) {
    const auto& g = graphs[inventories % graphs.size()];
    const std::size_t k = 1 + rng.uniform_index(g.size());
    std::vector<ElementId> inv;
    for (std::size_t i = 0; i < k; ++i) inv.push_back(static_cast<ElementId>(rng.uniform_index(g.size())));
    const std::set<ElementId> distinct(inv.begin(), inv.end());
    const auto got = success_probability(g, inv);
    const auto hits = oracle::successful_pairs(g, inv);
    const std::uint64_t c = distinct.size() * (distinct.size() + 1) / 2;
    check(got.successful == hits, "S mismatch on inventory " + std::to_string(inventories));
    check(got.combinations == c, "C_n mismatch on inventory " + std::to_string(inventories));
    check(got.probability == static_cast<double>(hits) / static_cast<double>(c),
          "P_s mismatch on inventory " + std::to_string(inventories));
  }
  std::string summary = std::to_string(inventories) + " inventories on " + std::to_string(graphs.size()) + " graphs";
  if (const auto ds = dataset_path()) {
    const auto g = load_graph(*ds);
    const auto init = g.initial_elements();
    const auto p = success_probability(g, std::vector<ElementId>(init.begin(), init.end())).probability;
    check(p == 1.0, "dataset initial P_s = " + fmt("%.6g", p));
    summary += ", dataset initial P_s " + fmt("%.3f", p);
  } else {
    summary += ", dataset P_s check skipped";
  }
  return check.verdict(summary);
}

Verdict dataset_constants() {
  const auto ds = dataset_path();
  if (!ds) return skipped();
  const auto g = load_graph(*ds);
  Checks check;
  check(g.size() == 720, "elements " + std::to_string(g.size()));
  check(g.recipes().size() == 3452, "recipes " + std::to_string(g.recipes().size()));
  const auto human = g.find("human"), alien = g.find("alien");
  check(human && one_step_result_count(g, *human) == 83, "one_step(human)");
  check(alien && one_step_result_count(g, *alien) == 1, "one_step(alien)");
  return check.verdict(std::to_string(g.size()) + " elements, " + std::to_string(g.recipes().size()) + " recipes");
}

Verdict valuation_oracle() {
  Checks check;
  Rng rng(3);
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const std::size_t n = 5 + rng.uniform_index(26);  // 5..30
    const auto g = make_random_graph(n, std::min<std::size_t>(pair_count(n), 1 + rng.uniform_index(3 * n)), 100 + s);
    const double gamma = rng.uniform01();
    for (int depth = 0; depth <= 3; ++depth) {
      const auto table = base_empowerment(g, depth, gamma);
      std::vector<double> expect(n);
      for (ElementId e = 0; e < n; ++e) {
        expect[e] = oracle::empowerment(g, e, depth, gamma);
        const double err = std::abs(table[e] - expect[e]);
        worst = std::max(worst, err);
        ++compared;
        check(err <= 1e-12, "E graph " + std::to_string(s) + " depth " + std::to_string(depth));
      }
      for (ElementId a = 0; a < n; ++a) {
        for (ElementId b = a; b < n; ++b) {
          const double err = std::abs(combination_empowerment(table, g, CanonicalPair::of(a, b)) -
                                      oracle::combination_empowerment(g, expect, a, b));
          worst = std::max(worst, err);
          ++compared;
          check(err <= 1e-12, "combination graph " + std::to_string(s) + " depth " + std::to_string(depth));
        }
      }
    }
  }
  return check.verdict("100 graphs, " + std::to_string(compared) + " values, max |err| " + fmt("%.2e", worst));
}

Verdict uncertainty_formula() {
  Checks check;
  check(uncertainty(0, 0) == 0.0 && uncertainty(1, 0) == 0.0 && uncertainty(1, 7) == 0.0, "T <= 1 gives 0");
  check(std::abs(uncertainty(100, 0) - 2.1459660262893472) < 1e-6, "U(100, 0)");
  check(std::abs(uncertainty(100, 99) - 0.21459660262893472) < 1e-6, "U(100, 99)");
  check(std::abs(uncertainty(2, 0) - std::sqrt(std::log(2.0))) < 1e-6, "U(2, 0)");
  double worst = 0.0;
  for (std::uint64_t t = 0; t <= 600; t += 3) {
    for (std::uint64_t c = 0; c <= t; c += 5) {
      const double u = uncertainty(t, c);
      worst = std::max(worst, std::abs(u - oracle::uncertainty(t, c)));
      check(u >= 0.0, "non-negative");
      if (t >= 1) check(uncertainty(t + 1, c) >= u, "non-decreasing in T at " + std::to_string(t));
      check(uncertainty(t, c + 1) <= u, "non-increasing in t_e at " + std::to_string(t));
      if (t >= 2) check(uncertainty(t, c + 1) < u, "strictly decreasing in t_e at " + std::to_string(t));
    }
  }
  check(worst < 1e-6, "oracle grid");
  return check.verdict("grid to T=600, max |err| vs oracle " + fmt("%.2e", worst));
}

std::vector<SessionTrace> simulate(const RecipeGraph& g, const AgentSpec& spec, const std::vector<double>& temps,
                                   std::size_t reps, std::size_t trials, const std::string& tag) {
  std::vector<SessionTrace> out;
  std::uint64_t seed = 0;
  for (double temp : temps) {
    for (std::size_t r = 0; r < reps; ++r, ++seed) {
      auto agent = make_agent(spec, temp, seed, nullptr);
      auto o = play_session(g, *agent, seed, trials, EmpowermentParams{});
      out.push_back({tag + "/" + std::to_string(seed), temp, std::move(o.decisions)});
    }
  }
  return out;
}

double ratio(const RegressionResult& r, const char* term) { return r.at(term).estimate / r.at(term).se; }

Verdict strategy_attribution() {
  const auto g = make_extended_graph({});
  Checks check;

  AgentSpec softmax;
  softmax.kind = PolicyVariant::SoftmaxValue;
  softmax.weights = {1.0, 0.0};
  const auto a = run_model1(build_choice_dataset(simulate(g, softmax, {1.0}, 5, 500, "softmax"), 0)).pooled;
  const double au = ratio(a, kUncertainty), ae = ratio(a, kEmpowerment);
  check(au > 2.0, "uncertainty agent: U/se " + fmt("%.2f", au));
  check(std::abs(ae) < 2.0, "uncertainty agent: E/se " + fmt("%.2f", ae));

  AgentSpec greedy;
  greedy.kind = PolicyVariant::GreedyValue;
  greedy.weights = {0.0, 1.0};
  const auto b = run_model1(build_choice_dataset(simulate(g, greedy, {0.0}, 5, 500, "greedy"), 0)).pooled;
  const double be = ratio(b, kEmpowerment), bu = ratio(b, kUncertainty);
  check(be > 2.0, "empowerment agent: E/se " + fmt("%.2f", be));
  check(std::abs(bu) < 2.0, "empowerment agent: U/se " + fmt("%.2f", bu));

  return check.verdict("graph " + std::to_string(g.size()) + " elements; uncertainty agent U/se " + fmt("%.2f", au) +
                       " E/se " + fmt("%.2f", ae) + "; empowerment agent E/se " + fmt("%.2f", be) + " U/se " +
                       fmt("%.2f", bu));
}

Verdict model2_interaction() {
  const auto g = make_extended_graph({});
  AgentSpec spec;
  spec.kind = PolicyVariant::SoftmaxValue;
  spec.weights = {1.0, 0.0};
  spec.temperature_mode = TemperatureMode::Weight;
  spec.sampling_temperature = 0.1;
  const auto r = run_model2(build_choice_dataset(simulate(g, spec, {0.0, 0.3, 0.7, 1.0}, 5, 500, "m2"), 0));
  const double z = ratio(r, kTempXUncertainty);
  Checks check;
  check(r.coef(kTempXUncertainty) > 0.0 && z > 2.0, "temperature:uncertainty / se " + fmt("%.2f", z));
  return check.verdict("beta " + fmt("%.3f", r.coef(kTempXUncertainty)) + ", beta/se " + fmt("%.2f", z));
}

Verdict logistic_and_welch() {
  Checks check;
  Rng rng(0);
  Design d;
  d.names = {"intercept", "x1", "x2"};
  const Eigen::Index n = 10000;
  d.x.resize(n, 3);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = rng.normal(), x2 = rng.normal();
    d.x(i, 0) = 1.0;
    d.x(i, 1) = x1;
    d.x(i, 2) = x2;
    const double p = 1.0 / (1.0 + std::exp(-(1.0 * x1 - 0.5 * x2)));
    d.y[i] = rng.uniform01() < p ? 1.0 : 0.0;
  }
  const auto r = fit_logistic(d);
  check(std::abs(r.coef("intercept")) < 0.1, "intercept");
  check(std::abs(r.coef("x1") - 1.0) < 0.1, "x1");
  check(std::abs(r.coef("x2") + 0.5) < 0.1, "x2");

  auto flipped = d;
  for (Eigen::Index i = 0; i < n; ++i) flipped.y[i] = 1.0 - d.y[i];
  const auto f = fit_logistic(flipped);
  for (std::size_t k = 0; k < r.terms.size(); ++k) {
    check(f.terms[k].estimate == -r.terms[k].estimate && f.terms[k].se == r.terms[k].se,
          "sign flip on " + r.terms[k].term);
  }

  // {1..5} vs {2..6}: both variances 2.5, se 1, t = -1, df = 1 / (2 * 0.5^2 / 4) = 8.
  const std::vector<double> lo{1, 2, 3, 4, 5}, hi{2, 3, 4, 5, 6};
  const auto w = stats::welch_t(lo, hi);
  check(std::abs(w.t + 1.0) < 1e-9, "welch t " + fmt("%.12g", w.t));
  check(std::abs(w.df - 8.0) < 1e-9, "welch df " + fmt("%.12g", w.df));
  return check.verdict("x1 " + fmt("%.3f", r.coef("x1")) + ", x2 " + fmt("%.3f", r.coef("x2")) + ", welch t " +
                       fmt("%.3f", w.t) + " df " + fmt("%.3f", w.df));
}

Verdict sae_suite() {
  Checks check;
  const std::size_t n = 10000, dim = 32, features = 5;
  const auto p = make_planted_features(n, dim, features, 0);
  SaeHyper h;
  h.latent = 32;
  h.sparsity = 1e-4;
  h.lr = 0.05;
  h.epochs = 50;
  h.momentum = true;
  bool tied = true;
  std::size_t steps = 0;
  const auto t = train_sae(p.x, h, [&](const SaeModel& m, std::size_t, double) {
    tied = tied && tied_weights_hold(m);
    ++steps;
  });
  check(tied && steps == t.steps && steps > 0, "tied weights after every step");
  check(t.reconstruction_mse < 0.01, "reconstruction MSE " + fmt("%.4g", t.reconstruction_mse));

  const auto z = encode(t.model, p.x);
  double weakest = 1.0;
  for (std::size_t f = 0; f < features; ++f) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = p.codes[i][f];
    const double r = std::abs(neuron_correlation(z, y).best_value);
    weakest = std::min(weakest, r);
    check(r > 0.9, "feature " + std::to_string(f) + " |r| " + fmt("%.3f", r));
  }

  Rng rng(42);
  std::vector<double> noise(n);
  for (auto& v : noise) v = rng.normal();
  const double null_r = std::abs(neuron_correlation(z, noise).best_value);
  check(null_r < 0.05, "null max |r| " + fmt("%.3f", null_r));

  const auto same = intervene(t.model, p.x, 0, 1.0);
  check(same.data == reconstruct(t.model, p.x).data, "intervene(factor=1) identity");

  // Two layers, the planted features only in layer 1.
  const auto planted = make_planted_features(800, 16, 4, 3);
  std::map<int, ActivationMatrix> layers;
  auto& noise_layer = layers[0];
  noise_layer = planted.x;
  Rng g(9);
  for (auto& v : noise_layer.data) v = static_cast<float>(std::abs(g.normal()));
  layers[1] = planted.x;
  std::vector<double> target(800);
  for (std::size_t i = 0; i < 800; ++i) target[i] = planted.codes[i][2];
  SaeHyper hs;
  hs.latent = 16;
  hs.sparsity = 1e-4;
  hs.lr = 0.05;
  hs.epochs = 30;
  hs.momentum = true;
  const auto profile = sweep_profile(layer_sweep(layers, {{"feature", ProbeKind::Pearson, target}}, hs), "feature");
  const auto peak = std::max_element(profile.begin(), profile.end(), [](const auto& x, const auto& y) {
    return std::abs(x.second) < std::abs(y.second);
  });
  check(peak != profile.end() && peak->first == 1, "layer sweep peak");

  return check.verdict("N=" + std::to_string(n) + ", MSE " + fmt("%.4g", t.reconstruction_mse) + ", min feature |r| " +
                       fmt("%.3f", weakest) + ", null |r| " + fmt("%.3f", null_r) + ", sweep peak layer " +
                       std::to_string(peak->first));
}

Verdict trace_suite() {
  Checks check;
  auto classifier = make_file_classifier(read_sentence_labels_tsv(data_path("trace_deepseek_labels.tsv")));
  std::vector<TrialTrace> trials;
  std::vector<std::vector<LabeledSpan>> spans;
  for (const auto& in : read_trace_jsonl(data_path("trace_deepseek.jsonl"))) {
    trials.push_back(label_trace(in.trial, in.text, *classifier));
    const auto& sp = trials.back().spans;
    for (std::size_t i = 1; i < sp.size(); ++i) {
      check(sp[i].label != sp[i - 1].label, "adjacent duplicate in trial " + std::to_string(in.trial));
    }
    std::size_t tokens = 0;
    for (const auto& s : sp) tokens += s.token_count;
    check(tokens == whitespace_tokens(in.text), "token conservation in trial " + std::to_string(in.trial));
    spans.push_back(sp);
  }
  const auto stats = trace_stats(trials);
  std::ostringstream csv;
  write_stats_csv(csv, stats);
  check(csv.str() == slurp(data_path("trace_deepseek_stats.csv")), "golden depth/token table");
  check(!stats.empty() && stats.front().coverage == kLabelCount, "7-label coverage");

  const auto m = transition_matrix(spans);
  double worst = 0.0;
  for (auto from : kAllLabels) {
    check(m.at(from, from) == 0.0, "diagonal");
    if (m.row_empty(from)) continue;
    double sum = 0.0;
    for (auto to : kAllLabels) sum += m.at(from, to);
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  check(worst <= 1e-9, "row sums");
  return check.verdict(std::to_string(trials.size()) + " golden trials, max row-sum err " + fmt("%.1e", worst));
}

Verdict reproducibility() {
  Checks check;
  auto config = experiment_config_from_json(
      nlohmann::json::parse(slurp(fs::path(ALCHEMY_SOURCE_DIR) / "configs" / "golden_random_g4.json")));
  TempDir a("repro_a"), b("repro_b");
  config.output_dir = a.path;
  const auto ma = run_experiment(config);
  config.output_dir = b.path;
  const auto mb = run_experiment(config);
  check(ma.sessions.size() == 1 && mb.sessions.size() == 1, "one session per run");
  const auto log = fs::path("sessions") / "session_000.jsonl";
  const auto val = fs::path("sessions") / "session_000_valuation.csv";
  check(slurp(a.path / log) == slurp(b.path / log), "session log identical across runs");
  check(slurp(a.path / val) == slurp(b.path / val), "valuation identical across runs");
  check(slurp(a.path / log) == slurp(data_path("golden_run/session_000.jsonl")), "session log matches golden");
  check(slurp(a.path / val) == slurp(data_path("golden_run/session_000_valuation.csv")), "valuation matches golden");

  const auto g = resolve_graph(config.graph);
  const auto replayed = replay_session(a.path / log, g);
  const auto logged = read_trial_log(a.path / log);
  check(replayed.trial_count() == 10 && logged.records.size() == 10, "replay length");
  for (std::size_t i = 0; i < std::min(logged.records.size(), replayed.history().size()); ++i) {
    check(replayed.history()[i].same_outcome(logged.records[i]), "replay trial " + std::to_string(i));
  }
  return check.verdict("10-trial golden run, byte-identical twice, replay clean");
}

Verdict behavior_trend() {
  const auto ds = dataset_path();
  if (!ds) return skipped();
  const auto g = load_graph(*ds);
  AgentSpec greedy;
  greedy.kind = PolicyVariant::GreedyValue;
  greedy.weights = {0.0, 1.0};
  AgentSpec random;
  std::vector<double> dg, dr;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto ga = make_agent(greedy, 0.0, s, nullptr);
    auto ra = make_agent(random, 0.0, s, nullptr);
    dg.push_back(static_cast<double>(session_summary(play_session(g, *ga, s, 500, {}).state).discoveries));
    dr.push_back(static_cast<double>(session_summary(play_session(g, *ra, s, 500, {}).state).discoveries));
  }
  const auto w = stats::welch_t(dg, dr);
  Checks check;
  check(stats::mean(dg) > stats::mean(dr), "greedy mean not above random");
  check(w.p_greater < 0.05, "one-sided p " + fmt("%.3g", w.p_greater));
  return check.verdict("greedy " + fmt("%.1f", stats::mean(dg)) + " vs random " + fmt("%.1f", stats::mean(dr)) +
                       " discoveries, one-sided p " + fmt("%.3g", w.p_greater));
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<std::string> only;
  bool list = false;
  app.add_option("--only", only, "Run only the named criteria");
  app.add_flag("--list", list, "List criterion names");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"difficulty-identity", 10, difficulty_identity},
      {"dataset-constants", 5, dataset_constants},
      {"valuation-oracle", 30, valuation_oracle},
      {"uncertainty-formula", 1, uncertainty_formula},
      {"strategy-attribution", 120, strategy_attribution},
      {"model2-interaction", 120, model2_interaction},
      {"logistic-solver", 10, logistic_and_welch},
      {"sae-suite", 300, sae_suite},
      {"trace-suite", 5, trace_suite},
      {"reproducibility", 5, reproducibility},
      {"behavior-trend", 300, behavior_trend},
  };

  if (list) {
    for (const auto& c : criteria) std::cout << c.name << "\n";
    return 0;
  }

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = fail(std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (v.status == Status::Pass && secs > c.budget_s) {
      v = fail(v.detail + "; over the " + fmt("%.0f", c.budget_s) + " s budget");
    }
    const char* word = v.status == Status::Pass ? "PASS" : v.status == Status::Fail ? "FAIL" : "SKIPPED";
    if (v.status == Status::Fail) ++failed;
    std::cout << "[" << c.name << "] " << word << ": " << v.detail << " (" << fmt("%.2f", secs) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
