// Command-line front end: experiments, analysis, SAE tooling, trace labeling
// and the HTTP service.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "alchemy/analytics.hpp"
#include "alchemy/error.hpp"
#include "alchemy/harness.hpp"
#include "alchemy/recipes.hpp"
#include "alchemy/sae.hpp"
#include "alchemy/service.hpp"
#include "alchemy/synthetic.hpp"
#include "alchemy/trace.hpp"
#include "alchemy/trial_log.hpp"

namespace fs = std::filesystem;
using namespace alchemy;

namespace {

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// Writes to `path`, or stdout when it is empty.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  fn(out);
}

void print_regression(const RegressionResult& r, const std::string& title) {
  std::cout << title << " (n=" << r.n << ", converged=" << (r.converged ? "yes" : "no") << ")\n";
  std::cout << std::left << std::setw(26) << "term" << std::right << std::setw(12) << "estimate" << std::setw(12)
            << "se" << std::setw(10) << "z" << std::setw(12) << "p" << "\n";
  for (const auto& t : r.terms) {
    std::cout << std::left << std::setw(26) << t.term << std::right << std::fixed << std::setprecision(4)
              << std::setw(12) << t.estimate << std::setw(12) << t.se << std::setw(10) << std::setprecision(3) << t.z
              << std::setw(12) << std::scientific << std::setprecision(3) << t.p << std::defaultfloat << "\n";
  }
}

std::vector<SessionTrace> traces_of(const std::vector<std::string>& manifests) {
  std::vector<SessionTrace> all;
  for (const auto& m : manifests) {
    auto t = load_run_traces(m);
    all.insert(all.end(), t.begin(), t.end());
  }
  return all;
}

RunManifest load_manifest(const fs::path& path) { return manifest_from_json(read_json_file(path)); }

std::vector<double> discoveries_of(const fs::path& manifest) {
  std::vector<double> out;
  for (const auto& s : load_manifest(manifest).sessions) out.push_back(static_cast<double>(s.discoveries));
  return out;
}

std::vector<double> read_column(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": not a number");
    }
  }
  return out;
}

ChatClientConfig llm_from_flags(const std::string& base_url, const std::string& model) {
  ChatClientConfig c;
  if (!base_url.empty()) c.base_url = base_url;
  if (!model.empty()) c.model = model;
  return c;
}

HttpService* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crafting-game exploration benchmark: simulation, analysis and interpretability tools"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  std::string run_config;
  std::string run_out;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::size_t> run_trials, run_reps, run_par;
  run->add_option("config", run_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--output-dir", run_out, "Override output_dir");
  run->add_option("--seed-base", run_seed, "Override seed_base");
  run->add_option("--max-trials", run_trials, "Override max_trials");
  run->add_option("--repetitions", run_reps, "Override repetitions");
  run->add_option("--parallelism", run_par, "Override parallelism");

  // replay
  auto* replay = app.add_subcommand("replay", "Replay a session log against a graph");
  std::string replay_log, replay_graph = "g4";
  replay->add_option("log", replay_log, "Session JSONL")->required()->check(CLI::ExistingFile);
  replay->add_option("--graph", replay_graph, "Graph spec: g4, extended:<seed> or a JSON path");

  // difficulty
  auto* diff = app.add_subcommand("difficulty", "Success probability versus inventory size under random play");
  std::string diff_graph = "g4", diff_out;
  std::size_t diff_seeds = 20, diff_trials = 500;
  diff->add_option("--graph", diff_graph, "Graph spec");
  diff->add_option("--seeds", diff_seeds, "Number of random playthroughs");
  diff->add_option("--max-trials", diff_trials, "Trials per playthrough");
  diff->add_option("--out", diff_out, "CSV output (default stdout)");

  // make-graph
  auto* mk = app.add_subcommand("make-graph", "Write a built-in or synthetic graph as JSON");
  std::string mk_kind = "g4", mk_out;
  std::uint64_t mk_seed = 0;
  std::size_t mk_elements = 40, mk_recipes = 80;
  mk->add_option("--kind", mk_kind, "g4 | extended | random")->check(CLI::IsMember({"g4", "extended", "random"}));
  mk->add_option("--seed", mk_seed, "Generator seed");
  mk->add_option("--elements", mk_elements, "Element count (random)");
  mk->add_option("--recipes", mk_recipes, "Recipe count (random)");
  mk->add_option("--out", mk_out, "Output path (default stdout)");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Behavioral and regression analyses");
  analyze->require_subcommand(1);
  auto* beh = analyze->add_subcommand("behavior", "Category proportions per run and temperature");
  std::vector<std::string> beh_runs;
  beh->add_option("manifests", beh_runs, "Run manifests")->required()->check(CLI::ExistingFile);

  auto* m1 = analyze->add_subcommand("model1", "chosen ~ trial + uncertainty + empowerment, per run then pooled");
  std::vector<std::string> m1_runs;
  std::uint64_t m1_seed = 0;
  std::string m1_csv;
  m1->add_option("manifests", m1_runs, "Run manifests")->required()->check(CLI::ExistingFile);
  m1->add_option("--seed", m1_seed, "Negative-sampling seed");
  m1->add_option("--csv", m1_csv, "Write the pooled table as CSV");

  auto* m2 = analyze->add_subcommand("model2", "Pooled fit with temperature interactions");
  std::vector<std::string> m2_runs;
  std::uint64_t m2_seed = 0;
  std::string m2_csv;
  m2->add_option("manifests", m2_runs, "Run manifests")->required()->check(CLI::ExistingFile);
  m2->add_option("--seed", m2_seed, "Negative-sampling seed");
  m2->add_option("--csv", m2_csv, "Write the table as CSV");

  auto* tt = analyze->add_subcommand("ttest", "Welch t-test on discoveries of two runs (or two value files)");
  std::string tt_a, tt_b;
  bool tt_values = false;
  tt->add_option("a", tt_a, "Manifest or value file")->required()->check(CLI::ExistingFile);
  tt->add_option("b", tt_b, "Manifest or value file")->required()->check(CLI::ExistingFile);
  tt->add_flag("--values", tt_values, "Inputs are one number per line");

  auto* pct = analyze->add_subcommand("percentile", "Percentile of each session against a human baseline");
  std::string pct_baseline, pct_run;
  pct->add_option("--baseline", pct_baseline, "Baseline JSON {trials_cap, discoveries}")
      ->required()
      ->check(CLI::ExistingFile);
  pct->add_option("manifest", pct_run, "Run manifest")->required()->check(CLI::ExistingFile);

  // sae
  auto* sae = app.add_subcommand("sae", "Sparse autoencoder tools");
  sae->require_subcommand(1);
  SaeHyper hyper;
  auto add_hyper = [&](CLI::App* c) {
    c->add_option("--latent", hyper.latent, "Latent size M (0 = input size)");
    c->add_option("--lambda", hyper.sparsity, "Sparsity weight");
    c->add_option("--lr", hyper.lr, "Learning rate");
    c->add_option("--batch", hyper.batch, "Batch size");
    c->add_option("--epochs", hyper.epochs, "Epochs");
    c->add_option("--seed", hyper.seed, "Training seed");
    c->add_flag("--momentum", hyper.momentum, "Heavy-ball momentum 0.9");
  };
  auto* st = sae->add_subcommand("train", "Train an SAE on an activation matrix");
  std::string st_in, st_out, st_loss;
  st->add_option("input", st_in, "Activation matrix (.saem)")->required()->check(CLI::ExistingFile);
  st->add_option("--out", st_out, "Checkpoint path")->required();
  st->add_option("--loss-csv", st_loss, "Per-epoch loss curve");
  add_hyper(st);

  auto* sp = sae->add_subcommand("probe", "Probe latent neurons against a per-row target");
  std::string sp_model, sp_in, sp_target, sp_kind = "pearson";
  sp->add_option("--model", sp_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  sp->add_option("--input", sp_in, "Activation matrix")->required()->check(CLI::ExistingFile);
  sp->add_option("--target", sp_target, "One value per row")->required()->check(CLI::ExistingFile);
  sp->add_option("--kind", sp_kind, "pearson | beta")->check(CLI::IsMember({"pearson", "beta"}));

  auto* sw = sae->add_subcommand("sweep", "Train one SAE per layer and probe each");
  std::vector<std::string> sw_layers, sw_targets;
  std::string sw_kind = "pearson";
  sw->add_option("--layer", sw_layers, "layer=path.saem, repeatable")->required();
  sw->add_option("--target", sw_targets, "name=values.txt, repeatable")->required();
  sw->add_option("--kind", sw_kind, "pearson | beta")->check(CLI::IsMember({"pearson", "beta"}));
  add_hyper(sw);

  auto* si = sae->add_subcommand("intervene", "Scale one latent neuron and write the reconstruction");
  std::string si_model, si_in, si_out;
  std::size_t si_neuron = 0;
  double si_factor = 0.0;
  si->add_option("--model", si_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  si->add_option("--input", si_in, "Activation matrix")->required()->check(CLI::ExistingFile);
  si->add_option("--neuron", si_neuron, "Latent index")->required();
  si->add_option("--factor", si_factor, "Scale factor (0 ablates)")->required();
  si->add_option("--out", si_out, "Output matrix")->required();

  auto* spl = sae->add_subcommand("planted", "Write a planted-feature activation matrix");
  std::size_t spl_rows = 1000, spl_dim = 32, spl_features = 5;
  std::uint64_t spl_seed = 0;
  std::string spl_out, spl_codes;
  spl->add_option("--rows", spl_rows, "Rows");
  spl->add_option("--dim", spl_dim, "Columns");
  spl->add_option("--features", spl_features, "Planted features");
  spl->add_option("--seed", spl_seed, "Seed");
  spl->add_option("--out", spl_out, "Output matrix")->required();
  spl->add_option("--codes", spl_codes, "Write feature codes (CSV) here");

  // trace
  auto* trace = app.add_subcommand("trace", "Reasoning-trace labeling and statistics");
  trace->require_subcommand(1);
  auto* tl = trace->add_subcommand("label", "Segment, classify and merge traces");
  std::string tl_in, tl_labels, tl_out, tl_url, tl_model;
  std::size_t tl_batch = 20;
  tl->add_option("input", tl_in, "Traces JSONL {trial, text}")->required()->check(CLI::ExistingFile);
  tl->add_option("--labels", tl_labels, "Sentence-label TSV (offline classifier)")->check(CLI::ExistingFile);
  tl->add_option("--llm-url", tl_url, "Chat-completions base URL for the LLM classifier");
  tl->add_option("--llm-model", tl_model, "Classifier model name");
  tl->add_option("--batch", tl_batch, "Sentences per classifier request");
  tl->add_option("--out", tl_out, "Span TSV output (default stdout)");

  auto* ts = trace->add_subcommand("stats", "Depth, token and coverage table per trial");
  std::string ts_in, ts_out;
  ts->add_option("spans", ts_in, "Span TSV")->required()->check(CLI::ExistingFile);
  ts->add_option("--out", ts_out, "CSV output (default stdout)");

  auto* ttr = trace->add_subcommand("transitions", "Label transition matrix");
  std::string ttr_in, ttr_out;
  ttr->add_option("spans", ttr_in, "Span TSV")->required()->check(CLI::ExistingFile);
  ttr->add_option("--out", ttr_out, "CSV output (default stdout)");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP session service");
  std::string sv_host = "127.0.0.1", sv_graph = "g4", sv_ckpt, sv_static;
  int sv_port = 8080;
  std::size_t sv_trials = 0;
  serve->add_option("--host", sv_host, "Bind address");
  serve->add_option("--port", sv_port, "Port");
  serve->add_option("--graph", sv_graph, "Graph spec served as 'default'");
  serve->add_option("--checkpoint-dir", sv_ckpt, "Session checkpoint directory");
  serve->add_option("--static-dir", sv_static, "Serve static files from here");
  serve->add_option("--max-trials", sv_trials, "Trial cap per session (0 = none)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto config = experiment_config_from_json(read_json_file(run_config));
      if (!run_out.empty()) config.output_dir = run_out;
      if (run_seed) config.seed_base = *run_seed;
      if (run_trials) config.max_trials = *run_trials;
      if (run_reps) config.repetitions = *run_reps;
      if (run_par) config.parallelism = *run_par;
      const auto m = run_experiment(config);
      std::cout << "run " << m.run_id << ": " << m.sessions.size() << " sessions, " << m.aborted.size()
                << " aborted -> " << (config.output_dir / "manifest.json").string() << "\n";
      return m.aborted.empty() ? 0 : 3;
    }
    if (*replay) {
      const auto graph = resolve_graph(replay_graph);
      const auto state = replay_session(replay_log, graph);
      const auto s = session_summary(state);
      std::cout << "replayed " << s.trials << " trials, " << s.discoveries << " discoveries: OK\n";
      return 0;
    }
    if (*diff) {
      const auto graph = resolve_graph(diff_graph);
      std::vector<std::uint64_t> seeds(diff_seeds);
      for (std::size_t i = 0; i < diff_seeds; ++i) seeds[i] = i;
      const auto curve = difficulty_curve(graph, seeds, diff_trials);
      emit(diff_out, [&](std::ostream& out) {
        out << "inventory_size,mean_probability,samples\n";
        for (const auto& p : curve) out << p.inventory_size << ',' << p.mean_probability << ',' << p.samples << '\n';
      });
      return 0;
    }
    if (*mk) {
      RecipeGraph g = mk_kind == "g4"         ? make_g4()
                      : mk_kind == "extended" ? make_extended_graph(ExtendedGraphParams{.seed = mk_seed})
                                              : make_random_graph(mk_elements, mk_recipes, mk_seed);
      emit(mk_out, [&](std::ostream& out) { out << graph_to_json(g) << '\n'; });
      return 0;
    }
    if (*beh) {
      std::map<std::string, std::vector<std::vector<TrialRecord>>> groups;
      for (const auto& path : beh_runs) {
        const auto m = load_manifest(path);
        for (const auto& s : m.sessions) {
          std::ostringstream key;
          key << m.run_id << " T=" << s.temperature;
          groups[key.str()].push_back(read_trial_log(fs::path(path).parent_path() / s.log).records);
        }
      }
      std::cout << "group,trials";
      for (auto c : kAllCategories) std::cout << ',' << to_string(c);
      std::cout << '\n';
      for (const auto& row : behavior_summary(groups)) {
        std::cout << row.group << ',' << row.trials;
        for (auto c : kAllCategories) std::cout << ',' << row.proportion.at(c);
        std::cout << '\n';
      }
      return 0;
    }
    if (*m1) {
      const auto data = build_choice_dataset(traces_of(m1_runs), m1_seed);
      const auto r = run_model1(data);
      print_regression(r.pooled, "model 1, pooled over " + std::to_string(r.per_run.size()) + " runs");
      if (!m1_csv.empty()) emit(m1_csv, [&](std::ostream& out) { write_regression_csv(out, r.pooled, "pooled"); });
      return 0;
    }
    if (*m2) {
      const auto data = build_choice_dataset(traces_of(m2_runs), m2_seed);
      const auto r = run_model2(data);
      print_regression(r, "model 2");
      if (!m2_csv.empty()) emit(m2_csv, [&](std::ostream& out) { write_regression_csv(out, r, "model2"); });
      return 0;
    }
    if (*tt) {
      const auto a = tt_values ? read_column(tt_a) : discoveries_of(tt_a);
      const auto b = tt_values ? read_column(tt_b) : discoveries_of(tt_b);
      const auto r = stats::welch_t(a, b);
      std::cout << "mean_a=" << stats::mean(a) << " mean_b=" << stats::mean(b) << " t=" << r.t << " df=" << r.df
                << " p=" << r.p << " p(a>b)=" << r.p_greater << "\n";
      return 0;
    }
    if (*pct) {
      const auto baseline = load_human_baseline(pct_baseline);
      const auto m = load_manifest(pct_run);
      std::cout << "session,temperature,discoveries,percentile\n";
      for (const auto& s : m.sessions) {
        std::cout << s.index << ',' << s.temperature << ',' << s.discoveries << ','
                  << percentile_rank(static_cast<double>(s.discoveries), baseline) << '\n';
      }
      return 0;
    }
    if (*st) {
      const auto x = read_activation_matrix(st_in);
      const auto t = train_sae(x, hyper);
      write_sae_checkpoint(st_out, t.model);
      if (!st_loss.empty()) {
        emit(st_loss, [&](std::ostream& out) {
          out << "epoch,loss\n";
          for (std::size_t e = 0; e < t.loss_curve.size(); ++e) out << e << ',' << t.loss_curve[e] << '\n';
        });
      }
      std::cout << "trained M=" << t.model.latent << " D=" << t.model.dim << " steps=" << t.steps
                << " mse=" << t.reconstruction_mse << " live=" << t.live_neurons << "\n";
      return 0;
    }
    if (*sp) {
      const auto model = read_sae_checkpoint(sp_model);
      const auto z = encode(model, read_activation_matrix(sp_in));
      const auto y = read_column(sp_target);
      ProbeResult r;
      if (sp_kind == "pearson") {
        r = neuron_correlation(z, y);
      } else {
        std::vector<int> chosen(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) chosen[i] = y[i] != 0.0;
        r = neuron_choice_beta(z, chosen);
      }
      std::cout << "best_neuron=" << r.best_neuron << " value=" << r.best_value << " failed_fits=" << r.errors.size()
                << "\n";
      return 0;
    }
    if (*sw) {
      std::map<int, ActivationMatrix> layers;
      for (const auto& spec : sw_layers) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ValidationError("--layer expects layer=path, got " + spec);
        layers.emplace(std::stoi(spec.substr(0, eq)), read_activation_matrix(spec.substr(eq + 1)));
      }
      std::vector<ProbeTarget> targets;
      for (const auto& spec : sw_targets) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ValidationError("--target expects name=path, got " + spec);
        targets.push_back({spec.substr(0, eq), sw_kind == "pearson" ? ProbeKind::Pearson : ProbeKind::ChoiceBeta,
                           read_column(spec.substr(eq + 1))});
      }
      const auto rows = layer_sweep(layers, targets, hyper);
      std::cout << "layer,target,best_neuron,value\n";
      for (const auto& row : rows) {
        for (const auto& [name, r] : row.probes) {
          std::cout << row.layer << ',' << name << ',' << r.best_neuron << ',' << r.best_value << '\n';
        }
      }
      return 0;
    }
    if (*si) {
      const auto model = read_sae_checkpoint(si_model);
      const auto x = read_activation_matrix(si_in);
      write_activation_matrix(si_out, intervene(model, x, si_neuron, si_factor));
      return 0;
    }
    if (*spl) {
      const auto data = make_planted_features(spl_rows, spl_dim, spl_features, spl_seed);
      write_activation_matrix(spl_out, data.x);
      if (!spl_codes.empty()) {
        emit(spl_codes, [&](std::ostream& out) {
          for (const auto& row : data.codes) {
            for (std::size_t f = 0; f < row.size(); ++f) out << (f ? "," : "") << row[f];
            out << '\n';
          }
        });
      }
      return 0;
    }
    if (*tl) {
      std::unique_ptr<SentenceClassifier> classifier;
      if (!tl_labels.empty()) {
        classifier = make_file_classifier(read_sentence_labels_tsv(tl_labels));
      } else if (!tl_url.empty() || !tl_model.empty()) {
        classifier = make_llm_classifier(std::make_shared<ChatClient>(llm_from_flags(tl_url, tl_model)), tl_batch);
      } else {
        throw ValidationError("trace label needs --labels or --llm-url/--llm-model");
      }
      std::vector<TrialTrace> out;
      for (const auto& t : read_trace_jsonl(tl_in)) out.push_back(label_trace(t.trial, t.text, *classifier));
      emit(tl_out, [&](std::ostream& o) { write_spans_tsv(o, out); });
      return 0;
    }
    if (*ts) {
      const auto stats = trace_stats(read_spans_tsv(ts_in));
      emit(ts_out, [&](std::ostream& out) { write_stats_csv(out, stats); });
      return 0;
    }
    if (*ttr) {
      std::vector<std::vector<LabeledSpan>> trials;
      for (auto& t : read_spans_tsv(ttr_in)) trials.push_back(std::move(t.spans));
      const auto m = transition_matrix(trials);
      emit(ttr_out, [&](std::ostream& out) { write_transition_csv(out, m); });
      return 0;
    }
    if (*serve) {
      ServiceOptions options;
      options.default_graph = sv_graph;
      options.checkpoint_dir = sv_ckpt;
      if (!sv_static.empty()) options.static_dir = sv_static;
      options.max_trials = sv_trials;
      if (const char* token = std::getenv("ALCHEMY_SERVICE_TOKEN")) options.token = token;
      HttpService service(options);
      if (!service.bind(sv_host, sv_port)) throw Error("cannot bind " + sv_host + ":" + std::to_string(sv_port));
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving on http://" << sv_host << ":" << sv_port << " (" << service.registry().recovered()
                << " sessions recovered)\n";
      service.listen();
      g_service = nullptr;
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
