#include "alchemy/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <thread>

#include "alchemy/error.hpp"
#include "alchemy/synthetic.hpp"

namespace alchemy {
namespace {

std::string_view to_string(TemperatureMode m) { return m == TemperatureMode::Weight ? "weight" : "sampling"; }

TemperatureMode temperature_mode_from_string(const std::string& s) {
  if (s == "sampling") return TemperatureMode::Sampling;
  if (s == "weight") return TemperatureMode::Weight;
  throw ValidationError("temperature_mode must be 'sampling' or 'weight', got '" + s + "'");
}

PromptVariant prompt_from_string(const std::string& s) {
  if (s == "baseline") return PromptVariant::Baseline;
  if (s == "engineered") return PromptVariant::Engineered;
  throw ValidationError("prompt must be 'baseline' or 'engineered', got '" + s + "'");
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string session_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "session_%03zu", index);
  return buf;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    c.graph = j.value("graph", c.graph);
    c.temperatures = j.value("temperatures", c.temperatures);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.max_trials = j.value("max_trials", c.max_trials);
    c.seed_base = j.value("seed_base", c.seed_base);
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.parallelism = j.value("parallelism", c.parallelism);
    c.run_id = j.value("run_id", c.run_id);
    if (j.contains("valuation")) {
      const auto& v = j["valuation"];
      c.valuation.depth = v.value("depth", c.valuation.depth);
      c.valuation.discount = v.value("discount", c.valuation.discount);
      c.valuation.increase_factor = v.value("increase_factor", c.valuation.increase_factor);
      c.valuation.decrease_factor = v.value("decrease_factor", c.valuation.decrease_factor);
    }
    if (j.contains("agent")) {
      const auto& a = j["agent"];
      auto& s = c.agent;
      s.kind = policy_from_string(a.value("kind", std::string("random")));
      s.weights.uncertainty = a.value("w_uncertainty", s.weights.uncertainty);
      s.weights.empowerment = a.value("w_empowerment", s.weights.empowerment);
      s.temperature_mode = temperature_mode_from_string(a.value("temperature_mode", std::string("sampling")));
      s.sampling_temperature = a.value("sampling_temperature", s.sampling_temperature);
      s.prompt = prompt_from_string(a.value("prompt", std::string("baseline")));
      if (a.contains("llm")) {
        const auto& l = a["llm"];
        auto& cc = s.llm.client;
        cc.base_url = l.value("base_url", cc.base_url);
        cc.model = l.value("model", cc.model);
        cc.api_key_env = l.value("api_key_env", cc.api_key_env);
        cc.max_retries = l.value("max_retries", cc.max_retries);
        cc.timeout = std::chrono::milliseconds(l.value("timeout_ms", static_cast<long>(cc.timeout.count())));
        cc.max_concurrent = l.value("max_concurrent", cc.max_concurrent);
        if (l.contains("history_lines") && !l["history_lines"].is_null()) {
          s.llm.window.lines = l["history_lines"].get<std::size_t>();
        }
        s.llm.window.char_budget = l.value("char_budget", s.llm.window.char_budget);
        s.llm.window.fallback_lines = l.value("fallback_lines", s.llm.window.fallback_lines);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad experiment config: ") + e.what());
  }
  validate(c);
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json agent{{"kind", to_string(c.agent.kind)},
                       {"w_uncertainty", c.agent.weights.uncertainty},
                       {"w_empowerment", c.agent.weights.empowerment},
                       {"temperature_mode", to_string(c.agent.temperature_mode)},
                       {"sampling_temperature", c.agent.sampling_temperature},
                       {"prompt", c.agent.prompt == PromptVariant::Engineered ? "engineered" : "baseline"}};
  if (c.agent.kind == PolicyVariant::Llm) {
    const auto& cc = c.agent.llm.client;
    // The key itself never reaches disk, only the variable name.
    agent["llm"] = {{"base_url", cc.base_url},
                    {"model", cc.model},
                    {"api_key_env", cc.api_key_env},
                    {"max_retries", cc.max_retries},
                    {"timeout_ms", cc.timeout.count()},
                    {"max_concurrent", cc.max_concurrent},
                    {"history_lines", c.agent.llm.window.lines ? nlohmann::json(*c.agent.llm.window.lines)
                                                               : nlohmann::json(nullptr)},
                    {"char_budget", c.agent.llm.window.char_budget},
                    {"fallback_lines", c.agent.llm.window.fallback_lines}};
  }
  return {{"graph", c.graph},
          {"agent", agent},
          {"temperatures", c.temperatures},
          {"repetitions", c.repetitions},
          {"max_trials", c.max_trials},
          {"seed_base", c.seed_base},
          {"output_dir", c.output_dir.string()},
          {"parallelism", c.parallelism},
          {"run_id", c.run_id},
          {"valuation",
           {{"depth", c.valuation.depth},
            {"discount", c.valuation.discount},
            {"increase_factor", c.valuation.increase_factor},
            {"decrease_factor", c.valuation.decrease_factor}}}};
}

void validate(const ExperimentConfig& c) {
  if (c.repetitions < 1) throw ValidationError("repetitions must be >= 1");
  if (c.max_trials < 1) throw ValidationError("max_trials must be >= 1");
  if (c.temperatures.empty()) throw ValidationError("temperatures must be non-empty");
  for (double t : c.temperatures) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("temperatures must be finite and >= 0");
  }
  if (c.parallelism < 1) throw ValidationError("parallelism must be >= 1");
  if (c.valuation.depth < 0) throw ValidationError("valuation depth must be >= 0");
  if (!(c.agent.sampling_temperature >= 0.0)) throw ValidationError("sampling_temperature must be >= 0");
  if (c.run_id.empty()) throw ValidationError("run_id must be non-empty");
}

RecipeGraph resolve_graph(const std::string& spec) {
  if (spec == "g4") return make_g4();
  const std::string extended = "extended:";
  if (spec.rfind(extended, 0) == 0) {
    ExtendedGraphParams p;
    try {
      p.seed = std::stoull(spec.substr(extended.size()));
    } catch (const std::exception&) {
      throw ValidationError("bad graph spec '" + spec + "'; expected extended:<seed>");
    }
    return make_extended_graph(p);
  }
  return load_graph(spec);
}

namespace {

// Plays until the session closes; on an exception `out` keeps every trial
// completed so far.
void drive(const RecipeGraph& graph, Agent& agent, SessionOutcome& out) {
  auto& state = out.state;
  auto& table = out.final_table;
  while (!state.closed()) {
    DecisionSnapshot snap;
    snap.trial = state.trial_count();
    snap.inventory = state.inventory();
    const auto u = UncertaintyState::from_session(state);
    for (ElementId e : snap.inventory) {
      snap.uncertainty.push_back(u(e));
      snap.empowerment.push_back(table[e]);
    }
    auto proposal = agent.propose(state, table);
    const auto& rec = state.apply(proposal.names.first, proposal.names.second, std::move(proposal.meta));
    for (const auto* name : {&rec.proposed.first, &rec.proposed.second}) {
      const auto id = graph.find(*name);
      if (!id) continue;
      if (std::find(snap.inventory.begin(), snap.inventory.end(), *id) == snap.inventory.end()) continue;
      if (std::find(snap.chosen.begin(), snap.chosen.end(), *id) == snap.chosen.end()) snap.chosen.push_back(*id);
    }
    update_empowerment_in_place(table, rec);
    out.decisions.push_back(std::move(snap));
  }
}

}  // namespace

SessionOutcome play_session(const RecipeGraph& graph, Agent& agent, std::uint64_t seed, std::size_t max_trials,
                            const EmpowermentParams& valuation) {
  if (max_trials < 1) throw ValidationError("max_trials must be >= 1");
  SessionOutcome out{SessionState(graph, seed, SessionConfig{max_trials}), {}, base_empowerment(graph, valuation)};
  drive(graph, agent, out);
  return out;
}

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, double temperature, std::uint64_t seed,
                                  const std::shared_ptr<ChatClient>& client) {
  if (spec.kind == PolicyVariant::Llm) {
    if (!client) throw ValidationError("llm agent needs a chat client");
    return make_llm_agent(client, temperature, make_prompt_bundle(spec.prompt), spec.llm.window);
  }
  AgentPolicy p;
  p.variant = spec.kind;
  p.weights = spec.weights;
  p.seed = seed;
  if (spec.temperature_mode == TemperatureMode::Sampling) {
    p.temperature = temperature;
  } else {
    p.weights.uncertainty = spec.weights.uncertainty * temperature;
    p.temperature = spec.sampling_temperature;
  }
  return make_scripted_agent(p);
}

namespace {

nlohmann::json entry_to_json(const SessionEntry& e) {
  nlohmann::json j{{"index", e.index},       {"temperature", e.temperature}, {"repetition", e.repetition},
                   {"seed", e.seed},         {"log", e.log.generic_string()}, {"valuation", e.valuation.generic_string()},
                   {"trials", e.trials},     {"discoveries", e.discoveries}};
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

SessionEntry entry_from_json(const nlohmann::json& j) {
  SessionEntry e;
  e.index = j.at("index").get<std::size_t>();
  e.temperature = j.at("temperature").get<double>();
  e.repetition = j.at("repetition").get<std::size_t>();
  e.seed = j.at("seed").get<std::uint64_t>();
  e.log = j.at("log").get<std::string>();
  e.valuation = j.value("valuation", std::string());
  e.trials = j.value("trials", std::size_t{0});
  e.discoveries = j.value("discoveries", std::size_t{0});
  e.error = j.value("error", std::string());
  return e;
}

}  // namespace

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& e : m.sessions) sessions.push_back(entry_to_json(e));
  nlohmann::json aborted = nlohmann::json::array();
  for (const auto& e : m.aborted) aborted.push_back(entry_to_json(e));
  return {{"v", 1},
          {"run_id", m.run_id},
          {"config", m.config},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at},
          {"code_version", m.code_version},
          {"graph_hash", m.graph_hash},
          {"sessions", sessions},
          {"aborted", aborted}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.run_id = j.at("run_id").get<std::string>();
    m.config = j.at("config");
    m.started_at = j.value("started_at", std::string());
    m.finished_at = j.value("finished_at", std::string());
    m.code_version = j.value("code_version", std::string());
    m.graph_hash = j.value("graph_hash", std::string());
    for (const auto& e : j.at("sessions")) m.sessions.push_back(entry_from_json(e));
    for (const auto& e : j.value("aborted", nlohmann::json::array())) m.aborted.push_back(entry_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad run manifest: ") + e.what());
  }
  return m;
}

RunManifest run_experiment(const ExperimentConfig& config) {
  validate(config);
  const auto graph = resolve_graph(config.graph);
  std::shared_ptr<ChatClient> client;
  if (config.agent.kind == PolicyVariant::Llm) client = std::make_shared<ChatClient>(config.agent.llm.client);

  RunManifest manifest;
  manifest.run_id = config.run_id;
  manifest.config = to_json(config);
  manifest.started_at = utc_now();
  manifest.graph_hash = graph.content_hash();

  const auto& root = config.output_dir;
  std::filesystem::create_directories(root / "sessions");

  const std::size_t total = config.temperatures.size() * config.repetitions;
  std::vector<SessionEntry> entries(total);
  std::vector<bool> aborted(total, false);
  std::vector<std::exception_ptr> failures(total);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      auto& e = entries[i];
      e.index = i;
      e.temperature = config.temperatures[i / config.repetitions];
      e.repetition = i % config.repetitions;
      e.seed = config.seed_base + i;
      e.log = std::filesystem::path("sessions") / (session_stem(i) + ".jsonl");
      e.valuation = std::filesystem::path("sessions") / (session_stem(i) + "_valuation.csv");
      try {
        auto agent = make_agent(config.agent, e.temperature, e.seed, client);
        SessionHeader header{graph.content_hash(), e.seed,          config.max_trials, config.run_id,
                             agent->label(),       e.temperature,   e.repetition};
        SessionOutcome played{SessionState(graph, e.seed, SessionConfig{config.max_trials}), {},
                              base_empowerment(graph, config.valuation)};
        std::string error;
        // An LLM transport failure aborts the session but keeps its trials.
        try {
          drive(graph, *agent, played);
        } catch (const TransportError& t) {
          error = t.what();
        }
        const auto& state = played.state;
        const auto& decisions = played.decisions;
        {
          std::ofstream out(root / e.log, std::ios::binary | std::ios::trunc);
          write_trial_log(out, header, state);
          if (!out) throw Error("cannot write " + (root / e.log).string());
        }
        {
          std::ofstream out(root / e.valuation, std::ios::binary | std::ios::trunc);
          write_snapshot_csv(out, decisions);
          if (!out) throw Error("cannot write " + (root / e.valuation).string());
        }
        const auto summary = session_summary(state);
        e.trials = summary.trials;
        e.discoveries = summary.discoveries;
        if (!error.empty()) {
          e.error = error;
          aborted[i] = true;
        }
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::min(config.parallelism, total);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  for (std::size_t i = 0; i < total; ++i) (aborted[i] ? manifest.aborted : manifest.sessions).push_back(entries[i]);

  manifest.finished_at = utc_now();
  const auto path = root / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  out << to_json(manifest).dump(2) << '\n';
  if (!out) throw Error("cannot write " + path.string());
  return manifest;
}

SessionState replay_session(const std::filesystem::path& log_path, const RecipeGraph& graph) {
  const auto log = read_trial_log(log_path);
  if (log.header.graph_hash != graph.content_hash()) {
    throw GraphMismatch(log_path.string() + " was written against graph " + log.header.graph_hash +
                        ", not " + graph.content_hash());
  }
  SessionState state(graph, log.header.seed, SessionConfig{log.header.max_trials});
  for (std::size_t k = 0; k < log.records.size(); ++k) {
    const auto& logged = log.records[k];
    const auto line = std::to_string(k + 2);  // header is line 1
    if (state.closed()) throw LogCorrupt(log_path.string() + ":" + line + ": trial past the session limit");
    const auto& replayed = state.apply(logged.proposed.first, logged.proposed.second, logged.agent_meta);
    if (!replayed.same_outcome(logged)) {
      throw LogCorrupt(log_path.string() + ":" + line + ": replay diverged from the logged outcome");
    }
  }
  return state;
}

std::vector<SessionTrace> load_run_traces(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ParseError("cannot open " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  const auto m = manifest_from_json(j);
  const auto root = manifest_path.parent_path();
  std::vector<SessionTrace> out;
  for (const auto& e : m.sessions) {
    SessionTrace t;
    t.run_id = m.run_id + "/" + session_stem(e.index);
    t.temperature = e.temperature;
    t.decisions = read_snapshot_csv(root / e.valuation);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace alchemy
