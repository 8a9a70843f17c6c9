#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alchemy/agents.hpp"
#include "alchemy/analytics.hpp"
#include "alchemy/engine.hpp"
#include "alchemy/trial_log.hpp"
#include "alchemy/valuation.hpp"

namespace alchemy {

inline constexpr const char* kCodeVersion = "alchemy-bench 0.1.0";

// How an experiment temperature reaches a scripted agent.
enum class TemperatureMode {
  Sampling,  // softmax temperature = experiment temperature
  Weight,    // w_uncertainty scaled by the temperature; softmax uses sampling_temperature
};

struct AgentSpec {
  PolicyVariant kind = PolicyVariant::Random;
  ValueWeights weights;
  TemperatureMode temperature_mode = TemperatureMode::Sampling;
  double sampling_temperature = 1.0;
  LlmEndpointConfig llm;
  PromptVariant prompt = PromptVariant::Baseline;
};

struct ExperimentConfig {
  std::string graph = "g4";  // file path, or the built-in "g4"
  AgentSpec agent;
  std::vector<double> temperatures{0.0};
  std::size_t repetitions = 1;
  std::size_t max_trials = 500;
  std::uint64_t seed_base = 0;
  std::filesystem::path output_dir = "runs/default";
  std::size_t parallelism = 1;
  EmpowermentParams valuation;
  std::string run_id = "run";
};

// Throws ValidationError on schema or range problems.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

// "g4" or a JSON file path.
RecipeGraph resolve_graph(const std::string& spec);

struct SessionOutcome {
  SessionState state;
  std::vector<DecisionSnapshot> decisions;
  EmpowermentTable final_table;
};

// Plays one session, snapshotting uncertainty and empowerment of every
// inventory element before each decision and updating empowerment after.
SessionOutcome play_session(const RecipeGraph& graph, Agent& agent, std::uint64_t seed, std::size_t max_trials,
                            const EmpowermentParams& valuation);

// Builds the scripted or LLM agent a session at `temperature` uses.
std::unique_ptr<Agent> make_agent(const AgentSpec& spec, double temperature, std::uint64_t seed,
                                  const std::shared_ptr<ChatClient>& client);

struct SessionEntry {
  std::size_t index = 0;
  double temperature = 0.0;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  std::filesystem::path log;
  std::filesystem::path valuation;
  std::size_t trials = 0;
  std::size_t discoveries = 0;
  std::string error;  // aborted sessions only
};

struct RunManifest {
  std::string run_id;
  nlohmann::json config;
  std::string started_at;
  std::string finished_at;
  std::string code_version = kCodeVersion;
  std::string graph_hash;
  std::vector<SessionEntry> sessions;  // completed, by index
  std::vector<SessionEntry> aborted;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

// Runs |temperatures| x repetitions sessions; session i is seeded with
// seed_base + i whatever the scheduling. Writes sessions/*.jsonl, the
// matching *_valuation.csv files, and manifest.json last.
RunManifest run_experiment(const ExperimentConfig& config);

// Re-applies the logged proposals to a fresh session. Throws GraphMismatch
// when the log was written against a different graph and LogCorrupt when
// the log is malformed or the replay diverges.
SessionState replay_session(const std::filesystem::path& log_path, const RecipeGraph& graph);

// Loads the session traces of a finished run for analytics.
std::vector<SessionTrace> load_run_traces(const std::filesystem::path& manifest_path);

}  // namespace alchemy
