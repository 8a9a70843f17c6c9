#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "alchemy/chat_client.hpp"
#include "alchemy/engine.hpp"
#include "alchemy/rng.hpp"
#include "alchemy/valuation.hpp"

namespace alchemy {

enum class PolicyVariant { Random, SoftmaxValue, GreedyValue, Llm };

std::string_view to_string(PolicyVariant v);
PolicyVariant policy_from_string(std::string_view s);

struct ValueWeights {
  double uncertainty = 1.0;
  double empowerment = 0.0;
};

struct AgentPolicy {
  PolicyVariant variant = PolicyVariant::Random;
  ValueWeights weights;
  double temperature = 1.0;  // >= 0; 0 means argmax
  std::uint64_t seed = 0;
};

CanonicalPair propose_random(const SessionState& state, Rng& rng);

// w_u * (U_a + U_b) / 2 + w_e * combination_empowerment(pair).
double pair_score(const SessionState& state, const EmpowermentTable& table, const ValueWeights& weights,
                  CanonicalPair pair);

// Samples a pair with probability proportional to exp(score / temperature).
// Temperature 0 takes the argmax, ties going to the smallest canonical pair.
CanonicalPair propose_softmax(const SessionState& state, const EmpowermentTable& table, const AgentPolicy& policy,
                              Rng& rng);

// Argmax of the score over pairs not yet attempted in this session (all
// pairs once every pair has been tried); ties are broken uniformly at random.
CanonicalPair propose_greedy(const SessionState& state, const EmpowermentTable& table, const AgentPolicy& policy,
                             Rng& rng);

enum class PromptVariant { Baseline, Engineered };

struct PromptBundle {
  std::string system;
  std::string inventory_block;  // heading line
  std::string history_block;    // heading line
  std::string instruction;
  PromptVariant variant = PromptVariant::Baseline;
};

PromptBundle make_prompt_bundle(PromptVariant variant);

struct HistoryWindow {
  std::optional<std::size_t> lines;  // nullopt = full history
  // Full history falls back to the last `fallback_lines` plus a summary
  // line when the rendered prompt would exceed this many characters.
  std::size_t char_budget = 120000;
  std::size_t fallback_lines = 200;
};

struct RenderedPrompt {
  std::string system;
  std::string user;

  std::string text() const { return system + "\n\n" + user; }
};

std::string format_history_line(const TrialRecord& rec, const RecipeGraph& graph);
RenderedPrompt render_prompt_parts(const SessionState& state, const PromptBundle& bundle, const HistoryWindow& window);
std::string render_prompt(const SessionState& state, const PromptBundle& bundle, const HistoryWindow& window);

// Last "<name> + <name>" in the text, lowercased. Multi-word names are
// matched against the graph; otherwise the adjacent word is taken.
// Throws UnparseableReply.
std::pair<std::string, std::string> parse_reply(std::string_view text, const RecipeGraph& graph);

struct LlmEndpointConfig {
  ChatClientConfig client;
  double temperature = 0.0;
  HistoryWindow window;
};

struct LlmProposal {
  std::optional<std::pair<std::string, std::string>> pair;  // empty when unparseable
  std::string raw_reply;
  std::optional<std::string> reasoning;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
  std::optional<std::string> parse_error;

  nlohmann::json meta() const;
};

// Throws TransportError once retries are exhausted. An unparseable reply is
// returned with parse_error set, not thrown.
LlmProposal llm_propose(const SessionState& state, ChatClient& client, double temperature,
                        const PromptBundle& bundle, const HistoryWindow& window);

// What a harness needs from any policy.
struct Proposal {
  std::pair<std::string, std::string> names;
  nlohmann::json meta;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual Proposal propose(SessionState& state, const EmpowermentTable& table) = 0;
  virtual std::string label() const = 0;
};

std::unique_ptr<Agent> make_scripted_agent(const AgentPolicy& policy);
std::unique_ptr<Agent> make_llm_agent(std::shared_ptr<ChatClient> client, double temperature, PromptBundle bundle,
                                      HistoryWindow window);

}  // namespace alchemy
