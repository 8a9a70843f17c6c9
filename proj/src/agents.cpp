#include "alchemy/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "alchemy/error.hpp"

namespace alchemy {

std::string_view to_string(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::Random: return "random";
    case PolicyVariant::SoftmaxValue: return "softmax";
    case PolicyVariant::GreedyValue: return "greedy";
    case PolicyVariant::Llm: return "llm";
  }
  return "random";
}

PolicyVariant policy_from_string(std::string_view s) {
  for (auto v : {PolicyVariant::Random, PolicyVariant::SoftmaxValue, PolicyVariant::GreedyValue, PolicyVariant::Llm}) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown agent kind '" + std::string(s) + "'");
}

CanonicalPair propose_random(const SessionState& state, Rng& rng) {
  const auto& inv = state.inventory();
  const auto [i, j] = unrank_pair(rng.uniform_index(pair_count(inv.size())));
  return CanonicalPair::of(inv[i], inv[j]);
}

namespace {

// Per-decision view: inventory in id order, per-element uncertainty, and the
// combination empowerment of every recipe pair inside the inventory.
struct ScoreContext {
  std::vector<ElementId> ids;
  std::vector<double> half_uncertainty;
  std::unordered_map<std::uint64_t, double> recipe_value;

  ScoreContext(const SessionState& state, const EmpowermentTable& table) {
    const auto& graph = state.graph();
    ids = state.inventory();
    std::sort(ids.begin(), ids.end());
    const auto u = UncertaintyState::from_session(state);
    half_uncertainty.reserve(ids.size());
    for (ElementId e : ids) half_uncertainty.push_back(0.5 * u(e));
    for (ElementId e : ids) {
      for (std::uint32_t idx : graph.recipes_with(e)) {
        const auto& recipe = graph.recipes()[idx];
        if (recipe.pair.lo == e && state.holds(recipe.pair.hi)) {
          recipe_value.emplace(recipe.pair.key(), combination_empowerment(table, graph, recipe.pair));
        }
      }
    }
  }

  double score(std::size_t i, std::size_t j, const ValueWeights& w) const {
    double s = w.uncertainty * (half_uncertainty[i] + half_uncertainty[j]);
    if (w.empowerment != 0.0) {
      auto it = recipe_value.find(CanonicalPair::of(ids[i], ids[j]).key());
      if (it != recipe_value.end()) s += w.empowerment * it->second;
    }
    return s;
  }
};

}  // namespace

double pair_score(const SessionState& state, const EmpowermentTable& table, const ValueWeights& weights,
                  CanonicalPair pair) {
  const auto u = UncertaintyState::from_session(state);
  return weights.uncertainty * 0.5 * (u(pair.lo) + u(pair.hi)) +
         weights.empowerment * combination_empowerment(table, state.graph(), pair);
}

CanonicalPair propose_softmax(const SessionState& state, const EmpowermentTable& table, const AgentPolicy& policy,
                              Rng& rng) {
  if (!(policy.temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
  const ScoreContext ctx(state, table);
  const std::size_t n = ctx.ids.size();

  // Enumerate (i <= j) over id-sorted inventory: canonical pair order.
  std::vector<double> scores;
  scores.reserve(pair_count(n));
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double s = ctx.score(i, j, policy.weights);
      if (s > best) {
        best = s;
        best_k = scores.size();
      }
      scores.push_back(s);
    }
  }

  std::size_t pick = best_k;
  if (policy.temperature > 0.0) {
    double total = 0.0;
    for (auto& s : scores) {
      s = std::exp((s - best) / policy.temperature);
      total += s;
    }
    double u = rng.uniform01() * total;
    pick = scores.size() - 1;
    for (std::size_t k = 0; k < scores.size(); ++k) {
      u -= scores[k];
      if (u < 0.0) {
        pick = k;
        break;
      }
    }
  }

  // Recover (i, j) from the enumeration position.
  std::size_t k = pick;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = n - i;
    if (k < row) return CanonicalPair::of(ctx.ids[i], ctx.ids[i + k]);
    k -= row;
  }
  return CanonicalPair::of(ctx.ids.back(), ctx.ids.back());
}

CanonicalPair propose_greedy(const SessionState& state, const EmpowermentTable& table, const AgentPolicy& policy,
                             Rng& rng) {
  const ScoreContext ctx(state, table);
  const std::size_t n = ctx.ids.size();
  const bool exhausted = state.trial_count() > 0 && [&] {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        if (!state.pair_attempted(CanonicalPair::of(ctx.ids[i], ctx.ids[j]))) return false;
    return true;
  }();

  double best = -std::numeric_limits<double>::infinity();
  CanonicalPair choice = CanonicalPair::of(ctx.ids.front(), ctx.ids.front());
  std::uint64_t ties = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const auto pair = CanonicalPair::of(ctx.ids[i], ctx.ids[j]);
      if (!exhausted && state.pair_attempted(pair)) continue;
      const double s = ctx.score(i, j, policy.weights);
      if (s > best) {
        best = s;
        choice = pair;
        ties = 1;
      } else if (s == best) {
        // Reservoir sampling keeps the tie-break uniform in one pass.
        ++ties;
        if (rng.uniform_index(ties) == 0) choice = pair;
      }
    }
  }
  return choice;
}

nlohmann::json LlmProposal::meta() const {
  nlohmann::json j{{"raw", raw_reply}};
  if (reasoning) j["reasoning"] = *reasoning;
  if (prompt_tokens) j["prompt_tokens"] = *prompt_tokens;
  if (completion_tokens) j["completion_tokens"] = *completion_tokens;
  if (parse_error) j["parse_error"] = *parse_error;
  return j;
}

LlmProposal llm_propose(const SessionState& state, ChatClient& client, double temperature,
                        const PromptBundle& bundle, const HistoryWindow& window) {
  const auto prompt = render_prompt_parts(state, bundle, window);
  const auto reply = client.complete({{"system", prompt.system}, {"user", prompt.user}}, temperature);
  LlmProposal out;
  out.raw_reply = reply.content;
  out.reasoning = reply.reasoning;
  out.prompt_tokens = reply.prompt_tokens;
  out.completion_tokens = reply.completion_tokens;
  try {
    out.pair = parse_reply(reply.content, state.graph());
  } catch (const UnparseableReply& e) {
    out.parse_error = e.what();
  }
  return out;
}

namespace {

std::pair<std::string, std::string> pair_names(const RecipeGraph& graph, CanonicalPair p) {
  return {graph.element(p.lo).name, graph.element(p.hi).name};
}

class ScriptedAgent final : public Agent {
 public:
  explicit ScriptedAgent(AgentPolicy policy) : policy_(policy), rng_(policy.seed) {}

  Proposal propose(SessionState& state, const EmpowermentTable& table) override {
    CanonicalPair pair;
    switch (policy_.variant) {
      case PolicyVariant::Random: pair = propose_random(state, rng_); break;
      case PolicyVariant::SoftmaxValue: pair = propose_softmax(state, table, policy_, rng_); break;
      case PolicyVariant::GreedyValue: pair = propose_greedy(state, table, policy_, rng_); break;
      case PolicyVariant::Llm: throw ValidationError("scripted agent cannot run the llm variant");
    }
    return {pair_names(state.graph(), pair), nullptr};
  }

  std::string label() const override { return std::string(to_string(policy_.variant)); }

 private:
  AgentPolicy policy_;
  Rng rng_;
};

class LlmAgent final : public Agent {
 public:
  LlmAgent(std::shared_ptr<ChatClient> client, double temperature, PromptBundle bundle, HistoryWindow window)
      : client_(std::move(client)), temperature_(temperature), bundle_(std::move(bundle)), window_(window) {}

  Proposal propose(SessionState& state, const EmpowermentTable&) override {
    auto p = llm_propose(state, *client_, temperature_, bundle_, window_);
    Proposal out;
    if (p.pair) out.names = *p.pair;
    out.meta = p.meta();
    return out;
  }

  std::string label() const override { return "llm:" + client_->config().model; }

 private:
  std::shared_ptr<ChatClient> client_;
  double temperature_;
  PromptBundle bundle_;
  HistoryWindow window_;
};

}  // namespace

std::unique_ptr<Agent> make_scripted_agent(const AgentPolicy& policy) {
  if (!(policy.temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
  if (!std::isfinite(policy.weights.uncertainty) || !std::isfinite(policy.weights.empowerment)) {
    throw ValidationError("value weights must be finite");
  }
  return std::make_unique<ScriptedAgent>(policy);
}

std::unique_ptr<Agent> make_llm_agent(std::shared_ptr<ChatClient> client, double temperature, PromptBundle bundle,
                                      HistoryWindow window) {
  return std::make_unique<LlmAgent>(std::move(client), temperature, std::move(bundle), window);
}

}  // namespace alchemy
