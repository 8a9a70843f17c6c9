#include "alchemy/engine.hpp"

#include <algorithm>
#include <cctype>

#include "alchemy/error.hpp"

namespace alchemy {
namespace {

std::string normalize(std::string_view raw) {
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out(raw.substr(b, e - b));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view to_string(BehaviorCategory c) {
  switch (c) {
    case BehaviorCategory::FailureExisting: return "failure_existing";
    case BehaviorCategory::FailureNew: return "failure_new";
    case BehaviorCategory::SuccessNew: return "success_new";
    case BehaviorCategory::SuccessExisting: return "success_existing";
    case BehaviorCategory::Invalid: return "invalid";
  }
  return "invalid";
}

BehaviorCategory category_from_string(std::string_view s) {
  for (auto c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  throw ParseError("unknown behavior category '" + std::string(s) + "'");
}

BehaviorCategory categorize_trial(bool valid, bool success, bool pair_seen_before) {
  if (!valid) return BehaviorCategory::Invalid;
  if (success) return pair_seen_before ? BehaviorCategory::SuccessExisting : BehaviorCategory::SuccessNew;
  return pair_seen_before ? BehaviorCategory::FailureExisting : BehaviorCategory::FailureNew;
}

bool TrialRecord::same_outcome(const TrialRecord& o) const {
  return index == o.index && proposed == o.proposed && resolved == o.resolved && valid == o.valid &&
         success == o.success && results == o.results && novel_results == o.novel_results &&
         category == o.category;
}

SessionState::SessionState(const RecipeGraph& graph, std::uint64_t seed, SessionConfig config)
    : graph_(&graph),
      seed_(seed),
      config_(config),
      held_(graph.size(), false),
      chosen_count_(graph.size(), 0),
      rng_(seed) {
  for (ElementId e : graph.initial_elements()) {
    inventory_.push_back(e);
    held_[e] = true;
  }
}

bool SessionState::pair_attempted(CanonicalPair pair) const { return attempted_.contains(pair.key()); }

TrialRecord& SessionState::apply(std::string_view a, std::string_view b, nlohmann::json agent_meta) {
  if (closed_) throw SessionClosed("session is closed");

  TrialRecord rec;
  rec.index = trial_count();
  rec.proposed = {normalize(a), normalize(b)};
  rec.agent_meta = std::move(agent_meta);

  const auto id_a = graph_->find(rec.proposed.first);
  const auto id_b = graph_->find(rec.proposed.second);
  const bool a_held = id_a && held_[*id_a];
  const bool b_held = id_b && held_[*id_b];

  // Usage counts cover inventory names only, even on invalid trials.
  if (a_held) ++chosen_count_[*id_a];
  if (b_held) ++chosen_count_[*id_b];

  if (a_held && b_held) {
    const auto pair = CanonicalPair::of(*id_a, *id_b);
    rec.resolved = pair;
    rec.valid = true;
    const bool seen = !attempted_.insert(pair.key()).second;
    if (const Recipe* recipe = graph_->lookup(pair)) {
      rec.success = true;
      rec.results = recipe->results;
      for (ElementId r : recipe->results) {
        if (!held_[r]) {
          held_[r] = true;
          inventory_.push_back(r);
          rec.novel_results.push_back(r);
        }
      }
    }
    rec.category = categorize_trial(true, rec.success, seen);
  } else {
    rec.category = BehaviorCategory::Invalid;
  }

  history_.push_back(std::move(rec));
  if (config_.max_trials != 0 && history_.size() >= config_.max_trials) closed_ = true;
  return history_.back();
}

SessionState new_session(const RecipeGraph& graph, std::uint64_t seed, SessionConfig config) {
  return SessionState(graph, seed, config);
}

const TrialRecord& apply_combination(SessionState& state, std::string_view a, std::string_view b,
                                     nlohmann::json agent_meta) {
  return state.apply(a, b, std::move(agent_meta));
}

SessionSummary session_summary(const SessionState& state) {
  SessionSummary s;
  s.inventory_size = state.inventory().size();
  s.discoveries = s.inventory_size - state.graph().initial_elements().size();
  s.trials = state.trial_count();
  for (auto c : kAllCategories) s.category_counts[c] = 0;
  for (const auto& rec : state.history()) ++s.category_counts[rec.category];
  return s;
}

}  // namespace alchemy
