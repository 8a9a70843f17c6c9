#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alchemy/recipes.hpp"
#include "alchemy/rng.hpp"

namespace alchemy {

enum class BehaviorCategory : std::uint8_t {
  FailureExisting,
  FailureNew,
  SuccessNew,
  SuccessExisting,
  Invalid,
};

inline constexpr std::array<BehaviorCategory, 5> kAllCategories = {
    BehaviorCategory::FailureExisting, BehaviorCategory::FailureNew, BehaviorCategory::SuccessNew,
    BehaviorCategory::SuccessExisting, BehaviorCategory::Invalid};

std::string_view to_string(BehaviorCategory c);
BehaviorCategory category_from_string(std::string_view s);  // throws ParseError

// Invalid when !valid, otherwise success/failure crossed with whether the
// canonical pair had been attempted before.
BehaviorCategory categorize_trial(bool valid, bool success, bool pair_seen_before);

struct TrialRecord {
  std::uint32_t index = 0;
  std::pair<std::string, std::string> proposed;
  std::optional<CanonicalPair> resolved;
  bool valid = false;
  bool success = false;
  std::vector<ElementId> results;
  std::vector<ElementId> novel_results;
  BehaviorCategory category = BehaviorCategory::Invalid;
  // Raw reply, reasoning text, token counts. Excluded from replay equality.
  nlohmann::json agent_meta;

  bool same_outcome(const TrialRecord& other) const;
};

struct SessionConfig {
  std::size_t max_trials = 0;  // 0 = unbounded
};

class SessionState {
 public:
  SessionState(const RecipeGraph& graph, std::uint64_t seed, SessionConfig config = {});

  const RecipeGraph& graph() const { return *graph_; }
  std::uint64_t seed() const { return seed_; }
  const SessionConfig& config() const { return config_; }

  // Insertion order: the four initial elements first, then discoveries.
  const std::vector<ElementId>& inventory() const { return inventory_; }
  bool holds(ElementId e) const { return held_[e]; }
  std::uint32_t times_chosen(ElementId e) const { return chosen_count_[e]; }
  const std::vector<std::uint32_t>& chosen_counts() const { return chosen_count_; }
  std::uint32_t trial_count() const { return static_cast<std::uint32_t>(history_.size()); }
  const std::vector<TrialRecord>& history() const { return history_; }
  bool pair_attempted(CanonicalPair pair) const;
  bool closed() const { return closed_; }
  Rng& rng() { return rng_; }
  void close() { closed_ = true; }

  // Single mutation point; see apply_combination.
  TrialRecord& apply(std::string_view a, std::string_view b, nlohmann::json agent_meta = {});

 private:
  const RecipeGraph* graph_;
  std::uint64_t seed_;
  SessionConfig config_;
  std::vector<ElementId> inventory_;
  std::vector<bool> held_;
  std::vector<std::uint32_t> chosen_count_;
  std::vector<TrialRecord> history_;
  std::unordered_set<std::uint64_t> attempted_;
  Rng rng_;
  bool closed_ = false;
};

SessionState new_session(const RecipeGraph& graph, std::uint64_t seed, SessionConfig config = {});

// Names are trimmed and lowercased. A name outside the inventory makes the
// trial Invalid; it still counts as a trial. Throws SessionClosed.
const TrialRecord& apply_combination(SessionState& state, std::string_view a, std::string_view b,
                                     nlohmann::json agent_meta = {});

struct SessionSummary {
  std::size_t discoveries = 0;
  std::size_t inventory_size = 0;
  std::map<BehaviorCategory, std::size_t> category_counts;
  std::size_t trials = 0;
};

SessionSummary session_summary(const SessionState& state);

// Mean discoveries of the human reference players after 500 trials.
inline constexpr double kHumanMeanDiscoveries = 42.0;

}  // namespace alchemy
