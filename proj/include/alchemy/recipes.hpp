#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace alchemy {

using ElementId = std::uint32_t;

struct Element {
  ElementId id = 0;
  std::string name;
  bool is_initial = false;
  std::optional<std::string> category;
};

// Unordered element pair stored as (min, max). Self-pairs are allowed.
struct CanonicalPair {
  ElementId lo = 0;
  ElementId hi = 0;

  static constexpr CanonicalPair of(ElementId a, ElementId b) {
    return a <= b ? CanonicalPair{a, b} : CanonicalPair{b, a};
  }
  constexpr std::uint64_t key() const {
    return (static_cast<std::uint64_t>(lo) << 32) | hi;
  }
  constexpr bool is_self() const { return lo == hi; }
  constexpr bool contains(ElementId e) const { return lo == e || hi == e; }

  friend constexpr auto operator<=>(const CanonicalPair&, const CanonicalPair&) = default;
};

struct Recipe {
  CanonicalPair pair;
  std::vector<ElementId> results;
};

// Number of unordered pairs with repetition over n items: n(n+1)/2.
constexpr std::uint64_t pair_count(std::uint64_t n) { return n * (n + 1) / 2; }

// Maps k in [0, pair_count(n)) to positions (i, j) with i <= j, row-major by j.
struct PairIndex {
  std::size_t i = 0;
  std::size_t j = 0;
};
PairIndex unrank_pair(std::uint64_t k);

struct GraphSpec {
  std::vector<Element> elements;
  std::vector<Recipe> recipes;
};

// Immutable element/recipe universe. Safe to share across threads once built.
class RecipeGraph {
 public:
  // Validates and canonicalizes; throws ValidationError on dangling ids,
  // duplicate or empty names, non-dense ids or a wrong initial count.
  explicit RecipeGraph(GraphSpec spec);

  std::size_t size() const { return elements_.size(); }
  std::span<const Element> elements() const { return elements_; }
  const Element& element(ElementId id) const;
  bool valid(ElementId id) const { return id < elements_.size(); }

  std::optional<ElementId> find(std::string_view name) const;
  ElementId id_of(std::string_view name) const;  // throws UnknownElement

  // Recipes sorted by canonical pair.
  std::span<const Recipe> recipes() const { return recipes_; }
  const Recipe* lookup(CanonicalPair pair) const;

  // Indices into recipes() for every recipe whose pair contains e, in
  // canonical pair order. A self-recipe is listed once.
  std::span<const std::uint32_t> recipes_with(ElementId e) const;

  std::span<const ElementId> initial_elements() const { return initial_; }

  // FNV-1a over a canonical serialization; identifies the graph in logs.
  const std::string& content_hash() const { return hash_; }

 private:
  std::vector<Element> elements_;
  std::vector<Recipe> recipes_;
  std::unordered_map<std::uint64_t, std::uint32_t> by_pair_;
  std::vector<std::vector<std::uint32_t>> by_element_;
  std::unordered_map<std::string, ElementId> by_name_;
  std::vector<ElementId> initial_;
  std::string hash_;
};

RecipeGraph load_graph(const std::filesystem::path& path);
RecipeGraph parse_graph(std::string_view json_text);
std::string graph_to_json(const RecipeGraph& graph);

// Throws UnknownElement when either id is outside the graph.
CanonicalPair canonical_pair(const RecipeGraph& graph, ElementId a, ElementId b);

struct SuccessProbability {
  std::uint64_t successful = 0;  // S
  std::uint64_t combinations = 0;  // C_n
  double probability = 0.0;  // S / C_n
};

// Duplicate ids in `inventory` are ignored.
SuccessProbability success_probability(const RecipeGraph& graph,
                                       std::span<const ElementId> inventory);

struct DifficultyPoint {
  std::size_t inventory_size = 0;
  double mean_probability = 0.0;
  std::size_t samples = 0;
};

// Plays a uniform random policy per seed and averages P_s per inventory
// size. Seeds are processed as a set, so permuting them changes nothing.
std::vector<DifficultyPoint> difficulty_curve(const RecipeGraph& graph,
                                              std::span<const std::uint64_t> seeds,
                                              std::size_t max_trials);

std::size_t one_step_result_count(const RecipeGraph& graph, ElementId e);

}  // namespace alchemy
