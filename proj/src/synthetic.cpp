#include "alchemy/synthetic.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "alchemy/rng.hpp"

namespace alchemy {
namespace {

GraphSpec g4_spec() {
  GraphSpec spec;
  const char* names[] = {"water", "fire", "earth", "air", "steam", "mud", "dust", "brick"};
  for (ElementId id = 0; id < 8; ++id) spec.elements.push_back({id, names[id], id < 4, std::nullopt});
  spec.recipes = {
      {CanonicalPair::of(0, 1), {4}},
      {CanonicalPair::of(0, 2), {5}},
      {CanonicalPair::of(2, 3), {6}},
      {CanonicalPair::of(5, 1), {7}},
  };
  return spec;
}

}  // namespace

RecipeGraph make_g4() { return RecipeGraph(g4_spec()); }

RecipeGraph make_random_graph(std::size_t elements, std::size_t recipes, std::uint64_t seed) {
  Rng rng(seed);
  GraphSpec spec;
  const char* initial[] = {"water", "fire", "earth", "air"};
  for (ElementId id = 0; id < elements; ++id) {
    spec.elements.push_back({id, id < 4 ? std::string(initial[id]) : "e" + std::to_string(id), id < 4, std::nullopt});
  }
  const std::uint64_t max_pairs = pair_count(elements);
  recipes = std::min<std::uint64_t>(recipes, max_pairs);
  std::set<CanonicalPair> used;
  while (used.size() < recipes) {
    const auto a = static_cast<ElementId>(rng.uniform_index(elements));
    const auto b = static_cast<ElementId>(rng.uniform_index(elements));
    const auto pair = CanonicalPair::of(a, b);
    if (!used.insert(pair).second) continue;
    Recipe r{pair, {static_cast<ElementId>(rng.uniform_index(elements))}};
    if (rng.uniform01() < 0.2) {
      const auto extra = static_cast<ElementId>(rng.uniform_index(elements));
      if (extra != r.results.front()) r.results.push_back(extra);
    }
    spec.recipes.push_back(std::move(r));
  }
  return RecipeGraph(std::move(spec));
}

RecipeGraph make_extended_graph(const ExtendedGraphParams& params) {
  Rng rng(params.seed);
  GraphSpec spec = g4_spec();
  std::set<CanonicalPair> used;
  for (const auto& r : spec.recipes) used.insert(r.pair);

  std::vector<ElementId> reachable;
  for (ElementId id = 0; id < 8; ++id) reachable.push_back(id);

  auto add_element = [&](const std::string& name) {
    const auto id = static_cast<ElementId>(spec.elements.size());
    spec.elements.push_back({id, name, false, std::nullopt});
    return id;
  };
  auto fresh_pair_with = [&](ElementId anchor) {
    for (;;) {
      const ElementId other = reachable[rng.uniform_index(reachable.size())];
      const auto pair = CanonicalPair::of(anchor, other);
      if (used.insert(pair).second) return pair;
    }
  };
  auto fresh_pair = [&] {
    for (;;) {
      const ElementId a = reachable[rng.uniform_index(reachable.size())];
      const ElementId b = reachable[rng.uniform_index(reachable.size())];
      const auto pair = CanonicalPair::of(a, b);
      if (used.insert(pair).second) return pair;
    }
  };

  const std::size_t target = std::max<std::size_t>(params.elements, 8);
  std::size_t chain_budget = params.chains * params.chain_length;
  if (8 + chain_budget > target) chain_budget = target - 8;

  // Chains grow from G4's intermediate elements so they start shallow.
  std::vector<ElementId> heads;
  for (std::size_t c = 0; c < params.chains; ++c) heads.push_back(static_cast<ElementId>(4 + c % 4));
  std::size_t filler = 0;
  std::size_t link = 0;
  while (spec.elements.size() < target) {
    const bool chain_turn = link < chain_budget && (rng.uniform01() < 0.5 || spec.elements.size() + (chain_budget - link) >= target);
    if (chain_turn && !heads.empty()) {
      const std::size_t c = link % heads.size();
      const auto pair = fresh_pair_with(heads[c]);
      const ElementId id = add_element("c" + std::to_string(c) + "_" + std::to_string(link / heads.size()));
      spec.recipes.push_back({pair, {id}});
      heads[c] = id;
      reachable.push_back(id);
      ++link;
    } else {
      const auto pair = fresh_pair();
      const ElementId id = add_element("x" + std::to_string(filler++));
      spec.recipes.push_back({pair, {id}});
      reachable.push_back(id);
    }
  }

  const std::size_t n = spec.elements.size();
  const std::size_t limit = std::min<std::uint64_t>(params.extra_recipes, pair_count(n) - used.size());
  for (std::size_t k = 0; k < limit; ++k) {
    const auto pair = fresh_pair();
    // Results point at non-initial elements, so extra recipes add shortcuts
    // and duplicates but never new reachability.
    const auto res = static_cast<ElementId>(4 + rng.uniform_index(n - 4));
    spec.recipes.push_back({pair, {res}});
  }
  return RecipeGraph(std::move(spec));
}

}  // namespace alchemy
