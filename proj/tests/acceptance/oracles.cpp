#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace oracle {

using alchemy::ElementId;

namespace {

const alchemy::Recipe* find_recipe(const alchemy::RecipeGraph& g, ElementId a, ElementId b) {
  const auto lo = std::min(a, b), hi = std::max(a, b);
  for (const auto& r : g.recipes()) {
    if (r.pair.lo == lo && r.pair.hi == hi) return &r;
  }
  return nullptr;
}

}  // namespace

std::uint64_t successful_pairs(const alchemy::RecipeGraph& g, const std::vector<ElementId>& inventory) {
  std::set<std::pair<ElementId, ElementId>> recipes;
  for (const auto& r : g.recipes()) recipes.emplace(r.pair.lo, r.pair.hi);
  const std::set<ElementId> inv(inventory.begin(), inventory.end());
  std::uint64_t hits = 0;
  for (auto a : inv) {
    for (auto b : inv) {
      if (a <= b && recipes.count({a, b})) ++hits;
    }
  }
  return hits;
}

double empowerment(const alchemy::RecipeGraph& g, ElementId e, int k, double gamma) {
  double total = 0.0;
  for (const auto& r : g.recipes()) {
    if (r.pair.lo != e && r.pair.hi != e) continue;
    if (k == 0) {
      total += 1.0;
      continue;
    }
    double m = 0.0;
    for (auto res : r.results) m += empowerment(g, res, k - 1, gamma);
    total += 1.0 + gamma * m / static_cast<double>(r.results.size());
  }
  return total;
}

double combination_empowerment(const alchemy::RecipeGraph& g, const std::vector<double>& table, ElementId a,
                               ElementId b) {
  const auto* r = find_recipe(g, a, b);
  if (!r) return 0.0;
  double m = 0.0;
  for (auto res : r->results) m += table[res];
  return m / static_cast<double>(r->results.size());
}

double uncertainty(std::uint64_t total, std::uint64_t times) {
  if (total <= 1) return 0.0;
  const long double v = std::log(static_cast<long double>(total)) / static_cast<long double>(times + 1);
  return static_cast<double>(std::sqrt(v));
}

}  // namespace oracle
