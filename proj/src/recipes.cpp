#include "alchemy/recipes.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "alchemy/error.hpp"
#include "alchemy/rng.hpp"

namespace alchemy {
namespace {

std::string normalize_name(std::string_view raw) {
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out(raw.substr(b, e - b));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

PairIndex unrank_pair(std::uint64_t k) {
  auto j = static_cast<std::uint64_t>((std::sqrt(8.0 * static_cast<double>(k) + 1.0) - 1.0) / 2.0);
  while (j * (j + 1) / 2 > k) --j;
  while ((j + 1) * (j + 2) / 2 <= k) ++j;
  return {static_cast<std::size_t>(k - j * (j + 1) / 2), static_cast<std::size_t>(j)};
}

RecipeGraph::RecipeGraph(GraphSpec spec) {
  const std::size_t n = spec.elements.size();
  std::vector<bool> seen(n, false);
  elements_.resize(n);
  for (auto& el : spec.elements) {
    if (el.id >= n || seen[el.id]) {
      throw ValidationError("element ids must be dense 0.." + std::to_string(n - 1) +
                            " without repeats (offending id " + std::to_string(el.id) + ")");
    }
    seen[el.id] = true;
    el.name = normalize_name(el.name);
    if (el.name.empty()) throw ValidationError("element " + std::to_string(el.id) + " has an empty name");
    elements_[el.id] = std::move(el);
  }
  for (const auto& el : elements_) {
    if (!by_name_.emplace(el.name, el.id).second) {
      throw ValidationError("duplicate element name '" + el.name + "'");
    }
    if (el.is_initial) initial_.push_back(el.id);
  }
  if (initial_.size() != 4) {
    throw ValidationError("expected exactly 4 initial elements, found " + std::to_string(initial_.size()));
  }

  // Pairs may arrive in either order or repeated; merge them under the
  // canonical key and keep results unique in first-seen order.
  std::map<CanonicalPair, std::vector<ElementId>> merged;
  for (const auto& r : spec.recipes) {
    if (r.pair.lo >= n || r.pair.hi >= n) {
      throw ValidationError("recipe references unknown element (" + std::to_string(r.pair.lo) + ", " +
                            std::to_string(r.pair.hi) + ")");
    }
    if (r.results.empty()) throw ValidationError("recipe with no results");
    auto& results = merged[CanonicalPair::of(r.pair.lo, r.pair.hi)];
    for (ElementId res : r.results) {
      if (res >= n) throw ValidationError("recipe result id " + std::to_string(res) + " does not exist");
      if (std::find(results.begin(), results.end(), res) == results.end()) results.push_back(res);
    }
  }
  recipes_.reserve(merged.size());
  for (auto& [pair, results] : merged) recipes_.push_back({pair, std::move(results)});

  by_element_.resize(n);
  for (std::uint32_t idx = 0; idx < recipes_.size(); ++idx) {
    const auto& pair = recipes_[idx].pair;
    by_pair_.emplace(pair.key(), idx);
    by_element_[pair.lo].push_back(idx);
    if (!pair.is_self()) by_element_[pair.hi].push_back(idx);
  }

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& el : elements_) {
    h = fnv1a(h, std::to_string(el.id) + ":" + el.name + (el.is_initial ? ":1;" : ":0;"));
  }
  for (const auto& r : recipes_) {
    std::string line = std::to_string(r.pair.lo) + "+" + std::to_string(r.pair.hi) + "=";
    for (ElementId res : r.results) line += std::to_string(res) + ",";
    h = fnv1a(h, line + ";");
  }
  std::ostringstream hex;
  hex << std::hex;
  hex.width(16);
  hex.fill('0');
  hex << h;
  hash_ = hex.str();
}

const Element& RecipeGraph::element(ElementId id) const {
  if (!valid(id)) throw UnknownElement("unknown element id " + std::to_string(id));
  return elements_[id];
}

std::optional<ElementId> RecipeGraph::find(std::string_view name) const {
  auto it = by_name_.find(normalize_name(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

ElementId RecipeGraph::id_of(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw UnknownElement("unknown element '" + std::string(name) + "'");
}

const Recipe* RecipeGraph::lookup(CanonicalPair pair) const {
  auto it = by_pair_.find(pair.key());
  return it == by_pair_.end() ? nullptr : &recipes_[it->second];
}

std::span<const std::uint32_t> RecipeGraph::recipes_with(ElementId e) const {
  if (!valid(e)) throw UnknownElement("unknown element id " + std::to_string(e));
  return by_element_[e];
}

RecipeGraph parse_graph(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("recipe graph: ") + e.what());
  }
  GraphSpec spec;
  try {
    for (const auto& el : doc.at("elements")) {
      Element e;
      e.id = el.at("id").get<ElementId>();
      e.name = el.at("name").get<std::string>();
      e.is_initial = el.value("initial", false);
      if (el.contains("category") && el["category"].is_string()) e.category = el["category"].get<std::string>();
      spec.elements.push_back(std::move(e));
    }
    for (const auto& r : doc.at("recipes")) {
      Recipe recipe;
      recipe.pair = CanonicalPair::of(r.at("a").get<ElementId>(), r.at("b").get<ElementId>());
      recipe.results = r.at("results").get<std::vector<ElementId>>();
      spec.recipes.push_back(std::move(recipe));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("recipe graph: ") + e.what());
  }
  return RecipeGraph(std::move(spec));
}

RecipeGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open recipe graph " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_graph(buf.str());
}

std::string graph_to_json(const RecipeGraph& graph) {
  nlohmann::json doc;
  auto& elements = doc["elements"] = nlohmann::json::array();
  for (const auto& el : graph.elements()) {
    nlohmann::json j{{"id", el.id}, {"name", el.name}, {"initial", el.is_initial}};
    if (el.category) j["category"] = *el.category;
    elements.push_back(std::move(j));
  }
  auto& recipes = doc["recipes"] = nlohmann::json::array();
  for (const auto& r : graph.recipes()) {
    recipes.push_back({{"a", r.pair.lo}, {"b", r.pair.hi}, {"results", r.results}});
  }
  return doc.dump(1);
}

CanonicalPair canonical_pair(const RecipeGraph& graph, ElementId a, ElementId b) {
  if (!graph.valid(a)) throw UnknownElement("unknown element id " + std::to_string(a));
  if (!graph.valid(b)) throw UnknownElement("unknown element id " + std::to_string(b));
  return CanonicalPair::of(a, b);
}

SuccessProbability success_probability(const RecipeGraph& graph, std::span<const ElementId> inventory) {
  std::vector<bool> held(graph.size(), false);
  std::size_t n = 0;
  for (ElementId e : inventory) {
    if (!graph.valid(e)) throw UnknownElement("unknown element id " + std::to_string(e));
    if (!held[e]) {
      held[e] = true;
      ++n;
    }
  }
  SuccessProbability out;
  out.combinations = pair_count(n);
  // Each recipe is counted from its lo side only.
  for (ElementId e = 0; e < graph.size(); ++e) {
    if (!held[e]) continue;
    for (std::uint32_t idx : graph.recipes_with(e)) {
      const auto& pair = graph.recipes()[idx].pair;
      if (pair.lo == e && held[pair.hi]) ++out.successful;
    }
  }
  out.probability = out.combinations == 0
                        ? 0.0
                        : static_cast<double>(out.successful) / static_cast<double>(out.combinations);
  return out;
}

namespace {

// One random-policy play-through; returns P_s for each inventory size reached.
std::vector<std::pair<std::size_t, double>> random_playthrough(const RecipeGraph& graph, std::uint64_t seed,
                                                               std::size_t max_trials) {
  Rng rng(seed);
  std::vector<ElementId> inventory(graph.initial_elements().begin(), graph.initial_elements().end());
  std::vector<bool> held(graph.size(), false);
  for (ElementId e : inventory) held[e] = true;

  std::vector<std::pair<std::size_t, double>> points;
  points.emplace_back(inventory.size(), success_probability(graph, inventory).probability);
  for (std::size_t t = 0; t < max_trials; ++t) {
    const auto [i, j] = unrank_pair(rng.uniform_index(pair_count(inventory.size())));
    const Recipe* recipe = graph.lookup(CanonicalPair::of(inventory[i], inventory[j]));
    if (!recipe) continue;
    const std::size_t before = inventory.size();
    for (ElementId r : recipe->results) {
      if (!held[r]) {
        held[r] = true;
        inventory.push_back(r);
      }
    }
    if (inventory.size() != before) {
      points.emplace_back(inventory.size(), success_probability(graph, inventory).probability);
    }
  }
  return points;
}

}  // namespace

std::vector<DifficultyPoint> difficulty_curve(const RecipeGraph& graph, std::span<const std::uint64_t> seeds,
                                              std::size_t max_trials) {
  std::vector<std::uint64_t> ordered(seeds.begin(), seeds.end());
  std::sort(ordered.begin(), ordered.end());

  std::vector<std::vector<std::pair<std::size_t, double>>> per_seed(ordered.size());
#if defined(ALCHEMY_HAVE_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(ordered.size()); ++s) {
    per_seed[s] = random_playthrough(graph, ordered[s], max_trials);
  }

  std::map<std::size_t, DifficultyPoint> by_size;
  for (const auto& points : per_seed) {
    for (const auto& [size, p] : points) {
      auto& pt = by_size[size];
      pt.inventory_size = size;
      pt.mean_probability += p;
      ++pt.samples;
    }
  }
  std::vector<DifficultyPoint> curve;
  curve.reserve(by_size.size());
  for (auto& [size, pt] : by_size) {
    pt.mean_probability /= static_cast<double>(pt.samples);
    curve.push_back(pt);
  }
  return curve;
}

std::size_t one_step_result_count(const RecipeGraph& graph, ElementId e) {
  std::set<ElementId> results;
  for (std::uint32_t idx : graph.recipes_with(e)) {
    const auto& r = graph.recipes()[idx].results;
    results.insert(r.begin(), r.end());
  }
  return results.size();
}

}  // namespace alchemy
