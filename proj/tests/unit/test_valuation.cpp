#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "alchemy/engine.hpp"
#include "alchemy/synthetic.hpp"
#include "alchemy/valuation.hpp"

using namespace alchemy;

namespace {

// Direct transcription of the recursion: walk the recipe list, no per-element
// index, no level buffers.
double oracle_e(const RecipeGraph& g, ElementId e, int k, double gamma) {
  double total = 0.0;
  for (const auto& r : g.recipes()) {
    if (r.pair.lo != e && r.pair.hi != e) continue;
    if (k == 0) {
      total += 1.0;
      continue;
    }
    double m = 0.0;
    for (auto res : r.results) m += oracle_e(g, res, k - 1, gamma);
    total += 1.0 + gamma * m / static_cast<double>(r.results.size());
  }
  return total;
}

TrialRecord record(BehaviorCategory c, ElementId a, ElementId b) {
  TrialRecord r;
  r.valid = c != BehaviorCategory::Invalid;
  r.success = c == BehaviorCategory::SuccessNew || c == BehaviorCategory::SuccessExisting;
  if (r.valid) r.resolved = CanonicalPair::of(a, b);
  // any novel result will do; only emptiness matters to the update
  if (c == BehaviorCategory::SuccessNew) r.novel_results = {4};
  r.category = c;
  return r;
}

}  // namespace

TEST_SUITE("valuation") {

TEST_CASE("G4 depth 0 counts recipes per element") {
  const auto t = base_empowerment(make_g4(), 0, 0.5);
  const std::vector<double> expected{2, 2, 2, 1, 0, 1, 0, 0};
  CHECK(t.values == expected);
}

TEST_CASE("G4 depth 1 with discount 0.5") {
  const auto g = make_g4();
  const auto t = base_empowerment(g, 1, 0.5);
  CHECK(t[g.id_of("water")] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(t[g.id_of("earth")] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(t[g.id_of("fire")] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(t[g.id_of("mud")] == doctest::Approx(1.0).epsilon(1e-15));
  for (auto name : {"steam", "dust", "brick"}) CHECK(t[g.id_of(name)] == 0.0);
}

TEST_CASE("combination empowerment on G4") {
  const auto g = make_g4();
  const auto t = base_empowerment(g, 1, 0.5);
  CHECK(combination_empowerment(t, g, CanonicalPair::of(0, 2)) == 1.0);  // mud
  CHECK(combination_empowerment(t, g, CanonicalPair::of(0, 1)) == 0.0);  // steam is terminal
  CHECK(combination_empowerment(t, g, CanonicalPair::of(3, 3)) == 0.0);  // no recipe
}

TEST_CASE("base empowerment matches the recursive oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = make_random_graph(8 + seed, 12 + 2 * seed, seed);
    for (int depth = 0; depth <= 3; ++depth) {
      const auto t = base_empowerment(g, depth, 0.5);
      for (ElementId e = 0; e < g.size(); ++e) {
        CHECK(t[e] == doctest::Approx(oracle_e(g, e, depth, 0.5)).epsilon(1e-12));
        CHECK(t[e] >= 0.0);
      }
    }
  }
}

TEST_CASE("adding a recipe never lowers any value") {
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = make_random_graph(15, 20, seed);
    GraphSpec spec{{g.elements().begin(), g.elements().end()}, {g.recipes().begin(), g.recipes().end()}};
    CanonicalPair extra;
    do {
      extra = CanonicalPair::of(static_cast<ElementId>(rng.uniform_index(15)),
                                static_cast<ElementId>(rng.uniform_index(15)));
    } while (g.lookup(extra));
    spec.recipes.push_back({extra, {static_cast<ElementId>(rng.uniform_index(15))}});
    const RecipeGraph bigger(spec);
    for (int depth = 0; depth <= 3; ++depth) {
      const auto before = base_empowerment(g, depth, 0.5);
      const auto after = base_empowerment(bigger, depth, 0.5);
      for (ElementId e = 0; e < 15; ++e) CHECK(after[e] >= before[e]);
    }
  }
}

TEST_CASE("dynamic updates follow the trial category") {
  const auto g = make_g4();
  const auto t = base_empowerment(g, 1, 0.5);
  const ElementId water = 0, fire = 1;
  CHECK(update_empowerment(t, record(BehaviorCategory::SuccessNew, water, fire))[water] ==
        doctest::Approx(2.625).epsilon(1e-15));
  CHECK(update_empowerment(t, record(BehaviorCategory::FailureNew, water, fire))[water] ==
        doctest::Approx(2.375).epsilon(1e-15));
  CHECK(update_empowerment(t, record(BehaviorCategory::FailureExisting, water, fire))[fire] ==
        doctest::Approx(1.9).epsilon(1e-15));
  CHECK(update_empowerment(t, record(BehaviorCategory::SuccessExisting, water, fire)).values == t.values);
  CHECK(update_empowerment(t, record(BehaviorCategory::Invalid, water, fire)).values == t.values);

  // a self-pair moves its element once
  CHECK(update_empowerment(t, record(BehaviorCategory::SuccessNew, water, water))[water] ==
        doctest::Approx(2.625).epsilon(1e-15));
  // untouched elements stay put
  CHECK(update_empowerment(t, record(BehaviorCategory::SuccessNew, water, fire))[2] == t[2]);
}

TEST_CASE("increase then inverse decrease restores the value exactly") {
  auto t = base_empowerment(make_g4(), 1, 0.5);
  t.params.increase_factor = 2.0;
  t.params.decrease_factor = 0.5;  // powers of two keep the round trip exact
  const auto orig = t.values;
  update_empowerment_in_place(t, record(BehaviorCategory::SuccessNew, 0, 2));
  update_empowerment_in_place(t, record(BehaviorCategory::FailureNew, 0, 2));
  CHECK(t.values == orig);
  for (double v : t.values) CHECK(v >= 0.0);
}

TEST_CASE("uncertainty spot values") {
  CHECK(uncertainty(100, 0) == doctest::Approx(2.1459660262893472).epsilon(1e-12));
  CHECK(uncertainty(100, 99) == doctest::Approx(0.21459660262893472).epsilon(1e-12));
  CHECK(uncertainty(0, 0) == 0.0);
  CHECK(uncertainty(1, 0) == 0.0);
  CHECK(uncertainty(1, 5) == 0.0);
}

TEST_CASE("uncertainty is monotone in T and t_e") {
  for (std::uint64_t T = 2; T < 300; T += 7) {
    for (std::uint64_t t = 0; t < 50; ++t) {
      CHECK(uncertainty(T, t + 1) < uncertainty(T, t));
      CHECK(uncertainty(T + 1, t) > uncertainty(T, t));
    }
  }
}

TEST_CASE("uncertainty state follows the session") {
  const auto g = make_g4();
  auto s = new_session(g, 0);
  apply_combination(s, "water", "water");
  apply_combination(s, "water", "fire");
  const auto u = UncertaintyState::from_session(s);
  CHECK(u.total_trials == 2);
  CHECK(u.times_chosen[0] == 3);
  CHECK(u.times_chosen[0] <= 2 * u.total_trials);
  CHECK(u(1) == doctest::Approx(std::sqrt(std::log(2.0) / 2.0)));
}

TEST_CASE("empowerment CSV export") {
  const auto g = make_g4();
  std::ostringstream out;
  write_empowerment_csv(out, base_empowerment(g, 0, 0.5), g);
  const auto text = out.str();
  CHECK(text.rfind("element,name,value\n", 0) == 0);
  CHECK(text.find("0,water,2\n") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 9);
}

}  // TEST_SUITE
