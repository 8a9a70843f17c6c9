#include <doctest.h>

#include <numeric>
#include <sstream>

#include "alchemy/agents.hpp"
#include "alchemy/engine.hpp"
#include "alchemy/error.hpp"
#include "alchemy/synthetic.hpp"
#include "alchemy/trial_log.hpp"
#include "fixtures.hpp"

using namespace alchemy;

TEST_SUITE("engine") {

TEST_CASE("fresh session holds the four initial elements") {
  const auto g = make_g4();
  const auto s = new_session(g, 0);
  CHECK(s.inventory() == std::vector<ElementId>{0, 1, 2, 3});
  CHECK(s.trial_count() == 0);
  CHECK_FALSE(s.closed());
}

TEST_CASE("water + fire on a fresh G4 session") {
  const auto g = make_g4();
  auto s = new_session(g, 0);
  const auto& r = apply_combination(s, "water", "fire");
  CHECK(r.valid);
  CHECK(r.success);
  CHECK(r.results == std::vector<ElementId>{4});
  CHECK(r.novel_results == std::vector<ElementId>{4});
  CHECK(r.category == BehaviorCategory::SuccessNew);
  CHECK(s.holds(4));
  CHECK(s.inventory().size() == 5);

  const auto& again = apply_combination(s, " FIRE ", "Water");
  CHECK(again.category == BehaviorCategory::SuccessExisting);
  CHECK(again.novel_results.empty());
  CHECK(s.inventory().size() == 5);
}

TEST_CASE("unknown or unheld names make an invalid trial") {
  const auto g = make_g4();
  auto s = new_session(g, 0);
  const auto& r = apply_combination(s, "water", "dragon");
  CHECK_FALSE(r.valid);
  CHECK_FALSE(r.success);
  CHECK(r.category == BehaviorCategory::Invalid);
  CHECK(s.inventory().size() == 4);
  CHECK(s.trial_count() == 1);
  // water was held, so it counts; dragon is ignored
  CHECK(s.times_chosen(0) == 1);

  apply_combination(s, "steam", "fire");  // steam exists but is not held yet
  CHECK(s.history().back().category == BehaviorCategory::Invalid);
  CHECK(s.times_chosen(1) == 1);
  CHECK(s.times_chosen(4) == 0);
}

TEST_CASE("categorize_trial table") {
  CHECK(categorize_trial(true, false, false) == BehaviorCategory::FailureNew);
  CHECK(categorize_trial(true, false, true) == BehaviorCategory::FailureExisting);
  CHECK(categorize_trial(true, true, false) == BehaviorCategory::SuccessNew);
  CHECK(categorize_trial(true, true, true) == BehaviorCategory::SuccessExisting);
  CHECK(categorize_trial(false, false, false) == BehaviorCategory::Invalid);
  for (auto c : kAllCategories) CHECK(category_from_string(to_string(c)) == c);
  CHECK_THROWS_AS(category_from_string("bogus"), ParseError);
}

TEST_CASE("playing the four G4 recipes exhausts the graph") {
  const auto g = make_g4();
  auto s = new_session(g, 0);
  apply_combination(s, "water", "fire");
  apply_combination(s, "water", "earth");
  apply_combination(s, "earth", "air");
  apply_combination(s, "mud", "fire");
  const auto sum = session_summary(s);
  CHECK(sum.discoveries == 4);
  CHECK(sum.inventory_size == 8);
  CHECK(sum.trials == 4);
  CHECK(sum.category_counts.at(BehaviorCategory::SuccessNew) == 4);
}

TEST_CASE("max_trials closes the session") {
  const auto g = make_g4();
  auto s = new_session(g, 0, SessionConfig{2});
  apply_combination(s, "water", "water");
  CHECK_FALSE(s.closed());
  apply_combination(s, "air", "air");
  CHECK(s.closed());
  CHECK_THROWS_AS(apply_combination(s, "water", "fire"), SessionClosed);
  CHECK(s.trial_count() == 2);
}

TEST_CASE("random play keeps the engine invariants") {
  const auto g = make_extended_graph({});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto s = new_session(g, seed);
    Rng rng(seed);
    std::size_t last_size = s.inventory().size();
    std::uint64_t counted = 0;
    for (int t = 0; t < 300; ++t) {
      if (t % 17 == 0) {
        const auto& r = apply_combination(s, g.element(s.inventory()[0]).name, "not-an-element");
        CHECK_FALSE(r.valid);
        counted += 1;
      } else {
        const auto p = propose_random(s, rng);
        const auto& r = apply_combination(s, g.element(p.lo).name, g.element(p.hi).name);
        counted += 2;
        CHECK(r.valid);
        for (auto n : r.novel_results) CHECK(std::find(r.results.begin(), r.results.end(), n) != r.results.end());
        if (r.success) CHECK(r.valid);
      }
      CHECK(s.inventory().size() >= last_size);
      last_size = s.inventory().size();
    }
    for (ElementId e : g.initial_elements()) CHECK(s.holds(e));
    CHECK(s.trial_count() == s.history().size());
    const auto& counts = s.chosen_counts();
    CHECK(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) == counted);
    auto sum = session_summary(s);
    std::size_t invalid = 0;
    for (const auto& r : s.history()) invalid += !r.valid;
    CHECK(sum.category_counts[BehaviorCategory::Invalid] == invalid);
    CHECK(sum.discoveries <= g.size() - 4);
    CHECK(sum.discoveries == s.inventory().size() - 4);
  }
}

TEST_CASE("replaying proposals reproduces the history") {
  const auto g = make_extended_graph({});
  auto s = new_session(g, 3);
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto p = propose_random(s, rng);
    apply_combination(s, g.element(p.lo).name, g.element(p.hi).name, {{"note", t}});
  }
  auto again = new_session(g, 3);
  for (const auto& r : s.history()) apply_combination(again, r.proposed.first, r.proposed.second);
  REQUIRE(again.history().size() == s.history().size());
  for (std::size_t i = 0; i < s.history().size(); ++i) CHECK(again.history()[i].same_outcome(s.history()[i]));
}

TEST_CASE("trial records round-trip through JSON") {
  const auto g = make_g4();
  auto s = new_session(g, 0);
  apply_combination(s, "water", "fire", {{"raw", "water + fire"}});
  apply_combination(s, "water", "dragon");
  for (const auto& r : s.history()) {
    const auto back = trial_from_json(to_json(r, &g));
    CHECK(back.same_outcome(r));
    CHECK(back.agent_meta == r.agent_meta);
  }
  CHECK_THROWS_AS(trial_from_json(nlohmann::json{{"type", "trial"}}), ParseError);
}

TEST_CASE("jsonl lines are compact and stable") {
  const nlohmann::json a{{"b", 1}, {"a", 2}};
  const nlohmann::json b{{"a", 2}, {"b", 1}};
  CHECK(to_jsonl_line(a) == to_jsonl_line(b));
  CHECK(to_jsonl_line(a) == "{\"a\":2,\"b\":1}\n");
}

TEST_CASE("trial log write/read") {
  const auto g = make_g4();
  auto s = new_session(g, 9, SessionConfig{5});
  apply_combination(s, "water", "earth");
  apply_combination(s, "mud", "fire");
  SessionHeader h{g.content_hash(), 9, 5, "r", "random", 0.3, 2};
  TempDir dir("engine_log");
  const auto path = dir.path / "log.jsonl";
  {
    std::ofstream out(path, std::ios::binary);
    write_trial_log(out, h, s);
  }
  const auto log = read_trial_log(path);
  CHECK(log.header.graph_hash == g.content_hash());
  CHECK(log.header.seed == 9);
  CHECK(log.header.temperature == 0.3);
  CHECK(log.header.repetition == 2);
  REQUIRE(log.records.size() == 2);
  CHECK(log.records[1].same_outcome(s.history()[1]));
}

TEST_CASE("truncated log reports its line") {
  try {
    read_trial_log(data_path("truncated_log.jsonl"));
    FAIL("expected LogCorrupt");
  } catch (const LogCorrupt& e) {
    CHECK(std::string(e.what()).find(":4") != std::string::npos);
  }
}

}  // TEST_SUITE
