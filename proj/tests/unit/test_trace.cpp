#include <doctest.h>

#include <cctype>
#include <mutex>
#include <sstream>

#include "alchemy/error.hpp"
#include "alchemy/trace.hpp"
#include "fixtures.hpp"
#include "stub_server.hpp"

using namespace alchemy;
using L = ReasoningLabel;

namespace {

std::vector<LabeledSentence> labeled(std::initializer_list<std::pair<L, const char*>> items) {
  std::vector<LabeledSentence> out;
  for (const auto& [l, t] : items) out.push_back({t, l});
  return out;
}

std::vector<LabeledSpan> spans(std::initializer_list<L> labels) {
  std::vector<LabeledSpan> out;
  for (auto l : labels) out.push_back({l, "x", 1, 1});
  return out;
}

std::string joined(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : " ") + p;
  return s;
}

}  // namespace

TEST_SUITE("trace") {

TEST_CASE("labels round-trip and normalize") {
  for (auto l : kAllLabels) CHECK(label_from_string(to_string(l)) == l);
  CHECK(label_from_string("Final Choice") == L::FinalChoice);
  CHECK(label_from_string("  \"outcome-prediction\" ") == L::OutcomePrediction);
  CHECK_THROWS_AS(label_from_string("other"), UnknownLabel);
}

TEST_CASE("sentence segmentation") {
  CHECK(segment_sentences("I will try water. It may fail!").size() == 2);
  CHECK(segment_sentences("").empty());
  CHECK(segment_sentences("   \n\n ").empty());
  CHECK(segment_sentences(slurp(data_path("numbered_list.txt"))).size() == 5);
  const auto abbrev = segment_sentences("Try hot things, e.g. fire or lava. Then stop.");
  CHECK(abbrev.size() == 2);
  CHECK(segment_sentences("Version 2.5 is out? Yes").size() == 2);
  const auto bullets = segment_sentences("Options:\n- water + fire\n- earth + air\n\nDone");
  CHECK(bullets.size() == 4);
  CHECK(bullets[1] == "- water + fire");
}

TEST_CASE("segmentation preserves text and is idempotent") {
  const auto text = slurp(data_path("trace_deepseek.jsonl"));
  for (const auto& t : read_trace_jsonl(data_path("trace_deepseek.jsonl"))) {
    const auto parts = segment_sentences(t.text);
    std::string squashed_in, squashed_out;
    for (char c : t.text) {
      if (!std::isspace(static_cast<unsigned char>(c))) squashed_in += c;
    }
    for (const auto& p : parts) {
      for (char c : p) {
        if (!std::isspace(static_cast<unsigned char>(c))) squashed_out += c;
      }
    }
    CHECK(squashed_in == squashed_out);
    CHECK(segment_sentences(joined(parts)) == parts);
  }
}

TEST_CASE("file classifier passes the golden TSV through") {
  const auto golden = read_sentence_labels_tsv(data_path("sentences_golden.tsv"));
  REQUIRE(golden.size() == 20);
  std::vector<std::string> sentences;
  for (const auto& s : golden) sentences.push_back(s.text);
  auto c = make_file_classifier(golden);
  const auto out = classify_sentences(sentences, *c);
  REQUIRE(out.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(out[i].text == golden[i].text);
    CHECK(out[i].label == golden[i].label);
  }
  std::ostringstream tsv;
  write_sentence_labels_tsv(tsv, golden);
  CHECK(tsv.str() == slurp(data_path("sentences_golden.tsv")));
  CHECK_THROWS_AS(c->classify({"never seen"}), UnknownLabel);
}

TEST_CASE("function classifier maps names") {
  auto ok = make_function_classifier([](const std::string&) { return "final_choice"; });
  CHECK(ok->classify({"a"}).at(0) == L::FinalChoice);
  auto bad = make_function_classifier([](const std::string&) { return "other"; });
  CHECK_THROWS_AS(bad->classify({"a"}), UnknownLabel);
}

TEST_CASE("label replies with list prefixes") {
  const auto r = parse_label_reply("1. state_goal\n2) final_choice\n- combination_analysis\n", 3);
  CHECK(r == std::vector<L>{L::StateGoal, L::FinalChoice, L::CombinationAnalysis});
  CHECK_THROWS(parse_label_reply("state_goal", 2));
}

TEST_CASE("LLM classifier batches and restores order") {
  std::mutex mu;
  std::vector<std::string> systems;
  std::vector<double> temps;
  StubChat stub([&](const nlohmann::json& req, int, httplib::Response& res) {
    {
      std::lock_guard lock(mu);
      systems.push_back(req["messages"][0]["content"]);
      temps.push_back(req["temperature"]);
    }
    // label by sentence content: the word "final" -> final_choice, else state_goal
    std::istringstream in(req["messages"][1]["content"].get<std::string>());
    std::string line, reply;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      reply += (line.find("final") != std::string::npos ? "final_choice" : "state_goal") + std::string("\n");
    }
    StubChat::reply(res, reply);
  });
  ChatClientConfig cfg;
  cfg.base_url = stub.base_url();
  cfg.retry_backoff = std::chrono::milliseconds(1);
  auto c = make_llm_classifier(std::make_shared<ChatClient>(cfg), 2);
  const std::vector<std::string> s{"goal one", "final two", "goal three", "final four", "final five"};
  const auto labels = c->classify(s);
  CHECK(labels == std::vector<L>{L::StateGoal, L::FinalChoice, L::StateGoal, L::FinalChoice, L::FinalChoice});
  CHECK(stub.calls() == 3);
  REQUIRE(!systems.empty());
  CHECK(systems[0].find("final_choice") != std::string::npos);
  for (double t : temps) CHECK(t == 0.0);
}

TEST_CASE("merging spans") {
  const auto m = merge_spans(labeled({{L::StateGoal, "a b c"}, {L::StateGoal, "d e f g"}, {L::FinalChoice, "1 2 3 4 5"}}));
  REQUIRE(m.size() == 2);
  CHECK(m[0].token_count == 7);
  CHECK(m[0].sentence_count == 2);
  CHECK(m[0].text == "a b c d e f g");
  CHECK(m[1].token_count == 5);
  CHECK(m[1].sentence_count == 1);
  CHECK(merge_spans({}).empty());
  CHECK(merge_spans(labeled({{L::StateGoal, "x"}, {L::FinalChoice, "y"}, {L::StateGoal, "z"}})).size() == 3);
}

TEST_CASE("transition matrices") {
  const auto one = transition_matrix({spans({L::StateGoal, L::FinalChoice, L::StateGoal, L::FinalChoice})});
  CHECK(one.at(L::StateGoal, L::FinalChoice) == 1.0);
  CHECK(one.at(L::FinalChoice, L::StateGoal) == 1.0);

  const auto two = transition_matrix({spans({L::StateGoal, L::CombinationAnalysis}),
                                      spans({L::StateGoal, L::OutcomePrediction})});
  CHECK(two.at(L::StateGoal, L::CombinationAnalysis) == 0.5);
  CHECK(two.at(L::StateGoal, L::OutcomePrediction) == 0.5);
  CHECK(two.row_empty(L::CombinationAnalysis));  // no cross-trial transition

  const auto none = transition_matrix({spans({L::StateGoal})});
  for (auto l : kAllLabels) CHECK(none.row_empty(l));

  const auto pre = transition_matrix_pre_merge({labeled({{L::StateGoal, "a"}, {L::StateGoal, "b"}, {L::FinalChoice, "c"}})});
  CHECK(pre.at(L::StateGoal, L::StateGoal) == 0.5);

  std::ostringstream csv;
  write_transition_csv(csv, two);
  CHECK(csv.str().rfind("from,state_goal,check_current_inventory", 0) == 0);
}

TEST_CASE("golden trace: invariants and depth/token table") {
  auto c = make_file_classifier(read_sentence_labels_tsv(data_path("trace_deepseek_labels.tsv")));
  std::vector<TrialTrace> trials;
  std::size_t whole_tokens = 0;
  for (const auto& t : read_trace_jsonl(data_path("trace_deepseek.jsonl"))) {
    trials.push_back(label_trace(t.trial, t.text, *c));
    whole_tokens += whitespace_tokens(t.text);
    const auto& sp = trials.back().spans;
    for (std::size_t i = 1; i < sp.size(); ++i) CHECK(sp[i].label != sp[i - 1].label);
    std::size_t sum = 0;
    for (const auto& s : sp) {
      CHECK(s.token_count == whitespace_tokens(s.text));
      sum += s.token_count;
    }
    CHECK(sum == whitespace_tokens(t.text));
  }
  const auto stats = trace_stats(trials);
  std::size_t total = 0;
  for (const auto& s : stats) total += s.total_tokens;
  CHECK(total == whole_tokens);
  CHECK(stats.at(0).coverage == 7);

  std::ostringstream csv;
  write_stats_csv(csv, stats);
  CHECK(csv.str() == slurp(data_path("trace_deepseek_stats.csv")));

  std::vector<std::vector<LabeledSpan>> per_trial;
  for (const auto& t : trials) per_trial.push_back(t.spans);
  const auto m = transition_matrix(per_trial);
  for (auto from : kAllLabels) {
    CHECK(m.at(from, from) == 0.0);
    if (m.row_empty(from)) continue;
    double row = 0.0;
    for (auto to : kAllLabels) row += m.at(from, to);
    CHECK(std::abs(row - 1.0) < 1e-9);
  }

  std::ostringstream tsv;
  write_spans_tsv(tsv, trials);
  TempDir dir("trace");
  std::ofstream(dir.path / "spans.tsv") << tsv.str();
  const auto back = read_spans_tsv(dir.path / "spans.tsv");
  REQUIRE(back.size() == trials.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].spans.size() == trials[i].spans.size());
    for (std::size_t j = 0; j < back[i].spans.size(); ++j) {
      CHECK(back[i].spans[j].label == trials[i].spans[j].label);
      CHECK(back[i].spans[j].text == trials[i].spans[j].text);
    }
  }
}

TEST_CASE("empty trace has depth 0") {
  auto c = make_function_classifier([](const std::string&) { return "state_goal"; });
  const auto t = label_trace(1, "", *c);
  const auto s = trace_stats({t});
  CHECK(s.at(0).depth == 0);
  CHECK(s.at(0).total_tokens == 0);
  CHECK(s.at(0).coverage == 0);
}

TEST_CASE("bad trace JSONL names the line") {
  TempDir dir("trace_bad");
  std::ofstream(dir.path / "t.jsonl") << "{\"trial\": 1, \"text\": \"ok\"}\n{\"trial\": \n";
  try {
    read_trace_jsonl(dir.path / "t.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

}  // TEST_SUITE
