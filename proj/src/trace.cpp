#include "alchemy/trace.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "alchemy/error.hpp"
#include "prompt_assets.hpp"

namespace alchemy {

std::string_view to_string(ReasoningLabel l) {
  switch (l) {
    case ReasoningLabel::StateGoal: return "state_goal";
    case ReasoningLabel::CheckCurrentInventory: return "check_current_inventory";
    case ReasoningLabel::PastTrialAnalysis: return "past_trial_analysis";
    case ReasoningLabel::ElementPropertyReasoning: return "element_property_reasoning";
    case ReasoningLabel::CombinationAnalysis: return "combination_analysis";
    case ReasoningLabel::OutcomePrediction: return "outcome_prediction";
    case ReasoningLabel::FinalChoice: return "final_choice";
  }
  return "state_goal";
}

ReasoningLabel label_from_string(std::string_view s) {
  std::string norm;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (c == ' ' || c == '-') {
      norm += '_';
    } else if (std::isalnum(u) || c == '_') {
      norm += static_cast<char>(std::tolower(u));
    } else if (std::isspace(u) || c == '"' || c == '\'' || c == '`' || c == '*' || c == '.' || c == ',') {
      norm += ' ';  // trimmed below
    } else {
      throw UnknownLabel("unknown reasoning label '" + std::string(s) + "'");
    }
  }
  const auto first = norm.find_first_not_of(" _");
  const auto last = norm.find_last_not_of(" _");
  norm = first == std::string::npos ? "" : norm.substr(first, last - first + 1);
  for (auto l : kAllLabels) {
    if (to_string(l) == norm) return l;
  }
  throw UnknownLabel("unknown reasoning label '" + std::string(s) + "'");
}

namespace {

bool space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && space(s[a])) ++a;
  while (b > a && space(s[b - 1])) --b;
  return std::string(s.substr(a, b - a));
}

// "- ", "* ", "• ", "12. " or "12) " at position k.
bool list_marker_at(std::string_view t, std::size_t k) {
  if (k >= t.size()) return false;
  auto followed_by_space = [&](std::size_t p) { return p < t.size() && (t[p] == ' ' || t[p] == '\t'); };
  if (t[k] == '-' || t[k] == '*') return followed_by_space(k + 1);
  if (t.substr(k, 3) == "\xE2\x80\xA2") return followed_by_space(k + 3);
  std::size_t p = k;
  while (p < t.size() && std::isdigit(static_cast<unsigned char>(t[p]))) ++p;
  if (p == k || p >= t.size() || (t[p] != '.' && t[p] != ')')) return false;
  return followed_by_space(p + 1);
}

std::size_t skip_blanks(std::string_view t, std::size_t k) {
  while (k < t.size() && (t[k] == ' ' || t[k] == '\t')) ++k;
  return k;
}

// Is the '.' at i the terminator of a list number at the start of a line?
bool list_number_period(std::string_view t, std::size_t i) {
  std::size_t p = i;
  while (p > 0 && std::isdigit(static_cast<unsigned char>(t[p - 1]))) --p;
  if (p == i) return false;
  while (p > 0 && (t[p - 1] == ' ' || t[p - 1] == '\t')) --p;
  return p == 0 || t[p - 1] == '\n';
}

bool abbreviation_at(std::string_view t, std::size_t i, const SegmentOptions& options) {
  std::size_t p = i;
  while (p > 0 && !space(t[p - 1])) --p;
  std::string word;
  for (std::size_t k = p; k <= i; ++k) {
    const char c = t[k];
    if (word.empty() && (c == '(' || c == '"' || c == '\'')) continue;
    word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return std::find(options.abbreviations.begin(), options.abbreviations.end(), word) != options.abbreviations.end();
}

bool terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

}  // namespace

std::vector<std::string> segment_sentences(std::string_view text, const SegmentOptions& options) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    auto s = trim(text.substr(start, end - start));
    if (!s.empty()) out.push_back(std::move(s));
    start = end;
  };

  bool line_is_item = list_marker_at(text, skip_blanks(text, 0));
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      const std::size_t k = skip_blanks(text, i + 1);
      const bool blank_next = k < text.size() && (text[k] == '\n' || text[k] == '\r');
      const bool next_is_item = list_marker_at(text, k);
      if (blank_next || next_is_item || line_is_item) flush(i + 1);
      line_is_item = next_is_item;
      continue;
    }
    if (!terminal(c)) continue;
    std::size_t j = i;
    while (j + 1 < text.size() && (terminal(text[j + 1]) || closer(text[j + 1]))) ++j;
    if (j + 1 < text.size() && !space(text[j + 1])) {
      i = j;
      continue;
    }
    if (c == '.' && j == i && (list_number_period(text, i) || abbreviation_at(text, i, options))) continue;
    flush(j + 1);
    i = j;
  }
  flush(text.size());
  return out;
}

std::size_t whitespace_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : text) {
    if (space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

namespace {

class FileClassifier final : public SentenceClassifier {
 public:
  explicit FileClassifier(std::vector<LabeledSentence> labeled) {
    for (auto& l : labeled) labels_.emplace(std::move(l.text), l.label);
  }
  std::vector<ReasoningLabel> classify(const std::vector<std::string>& sentences) override {
    std::vector<ReasoningLabel> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) {
      auto it = labels_.find(s);
      if (it == labels_.end()) throw UnknownLabel("no label on file for sentence: " + s);
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::unordered_map<std::string, ReasoningLabel> labels_;
};

class FunctionClassifier final : public SentenceClassifier {
 public:
  explicit FunctionClassifier(std::function<std::string(const std::string&)> fn) : fn_(std::move(fn)) {}
  std::vector<ReasoningLabel> classify(const std::vector<std::string>& sentences) override {
    std::vector<ReasoningLabel> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) out.push_back(label_from_string(fn_(s)));
    return out;
  }

 private:
  std::function<std::string(const std::string&)> fn_;
};

class LlmClassifier final : public SentenceClassifier {
 public:
  LlmClassifier(std::shared_ptr<ChatClient> client, std::size_t batch) : client_(std::move(client)), batch_(batch) {}

  std::vector<ReasoningLabel> classify(const std::vector<std::string>& sentences) override {
    std::vector<std::future<std::vector<ReasoningLabel>>> pending;
    for (std::size_t start = 0; start < sentences.size(); start += batch_) {
      const std::size_t end = std::min(sentences.size(), start + batch_);
      std::vector<std::string> chunk(sentences.begin() + static_cast<std::ptrdiff_t>(start),
                                     sentences.begin() + static_cast<std::ptrdiff_t>(end));
      pending.push_back(std::async(std::launch::async, [this, chunk = std::move(chunk)] { return run(chunk); }));
    }
    std::vector<ReasoningLabel> out;
    out.reserve(sentences.size());
    for (auto& f : pending) {
      auto labels = f.get();
      out.insert(out.end(), labels.begin(), labels.end());
    }
    return out;
  }

 private:
  std::vector<ReasoningLabel> run(const std::vector<std::string>& chunk) {
    std::string user;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      std::string line = chunk[i];
      std::replace(line.begin(), line.end(), '\n', ' ');
      user += std::to_string(i + 1) + ". " + line + "\n";
    }
    const auto reply = client_->complete({{"system", assets::kClassifierV1}, {"user", user}}, 0.0);
    return parse_label_reply(reply.content, chunk.size());
  }

  std::shared_ptr<ChatClient> client_;
  std::size_t batch_;
};

}  // namespace

std::unique_ptr<SentenceClassifier> make_file_classifier(std::vector<LabeledSentence> labeled) {
  return std::make_unique<FileClassifier>(std::move(labeled));
}

std::unique_ptr<SentenceClassifier> make_function_classifier(std::function<std::string(const std::string&)> fn) {
  return std::make_unique<FunctionClassifier>(std::move(fn));
}

std::unique_ptr<SentenceClassifier> make_llm_classifier(std::shared_ptr<ChatClient> client, std::size_t batch_size) {
  if (batch_size == 0) throw ValidationError("classifier batch size must be positive");
  return std::make_unique<LlmClassifier>(std::move(client), batch_size);
}

std::vector<ReasoningLabel> parse_label_reply(std::string_view reply, std::size_t expected) {
  std::vector<ReasoningLabel> out;
  std::istringstream in{std::string(reply)};
  std::string line;
  while (std::getline(in, line)) {
    std::string_view v = line;
    std::size_t k = 0;
    while (k < v.size() && space(v[k])) ++k;
    if (k == v.size()) continue;
    if (list_marker_at(v, k)) {
      while (k < v.size() && !space(v[k])) ++k;
    }
    out.push_back(label_from_string(v.substr(k)));
  }
  if (out.size() != expected) {
    throw UnknownLabel("classifier returned " + std::to_string(out.size()) + " labels for " +
                       std::to_string(expected) + " sentences");
  }
  return out;
}

std::vector<LabeledSentence> classify_sentences(const std::vector<std::string>& sentences,
                                                SentenceClassifier& classifier) {
  const auto labels = classifier.classify(sentences);
  if (labels.size() != sentences.size()) {
    throw UnknownLabel("classifier returned " + std::to_string(labels.size()) + " labels for " +
                       std::to_string(sentences.size()) + " sentences");
  }
  std::vector<LabeledSentence> out;
  out.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) out.push_back({sentences[i], labels[i]});
  return out;
}

std::vector<LabeledSpan> merge_spans(const std::vector<LabeledSentence>& labeled) {
  std::vector<LabeledSpan> out;
  for (const auto& s : labeled) {
    if (!out.empty() && out.back().label == s.label) {
      auto& span = out.back();
      span.text += " " + s.text;
      span.token_count += whitespace_tokens(s.text);
      ++span.sentence_count;
    } else {
      out.push_back({s.label, s.text, whitespace_tokens(s.text), 1});
    }
  }
  return out;
}

namespace {

template <typename Item>
TransitionMatrix count_transitions(const std::vector<std::vector<Item>>& trials) {
  TransitionMatrix m;
  for (const auto& trial : trials) {
    for (std::size_t i = 1; i < trial.size(); ++i) {
      const auto from = static_cast<std::size_t>(trial[i - 1].label);
      const auto to = static_cast<std::size_t>(trial[i].label);
      ++m.counts[from][to];
      ++m.row_counts[from];
    }
  }
  for (std::size_t a = 0; a < kLabelCount; ++a) {
    if (m.row_counts[a] == 0) continue;
    for (std::size_t b = 0; b < kLabelCount; ++b) {
      m.p[a][b] = static_cast<double>(m.counts[a][b]) / static_cast<double>(m.row_counts[a]);
    }
  }
  return m;
}

}  // namespace

TransitionMatrix transition_matrix(const std::vector<std::vector<LabeledSpan>>& trials) {
  return count_transitions(trials);
}

TransitionMatrix transition_matrix_pre_merge(const std::vector<std::vector<LabeledSentence>>& trials) {
  return count_transitions(trials);
}

std::vector<TrialTraceStats> trace_stats(const std::vector<TrialTrace>& trials) {
  std::vector<TrialTraceStats> out;
  for (const auto& t : trials) {
    TrialTraceStats s;
    s.trial = t.trial;
    s.depth = t.spans.size();
    for (const auto& span : t.spans) {
      s.tokens[static_cast<std::size_t>(span.label)] += span.token_count;
      s.total_tokens += span.token_count;
    }
    std::array<bool, kLabelCount> used{};
    for (const auto& span : t.spans) used[static_cast<std::size_t>(span.label)] = true;
    s.coverage = static_cast<std::size_t>(std::count(used.begin(), used.end(), true));
    out.push_back(s);
  }
  return out;
}

TrialTrace label_trace(std::uint32_t trial, std::string_view text, SentenceClassifier& classifier,
                       const SegmentOptions& options) {
  const auto sentences = segment_sentences(text, options);
  TrialTrace t;
  t.trial = trial;
  if (sentences.empty()) return t;
  t.spans = merge_spans(classify_sentences(sentences, classifier));
  return t;
}

std::vector<TraceInput> read_trace_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<TraceInput> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("trial").get<std::uint32_t>(), j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::string tsv_field(std::string s) {
  for (auto& c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::vector<std::string> split_tabs(const std::string& line, std::size_t fields) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (out.size() + 1 < fields) {
    const auto tab = line.find('\t', start);
    if (tab == std::string::npos) break;
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  out.push_back(line.substr(start));
  return out;
}

template <typename Fn>
void for_each_tsv_row(const std::filesystem::path& path, const std::string& header, std::size_t fields, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != header) throw ParseError(path.string() + ":1: expected header '" + header + "'");
      continue;
    }
    if (line.empty()) continue;
    auto cols = split_tabs(line, fields);
    if (cols.size() != fields) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(fields) +
                       " tab-separated fields");
    }
    try {
      fn(cols);
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<LabeledSentence> read_sentence_labels_tsv(const std::filesystem::path& path) {
  std::vector<LabeledSentence> out;
  for_each_tsv_row(path, "label\ttext", 2, [&](const std::vector<std::string>& c) {
    out.push_back({c[1], label_from_string(c[0])});
  });
  return out;
}

void write_sentence_labels_tsv(std::ostream& out, const std::vector<LabeledSentence>& labeled) {
  out << "label\ttext\n";
  for (const auto& s : labeled) out << to_string(s.label) << '\t' << tsv_field(s.text) << '\n';
}

void write_spans_tsv(std::ostream& out, const std::vector<TrialTrace>& trials) {
  out << "trial\tspan\tlabel\ttoken_count\ttext\n";
  for (const auto& t : trials) {
    for (std::size_t i = 0; i < t.spans.size(); ++i) {
      const auto& s = t.spans[i];
      out << t.trial << '\t' << i << '\t' << to_string(s.label) << '\t' << s.token_count << '\t' << tsv_field(s.text)
          << '\n';
    }
  }
}

std::vector<TrialTrace> read_spans_tsv(const std::filesystem::path& path) {
  std::vector<TrialTrace> out;
  for_each_tsv_row(path, "trial\tspan\tlabel\ttoken_count\ttext", 5, [&](const std::vector<std::string>& c) {
    const auto trial = static_cast<std::uint32_t>(std::stoul(c[0]));
    if (out.empty() || out.back().trial != trial) out.push_back({trial, {}});
    LabeledSpan s;
    s.label = label_from_string(c[2]);
    s.token_count = std::stoul(c[3]);
    s.text = c[4];
    s.sentence_count = 1;
    out.back().spans.push_back(std::move(s));
  });
  return out;
}

void write_transition_csv(std::ostream& out, const TransitionMatrix& m) {
  out << "from";
  for (auto l : kAllLabels) out << ',' << to_string(l);
  out << '\n';
  auto old = out.precision(17);
  for (std::size_t a = 0; a < kLabelCount; ++a) {
    out << to_string(kAllLabels[a]);
    for (std::size_t b = 0; b < kLabelCount; ++b) out << ',' << m.p[a][b];
    out << '\n';
  }
  out.precision(old);
}

void write_stats_csv(std::ostream& out, const std::vector<TrialTraceStats>& stats) {
  out << "trial,depth,total_tokens,coverage";
  for (auto l : kAllLabels) out << ",tokens_" << to_string(l);
  out << '\n';
  for (const auto& s : stats) {
    out << s.trial << ',' << s.depth << ',' << s.total_tokens << ',' << s.coverage;
    for (auto t : s.tokens) out << ',' << t;
    out << '\n';
  }
}

}  // namespace alchemy
