#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "alchemy/chat_client.hpp"

namespace alchemy {

enum class ReasoningLabel : std::uint8_t {
  StateGoal,
  CheckCurrentInventory,
  PastTrialAnalysis,
  ElementPropertyReasoning,
  CombinationAnalysis,
  OutcomePrediction,
  FinalChoice,
};

inline constexpr std::size_t kLabelCount = 7;
inline constexpr std::array<ReasoningLabel, kLabelCount> kAllLabels{
    ReasoningLabel::StateGoal,           ReasoningLabel::CheckCurrentInventory,   ReasoningLabel::PastTrialAnalysis,
    ReasoningLabel::ElementPropertyReasoning, ReasoningLabel::CombinationAnalysis, ReasoningLabel::OutcomePrediction,
    ReasoningLabel::FinalChoice};

std::string_view to_string(ReasoningLabel l);
// Accepts the snake_case names after trimming, lowercasing, stripping quotes
// and mapping spaces/hyphens to underscores. Throws UnknownLabel otherwise.
ReasoningLabel label_from_string(std::string_view s);

struct SegmentOptions {
  std::vector<std::string> abbreviations{"e.g.", "i.e.", "vs.", "etc.", "cf.", "approx.", "mr.", "mrs.", "dr."};
};

// Sentence split at . ! ? followed by whitespace or end of text, plus list
// items and blank lines as boundaries. Segments are trimmed and non-empty.
std::vector<std::string> segment_sentences(std::string_view text, const SegmentOptions& options = {});

// Whitespace-delimited token count.
std::size_t whitespace_tokens(std::string_view text);

struct LabeledSentence {
  std::string text;
  ReasoningLabel label = ReasoningLabel::StateGoal;
};

class SentenceClassifier {
 public:
  virtual ~SentenceClassifier() = default;
  // One label per sentence, same order.
  virtual std::vector<ReasoningLabel> classify(const std::vector<std::string>& sentences) = 0;
};

// Pre-labeled sentences keyed by exact text; unknown sentences throw
// UnknownLabel.
std::unique_ptr<SentenceClassifier> make_file_classifier(std::vector<LabeledSentence> labeled);
// Any callable returning a label name per sentence; names are normalized.
std::unique_ptr<SentenceClassifier> make_function_classifier(std::function<std::string(const std::string&)> fn);
// Sends batches of numbered sentences with the classifier prompt; batches run
// concurrently (bounded by the client) and are reassembled in order.
std::unique_ptr<SentenceClassifier> make_llm_classifier(std::shared_ptr<ChatClient> client,
                                                        std::size_t batch_size = 20);

// Parses a one-label-per-line reply, tolerating "1." / "1)" / "-" prefixes.
std::vector<ReasoningLabel> parse_label_reply(std::string_view reply, std::size_t expected);

std::vector<LabeledSentence> classify_sentences(const std::vector<std::string>& sentences,
                                                SentenceClassifier& classifier);

struct LabeledSpan {
  ReasoningLabel label = ReasoningLabel::StateGoal;
  std::string text;
  std::size_t token_count = 0;
  std::size_t sentence_count = 0;
};

std::vector<LabeledSpan> merge_spans(const std::vector<LabeledSentence>& labeled);

struct TransitionMatrix {
  std::array<std::array<double, kLabelCount>, kLabelCount> p{};
  std::array<std::array<std::size_t, kLabelCount>, kLabelCount> counts{};
  std::array<std::size_t, kLabelCount> row_counts{};

  bool row_empty(ReasoningLabel from) const { return row_counts[static_cast<std::size_t>(from)] == 0; }
  double at(ReasoningLabel from, ReasoningLabel to) const {
    return p[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
  }
};

// Transitions between consecutive merged spans within each trial.
TransitionMatrix transition_matrix(const std::vector<std::vector<LabeledSpan>>& trials);
// Same over unmerged sentence labels, so self-transitions can appear.
TransitionMatrix transition_matrix_pre_merge(const std::vector<std::vector<LabeledSentence>>& trials);

struct TrialTrace {
  std::uint32_t trial = 0;
  std::vector<LabeledSpan> spans;
};

struct TrialTraceStats {
  std::uint32_t trial = 0;
  std::size_t depth = 0;  // merged spans
  std::array<std::size_t, kLabelCount> tokens{};
  std::size_t total_tokens = 0;
  std::size_t coverage = 0;  // distinct labels used
};

std::vector<TrialTraceStats> trace_stats(const std::vector<TrialTrace>& trials);

// Segment, classify, merge.
TrialTrace label_trace(std::uint32_t trial, std::string_view text, SentenceClassifier& classifier,
                       const SegmentOptions& options = {});

struct TraceInput {
  std::uint32_t trial = 0;
  std::string text;
};

// JSONL {"trial": n, "text": "..."}; throws ParseError with the line number.
std::vector<TraceInput> read_trace_jsonl(const std::filesystem::path& path);

// Sentence-label TSV: header "label\ttext", one sentence per line.
std::vector<LabeledSentence> read_sentence_labels_tsv(const std::filesystem::path& path);
void write_sentence_labels_tsv(std::ostream& out, const std::vector<LabeledSentence>& labeled);

// Span TSV: header "trial\tspan\tlabel\ttoken_count\ttext".
void write_spans_tsv(std::ostream& out, const std::vector<TrialTrace>& trials);
std::vector<TrialTrace> read_spans_tsv(const std::filesystem::path& path);

// 7x7 CSV with label names as header row and first column.
void write_transition_csv(std::ostream& out, const TransitionMatrix& m);
// trial,depth,total_tokens,coverage,<tokens per label...>
void write_stats_csv(std::ostream& out, const std::vector<TrialTraceStats>& stats);

}  // namespace alchemy
