#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "alchemy/agents.hpp"
#include "alchemy/error.hpp"
#include "prompt_assets.hpp"

namespace alchemy {
namespace {

std::string trim_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

PromptBundle make_prompt_bundle(PromptVariant variant) {
  PromptBundle b;
  b.variant = variant;
  b.system = trim_trailing_newlines(assets::kRulesV1);
  if (variant == PromptVariant::Engineered) b.system += "\n\n" + trim_trailing_newlines(assets::kEngineeredV1);
  b.inventory_block = "Current inventory:";
  b.history_block = "Trial history:";
  b.instruction = trim_trailing_newlines(assets::kInstructionV1);
  return b;
}

std::string format_history_line(const TrialRecord& rec, const RecipeGraph& graph) {
  std::string line;
  if (rec.proposed.first.empty() && rec.proposed.second.empty()) {
    line = "(unparseable reply)";
  } else {
    line = rec.proposed.first + " + " + rec.proposed.second;
  }
  line += " -> ";
  if (rec.success) {
    for (std::size_t i = 0; i < rec.results.size(); ++i) {
      if (i) line += ", ";
      line += graph.element(rec.results[i]).name;
    }
  } else {
    line += "failure";
  }
  return line;
}

RenderedPrompt render_prompt_parts(const SessionState& state, const PromptBundle& bundle,
                                   const HistoryWindow& window) {
  const auto& graph = state.graph();
  std::string inventory = bundle.inventory_block + "\n";
  for (std::size_t i = 0; i < state.inventory().size(); ++i) {
    if (i) inventory += ", ";
    inventory += graph.element(state.inventory()[i]).name;
  }

  const auto& history = state.history();
  auto render_history = [&](std::size_t keep, bool summarize) {
    std::string out = bundle.history_block + "\n";
    if (history.empty()) return out + "(no trials yet)";
    const std::size_t first = history.size() > keep ? history.size() - keep : 0;
    if (summarize && first > 0) {
      const auto discoveries = state.inventory().size() - graph.initial_elements().size();
      out += std::to_string(first) + " prior trials omitted; discoveries so far: " + std::to_string(discoveries) + "\n";
    }
    for (std::size_t i = first; i < history.size(); ++i) {
      out += format_history_line(history[i], graph);
      if (i + 1 < history.size()) out += "\n";
    }
    return out;
  };

  RenderedPrompt p;
  p.system = bundle.system;
  auto assemble = [&](const std::string& hist) { return inventory + "\n\n" + hist + "\n\n" + bundle.instruction; };
  if (window.lines) {
    p.user = assemble(render_history(*window.lines, false));
  } else {
    p.user = assemble(render_history(history.size(), false));
    if (p.system.size() + 2 + p.user.size() > window.char_budget) {
      p.user = assemble(render_history(window.fallback_lines, true));
    }
  }
  return p;
}

std::string render_prompt(const SessionState& state, const PromptBundle& bundle, const HistoryWindow& window) {
  return render_prompt_parts(state, bundle, window).text();
}

namespace {

bool word_char(unsigned char c) { return std::isalnum(c) || c == '\'' || c == '-' || c == '_' || c >= 0x80; }
bool decoration(unsigned char c) { return c == ' ' || c == '*' || c == '`' || c == '"' || c == '\t'; }

// Up to `limit` space-separated words immediately before `end`, nearest last.
std::vector<std::string> words_before(const std::string& s, std::size_t end, std::size_t limit) {
  std::vector<std::string> words;
  std::size_t i = end;
  while (i > 0 && decoration(static_cast<unsigned char>(s[i - 1]))) --i;
  while (words.size() < limit && i > 0 && word_char(static_cast<unsigned char>(s[i - 1]))) {
    std::size_t start = i;
    while (start > 0 && word_char(static_cast<unsigned char>(s[start - 1]))) --start;
    words.insert(words.begin(), s.substr(start, i - start));
    i = start;
    if (i > 0 && s[i - 1] == ' ') {
      --i;
    } else {
      break;
    }
  }
  return words;
}

std::vector<std::string> words_after(const std::string& s, std::size_t begin, std::size_t limit) {
  std::vector<std::string> words;
  std::size_t i = begin;
  while (i < s.size() && decoration(static_cast<unsigned char>(s[i]))) ++i;
  while (words.size() < limit && i < s.size() && word_char(static_cast<unsigned char>(s[i]))) {
    std::size_t stop = i;
    while (stop < s.size() && word_char(static_cast<unsigned char>(s[stop]))) ++stop;
    words.push_back(s.substr(i, stop - i));
    i = stop;
    if (i < s.size() && s[i] == ' ') {
      ++i;
    } else {
      break;
    }
  }
  return words;
}

std::string join(const std::vector<std::string>& words, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t k = from; k < to; ++k) {
    if (k > from) out += ' ';
    out += words[k];
  }
  return out;
}

// Strips trailing apostrophes/hyphens that belong to punctuation, not names.
std::string clean(std::string w) {
  while (!w.empty() && (w.back() == '\'' || w.back() == '-')) w.pop_back();
  while (!w.empty() && (w.front() == '\'' || w.front() == '-')) w.erase(w.begin());
  return w;
}

constexpr std::size_t kMaxNameWords = 4;

}  // namespace

std::pair<std::string, std::string> parse_reply(std::string_view text, const RecipeGraph& graph) {
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  for (std::size_t pos = lower.rfind('+'); pos != std::string::npos; pos = pos == 0 ? std::string::npos : lower.rfind('+', pos - 1)) {
    const auto left = words_before(lower, pos, kMaxNameWords);
    const auto right = words_after(lower, pos + 1, kMaxNameWords);
    if (left.empty() || right.empty()) continue;

    std::string a = clean(left.back());
    for (std::size_t k = left.size(); k >= 2; --k) {
      const auto candidate = join(left, left.size() - k, left.size());
      if (graph.find(candidate)) {
        a = candidate;
        break;
      }
    }
    std::string b = clean(right.front());
    for (std::size_t k = right.size(); k >= 2; --k) {
      const auto candidate = join(right, 0, k);
      if (graph.find(candidate)) {
        b = candidate;
        break;
      }
    }
    if (a.empty() || b.empty()) continue;
    return {a, b};
  }
  throw UnparseableReply("no '<element> + <element>' found in reply");
}

}  // namespace alchemy
