#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "alchemy/engine.hpp"

namespace alchemy {

// Trial logs are JSONL: one header line (type "session") followed by one
// line per TrialRecord (type "trial"). Every line carries "v".
inline constexpr int kTrialLogVersion = 1;

struct SessionHeader {
  std::string graph_hash;
  std::uint64_t seed = 0;
  std::size_t max_trials = 0;
  std::string run_id;
  std::string agent;
  double temperature = 0.0;
  std::size_t repetition = 0;
};

nlohmann::json to_json(const TrialRecord& rec, const RecipeGraph* graph = nullptr);
TrialRecord trial_from_json(const nlohmann::json& j);  // throws ParseError

nlohmann::json to_json(const SessionHeader& header);
SessionHeader header_from_json(const nlohmann::json& j);

// Compact single-line JSON, keys in fixed order, so equal inputs give
// byte-identical output.
std::string to_jsonl_line(const nlohmann::json& j);

void write_trial_log(std::ostream& out, const SessionHeader& header, const SessionState& state);

struct TrialLog {
  SessionHeader header;
  std::vector<TrialRecord> records;
};

// Throws LogCorrupt naming the 1-based line number on malformed or truncated input.
TrialLog read_trial_log(const std::filesystem::path& path);

}  // namespace alchemy
