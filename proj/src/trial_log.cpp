#include "alchemy/trial_log.hpp"

#include <fstream>
#include <ostream>

#include "alchemy/error.hpp"

namespace alchemy {

nlohmann::json to_json(const TrialRecord& rec, const RecipeGraph* graph) {
  nlohmann::json j;
  j["v"] = kTrialLogVersion;
  j["type"] = "trial";
  j["index"] = rec.index;
  j["a"] = rec.proposed.first;
  j["b"] = rec.proposed.second;
  if (rec.resolved) {
    j["pair"] = {rec.resolved->lo, rec.resolved->hi};
  } else {
    j["pair"] = nullptr;
  }
  j["valid"] = rec.valid;
  j["success"] = rec.success;
  j["results"] = rec.results;
  j["novel"] = rec.novel_results;
  j["category"] = to_string(rec.category);
  if (graph) {
    std::vector<std::string> names;
    for (ElementId r : rec.results) names.push_back(graph->element(r).name);
    j["result_names"] = names;
  }
  if (!rec.agent_meta.is_null()) j["meta"] = rec.agent_meta;
  return j;
}

TrialRecord trial_from_json(const nlohmann::json& j) {
  try {
    TrialRecord rec;
    if (j.at("type").get<std::string>() != "trial") throw ParseError("not a trial line");
    rec.index = j.at("index").get<std::uint32_t>();
    rec.proposed = {j.at("a").get<std::string>(), j.at("b").get<std::string>()};
    if (!j.at("pair").is_null()) {
      const auto p = j.at("pair").get<std::vector<ElementId>>();
      if (p.size() != 2) throw ParseError("pair must have two ids");
      rec.resolved = CanonicalPair::of(p[0], p[1]);
    }
    rec.valid = j.at("valid").get<bool>();
    rec.success = j.at("success").get<bool>();
    rec.results = j.at("results").get<std::vector<ElementId>>();
    rec.novel_results = j.at("novel").get<std::vector<ElementId>>();
    rec.category = category_from_string(j.at("category").get<std::string>());
    if (j.contains("meta")) rec.agent_meta = j.at("meta");
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("trial record: ") + e.what());
  }
}

nlohmann::json to_json(const SessionHeader& h) {
  return {{"v", kTrialLogVersion}, {"type", "session"},  {"graph_hash", h.graph_hash},
          {"seed", h.seed},        {"max_trials", h.max_trials}, {"run_id", h.run_id},
          {"agent", h.agent},      {"temperature", h.temperature}, {"repetition", h.repetition}};
}

SessionHeader header_from_json(const nlohmann::json& j) {
  try {
    if (j.at("type").get<std::string>() != "session") throw ParseError("first line is not a session header");
    SessionHeader h;
    h.graph_hash = j.at("graph_hash").get<std::string>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.max_trials = j.value("max_trials", std::size_t{0});
    h.run_id = j.value("run_id", std::string{});
    h.agent = j.value("agent", std::string{});
    h.temperature = j.value("temperature", 0.0);
    h.repetition = j.value("repetition", std::size_t{0});
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("session header: ") + e.what());
  }
}

std::string to_jsonl_line(const nlohmann::json& j) { return j.dump() + "\n"; }

void write_trial_log(std::ostream& out, const SessionHeader& header, const SessionState& state) {
  out << to_jsonl_line(to_json(header));
  for (const auto& rec : state.history()) out << to_jsonl_line(to_json(rec, &state.graph()));
}

TrialLog read_trial_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LogCorrupt("cannot open trial log " + path.string());
  TrialLog log;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const bool terminated = !in.eof();
    if (line.empty() && !terminated) break;
    try {
      if (!terminated) throw ParseError("line is not newline-terminated (truncated file?)");
      const auto j = nlohmann::json::parse(line);
      if (j.value("v", 0) != kTrialLogVersion) throw ParseError("unsupported log version");
      if (!have_header) {
        log.header = header_from_json(j);
        have_header = true;
      } else {
        log.records.push_back(trial_from_json(j));
        if (log.records.back().index != log.records.size() - 1) throw ParseError("trial index out of sequence");
      }
    } catch (const std::exception& e) {
      throw LogCorrupt(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw LogCorrupt(path.string() + ":1: missing session header");
  return log;
}

}  // namespace alchemy
