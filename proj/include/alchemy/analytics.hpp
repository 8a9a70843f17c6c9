#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "alchemy/engine.hpp"
#include "alchemy/logistic.hpp"
#include "alchemy/stats.hpp"

namespace alchemy {

// Valuation outputs recorded at decision time for one trial.
struct DecisionSnapshot {
  std::uint32_t trial = 0;
  std::vector<ElementId> inventory;
  std::vector<double> uncertainty;  // parallel to inventory
  std::vector<double> empowerment;  // parallel to inventory
  std::vector<ElementId> chosen;    // distinct chosen inventory elements, at most 2
};

struct SessionTrace {
  std::string run_id;
  double temperature = 0.0;
  std::vector<DecisionSnapshot> decisions;
};

struct ChoiceDatum {
  std::string run_id;
  std::uint32_t trial = 0;
  ElementId element = 0;
  int chosen = 0;
  double uncertainty = 0.0;
  double empowerment = 0.0;
  double temperature = 0.0;
};

struct ChoiceDataset {
  std::vector<ChoiceDatum> rows;
  std::uint64_t seed = 0;  // negative-sampling seed, kept for reproducibility
};

// Per trial: chosen elements as positives and as many distinct non-chosen
// inventory elements (sampled without replacement) as negatives, or all of
// them when fewer are available. Throws EmptyInput.
ChoiceDataset build_choice_dataset(const std::vector<SessionTrace>& sessions, std::uint64_t seed);

// Term names used in regression output.
inline constexpr const char* kIntercept = "intercept";
inline constexpr const char* kTrial = "trial";
inline constexpr const char* kUncertainty = "uncertainty";
inline constexpr const char* kEmpowerment = "empowerment";
inline constexpr const char* kTemperature = "temperature";
inline constexpr const char* kTempXUncertainty = "temperature:uncertainty";
inline constexpr const char* kTempXEmpowerment = "temperature:empowerment";

struct Model1Result {
  std::map<std::string, RegressionResult> per_run;  // ordered by run id
  // Mean of per-run coefficients; se is the across-run standard error, p from
  // Student t with (runs - 1) df. A single run reports its own fit.
  RegressionResult pooled;
};

// chosen ~ intercept + trial + uncertainty + empowerment, features z-scored
// within run, one fit per run, then aggregated.
Model1Result run_model1(const ChoiceDataset& data, const LogisticOptions& options = {});

// Pooled fit adding temperature and its interactions with the z-scored
// features. Throws InsufficientTemperatureVariation with < 2 temperatures.
RegressionResult run_model2(const ChoiceDataset& data, const LogisticOptions& options = {});

struct HumanBaseline {
  std::vector<double> discoveries;
  std::size_t trials_cap = 500;
};

// JSON {"trials_cap": int, "discoveries": [int, ...]}.
HumanBaseline load_human_baseline(const std::filesystem::path& path);

// 100 * (count below + 0.5 * ties) / n.
double percentile_rank(double value, const HumanBaseline& baseline);

struct BehaviorRow {
  std::string group;
  std::size_t trials = 0;
  std::map<BehaviorCategory, double> proportion;
};

// Groups with no trials are left out.
std::vector<BehaviorRow> behavior_summary(const std::map<std::string, std::vector<std::vector<TrialRecord>>>& groups);

void write_regression_csv(std::ostream& out, const RegressionResult& r, const std::string& group);
// Plot-ready rows: [{"term", "estimate", "se", "group"}, ...].
nlohmann::json regression_plot_table(const RegressionResult& r, const std::string& group);

// Valuation snapshot CSV: trial,element,uncertainty,empowerment,chosen.
void write_snapshot_csv(std::ostream& out, const std::vector<DecisionSnapshot>& decisions);
std::vector<DecisionSnapshot> read_snapshot_csv(const std::filesystem::path& path);

}  // namespace alchemy
