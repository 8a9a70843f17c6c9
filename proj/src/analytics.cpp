#include "alchemy/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "alchemy/error.hpp"
#include "alchemy/rng.hpp"

namespace alchemy {

ChoiceDataset build_choice_dataset(const std::vector<SessionTrace>& sessions, std::uint64_t seed) {
  ChoiceDataset out;
  out.seed = seed;
  Rng rng(seed);
  for (const auto& session : sessions) {
    for (const auto& d : session.decisions) {
      if (d.uncertainty.size() != d.inventory.size() || d.empowerment.size() != d.inventory.size()) {
        throw ValidationError("snapshot for trial " + std::to_string(d.trial) + " has mismatched columns");
      }
      std::vector<std::size_t> negatives;
      std::vector<std::size_t> positives;
      for (std::size_t k = 0; k < d.inventory.size(); ++k) {
        const bool chosen = std::find(d.chosen.begin(), d.chosen.end(), d.inventory[k]) != d.chosen.end();
        (chosen ? positives : negatives).push_back(k);
      }
      const std::size_t take = std::min(positives.size(), negatives.size());
      // Partial Fisher-Yates: the first `take` slots become the sample.
      for (std::size_t k = 0; k < take; ++k) {
        const auto pick = k + static_cast<std::size_t>(rng.uniform_index(negatives.size() - k));
        std::swap(negatives[k], negatives[pick]);
      }
      auto emit = [&](std::size_t k, int chosen) {
        out.rows.push_back({session.run_id, d.trial, d.inventory[k], chosen, d.uncertainty[k], d.empowerment[k],
                            session.temperature});
      };
      for (std::size_t k : positives) emit(k, 1);
      for (std::size_t k = 0; k < take; ++k) emit(negatives[k], 0);
    }
  }
  if (out.rows.empty()) throw EmptyInput("no choice data: sessions contain no decisions");
  return out;
}

namespace {

struct Standardizer {
  double mean = 0.0;
  double sd = 0.0;
};

Standardizer standardize(const std::vector<double>& v, const char* what, const std::string& run) {
  Standardizer s;
  s.mean = stats::mean(v);
  s.sd = std::sqrt(stats::variance(v));
  if (!(s.sd > 0.0)) throw SingularDesign(std::string("feature '") + what + "' is constant in run " + run);
  return s;
}

// Row indices grouped by run id, runs in id order.
std::map<std::string, std::vector<std::size_t>> rows_by_run(const ChoiceDataset& data) {
  std::map<std::string, std::vector<std::size_t>> runs;
  for (std::size_t i = 0; i < data.rows.size(); ++i) runs[data.rows[i].run_id].push_back(i);
  return runs;
}

struct ZFeatures {
  std::vector<double> trial;
  std::vector<double> uncertainty;
  std::vector<double> empowerment;
};

ZFeatures zscore_run(const ChoiceDataset& data, const std::vector<std::size_t>& rows, const std::string& run) {
  ZFeatures raw;
  for (std::size_t i : rows) {
    raw.trial.push_back(data.rows[i].trial);
    raw.uncertainty.push_back(data.rows[i].uncertainty);
    raw.empowerment.push_back(data.rows[i].empowerment);
  }
  if (rows.size() < 2) throw SingularDesign("run " + run + " has fewer than two rows");
  auto apply = [&](std::vector<double>& v, const char* what) {
    const auto s = standardize(v, what, run);
    for (auto& x : v) x = (x - s.mean) / s.sd;
  };
  apply(raw.trial, kTrial);
  apply(raw.uncertainty, kUncertainty);
  apply(raw.empowerment, kEmpowerment);
  return raw;
}

}  // namespace

Model1Result run_model1(const ChoiceDataset& data, const LogisticOptions& options) {
  if (data.rows.empty()) throw EmptyInput("empty choice dataset");
  Model1Result out;
  const auto runs = rows_by_run(data);
  const std::vector<std::string> names{kIntercept, kTrial, kUncertainty, kEmpowerment};

  // Fits are independent; run them in parallel and collect by run order.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> ordered(runs.begin(), runs.end());
  std::vector<RegressionResult> fits(ordered.size());
  std::vector<std::exception_ptr> errors(ordered.size());
#if defined(ALCHEMY_HAVE_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(ordered.size()); ++r) {
    try {
      const auto& [run, rows] = ordered[r];
      const auto z = zscore_run(data, rows, run);
      Design d;
      d.names = names;
      d.x.resize(static_cast<Eigen::Index>(rows.size()), 4);
      d.y.resize(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        d.x(i, 0) = 1.0;
        d.x(i, 1) = z.trial[k];
        d.x(i, 2) = z.uncertainty[k];
        d.x(i, 3) = z.empowerment[k];
        d.y[i] = data.rows[rows[k]].chosen;
      }
      fits[r] = fit_logistic(d, options);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t r = 0; r < ordered.size(); ++r) out.per_run.emplace(ordered[r].first, std::move(fits[r]));

  const std::size_t runs_n = out.per_run.size();
  out.pooled.converged = true;
  for (const auto& [run, fit] : out.per_run) {
    out.pooled.n += fit.n;
    out.pooled.converged = out.pooled.converged && fit.converged;
    out.pooled.iterations = std::max(out.pooled.iterations, fit.iterations);
  }
  for (const auto& name : names) {
    std::vector<double> coefs;
    std::vector<double> ses;
    for (const auto& [run, fit] : out.per_run) {
      coefs.push_back(fit.coef(name));
      ses.push_back(fit.at(name).se);
    }
    TermEstimate t;
    t.term = name;
    t.estimate = stats::mean(coefs);
    if (runs_n >= 2) {
      // Identical runs have no spread; fall back to the within-run error.
      // Compared directly because their rounded variance need not be 0.
      const auto [lo, hi] = std::minmax_element(coefs.begin(), coefs.end());
      t.se = *lo == *hi ? stats::mean(ses) : std::sqrt(stats::variance(coefs) / static_cast<double>(runs_n));
    } else {
      t.se = ses.front();
    }
    t.z = t.se > 0.0 ? t.estimate / t.se : 0.0;
    if (t.se <= 0.0) {
      t.p = 1.0;
    } else if (runs_n >= 2) {
      t.p = stats::student_t_two_sided(t.z, static_cast<double>(runs_n - 1));
    } else {
      t.p = out.per_run.begin()->second.at(name).p;
    }
    out.pooled.terms.push_back(t);
  }
  return out;
}

RegressionResult run_model2(const ChoiceDataset& data, const LogisticOptions& options) {
  if (data.rows.empty()) throw EmptyInput("empty choice dataset");
  std::set<double> temps;
  for (const auto& row : data.rows) temps.insert(row.temperature);
  if (temps.size() < 2) {
    throw InsufficientTemperatureVariation("model 2 needs at least two distinct temperatures, found " +
                                           std::to_string(temps.size()));
  }
  const auto runs = rows_by_run(data);
  Design d;
  d.names = {kIntercept, kTrial, kUncertainty, kEmpowerment, kTemperature, kTempXUncertainty, kTempXEmpowerment};
  d.x.resize(static_cast<Eigen::Index>(data.rows.size()), 7);
  d.y.resize(static_cast<Eigen::Index>(data.rows.size()));
  Eigen::Index row = 0;
  for (const auto& [run, rows] : runs) {
    const auto z = zscore_run(data, rows, run);
    for (std::size_t k = 0; k < rows.size(); ++k, ++row) {
      const auto& datum = data.rows[rows[k]];
      const double temp = datum.temperature;
      d.x(row, 0) = 1.0;
      d.x(row, 1) = z.trial[k];
      d.x(row, 2) = z.uncertainty[k];
      d.x(row, 3) = z.empowerment[k];
      d.x(row, 4) = temp;
      d.x(row, 5) = temp * z.uncertainty[k];
      d.x(row, 6) = temp * z.empowerment[k];
      d.y[row] = datum.chosen;
    }
  }
  return fit_logistic(d, options);
}

HumanBaseline load_human_baseline(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open human baseline " + path.string());
  HumanBaseline b;
  try {
    const auto j = nlohmann::json::parse(in);
    b.trials_cap = j.value("trials_cap", std::size_t{500});
    b.discoveries = j.at("discoveries").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("human baseline: ") + e.what());
  }
  if (b.discoveries.empty()) throw ValidationError("human baseline is empty");
  for (double v : b.discoveries) {
    if (!(v >= 0.0)) throw ValidationError("human baseline values must be >= 0");
  }
  return b;
}

double percentile_rank(double value, const HumanBaseline& baseline) {
  if (baseline.discoveries.empty()) throw ValidationError("human baseline is empty");
  std::size_t below = 0;
  std::size_t ties = 0;
  for (double v : baseline.discoveries) {
    if (v < value) {
      ++below;
    } else if (v == value) {
      ++ties;
    }
  }
  return 100.0 * (static_cast<double>(below) + 0.5 * static_cast<double>(ties)) /
         static_cast<double>(baseline.discoveries.size());
}

std::vector<BehaviorRow> behavior_summary(
    const std::map<std::string, std::vector<std::vector<TrialRecord>>>& groups) {
  std::vector<BehaviorRow> table;
  for (const auto& [group, sessions] : groups) {
    BehaviorRow row;
    row.group = group;
    std::map<BehaviorCategory, std::size_t> counts;
    for (auto c : kAllCategories) counts[c] = 0;
    for (const auto& session : sessions) {
      for (const auto& rec : session) {
        ++counts[rec.category];
        ++row.trials;
      }
    }
    if (row.trials == 0) continue;
    for (auto [c, n] : counts) row.proportion[c] = static_cast<double>(n) / static_cast<double>(row.trials);
    table.push_back(std::move(row));
  }
  return table;
}

void write_regression_csv(std::ostream& out, const RegressionResult& r, const std::string& group) {
  out << std::setprecision(10);
  for (const auto& t : r.terms) {
    out << group << ',' << t.term << ',' << t.estimate << ',' << t.se << ',' << t.z << ',' << t.p << ',' << r.n
        << ',' << (r.converged ? 1 : 0) << '\n';
  }
}

nlohmann::json regression_plot_table(const RegressionResult& r, const std::string& group) {
  auto rows = nlohmann::json::array();
  for (const auto& t : r.terms) {
    rows.push_back({{"term", t.term}, {"estimate", t.estimate}, {"se", t.se}, {"group", group}});
  }
  return rows;
}

void write_snapshot_csv(std::ostream& out, const std::vector<DecisionSnapshot>& decisions) {
  out << "trial,element,uncertainty,empowerment,chosen\n";
  out << std::setprecision(17);
  for (const auto& d : decisions) {
    for (std::size_t k = 0; k < d.inventory.size(); ++k) {
      const bool chosen = std::find(d.chosen.begin(), d.chosen.end(), d.inventory[k]) != d.chosen.end();
      out << d.trial << ',' << d.inventory[k] << ',' << d.uncertainty[k] << ',' << d.empowerment[k] << ','
          << (chosen ? 1 : 0) << '\n';
    }
  }
}

std::vector<DecisionSnapshot> read_snapshot_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open valuation snapshot " + path.string());
  std::vector<DecisionSnapshot> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::istringstream row(line);
    std::string cell[5];
    for (auto& c : cell) {
      if (!std::getline(row, c, ',')) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": short row");
    }
    try {
      const auto trial = static_cast<std::uint32_t>(std::stoul(cell[0]));
      if (out.empty() || out.back().trial != trial) {
        out.emplace_back();
        out.back().trial = trial;
      }
      auto& d = out.back();
      const auto element = static_cast<ElementId>(std::stoul(cell[1]));
      d.inventory.push_back(element);
      d.uncertainty.push_back(std::stod(cell[2]));
      d.empowerment.push_back(std::stod(cell[3]));
      if (cell[4] == "1") d.chosen.push_back(element);
    } catch (const std::logic_error&) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

}  // namespace alchemy
