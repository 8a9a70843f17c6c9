#include "alchemy/valuation.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "alchemy/error.hpp"
#include "alchemy/kernels.hpp"

namespace alchemy {

EmpowermentTable base_empowerment(const RecipeGraph& graph, const EmpowermentParams& params) {
  if (params.depth < 0) throw ValidationError("empowerment depth must be >= 0");
  if (!(params.discount >= 0.0 && params.discount <= 1.0)) throw ValidationError("discount must be in [0, 1]");

  EmpowermentTable table;
  table.params = params;
  table.values.assign(graph.size(), 0.0);
  for (ElementId e = 0; e < graph.size(); ++e) {
    table.values[e] = static_cast<double>(graph.recipes_with(e).size());
  }
  std::vector<double> next(graph.size());
  for (int k = 1; k <= params.depth; ++k) {
    kernels::active::empowerment_step(graph, params.discount, table.values, next);
    table.values.swap(next);
  }
  return table;
}

EmpowermentTable base_empowerment(const RecipeGraph& graph, int depth, double discount) {
  EmpowermentParams params;
  params.depth = depth;
  params.discount = discount;
  return base_empowerment(graph, params);
}

double combination_empowerment(const EmpowermentTable& table, const RecipeGraph& graph, CanonicalPair pair) {
  const Recipe* recipe = graph.lookup(canonical_pair(graph, pair.lo, pair.hi));
  if (!recipe) return 0.0;
  double sum = 0.0;
  for (ElementId r : recipe->results) sum += table.values[r];
  return sum / static_cast<double>(recipe->results.size());
}

void update_empowerment_in_place(EmpowermentTable& table, const TrialRecord& record) {
  if (!record.valid || !record.resolved) return;
  double factor = 1.0;
  if (record.success) {
    if (record.novel_results.empty()) return;
    factor = table.params.increase_factor;
  } else {
    factor = table.params.decrease_factor;
  }
  const auto pair = *record.resolved;
  table.values[pair.lo] *= factor;
  if (!pair.is_self()) table.values[pair.hi] *= factor;
}

EmpowermentTable update_empowerment(EmpowermentTable table, const TrialRecord& record) {
  update_empowerment_in_place(table, record);
  return table;
}

double uncertainty(std::uint64_t total_trials, std::uint64_t times_chosen) {
  if (total_trials <= 1) return 0.0;
  return std::sqrt(std::log(static_cast<double>(total_trials)) / static_cast<double>(times_chosen + 1));
}

UncertaintyState UncertaintyState::from_session(const SessionState& state) {
  return {state.trial_count(), state.chosen_counts()};
}

void write_empowerment_csv(std::ostream& out, const EmpowermentTable& table, const RecipeGraph& graph) {
  out << "element,name,value\n";
  out << std::setprecision(17);
  for (ElementId e = 0; e < graph.size(); ++e) {
    out << e << ',' << graph.element(e).name << ',' << table.values[e] << '\n';
  }
}

}  // namespace alchemy
