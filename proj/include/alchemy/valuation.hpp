#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "alchemy/engine.hpp"
#include "alchemy/recipes.hpp"

namespace alchemy {

struct EmpowermentParams {
  int depth = 3;
  double discount = 0.5;
  double increase_factor = 1.05;
  double decrease_factor = 0.95;
};

// Value-semantic snapshot of per-element empowerment, indexed by ElementId.
struct EmpowermentTable {
  std::vector<double> values;
  EmpowermentParams params;

  double operator[](ElementId e) const { return values[e]; }
};

// E_0(e) = number of recipes containing e.
// E_k(e) = sum over recipes c containing e of (1 + discount * mean_{r in results(c)} E_{k-1}(r)).
// Depth-limited because the unbounded sum diverges on cyclic graphs.
EmpowermentTable base_empowerment(const RecipeGraph& graph, int depth, double discount);
EmpowermentTable base_empowerment(const RecipeGraph& graph, const EmpowermentParams& params);

// Ground-truth specialization of E(c_AB) = P(link) * sum_i P(result=i) E(i):
// 0 without a recipe, otherwise the mean table value over the recipe's results.
double combination_empowerment(const EmpowermentTable& table, const RecipeGraph& graph, CanonicalPair pair);

// Multiplies both chosen elements (once each) by increase_factor after a
// success that produced something new, by decrease_factor after a valid
// failure. Repeated successes and invalid trials leave the table unchanged.
EmpowermentTable update_empowerment(EmpowermentTable table, const TrialRecord& record);
void update_empowerment_in_place(EmpowermentTable& table, const TrialRecord& record);

// sqrt(ln(T) / (t_e + 1)); 0 for T <= 1.
double uncertainty(std::uint64_t total_trials, std::uint64_t times_chosen);

struct UncertaintyState {
  std::uint64_t total_trials = 0;
  std::vector<std::uint32_t> times_chosen;

  static UncertaintyState from_session(const SessionState& state);
  double operator()(ElementId e) const { return uncertainty(total_trials, times_chosen[e]); }
};

// CSV with header element,name,value.
void write_empowerment_csv(std::ostream& out, const EmpowermentTable& table, const RecipeGraph& graph);

}  // namespace alchemy
