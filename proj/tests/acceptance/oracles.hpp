#pragma once

// Independent reference computations for the acceptance binary. Each one
// works from the raw recipe list, not from the library's indexes.

#include <cstdint>
#include <vector>

#include "alchemy/recipes.hpp"

namespace oracle {

// Successful pairs among all i <= j pairs of `inventory`, by enumeration.
std::uint64_t successful_pairs(const alchemy::RecipeGraph& g, const std::vector<alchemy::ElementId>& inventory);

// E_k(e) by direct recursion over the recipe list.
double empowerment(const alchemy::RecipeGraph& g, alchemy::ElementId e, int k, double gamma);

// Mean of `table` over the results of the recipe for (a, b); 0 if none.
double combination_empowerment(const alchemy::RecipeGraph& g, const std::vector<double>& table, alchemy::ElementId a,
                               alchemy::ElementId b);

// sqrt(ln T / (t + 1)), 0 for T <= 1, written out in long double.
double uncertainty(std::uint64_t total, std::uint64_t times);

}  // namespace oracle
