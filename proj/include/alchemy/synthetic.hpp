#pragma once

#include <cstdint>

#include "alchemy/recipes.hpp"

namespace alchemy {

// water, fire, earth, air, steam, mud, dust, brick with
// water+fire->steam, water+earth->mud, earth+air->dust, mud+fire->brick.
RecipeGraph make_g4();

// Four initial elements plus `elements - 4` others, `recipes` distinct
// random pairs with 1-2 random results each. No reachability guarantee.
RecipeGraph make_random_graph(std::size_t elements, std::size_t recipes, std::uint64_t seed);

struct ExtendedGraphParams {
  std::size_t elements = 120;       // total, including G4's 8
  std::size_t chains = 4;           // planted deep chains
  std::size_t chain_length = 8;
  std::size_t extra_recipes = 200;  // recipes beyond the one producing each element
  std::uint64_t seed = 0;
};

// G4 grown with reachable elements. Each planted chain is a sequence where
// link k+1 is made from link k plus an earlier element, so early links carry
// deep empowerment. Every element is reachable from the initial four.
RecipeGraph make_extended_graph(const ExtendedGraphParams& params);

}  // namespace alchemy
