#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "avshap/game.hpp"

namespace avshap {

inline constexpr std::size_t kDefaultExactCap = 20;
inline constexpr std::size_t kDefaultBudget = 2000;

struct EstimatorConfig {
  Method method = Method::Permutation;
  // Coalition evaluations available to the sampled methods, not counting the
  // two cached endpoint evaluations (empty and full mask).
  std::size_t budget_m = kDefaultBudget;
  std::uint64_t seed = 0;
  // Masks per oracle batch call.
  std::size_t batch_size = 64;
  // Batches in flight at once; only used for oracles that are concurrent_safe().
  std::size_t workers = 1;
  std::size_t exact_cap = kDefaultExactCap;

  void validate() const;
};

// Accepts exact | permutation | sampling. Throws ConfigError otherwise.
Method parse_method(std::string_view text);

// Weighted sum over all 2^(P-1) coalitions per player, from one evaluation
// of every mask.
ShapleyMatrix estimate_exact(ScoringOracle& oracle, const FeaturePartition& partition,
                             const EstimatorConfig& config = {});

// Permutation sampling with antithetic traversal. Each permutation is walked
// forward and then in reverse order, every step yielding one marginal sample
// (a length-T score delta) for the player it adds. One permutation costs
// 2(P-1) evaluations since the endpoints are cached; permutations are drawn
// until budget_m is used up.
ShapleyMatrix estimate_permutation(ScoringOracle& oracle, const FeaturePartition& partition,
                                   const EstimatorConfig& config);

// Monte Carlo over coalitions: for each player, budget_m / (2P) predecessor
// sets drawn from random permutations, each costing a with/without pair.
ShapleyMatrix estimate_sampling(ScoringOracle& oracle, const FeaturePartition& partition,
                                const EstimatorConfig& config);

ShapleyMatrix estimate(ScoringOracle& oracle, const FeaturePartition& partition,
                       const EstimatorConfig& config);

}  // namespace avshap
