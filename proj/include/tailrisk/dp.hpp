#pragma once

#include <optional>
#include <vector>

#include "tailrisk/env.hpp"

namespace tailrisk {

/// Long-run average reward of a fixed policy on a region of the state space
/// (kernel rows renormalized onto the region, occupancy from
/// stationary_occupancy).  With a closed region this is the plain gain.
double policy_average_reward(const EnvironmentModel& env, const Policy& policy,
                             const std::optional<Event>& region = std::nullopt);

struct AverageRewardSolution {
  double gain = 0.0;               // optimal long-run average reward
  std::vector<int> state_policy;   // state -> action, meaningful on the region
};

/// Gain-optimal stationary policy over *states* on the region-restricted MDP,
/// found by relative value iteration (with the standard half-lazy
/// aperiodicity transform).  States outside the region keep action 0.
AverageRewardSolution optimal_average_reward(const EnvironmentModel& env,
                                             const std::optional<Event>& region = std::nullopt,
                                             double span_tol = 1e-12, int max_iters = 200000);

struct DiscountedSolution {
  std::vector<double> value;      // state -> V(s), zero off-region
  std::vector<int> state_policy;  // state -> greedy action
};

/// Standard discounted value iteration on the region-restricted MDP.
DiscountedSolution value_iteration(const EnvironmentModel& env, double gamma,
                                   const std::optional<Event>& region = std::nullopt,
                                   double tol = 1e-13, int max_iters = 200000);

}  // namespace tailrisk
