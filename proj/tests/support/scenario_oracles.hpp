#pragma once

// Scenario-level oracles: plain-loop reconstructions of the composed kernel,
// region chains, and policy losses, shared by the experiment tests and the
// acceptance suite.  Same ground rules as oracles.hpp -- no library calls on
// the paths under test.

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tailrisk/scenario.hpp"

namespace oracle {

using Cube = std::vector<std::vector<std::vector<double>>>;

// Full kernel composed from the conditional blocks by the documented
// remainder rule.
inline Cube compose_full_kernel(const tailrisk::EnvironmentSpec& e, double eps) {
  const auto n = static_cast<size_t>(e.state_count);
  const auto na = static_cast<size_t>(e.action_count);
  Cube k(n, std::vector<std::vector<double>>(na, std::vector<double>(n, 0.0)));
  for (size_t i = 0; i < e.nominal_states.size(); ++i) {
    const auto s = static_cast<size_t>(e.nominal_states[i]);
    for (size_t a = 0; a < na; ++a) {
      double placed = 0.0;
      for (size_t j = 0; j < e.nominal_states.size(); ++j) {
        const double m = (1.0 - eps) * e.nominal_kernel[i][a][j];
        k[s][a][static_cast<size_t>(e.nominal_states[j])] = m;
        placed += m;
      }
      if (eps > 0.0) k[s][a][static_cast<size_t>(e.entry_state)] += 1.0 - placed;
    }
  }
  for (size_t i = 0; i < e.disruption_states.size(); ++i) {
    const auto s = static_cast<size_t>(e.disruption_states[i]);
    for (size_t a = 0; a < na; ++a) {
      double placed = 0.0;
      if (e.delta < 1.0) {
        for (size_t j = 0; j < e.disruption_states.size(); ++j) {
          const double m = (1.0 - e.delta) * e.disruption_kernel[i][a][j];
          k[s][a][static_cast<size_t>(e.disruption_states[j])] = m;
          placed += m;
        }
      }
      if (e.delta > 0.0) k[s][a][static_cast<size_t>(e.return_state)] += 1.0 - placed;
    }
  }
  return k;
}

// Stationary law of the region chain induced by an observation policy on a
// conditional kernel block (rows already live inside the region).
inline std::vector<double> region_stationary(const tailrisk::EnvironmentSpec& e, const Cube& cond,
                                             const std::vector<int>& members,
                                             const std::vector<int>& pol) {
  const size_t m = members.size();
  std::vector<std::vector<double>> chain(m, std::vector<double>(m, 0.0));
  for (size_t i = 0; i < m; ++i) {
    const auto s = static_cast<size_t>(members[i]);
    for (int o = 0; o < e.observation_count; ++o) {
      const double po = e.obs_map[s][static_cast<size_t>(o)];
      if (po == 0.0) continue;
      const auto a = static_cast<size_t>(pol[static_cast<size_t>(o)]);
      for (size_t j = 0; j < m; ++j) chain[i][j] += po * cond[i][a][j];
    }
  }
  return stationary_power(chain);
}

// Long-run average of an observation policy on a conditional region block.
inline double region_average_reward(const tailrisk::EnvironmentSpec& e, const Cube& cond,
                                    const std::vector<int>& members,
                                    const std::vector<int>& pol) {
  const auto pi = region_stationary(e, cond, members, pol);
  double gain = 0.0;
  for (size_t i = 0; i < members.size(); ++i) {
    const auto s = static_cast<size_t>(members[i]);
    for (int o = 0; o < e.observation_count; ++o) {
      const double po = e.obs_map[s][static_cast<size_t>(o)];
      if (po == 0.0) continue;
      const auto a = static_cast<size_t>(pol[static_cast<size_t>(o)]);
      double er = 0.0;
      for (size_t j = 0; j < members.size(); ++j) {
        er += cond[i][a][j] * e.reward[static_cast<size_t>(members[j])][a];
      }
      gain += pi[i] * po * er;
    }
  }
  return gain;
}

// Normalized one-step loss of an observation policy at a state, over the
// full composed kernel.
inline double policy_loss_at(const tailrisk::EnvironmentSpec& e, const Cube& full,
                             const std::vector<int>& pol, int s, double r_min, double r_max) {
  double r = 0.0;
  for (int o = 0; o < e.observation_count; ++o) {
    const double po = e.obs_map[static_cast<size_t>(s)][static_cast<size_t>(o)];
    if (po == 0.0) continue;
    const auto a = static_cast<size_t>(pol[static_cast<size_t>(o)]);
    double er = 0.0;
    for (int j = 0; j < e.state_count; ++j) {
      er += full[static_cast<size_t>(s)][a][static_cast<size_t>(j)] *
            e.reward[static_cast<size_t>(j)][a];
    }
    r += po * er;
  }
  return (r_max - r) / (r_max - r_min);
}

// Conditional argmax over the policy class on a region block; strict > keeps
// the lowest index, mirroring the library's tie rule.
inline int best_policy_on_region(const tailrisk::Scenario& sc, const Cube& cond,
                                 const std::vector<int>& members,
                                 std::vector<double>* gains = nullptr) {
  int best = 0;
  double best_gain = -1e300;
  for (size_t t = 0; t < sc.policies.size(); ++t) {
    const double g = region_average_reward(sc.env, cond, members, sc.policies[t]);
    if (gains) gains->push_back(g);
    if (g > best_gain) {
      best_gain = g;
      best = static_cast<int>(t);
    }
  }
  return best;
}

}  // namespace oracle
