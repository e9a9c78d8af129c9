#pragma once

// Hand-built scenarios shared across the test suite.  Same numbers as the
// files under scenarios/, kept in one place so the suite and the shipped
// fixtures cannot drift apart.

#include <vector>

#include "tailrisk/scenario.hpp"

namespace fixtures {

// 6-state desk: three nominal states with a clearly best action 0, three
// disruption states where action 1 is needed instead.  Observation 1 aliases
// s1, s2 and the disruption entry s3.
inline tailrisk::Scenario disruption6(double epsilon = 1e-6, double delta = 0.0) {
  tailrisk::Scenario s;
  s.name = "disruption-6state";
  s.seed = 20240915ull;
  auto& e = s.env;
  e.state_count = 6;
  e.action_count = 2;
  e.observation_count = 4;
  e.nominal_states = {0, 1, 2};
  e.disruption_states = {3, 4, 5};
  e.nominal_kernel = {
      {{0.1, 0.9, 0.0}, {0.5, 0.5, 0.0}},
      {{0.0, 0.1, 0.9}, {0.0, 0.5, 0.5}},
      {{0.9, 0.0, 0.1}, {0.5, 0.0, 0.5}},
  };
  e.disruption_kernel = {
      {{0.90, 0.05, 0.05}, {0.05, 0.85, 0.10}},
      {{0.85, 0.10, 0.05}, {0.05, 0.80, 0.15}},
      {{0.80, 0.05, 0.15}, {0.05, 0.15, 0.80}},
  };
  e.epsilon = epsilon;
  e.delta = delta;
  e.entry_state = 3;
  e.return_state = 0;
  e.obs_map = {
      {1, 0, 0, 0},
      {0, 1, 0, 0},
      {0, 1, 0, 0},
      {0, 1, 0, 0},
      {0, 0, 1, 0},
      {0, 0, 0, 1},
  };
  e.reward = {
      {1.0, 0.7},
      {1.0, 0.7},
      {0.9, 0.7},
      {0.1, 0.8},
      {0.0, 0.9},
      {0.2, 0.85},
  };
  e.tau0 = 0.0;
  e.delta_tau = 0.05;

  // All observation->action tables with action 0 pinned at observation 0.
  for (int k = 0; k < 8; ++k) {
    s.policies.push_back({0, (k >> 2) & 1, (k >> 1) & 1, k & 1});
  }

  s.learners.eta = 0.0;  // auto
  s.learners.alpha = 0.1;
  s.learners.gamma = 0.95;
  s.learners.xi = 0.05;
  s.learners.r_min = 0.0;
  s.learners.r_max = 1.0;
  s.learners.t0 = 0;  // follow the training budget

  s.experiment.horizon = 10100;
  s.experiment.t_star = 100;
  s.experiment.training_budget = 10000;
  s.experiment.epsilon_sweep = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  s.experiment.mu_ratio = 0.1;
  s.experiment.window = 500;
  s.experiment.band_fraction = 0.1;
  s.experiment.documented_margin = 0.5;
  s.experiment.recovery_normalization = 0.09;
  s.experiment.start_state = 0;
  return s;
}

// Observation 1 covers both s1 and s2, which have very different dynamics:
// the observation process remembers where it came from.
inline tailrisk::Scenario aliasing4() {
  tailrisk::Scenario s;
  s.name = "aliasing-4state";
  s.seed = 7ull;
  auto& e = s.env;
  e.state_count = 4;
  e.action_count = 1;
  e.observation_count = 3;
  e.nominal_states = {0, 1, 2, 3};
  e.disruption_states = {};
  e.nominal_kernel = {
      {{0.1, 0.9, 0.0, 0.0}},
      {{0.0, 0.1, 0.9, 0.0}},
      {{0.0, 0.0, 0.1, 0.9}},
      {{0.9, 0.0, 0.0, 0.1}},
  };
  e.epsilon = 0.0;
  e.delta = 0.0;
  e.obs_map = {
      {1, 0, 0},
      {0, 1, 0},
      {0, 1, 0},
      {0, 0, 1},
  };
  e.reward = {{1.0}, {0.8}, {0.6}, {0.2}};
  s.policies = {{0, 0, 0}};
  s.experiment.horizon = 1000;
  s.experiment.window = 10;
  s.experiment.t_star = -1;
  s.experiment.start_state = 0;
  return s;
}

// Observations injective on the recurrent class {0..3}; state 4 is transient
// and reuses observation 0, which keeps |O| < |S| without breaking the
// first-order view.
inline tailrisk::Scenario injective5() {
  tailrisk::Scenario s;
  s.name = "injective-5state";
  s.seed = 11ull;
  auto& e = s.env;
  e.state_count = 5;
  e.action_count = 1;
  e.observation_count = 4;
  e.nominal_states = {0, 1, 2, 3, 4};
  e.disruption_states = {};
  e.nominal_kernel = {
      {{0.2, 0.8, 0.0, 0.0, 0.0}},
      {{0.0, 0.2, 0.8, 0.0, 0.0}},
      {{0.0, 0.0, 0.2, 0.8, 0.0}},
      {{0.8, 0.0, 0.0, 0.2, 0.0}},
      {{0.5, 0.5, 0.0, 0.0, 0.0}},
  };
  e.epsilon = 0.0;
  e.delta = 0.0;
  e.obs_map = {
      {1, 0, 0, 0},
      {0, 1, 0, 0},
      {0, 0, 1, 0},
      {0, 0, 0, 1},
      {1, 0, 0, 0},
  };
  e.reward = {{1.0}, {0.9}, {0.5}, {0.3}, {0.0}};
  s.policies = {{0, 0, 0, 0}};
  s.experiment.horizon = 1000;
  s.experiment.window = 10;
  s.experiment.t_star = -1;
  s.experiment.start_state = 0;
  return s;
}

}  // namespace fixtures
