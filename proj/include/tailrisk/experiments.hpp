#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailrisk/dp.hpp"
#include "tailrisk/measure.hpp"
#include "tailrisk/metrics.hpp"
#include "tailrisk/scenario.hpp"

namespace tailrisk {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Tail-risk scaling across the Pr(D) sweep plus the reweighted-measure error
/// sequence, both for the risk row of the blind optimum on the nominal law.
/// The sweep doubles as the weight schedule: mu_p is pinned at epsilons[p] on
/// the widest space, so the error ratios reproduce the sweep's own spacing.
struct Prop1Result {
  int theta_index = 0;
  double base_epsilon = 0.0;  // Pr(D) of the space carrying the mu_p family
  double rho_declared = 0.0;
  double max_abs_loss = 0.0;
  std::vector<double> epsilons;  // the sweep, widest first
  std::vector<double> tail;      // tail risk of a space with Pr(D) = epsilons[k]
  std::vector<double> errors;    // e_p of mu_p pinned at epsilons[p]
  std::vector<double> ratios;    // errors[k+1] / errors[k]; NaN when undefined
  ConvergenceVerdict verdict;
  std::optional<double> slope;  // log-log fit of tail vs epsilon
  bool tail_bound_ok = false;   // |tail| <= Pr(D) * max|L| at every point
};

struct ErmNeglectResult {
  double hazard = 0.0;          // largest one-step mass from N into D
  double sampling_bound = 0.0;  // 1 - (1 - hazard)^budget
  int training_budget = 0;
  int erm_choice = -1;
  int blind_optimum = -1;  // best conditional long-run reward on N
  int aware_optimum = -1;  // best conditional long-run reward on D
  double reward_on_d_erm = 0.0;
  double reward_on_d_blind = 0.0;
  double reward_on_d_aware = 0.0;
  double gap = 0.0;  // aware minus erm, conditional on D
  double documented_margin = 0.0;
  bool crossed_during_training = false;
  int disruption_steps = 0;  // states of the training episode inside D
};

struct MarkovResult {
  MarkovGapReport report;
  std::string region;  // "nominal" or "full"
  int policy_index = 0;
};

struct LearnerRun {
  std::string name;
  PerformanceSeries series;
  std::optional<int> recovery_steps;  // steps past t_star; nullopt = never
  double final_window_average = 0.0;
};

struct AdaptationResult {
  int t_star = 0;
  int horizon = 0;
  int window = 0;
  // Best long-run average on the post-event region (everything reachable
  // from D); the recovery band hangs off this number.
  double post_shift_optimum = 0.0;
  double band = 0.0;                // band_fraction * post_shift_optimum
  double band_fraction = 0.0;
  double pre_event_baseline = 0.0;  // frozen policy's nominal long-run average
  int frozen_choice = -1;
  double hedge_eta = 0.0;
  double hedge_regret = 0.0;
  double regret_bound = 0.0;  // 2 sqrt(T ln |Theta|)
  std::optional<long long> recovery_bound_steps;
  ShiftReport shift;
  ObservationDistribution q_nominal;
  ObservationDistribution q_disruption;
  std::vector<LearnerRun> runs;  // frozen_erm, hedge, qlearner
};

struct RunResult {
  std::string scenario_name;
  std::string scenario_sha256;
  std::uint64_t seed = 0;
  std::optional<Prop1Result> prop1;
  std::optional<ErmNeglectResult> erm_neglect;
  std::optional<MarkovResult> markov;
  std::optional<AdaptationResult> adaptation;
};

Prop1Result run_prop1(const Scenario& scenario);
Prop1Result run_prop1(const Scenario& scenario, const std::vector<double>& sweep, double rho);
ErmNeglectResult run_erm_neglect(const Scenario& scenario);
MarkovResult run_markov(const Scenario& scenario);
AdaptationResult run_adaptation(const Scenario& scenario);

/// experiment: prop1 | erm-neglect | markov | adaptation.
RunResult run_one(const Scenario& scenario, const std::string& experiment);
RunResult run_all(const Scenario& scenario);

/// Serializes into out_dir: summary.json, prop1_sweep.csv,
/// series_<learner>.csv, shift_report.json (each only when its experiment
/// ran), and manifest.json with the SHA-256 of every other file.  All writes
/// are atomic.  Returns the manifest text.
std::string write_results(const RunResult& result, const std::string& out_dir);

}  // namespace tailrisk
