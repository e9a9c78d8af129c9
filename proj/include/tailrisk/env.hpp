#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailrisk/measure.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

/// Wall-clock metadata (tau_0, delta_tau).  Carried through to outputs for
/// axis labeling only; all dynamics run in discrete t.
struct ClockMeta {
  double tau0 = 0.0;
  double delta_tau = 1.0;  // seconds per step, must stay positive
};

/// Full description of the finite POMDP.  kernel[s][a] is the distribution of
/// the next state, obs_map[s] the distribution of the observation emitted by
/// state s, reward[s_next][a] the per-step reward.  nominal and disruption
/// partition the state set.
struct EnvironmentConfig {
  int state_count = 0;
  int action_count = 0;
  int observation_count = 0;
  std::vector<std::vector<std::vector<double>>> kernel;
  std::vector<std::vector<double>> obs_map;
  std::vector<std::vector<double>> reward;
  Event nominal;
  Event disruption;
  ClockMeta clock;
};

/// Structural checks for a config; returns one message per violation
/// (empty = ok).  Messages name the offending state/action so scenario
/// authors can fix them.
std::vector<std::string> validate(const EnvironmentConfig& config);

/// Immutable, validated environment.  Safe to share across concurrent
/// episode runners.
class EnvironmentModel {
 public:
  /// Throws std::invalid_argument listing every validation error.
  explicit EnvironmentModel(EnvironmentConfig config);

  [[nodiscard]] int state_count() const { return config_.state_count; }
  [[nodiscard]] int action_count() const { return config_.action_count; }
  [[nodiscard]] int observation_count() const { return config_.observation_count; }
  [[nodiscard]] const std::vector<double>& kernel_row(int state, int action) const;
  [[nodiscard]] const std::vector<double>& obs_row(int state) const;
  [[nodiscard]] double reward(int next_state, int action) const;
  [[nodiscard]] const Event& nominal() const { return config_.nominal; }
  [[nodiscard]] const Event& disruption() const { return config_.disruption; }
  [[nodiscard]] const ClockMeta& clock() const { return config_.clock; }

  /// Expected one-step reward of each action from `state`:
  /// v[a] = sum_{s'} kernel[state][a][s'] * reward(s', a).
  [[nodiscard]] std::vector<double> expected_action_values(int state) const;

 private:
  EnvironmentConfig config_;
};

/// Memoryless observation -> action table.
struct Policy {
  std::vector<int> table;

  [[nodiscard]] int action_at(int observation) const {
    return table.at(static_cast<size_t>(observation));
  }
};

/// Episode record.  states/observations run t = 0..T, actions/rewards
/// t = 0..T-1: the reward for step t is earned by action a_t on entering
/// s_{t+1}, and o_{t+1} is the post-transition observation the agent sees
/// before choosing a_{t+1}.
struct Trajectory {
  std::vector<int> states;
  std::vector<int> observations;
  std::vector<int> actions;
  std::vector<double> rewards;

  [[nodiscard]] int horizon() const { return static_cast<int>(actions.size()); }
};

struct ObservationDistribution {
  std::vector<double> mass;
};

/// Optional forcing of the resilience crossing: when force_at = t*, the
/// transition taken at step t* is drawn from the kernel row conditioned on
/// landing in the disruption region, so the hidden state at t*+1 lies in D.
/// Post-event dynamics are the unmodified kernel, identical to an organic
/// crossing.
struct EventSchedule {
  std::optional<int> force_at;
};

/// What an episode runner reports to the acting agent after each step.
/// action_values carries the supervisor-side expected one-step reward of
/// every action from the pre-transition state; continual learners that want
/// full-information updates may use it, bandit-style learners can ignore it.
struct StepFeedback {
  int t = 0;
  int prev_observation = 0;
  int action = 0;
  double reward = 0.0;
  int observation = 0;  // post-transition
  std::vector<double> action_values;
};

/// Minimal agent surface the episode runner drives.  Policies, the frozen
/// ERM learner, and the online learners all sit behind this.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual int act(int observation, RngStream& stream) = 0;
  virtual void observe(const StepFeedback& feedback) { (void)feedback; }
};

/// Fixed-table agent; ignores the stream and the feedback.
class PolicyAgent : public Agent {
 public:
  explicit PolicyAgent(Policy policy) : policy_(std::move(policy)) {}
  int act(int observation, RngStream&) override { return policy_.action_at(observation); }

 private:
  Policy policy_;
};

struct StepResult {
  int next_state = 0;
  int observation = 0;
  double reward = 0.0;
};

/// One environment step: successor from the kernel row, observation from the
/// successor's obs_map row, reward = reward(successor, action).
StepResult step(const EnvironmentModel& env, int state, int action, RngStream& stream);

/// One-step probability of moving from `from` into `to` under the
/// policy-induced chain, weighted by `occupancy` (which must be supported on
/// `from`).  The induced chain accounts for observation-dependent actions:
/// P(s'|s) = sum_o obs_map[s][o] * kernel[s][policy(o)][s'].
double crossing_probability(const EnvironmentModel& env, const Policy& policy, const Event& from,
                            const Event& to, const std::vector<double>& occupancy);

/// Push a state distribution supported on `region` through obs_map.
ObservationDistribution induced_observation_distribution(const EnvironmentModel& env,
                                                         const Event& region,
                                                         const std::vector<double>& occupancy);

/// Policy-induced transition matrix, row-major [s][s'].
std::vector<std::vector<double>> induced_chain(const EnvironmentModel& env, const Policy& policy);

/// Stationary law of a row-stochastic matrix: direct linear solve of
/// pi P = pi with sum(pi) = 1, checked to a fixed-point residual of 1e-10.
/// Requires a unichain (exactly one closed communicating class; transient
/// states are fine) and throws otherwise.
std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& chain);

/// Stationary distribution of the induced chain, optionally restricted to a
/// region (rows renormalized onto the region).  The (restricted) chain must
/// be a unichain; solves the fixed point directly and checks the residual to
/// 1e-10.  Returns a full-length state vector, zero off-region.
std::vector<double> stationary_occupancy(const EnvironmentModel& env, const Policy& policy,
                                         const std::optional<Event>& region = std::nullopt);

/// Run one episode of `horizon` steps.  Environment draws are addressed by
/// step index on env_stream, so two runs sharing env_stream see identical
/// environment randomness wherever they take identical actions; agent
/// exploration draws come from agent_stream.  start_state must be a valid
/// state (conventionally in the nominal region).
Trajectory run_episode(const EnvironmentModel& env, Agent& agent, int horizon,
                       const EventSchedule& schedule, const RngStream& env_stream,
                       RngStream& agent_stream, int start_state);

}  // namespace tailrisk
