#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tailrisk/env.hpp"
#include "tailrisk/measure.hpp"

namespace tailrisk {

/// Bounded-reward-to-loss map: loss = (r_max - r) / (r_max - r_min), so the
/// best declared reward costs 0 and the worst costs 1.
struct LossBinding {
  double r_min = 0.0;
  double r_max = 1.0;

  LossBinding() = default;
  LossBinding(double lo, double hi);

  /// Throws if the reward leaves the declared range (beyond rounding slack).
  [[nodiscard]] double loss(double reward) const;
};

/// The learner-facing model space Theta: a finite list of memoryless
/// policies.  Immutable and shareable.
struct PolicyClass {
  std::vector<Policy> policies;

  [[nodiscard]] int size() const { return static_cast<int>(policies.size()); }
  [[nodiscard]] const Policy& at(int index) const {
    return policies.at(static_cast<size_t>(index));
  }
  /// Checks non-emptiness and that every table fits the environment.
  void check_for(const EnvironmentModel& env) const;
};

/// argmin_theta risk(space, loss, theta), ties to the lowest index.
int exact_minimizer(const FiniteProbabilitySpace& space, const LossTable& loss);

/// One (o, a, r, o') interaction record.
struct ExperienceRecord {
  int observation = 0;
  int action = 0;
  double reward = 0.0;
  int next_observation = 0;
};

/// Two-phase train-then-freeze learner.  During the training phase (steps
/// 0..t0-1) it explores uniformly and buffers experience; once t0 steps have
/// been observed it freezes to the empirical-risk minimizer over its policy
/// class and ignores everything afterwards.
class ErmLearner : public Agent {
 public:
  ErmLearner(PolicyClass policy_class, LossBinding binding, int t0, int action_count);

  /// Append one record (no-op once frozen).
  void record(const ExperienceRecord& rec);

  /// Empirical risk of one policy on the buffer: the mean of loss(r) over
  /// records whose action matches the policy at the recorded observation,
  /// accumulated in sorted order so buffer permutations cannot change the
  /// result.  Policies with no matching record score +infinity.
  [[nodiscard]] double empirical_policy_risk(int policy_index) const;

  /// argmin over the class of empirical_policy_risk; freezes the learner.
  /// Throws if the buffer is empty or no policy matches any record.
  int train();

  [[nodiscard]] bool frozen() const { return chosen_.has_value(); }
  [[nodiscard]] int chosen() const;
  [[nodiscard]] int t0() const { return t0_; }
  [[nodiscard]] size_t buffer_size() const { return buffer_.size(); }

  /// Uniform exploration before freezing, frozen table lookup afterwards.
  int act(int observation, RngStream& stream) override;
  /// Buffers the record; reaching t0 observations triggers train().
  void observe(const StepFeedback& feedback) override;

 private:
  PolicyClass class_;
  LossBinding binding_;
  int t0_;
  int action_count_;
  int steps_seen_ = 0;
  std::vector<ExperienceRecord> buffer_;
  std::optional<int> chosen_;
};

/// Continual learner (a): multiplicative weights over the policy class under
/// full-information feedback.  Each step it samples an expert from the
/// current weight distribution to act, and on feedback applies one
/// ew_update per expert using the supervisor-published per-action values.
/// Regret accounting uses the fractional loss <p_t, l_t>, which the standard
/// bound controls deterministically.
class HedgeLearner : public Agent {
 public:
  /// eta = 0 disables updates (degenerate but allowed); eta <= 1 enforced.
  HedgeLearner(PolicyClass policy_class, LossBinding binding, double eta);

  /// One multiplicative update: w[i] *= exp(-eta * loss(reward)).
  void ew_update(int policy_index, double reward);

  /// Current normalized weight distribution over the class.
  [[nodiscard]] std::vector<double> distribution() const;

  /// Cumulative fractional loss minus the best single expert's cumulative
  /// loss so far.
  [[nodiscard]] double regret() const;
  [[nodiscard]] double eta() const { return eta_; }

  int act(int observation, RngStream& stream) override;
  void observe(const StepFeedback& feedback) override;

 private:
  PolicyClass class_;
  LossBinding binding_;
  double eta_;
  std::vector<double> weights_;
  std::vector<double> cumulative_expert_loss_;
  double cumulative_fractional_loss_ = 0.0;
};

/// Continual learner (b): tabular value learning on observations with
/// xi-greedy exploration.
class QLearner : public Agent {
 public:
  QLearner(int observation_count, int action_count, double alpha, double gamma, double xi);

  /// Q[o][a] += alpha * (r + gamma * max_a' Q[o'][a'] - Q[o][a]).
  void q_update(int observation, int action, double reward, int next_observation);

  [[nodiscard]] const std::vector<std::vector<double>>& table() const { return q_; }
  /// Greedy action per observation, ties to the lowest index.
  [[nodiscard]] Policy greedy_policy() const;

  int act(int observation, RngStream& stream) override;
  void observe(const StepFeedback& feedback) override;

 private:
  double alpha_;
  double gamma_;
  double xi_;
  std::vector<std::vector<double>> q_;
};

}  // namespace tailrisk
