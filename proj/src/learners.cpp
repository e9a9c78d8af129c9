#include "tailrisk/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tailrisk/numeric.hpp"

namespace tailrisk {

namespace {
constexpr double kRangeSlack = 1e-12;
}

LossBinding::LossBinding(double lo, double hi) : r_min(lo), r_max(hi) {
  if (!(r_max > r_min) || !std::isfinite(r_min) || !std::isfinite(r_max)) {
    throw std::invalid_argument("loss binding needs finite r_min < r_max");
  }
}

double LossBinding::loss(double reward) const {
  if (!(reward >= r_min - kRangeSlack) || !(reward <= r_max + kRangeSlack)) {
    throw std::invalid_argument("reward " + std::to_string(reward) +
                                " outside the declared range [" + std::to_string(r_min) + ", " +
                                std::to_string(r_max) + "]");
  }
  const double clamped = std::clamp(reward, r_min, r_max);
  return (r_max - clamped) / (r_max - r_min);
}

void PolicyClass::check_for(const EnvironmentModel& env) const {
  if (policies.empty()) throw std::invalid_argument("policy class must be non-empty");
  for (const auto& p : policies) {
    if (p.table.size() != static_cast<size_t>(env.observation_count())) {
      throw std::invalid_argument("policy table length does not match the observation count");
    }
    for (int a : p.table) {
      if (a < 0 || a >= env.action_count()) {
        throw std::invalid_argument("policy table contains an invalid action index");
      }
    }
  }
}

int exact_minimizer(const FiniteProbabilitySpace& space, const LossTable& loss) {
  int best = 0;
  double best_risk = risk(space, loss, 0);
  for (int theta = 1; theta < loss.theta_count(); ++theta) {
    const double r = risk(space, loss, theta);
    if (r < best_risk) {
      best_risk = r;
      best = theta;
    }
  }
  return best;
}

// --- ErmLearner -------------------------------------------------------------

ErmLearner::ErmLearner(PolicyClass policy_class, LossBinding binding, int t0, int action_count)
    : class_(std::move(policy_class)), binding_(binding), t0_(t0), action_count_(action_count) {
  if (class_.policies.empty()) throw std::invalid_argument("policy class must be non-empty");
  if (t0_ < 1) throw std::invalid_argument("training cutoff t0 must be positive");
  if (action_count_ < 1) throw std::invalid_argument("action count must be positive");
}

void ErmLearner::record(const ExperienceRecord& rec) {
  if (chosen_) return;  // frozen: all further experience is ignored
  buffer_.push_back(rec);
}

double ErmLearner::empirical_policy_risk(int policy_index) const {
  const Policy& policy = class_.at(policy_index);
  std::vector<double> matched;
  for (const auto& rec : buffer_) {
    if (policy.action_at(rec.observation) == rec.action) {
      matched.push_back(binding_.loss(rec.reward));
    }
  }
  if (matched.empty()) return std::numeric_limits<double>::infinity();
  // canonical ordering: sort ascending, then compensated mean
  std::sort(matched.begin(), matched.end());
  return compensated_mean(matched);
}

int ErmLearner::train() {
  if (chosen_) return *chosen_;
  if (buffer_.empty()) throw std::invalid_argument("cannot train on an empty buffer");
  int best = -1;
  double best_risk = std::numeric_limits<double>::infinity();
  for (int theta = 0; theta < class_.size(); ++theta) {
    const double r = empirical_policy_risk(theta);
    if (r < best_risk) {
      best_risk = r;
      best = theta;
    }
  }
  if (best < 0) {
    throw std::runtime_error("no policy in the class matches any buffered record");
  }
  chosen_ = best;
  return best;
}

int ErmLearner::chosen() const {
  if (!chosen_) throw std::logic_error("learner is not frozen yet");
  return *chosen_;
}

int ErmLearner::act(int observation, RngStream& stream) {
  if (chosen_) return class_.at(*chosen_).action_at(observation);
  return static_cast<int>(stream.uniform_int(static_cast<std::uint64_t>(action_count_)));
}

void ErmLearner::observe(const StepFeedback& feedback) {
  if (chosen_) return;
  record({feedback.prev_observation, feedback.action, feedback.reward, feedback.observation});
  ++steps_seen_;
  if (steps_seen_ >= t0_) train();
}

// --- HedgeLearner -----------------------------------------------------------

HedgeLearner::HedgeLearner(PolicyClass policy_class, LossBinding binding, double eta)
    : class_(std::move(policy_class)), binding_(binding), eta_(eta) {
  if (class_.policies.empty()) throw std::invalid_argument("policy class must be non-empty");
  if (!(eta_ >= 0.0) || !(eta_ <= 1.0)) {
    throw std::invalid_argument("learning rate eta must lie in [0, 1]");
  }
  weights_.assign(static_cast<size_t>(class_.size()), 1.0);
  cumulative_expert_loss_.assign(static_cast<size_t>(class_.size()), 0.0);
}

void HedgeLearner::ew_update(int policy_index, double reward) {
  if (policy_index < 0 || policy_index >= class_.size()) {
    throw std::invalid_argument("policy index out of range");
  }
  const double l = binding_.loss(reward);  // also enforces the declared range
  weights_[static_cast<size_t>(policy_index)] *= std::exp(-eta_ * l);
}

std::vector<double> HedgeLearner::distribution() const {
  std::vector<double> dist = weights_;
  const double total = compensated_total(dist);
  for (double& w : dist) w /= total;
  return dist;
}

double HedgeLearner::regret() const {
  const double best =
      *std::min_element(cumulative_expert_loss_.begin(), cumulative_expert_loss_.end());
  return cumulative_fractional_loss_ - best;
}

int HedgeLearner::act(int observation, RngStream& stream) {
  const auto dist = distribution();
  const int expert = static_cast<int>(stream.pick(dist));
  return class_.at(expert).action_at(observation);
}

void HedgeLearner::observe(const StepFeedback& feedback) {
  const auto dist = distribution();
  CompensatedSum fractional;
  // full-information sweep: every expert is charged the loss of the action it
  // would have taken, read off the supervisor's per-action values
  for (int theta = 0; theta < class_.size(); ++theta) {
    const int a = class_.at(theta).action_at(feedback.prev_observation);
    const double reward = feedback.action_values.at(static_cast<size_t>(a));
    const double l = binding_.loss(reward);
    cumulative_expert_loss_[static_cast<size_t>(theta)] += l;
    fractional.add(dist[static_cast<size_t>(theta)] * l);
    ew_update(theta, reward);
  }
  cumulative_fractional_loss_ += fractional.value();
  // renormalize by the max so long runs cannot underflow the weights
  const double top = *std::max_element(weights_.begin(), weights_.end());
  for (double& w : weights_) w /= top;
}

// --- QLearner ---------------------------------------------------------------

QLearner::QLearner(int observation_count, int action_count, double alpha, double gamma, double xi)
    : alpha_(alpha), gamma_(gamma), xi_(xi) {
  if (observation_count < 1 || action_count < 1) {
    throw std::invalid_argument("QLearner needs positive observation and action counts");
  }
  if (!(alpha_ >= 0.0) || !(alpha_ <= 1.0)) {
    throw std::invalid_argument("step size alpha must lie in [0, 1]");
  }
  if (!(gamma_ >= 0.0) || !(gamma_ < 1.0)) {
    throw std::invalid_argument("discount gamma must lie in [0, 1)");
  }
  if (!(xi_ >= 0.0) || !(xi_ <= 1.0)) {
    throw std::invalid_argument("exploration rate xi must lie in [0, 1]");
  }
  q_.assign(static_cast<size_t>(observation_count),
            std::vector<double>(static_cast<size_t>(action_count), 0.0));
}

void QLearner::q_update(int observation, int action, double reward, int next_observation) {
  if (observation < 0 || observation >= static_cast<int>(q_.size()) || next_observation < 0 ||
      next_observation >= static_cast<int>(q_.size())) {
    throw std::invalid_argument("observation index out of range");
  }
  if (action < 0 || action >= static_cast<int>(q_.front().size())) {
    throw std::invalid_argument("action index out of range");
  }
  const auto& next_row = q_[static_cast<size_t>(next_observation)];
  const double best_next = *std::max_element(next_row.begin(), next_row.end());
  double& cell = q_[static_cast<size_t>(observation)][static_cast<size_t>(action)];
  cell += alpha_ * (reward + gamma_ * best_next - cell);
}

Policy QLearner::greedy_policy() const {
  Policy policy;
  policy.table.reserve(q_.size());
  for (const auto& row : q_) {
    int best = 0;
    for (int a = 1; a < static_cast<int>(row.size()); ++a) {
      if (row[static_cast<size_t>(a)] > row[static_cast<size_t>(best)]) best = a;
    }
    policy.table.push_back(best);
  }
  return policy;
}

int QLearner::act(int observation, RngStream& stream) {
  if (observation < 0 || observation >= static_cast<int>(q_.size())) {
    throw std::invalid_argument("observation index out of range");
  }
  if (xi_ > 0.0 && stream.uniform() < xi_) {
    return static_cast<int>(stream.uniform_int(q_.front().size()));
  }
  const auto& row = q_[static_cast<size_t>(observation)];
  int best = 0;
  for (int a = 1; a < static_cast<int>(row.size()); ++a) {
    if (row[static_cast<size_t>(a)] > row[static_cast<size_t>(best)]) best = a;
  }
  return best;
}

void QLearner::observe(const StepFeedback& feedback) {
  q_update(feedback.prev_observation, feedback.action, feedback.reward, feedback.observation);
}

}  // namespace tailrisk
