#pragma once

#include <optional>
#include <vector>

#include "tailrisk/env.hpp"

namespace tailrisk {

/// Reward curve with its moving average.  moving_avg[i] is the mean of
/// per_step_reward[i .. i+window-1], i.e. the average of the window *ending*
/// at step i+window-1; it is undefined for earlier steps.
struct PerformanceSeries {
  std::vector<double> per_step_reward;
  int window = 1;
  std::vector<double> moving_avg;  // length = steps - window + 1

  /// Moving average of the window ending at `step`, if defined.
  [[nodiscard]] std::optional<double> average_at(int step) const;
};

/// Moving averages with the canonical compensated summation (each window
/// summed independently in ascending order).  Throws when W exceeds the
/// series length or W < 1.
PerformanceSeries performance_series(const Trajectory& traj, int window);
PerformanceSeries performance_series(const std::vector<double>& rewards, int window);

/// First step >= event_step whose moving average re-enters
/// [baseline - band, +inf) and stays there for >= window steps; returned as
/// steps elapsed since event_step.  nullopt = not recovered within the
/// series.
std::optional<int> recovery_time(const PerformanceSeries& series, double baseline, double band,
                                 int event_step);

/// Q_N vs Q_D comparison: total variation, KL(qd || qn) with an infinity
/// flag when qd has mass outside qn's support, and the qd-mass overlap with
/// qn's support.
struct ShiftReport {
  double tv = 0.0;
  double kl = 0.0;
  bool kl_infinite = false;
  double support_overlap = 0.0;
};

ShiftReport shift_report(const ObservationDistribution& qn, const ObservationDistribution& qd);

/// Markov-order violation of the observation process, computed exactly from
/// the chain algebra (no sampling): the maximum over (o_prev, o, o') of
/// |P(o'|o) - P(o'|o, o_prev)| under the stationary law of the policy-induced
/// chain, optionally restricted (rows renormalized) to a region.
struct MarkovGapReport {
  double gap = 0.0;
  int o_prev = -1;
  int o = -1;
  int o_next = -1;  // the witnessing triple at the maximum
};

MarkovGapReport markov_order_gap(const EnvironmentModel& env, const Policy& policy,
                                 const std::optional<Event>& region = std::nullopt);

}  // namespace tailrisk
