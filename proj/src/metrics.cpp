#include "tailrisk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tailrisk/numeric.hpp"

namespace tailrisk {

namespace {

void check_distribution(const std::vector<double>& mass, const char* name) {
  CompensatedSum total;
  for (double p : mass) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument(std::string(name) + " has a negative or non-finite entry");
    }
    total.add(p);
  }
  if (std::abs(total.value() - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(name) + " does not sum to 1");
  }
}

}  // namespace

std::optional<double> PerformanceSeries::average_at(int step) const {
  const int first_defined = window - 1;
  if (step < first_defined || step >= static_cast<int>(per_step_reward.size())) {
    return std::nullopt;
  }
  return moving_avg[static_cast<size_t>(step - first_defined)];
}

PerformanceSeries performance_series(const std::vector<double>& rewards, int window) {
  if (window < 1) throw std::invalid_argument("window must be positive");
  if (window > static_cast<int>(rewards.size())) {
    throw std::invalid_argument("window exceeds the series length");
  }
  PerformanceSeries out;
  out.per_step_reward = rewards;
  out.window = window;
  const size_t n = rewards.size();
  const size_t w = static_cast<size_t>(window);
  out.moving_avg.reserve(n - w + 1);
  for (size_t i = 0; i + w <= n; ++i) {
    CompensatedSum acc;
    for (size_t j = i; j < i + w; ++j) acc.add(rewards[j]);
    out.moving_avg.push_back(acc.value() / static_cast<double>(window));
  }
  return out;
}

PerformanceSeries performance_series(const Trajectory& traj, int window) {
  return performance_series(traj.rewards, window);
}

std::optional<int> recovery_time(const PerformanceSeries& series, double baseline, double band,
                                 int event_step) {
  const int n = static_cast<int>(series.per_step_reward.size());
  if (event_step < 0 || event_step >= n) {
    throw std::invalid_argument("event step lies outside the series");
  }
  const int w = series.window;
  const int first_defined = w - 1;
  const double threshold = baseline - band;

  // in_band[i] for step = first_defined + i
  const int defined = static_cast<int>(series.moving_avg.size());
  std::vector<int> run(static_cast<size_t>(defined) + 1, 0);
  for (int i = defined - 1; i >= 0; --i) {
    const bool ok = series.moving_avg[static_cast<size_t>(i)] >= threshold;
    run[static_cast<size_t>(i)] = ok ? run[static_cast<size_t>(i) + 1] + 1 : 0;
  }
  const int start = std::max(event_step, first_defined);
  for (int step = start; step < n; ++step) {
    const int i = step - first_defined;
    if (i < defined && run[static_cast<size_t>(i)] >= w) return step - event_step;
  }
  return std::nullopt;
}

ShiftReport shift_report(const ObservationDistribution& qn, const ObservationDistribution& qd) {
  if (qn.mass.size() != qd.mass.size()) {
    throw std::invalid_argument("distributions live on different observation spaces");
  }
  check_distribution(qn.mass, "qn");
  check_distribution(qd.mass, "qd");

  ShiftReport report;
  CompensatedSum l1;
  CompensatedSum kl;
  CompensatedSum overlap;
  for (size_t o = 0; o < qn.mass.size(); ++o) {
    const double pn = qn.mass[o];
    const double pd = qd.mass[o];
    l1.add(std::abs(pn - pd));
    if (pd > 0.0) {
      if (pn <= 0.0) {
        report.kl_infinite = true;
      } else {
        kl.add(pd * std::log(pd / pn));
      }
    }
    if (pn > 0.0) overlap.add(pd);
  }
  report.tv = 0.5 * l1.value();
  report.kl = report.kl_infinite ? std::numeric_limits<double>::infinity() : kl.value();
  report.support_overlap = overlap.value();
  return report;
}

MarkovGapReport markov_order_gap(const EnvironmentModel& env, const Policy& policy,
                                 const std::optional<Event>& region) {
  const Event everything = Event::full(env.state_count());
  const Event& where = region ? *region : everything;
  where.check_within(env.state_count());
  const auto& members = where.members();
  if (members.empty()) throw std::invalid_argument("region must be non-empty");
  const size_t m = members.size();
  const size_t o_count = static_cast<size_t>(env.observation_count());
  const size_t a_count = static_cast<size_t>(env.action_count());

  // Action-resolved kernel restricted to the region, rows renormalized; with
  // the full region this is the kernel itself.
  std::vector<std::vector<std::vector<double>>> k(
      m, std::vector<std::vector<double>>(a_count, std::vector<double>(m, 0.0)));
  for (size_t i = 0; i < m; ++i) {
    for (size_t a = 0; a < a_count; ++a) {
      const auto& row = env.kernel_row(members[i], static_cast<int>(a));
      double mass = 0.0;
      for (size_t j = 0; j < m; ++j) {
        k[i][a][j] = row[static_cast<size_t>(members[j])];
        mass += k[i][a][j];
      }
      if (mass <= 0.0) {
        throw std::invalid_argument("state " + std::to_string(members[i]) + " under action " +
                                    std::to_string(a) +
                                    " has no transition mass into the region");
      }
      for (size_t j = 0; j < m; ++j) k[i][a][j] /= mass;
    }
  }

  // Policy-induced chain on the restricted kernel and its stationary law.
  std::vector<std::vector<double>> chain(m, std::vector<double>(m, 0.0));
  for (size_t i = 0; i < m; ++i) {
    const auto& obs = env.obs_row(members[i]);
    for (size_t o = 0; o < o_count; ++o) {
      const double po = obs[o];
      if (po == 0.0) continue;
      const size_t a = static_cast<size_t>(policy.action_at(static_cast<int>(o)));
      for (size_t j = 0; j < m; ++j) chain[i][j] += po * k[i][a][j];
    }
  }
  const std::vector<double> pi = stationary_distribution(chain);

  // Exact three-step observation joint under stationarity:
  // M3(o0,o1,o2) = sum_{s0,s1,s2} pi(s0) O[s0][o0] K[s0][pi0(o0)][s1] O[s1][o1]
  //                K[s1][pi0(o1)][s2] O[s2][o2].
  std::vector<std::vector<std::vector<double>>> m3(
      o_count, std::vector<std::vector<double>>(o_count, std::vector<double>(o_count, 0.0)));
  for (size_t o0 = 0; o0 < o_count; ++o0) {
    const size_t a0 = static_cast<size_t>(policy.action_at(static_cast<int>(o0)));
    std::vector<double> after1(m, 0.0);  // mass on s1 jointly with o0
    for (size_t i = 0; i < m; ++i) {
      const double w = pi[i] * env.obs_row(members[i])[o0];
      if (w == 0.0) continue;
      for (size_t j = 0; j < m; ++j) after1[j] += w * k[i][a0][j];
    }
    for (size_t o1 = 0; o1 < o_count; ++o1) {
      const size_t a1 = static_cast<size_t>(policy.action_at(static_cast<int>(o1)));
      std::vector<double> after2(m, 0.0);  // mass on s2 jointly with (o0, o1)
      for (size_t i = 0; i < m; ++i) {
        const double w = after1[i] * env.obs_row(members[i])[o1];
        if (w == 0.0) continue;
        for (size_t j = 0; j < m; ++j) after2[j] += w * k[i][a1][j];
      }
      for (size_t o2 = 0; o2 < o_count; ++o2) {
        CompensatedSum acc;
        for (size_t j = 0; j < m; ++j) acc.add(after2[j] * env.obs_row(members[j])[o2]);
        m3[o0][o1][o2] = acc.value();
      }
    }
  }

  // first-order conditionals P(o2|o1) from the o0-marginalized joint
  std::vector<std::vector<double>> pair(o_count, std::vector<double>(o_count, 0.0));
  std::vector<double> marg(o_count, 0.0);
  for (size_t o0 = 0; o0 < o_count; ++o0) {
    for (size_t o1 = 0; o1 < o_count; ++o1) {
      for (size_t o2 = 0; o2 < o_count; ++o2) {
        pair[o1][o2] += m3[o0][o1][o2];
        marg[o1] += m3[o0][o1][o2];
      }
    }
  }

  MarkovGapReport report;
  for (size_t o0 = 0; o0 < o_count; ++o0) {
    for (size_t o1 = 0; o1 < o_count; ++o1) {
      double prefix = 0.0;  // P(o0, o1)
      for (size_t o2 = 0; o2 < o_count; ++o2) prefix += m3[o0][o1][o2];
      if (prefix <= 0.0 || marg[o1] <= 0.0) continue;
      for (size_t o2 = 0; o2 < o_count; ++o2) {
        const double second_order = m3[o0][o1][o2] / prefix;
        const double first_order = pair[o1][o2] / marg[o1];
        const double diff = std::abs(second_order - first_order);
        if (diff > report.gap) {
          report.gap = diff;
          report.o_prev = static_cast<int>(o0);
          report.o = static_cast<int>(o1);
          report.o_next = static_cast<int>(o2);
        }
      }
    }
  }
  return report;
}

}  // namespace tailrisk
