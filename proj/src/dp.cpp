#include "tailrisk/dp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tailrisk/numeric.hpp"

namespace tailrisk {

namespace {

// Region-restricted MDP in local indexing: p[i][a][j] renormalized onto the
// region, r[i][a] the matching conditional one-step reward.
struct RestrictedMdp {
  std::vector<int> members;                            // local -> global state
  std::vector<std::vector<std::vector<double>>> p;     // [i][a][j]
  std::vector<std::vector<double>> r;                  // [i][a]
};

RestrictedMdp restrict_mdp(const EnvironmentModel& env, const std::optional<Event>& region) {
  const Event everything = Event::full(env.state_count());
  const Event& where = region ? *region : everything;
  where.check_within(env.state_count());
  if (where.empty()) throw std::invalid_argument("restriction region must be non-empty");

  RestrictedMdp mdp;
  mdp.members = where.members();
  const size_t m = mdp.members.size();
  const size_t a_count = static_cast<size_t>(env.action_count());
  mdp.p.assign(m, std::vector<std::vector<double>>(a_count, std::vector<double>(m, 0.0)));
  mdp.r.assign(m, std::vector<double>(a_count, 0.0));

  for (size_t i = 0; i < m; ++i) {
    for (size_t a = 0; a < a_count; ++a) {
      const auto& row = env.kernel_row(mdp.members[i], static_cast<int>(a));
      double mass = 0.0;
      for (size_t j = 0; j < m; ++j) {
        mdp.p[i][a][j] = row[static_cast<size_t>(mdp.members[j])];
        mass += mdp.p[i][a][j];
      }
      if (mass <= 0.0) {
        throw std::invalid_argument("state " + std::to_string(mdp.members[i]) + " under action " +
                                    std::to_string(a) +
                                    " has no transition mass into the region");
      }
      CompensatedSum reward;
      for (size_t j = 0; j < m; ++j) {
        mdp.p[i][a][j] /= mass;
        reward.add(mdp.p[i][a][j] *
                   env.reward(mdp.members[j], static_cast<int>(a)));
      }
      mdp.r[i][a] = reward.value();
    }
  }
  return mdp;
}

// Closed communicating classes of the union support graph (edge i -> j when
// some action can move i to j).  Average-reward iteration needs the region to
// hang together; with two or more closed classes the gain is not one number.
int closed_class_count(const RestrictedMdp& mdp) {
  const size_t m = mdp.members.size();
  std::vector<std::vector<bool>> reach(m, std::vector<bool>(m, false));
  for (size_t i = 0; i < m; ++i) {
    reach[i][i] = true;
    for (const auto& row : mdp.p[i]) {
      for (size_t j = 0; j < m; ++j) {
        if (row[j] > 0.0) reach[i][j] = true;
      }
    }
  }
  for (size_t k = 0; k < m; ++k) {
    for (size_t i = 0; i < m; ++i) {
      if (!reach[i][k]) continue;
      for (size_t j = 0; j < m; ++j) {
        if (reach[k][j]) reach[i][j] = true;
      }
    }
  }
  std::vector<bool> closed(m, true);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < m; ++j) {
      if (reach[i][j] && !reach[j][i]) {
        closed[i] = false;
        break;
      }
    }
  }
  int classes = 0;
  std::vector<bool> seen(m, false);
  for (size_t i = 0; i < m; ++i) {
    if (!closed[i] || seen[i]) continue;
    ++classes;
    for (size_t j = 0; j < m; ++j) {
      if (closed[j] && reach[i][j] && reach[j][i]) seen[j] = true;
    }
  }
  return classes;
}

}  // namespace

double policy_average_reward(const EnvironmentModel& env, const Policy& policy,
                             const std::optional<Event>& region) {
  const auto occ = stationary_occupancy(env, policy, region);
  const Event everything = Event::full(env.state_count());
  const Event& where = region ? *region : everything;

  CompensatedSum total;
  for (int s : where.members()) {
    const double ps = occ[static_cast<size_t>(s)];
    if (ps == 0.0) continue;
    const auto& obs = env.obs_row(s);
    for (int o = 0; o < env.observation_count(); ++o) {
      const double po = obs[static_cast<size_t>(o)];
      if (po == 0.0) continue;
      const int a = policy.action_at(o);
      const auto& row = env.kernel_row(s, a);
      // conditional one-step reward given the chain stays in the region
      double mass = 0.0;
      CompensatedSum reward;
      for (int s2 : where.members()) {
        const double pss = row[static_cast<size_t>(s2)];
        mass += pss;
        reward.add(pss * env.reward(s2, a));
      }
      if (mass <= 0.0) {
        throw std::invalid_argument("policy leaves the region with certainty from state " +
                                    std::to_string(s));
      }
      total.add(ps * po * (reward.value() / mass));
    }
  }
  return total.value();
}

AverageRewardSolution optimal_average_reward(const EnvironmentModel& env,
                                             const std::optional<Event>& region, double span_tol,
                                             int max_iters) {
  const RestrictedMdp mdp = restrict_mdp(env, region);
  const int classes = closed_class_count(mdp);
  if (classes != 1) {
    throw std::invalid_argument("region has " + std::to_string(classes) +
                                " closed communicating classes even with every action pooled; "
                                "average-reward optimization needs a unichain");
  }
  const size_t m = mdp.members.size();
  const size_t a_count = static_cast<size_t>(env.action_count());

  // Relative value iteration on the half-lazy kernel (I + P)/2: same gain and
  // same greedy ordering at the fixed point, but provably aperiodic.
  std::vector<double> h(m, 0.0);
  std::vector<double> next(m, 0.0);
  double gain = 0.0;
  for (int iter = 0; iter < max_iters; ++iter) {
    for (size_t i = 0; i < m; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (size_t a = 0; a < a_count; ++a) {
        double q = mdp.r[i][a] + 0.5 * h[i];
        for (size_t j = 0; j < m; ++j) q += 0.5 * mdp.p[i][a][j] * h[j];
        best = std::max(best, q);
      }
      next[i] = best;
    }
    double span_min = std::numeric_limits<double>::infinity();
    double span_max = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < m; ++i) {
      const double diff = next[i] - h[i];
      span_min = std::min(span_min, diff);
      span_max = std::max(span_max, diff);
    }
    gain = next[0] - h[0];
    const double anchor = next[0];
    for (size_t i = 0; i < m; ++i) h[i] = next[i] - anchor;
    if (span_max - span_min < span_tol) break;
    if (iter + 1 == max_iters) {
      throw std::runtime_error("relative value iteration did not converge");
    }
  }

  AverageRewardSolution out;
  out.gain = gain;
  out.state_policy.assign(static_cast<size_t>(env.state_count()), 0);
  for (size_t i = 0; i < m; ++i) {
    int best_a = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < a_count; ++a) {
      double q = mdp.r[i][a] + 0.5 * h[i];
      for (size_t j = 0; j < m; ++j) q += 0.5 * mdp.p[i][a][j] * h[j];
      if (q > best_q) {  // strict: ties stay at the lowest action index
        best_q = q;
        best_a = static_cast<int>(a);
      }
    }
    out.state_policy[static_cast<size_t>(mdp.members[i])] = best_a;
  }
  return out;
}

DiscountedSolution value_iteration(const EnvironmentModel& env, double gamma,
                                   const std::optional<Event>& region, double tol,
                                   int max_iters) {
  if (!(gamma >= 0.0) || !(gamma < 1.0)) {
    throw std::invalid_argument("discount factor must lie in [0, 1)");
  }
  const RestrictedMdp mdp = restrict_mdp(env, region);
  const size_t m = mdp.members.size();
  const size_t a_count = static_cast<size_t>(env.action_count());

  std::vector<double> v(m, 0.0);
  std::vector<double> next(m, 0.0);
  for (int iter = 0; iter < max_iters; ++iter) {
    double delta = 0.0;
    for (size_t i = 0; i < m; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (size_t a = 0; a < a_count; ++a) {
        double q = mdp.r[i][a];
        for (size_t j = 0; j < m; ++j) q += gamma * mdp.p[i][a][j] * v[j];
        best = std::max(best, q);
      }
      next[i] = best;
      delta = std::max(delta, std::abs(next[i] - v[i]));
    }
    v = next;
    if (delta < tol) break;
    if (iter + 1 == max_iters) throw std::runtime_error("value iteration did not converge");
  }

  DiscountedSolution out;
  out.value.assign(static_cast<size_t>(env.state_count()), 0.0);
  out.state_policy.assign(static_cast<size_t>(env.state_count()), 0);
  for (size_t i = 0; i < m; ++i) {
    out.value[static_cast<size_t>(mdp.members[i])] = v[i];
    int best_a = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < a_count; ++a) {
      double q = mdp.r[i][a];
      for (size_t j = 0; j < m; ++j) q += gamma * mdp.p[i][a][j] * v[j];
      if (q > best_q) {
        best_q = q;
        best_a = static_cast<int>(a);
      }
    }
    out.state_policy[static_cast<size_t>(mdp.members[i])] = best_a;
  }
  return out;
}

}  // namespace tailrisk
