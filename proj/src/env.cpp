#include "tailrisk/env.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "tailrisk/numeric.hpp"

namespace tailrisk {

namespace {

constexpr double kRowTol = 1e-12;
constexpr double kEdgeEps = 0.0;  // any positive mass counts as an edge

bool row_ok(const std::vector<double>& row, size_t want, std::string* why) {
  if (row.size() != want) {
    *why = "has " + std::to_string(row.size()) + " entries, expected " + std::to_string(want);
    return false;
  }
  CompensatedSum total;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      *why = "contains a negative or non-finite entry";
      return false;
    }
    total.add(p);
  }
  if (std::abs(total.value() - 1.0) > kRowTol) {
    *why = "sums to " + std::to_string(total.value()) + ", expected 1 within 1e-12";
    return false;
  }
  return true;
}

void check_state(const EnvironmentModel& env, int state) {
  if (state < 0 || state >= env.state_count()) {
    throw std::invalid_argument("state index " + std::to_string(state) + " out of range");
  }
}

void check_action(const EnvironmentModel& env, int action) {
  if (action < 0 || action >= env.action_count()) {
    throw std::invalid_argument("action index " + std::to_string(action) + " out of range");
  }
}

// A distribution over states that must live on `region`.
void check_occupancy(const EnvironmentModel& env, const std::vector<double>& occupancy,
                     const Event& region) {
  if (occupancy.size() != static_cast<size_t>(env.state_count())) {
    throw std::invalid_argument("occupancy length does not match the state count");
  }
  CompensatedSum total;
  double off_region = 0.0;
  for (int s = 0; s < env.state_count(); ++s) {
    const double p = occupancy[static_cast<size_t>(s)];
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("occupancy entries must be finite and non-negative");
    }
    total.add(p);
    if (!region.contains(s)) off_region += p;
  }
  if (std::abs(total.value() - 1.0) > 1e-9) {
    throw std::invalid_argument("occupancy must sum to 1");
  }
  if (off_region > 1e-12) {
    throw std::invalid_argument("occupancy has mass " + std::to_string(off_region) +
                                " outside its declared region");
  }
}

void check_policy(const EnvironmentModel& env, const Policy& policy) {
  if (policy.table.size() != static_cast<size_t>(env.observation_count())) {
    throw std::invalid_argument("policy table length does not match the observation count");
  }
  for (int a : policy.table) {
    if (a < 0 || a >= env.action_count()) {
      throw std::invalid_argument("policy table contains an invalid action index");
    }
  }
}

// Number of closed communicating classes of `chain` along positive-mass
// edges.  A unique closed class (unichain) is what a stationary distribution
// needs; transient states are fine.  Boolean transitive closure is plenty at
// desk scale.
int count_closed_classes(const std::vector<std::vector<double>>& chain) {
  const size_t m = chain.size();
  std::vector<std::vector<bool>> reach(m, std::vector<bool>(m, false));
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < m; ++j) reach[i][j] = chain[i][j] > kEdgeEps;
    reach[i][i] = true;
  }
  for (size_t k = 0; k < m; ++k) {
    for (size_t i = 0; i < m; ++i) {
      if (!reach[i][k]) continue;
      for (size_t j = 0; j < m; ++j) {
        if (reach[k][j]) reach[i][j] = true;
      }
    }
  }
  // i sits in a closed class iff everything it reaches can get back.
  std::vector<bool> closed(m, false);
  for (size_t i = 0; i < m; ++i) {
    closed[i] = true;
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

std::vector<std::string> validate(const EnvironmentConfig& config) {
  std::vector<std::string> errors;
  const auto bad = [&errors](std::string msg) { errors.push_back(std::move(msg)); };

  if (config.state_count < 1) bad("state_count must be positive");
  if (config.action_count < 1) bad("action_count must be positive");
  if (config.observation_count < 1) bad("observation_count must be positive");
  if (!errors.empty()) return errors;

  const auto s_count = static_cast<size_t>(config.state_count);
  const auto a_count = static_cast<size_t>(config.action_count);
  const auto o_count = static_cast<size_t>(config.observation_count);

  if (config.observation_count >= config.state_count) {
    bad("observation_count must be strictly smaller than state_count (lossy projection)");
  }

  if (config.kernel.size() != s_count) {
    bad("kernel must have one entry per state");
  } else {
    for (size_t s = 0; s < s_count; ++s) {
      if (config.kernel[s].size() != a_count) {
        bad("kernel for state " + std::to_string(s) + " must have one row per action");
        continue;
      }
      for (size_t a = 0; a < a_count; ++a) {
        std::string why;
        if (!row_ok(config.kernel[s][a], s_count, &why)) {
          bad("kernel row (state " + std::to_string(s) + ", action " + std::to_string(a) + ") " +
              why);
        }
      }
    }
  }

  if (config.obs_map.size() != s_count) {
    bad("obs_map must have one row per state");
  } else {
    for (size_t s = 0; s < s_count; ++s) {
      std::string why;
      if (!row_ok(config.obs_map[s], o_count, &why)) {
        bad("obs_map row (state " + std::to_string(s) + ") " + why);
      }
    }
  }

  if (config.reward.size() != s_count) {
    bad("reward must have one row per (next) state");
  } else {
    for (size_t s = 0; s < s_count; ++s) {
      if (config.reward[s].size() != a_count) {
        bad("reward row (state " + std::to_string(s) + ") must have one entry per action");
        continue;
      }
      for (size_t a = 0; a < a_count; ++a) {
        if (!std::isfinite(config.reward[s][a])) {
          bad("reward (state " + std::to_string(s) + ", action " + std::to_string(a) +
              ") must be finite");
        }
      }
    }
  }

  try {
    config.nominal.check_within(config.state_count);
  } catch (const std::exception& e) {
    bad(std::string("nominal region: ") + e.what());
  }
  try {
    config.disruption.check_within(config.state_count);
  } catch (const std::exception& e) {
    bad(std::string("disruption region: ") + e.what());
  }
  for (int s : config.nominal.members()) {
    if (config.disruption.contains(s)) {
      bad("state " + std::to_string(s) + " is in both the nominal and disruption regions");
    }
  }
  for (int s = 0; s < config.state_count; ++s) {
    if (!config.nominal.contains(s) && !config.disruption.contains(s)) {
      bad("state " + std::to_string(s) + " belongs to neither region (must partition)");
    }
  }

  if (!(config.clock.delta_tau > 0.0)) bad("clock delta_tau must be positive");
  return errors;
}

EnvironmentModel::EnvironmentModel(EnvironmentConfig config) : config_(std::move(config)) {
  const auto errors = validate(config_);
  if (!errors.empty()) {
    std::string joined = "invalid environment:";
    for (const auto& e : errors) joined += "\n  - " + e;
    throw std::invalid_argument(joined);
  }
}

const std::vector<double>& EnvironmentModel::kernel_row(int state, int action) const {
  check_state(*this, state);
  check_action(*this, action);
  return config_.kernel[static_cast<size_t>(state)][static_cast<size_t>(action)];
}

const std::vector<double>& EnvironmentModel::obs_row(int state) const {
  check_state(*this, state);
  return config_.obs_map[static_cast<size_t>(state)];
}

double EnvironmentModel::reward(int next_state, int action) const {
  check_state(*this, next_state);
  check_action(*this, action);
  return config_.reward[static_cast<size_t>(next_state)][static_cast<size_t>(action)];
}

std::vector<double> EnvironmentModel::expected_action_values(int state) const {
  check_state(*this, state);
  std::vector<double> values(static_cast<size_t>(action_count()), 0.0);
  for (int a = 0; a < action_count(); ++a) {
    const auto& row = config_.kernel[static_cast<size_t>(state)][static_cast<size_t>(a)];
    CompensatedSum acc;
    for (int s2 = 0; s2 < state_count(); ++s2) {
      acc.add(row[static_cast<size_t>(s2)] *
              config_.reward[static_cast<size_t>(s2)][static_cast<size_t>(a)]);
    }
    values[static_cast<size_t>(a)] = acc.value();
  }
  return values;
}

StepResult step(const EnvironmentModel& env, int state, int action, RngStream& stream) {
  check_state(env, state);
  check_action(env, action);
  StepResult out;
  out.next_state = static_cast<int>(stream.pick(env.kernel_row(state, action)));
  out.observation = static_cast<int>(stream.pick(env.obs_row(out.next_state)));
  out.reward = env.reward(out.next_state, action);
  return out;
}

std::vector<std::vector<double>> induced_chain(const EnvironmentModel& env, const Policy& policy) {
  check_policy(env, policy);
  const int n = env.state_count();
  std::vector<std::vector<double>> chain(static_cast<size_t>(n),
                                         std::vector<double>(static_cast<size_t>(n), 0.0));
  for (int s = 0; s < n; ++s) {
    const auto& obs = env.obs_row(s);
    for (int o = 0; o < env.observation_count(); ++o) {
      const double po = obs[static_cast<size_t>(o)];
      if (po == 0.0) continue;
      const auto& row = env.kernel_row(s, policy.action_at(o));
      for (int s2 = 0; s2 < n; ++s2) {
        chain[static_cast<size_t>(s)][static_cast<size_t>(s2)] += po * row[static_cast<size_t>(s2)];
      }
    }
  }
  return chain;
}

double crossing_probability(const EnvironmentModel& env, const Policy& policy, const Event& from,
                            const Event& to, const std::vector<double>& occupancy) {
  from.check_within(env.state_count());
  to.check_within(env.state_count());
  check_occupancy(env, occupancy, from);
  const auto chain = induced_chain(env, policy);
  CompensatedSum acc;
  for (int s : from.members()) {
    const double ps = occupancy[static_cast<size_t>(s)];
    if (ps == 0.0) continue;
    for (int s2 : to.members()) {
      acc.add(ps * chain[static_cast<size_t>(s)][static_cast<size_t>(s2)]);
    }
  }
  return acc.value();
}

ObservationDistribution induced_observation_distribution(const EnvironmentModel& env,
                                                         const Event& region,
                                                         const std::vector<double>& occupancy) {
  region.check_within(env.state_count());
  check_occupancy(env, occupancy, region);
  ObservationDistribution out;
  out.mass.resize(static_cast<size_t>(env.observation_count()), 0.0);
  for (int o = 0; o < env.observation_count(); ++o) {
    CompensatedSum acc;
    for (int s : region.members()) {
      acc.add(occupancy[static_cast<size_t>(s)] * env.obs_row(s)[static_cast<size_t>(o)]);
    }
    out.mass[static_cast<size_t>(o)] = acc.value();
  }
  return out;
}

std::vector<double> stationary_occupancy(const EnvironmentModel& env, const Policy& policy,
                                         const std::optional<Event>& region) {
  const auto chain = induced_chain(env, policy);
  const Event everything = Event::full(env.state_count());
  const Event& where = region ? *region : everything;
  where.check_within(env.state_count());
  const auto& members = where.members();
  if (members.empty()) throw std::invalid_argument("stationary region must be non-empty");
  const auto m = members.size();

  // Restrict to the region and renormalize rows onto it.  A row with no mass
  // into the region means the region is not closed enough to condition on.
  std::vector<std::vector<double>> restricted(m, std::vector<double>(m, 0.0));
  for (size_t i = 0; i < m; ++i) {
    double mass = 0.0;
    for (size_t j = 0; j < m; ++j) {
      restricted[i][j] =
          chain[static_cast<size_t>(members[i])][static_cast<size_t>(members[j])];
      mass += restricted[i][j];
    }
    if (mass <= 0.0) {
      throw std::invalid_argument(
          "state " + std::to_string(members[i]) +
          " has no transition mass into the region; adjust the scenario regions");
    }
    for (size_t j = 0; j < m; ++j) restricted[i][j] /= mass;
  }

  const std::vector<double> pi = stationary_distribution(restricted);

  std::vector<double> out(static_cast<size_t>(env.state_count()), 0.0);
  for (size_t i = 0; i < m; ++i) out[static_cast<size_t>(members[i])] = pi[i];
  return out;
}

std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& chain) {
  const size_t m = chain.size();
  if (m == 0) throw std::invalid_argument("chain must be non-empty");
  const int classes = count_closed_classes(chain);
  if (classes != 1) {
    throw std::invalid_argument("chain has " + std::to_string(classes) +
                                " closed communicating classes; the stationary distribution "
                                "needs a unichain (restrict to a region or adjust the scenario)");
  }

  // pi P = pi with sum(pi) = 1: solve (P^T - I) pi = 0, last row replaced by
  // the normalization constraint.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                            static_cast<Eigen::Index>(m));
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < m; ++j) {
      a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = chain[i][j];
    }
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) -= 1.0;
  }
  for (size_t j = 0; j < m; ++j) {
    a(static_cast<Eigen::Index>(m - 1), static_cast<Eigen::Index>(j)) = 1.0;
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  b(static_cast<Eigen::Index>(m - 1)) = 1.0;
  const Eigen::VectorXd pi = a.fullPivLu().solve(b);

  // fixed-point residual check
  double residual = 0.0;
  for (size_t j = 0; j < m; ++j) {
    double next = 0.0;
    for (size_t i = 0; i < m; ++i) next += pi(static_cast<Eigen::Index>(i)) * chain[i][j];
    residual = std::max(residual, std::abs(next - pi(static_cast<Eigen::Index>(j))));
  }
  if (residual > 1e-10) {
    throw std::runtime_error("stationary solve residual " + std::to_string(residual) +
                             " exceeds 1e-10");
  }

  std::vector<double> out(m, 0.0);
  for (size_t i = 0; i < m; ++i) out[i] = std::max(0.0, pi(static_cast<Eigen::Index>(i)));
  // absorb any clamped negatives into an exact renormalization
  const double total = compensated_total(out);
  for (double& p : out) p /= total;
  return out;
}

Trajectory run_episode(const EnvironmentModel& env, Agent& agent, int horizon,
                       const EventSchedule& schedule, const RngStream& env_stream,
                       RngStream& agent_stream, int start_state) {
  check_state(env, start_state);
  if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
  if (schedule.force_at && (*schedule.force_at < 0 || *schedule.force_at >= horizon)) {
    throw std::invalid_argument("forced event step must lie within the horizon");
  }

  Trajectory traj;
  traj.states.reserve(static_cast<size_t>(horizon) + 1);
  traj.observations.reserve(static_cast<size_t>(horizon) + 1);
  traj.actions.reserve(static_cast<size_t>(horizon));
  traj.rewards.reserve(static_cast<size_t>(horizon));

  // Draw addressing: the observation of s_t uses index 2t, the transition
  // taken at step t uses index 2t+1.  Episodes sharing env_stream therefore
  // see identical draws at identical times regardless of what the agent does
  // in between.
  int state = start_state;
  traj.states.push_back(state);
  int obs = static_cast<int>(
      RngStream::pick_from(env_stream.uniform_at(0), env.obs_row(state)));
  traj.observations.push_back(obs);

  for (int t = 0; t < horizon; ++t) {
    const int action = agent.act(obs, agent_stream);
    check_action(env, action);
    const std::vector<double> action_values = env.expected_action_values(state);

    const std::vector<double>* row = &env.kernel_row(state, action);
    std::vector<double> forced_row;
    if (schedule.force_at && *schedule.force_at == t) {
      forced_row.assign(row->begin(), row->end());
      double d_mass = 0.0;
      for (int s2 = 0; s2 < env.state_count(); ++s2) {
        if (!env.disruption().contains(s2)) {
          forced_row[static_cast<size_t>(s2)] = 0.0;
        } else {
          d_mass += forced_row[static_cast<size_t>(s2)];
        }
      }
      if (d_mass <= 0.0) {
        throw std::runtime_error("cannot force the event at step " + std::to_string(t) +
                                 ": no kernel mass reaches the disruption region from state " +
                                 std::to_string(state) + " under action " +
                                 std::to_string(action));
      }
      for (double& p : forced_row) p /= d_mass;
      row = &forced_row;
    }

    const double u_trans = env_stream.uniform_at(static_cast<std::uint64_t>(2 * t + 1));
    const int next_state = static_cast<int>(RngStream::pick_from(u_trans, *row));
    const double reward = env.reward(next_state, action);
    const double u_obs = env_stream.uniform_at(static_cast<std::uint64_t>(2 * (t + 1)));
    const int next_obs = static_cast<int>(RngStream::pick_from(u_obs, env.obs_row(next_state)));

    traj.actions.push_back(action);
    traj.rewards.push_back(reward);
    traj.states.push_back(next_state);
    traj.observations.push_back(next_obs);

    StepFeedback fb;
    fb.t = t;
    fb.prev_observation = obs;
    fb.action = action;
    fb.reward = reward;
    fb.observation = next_obs;
    fb.action_values = action_values;
    agent.observe(fb);

    state = next_state;
    obs = next_obs;
  }
  return traj;
}

}  // namespace tailrisk
