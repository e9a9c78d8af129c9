#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/scenario_oracles.hpp"
#include "tailrisk/experiments.hpp"
#include "tailrisk/io.hpp"
#include "tailrisk/scenario.hpp"

using namespace tailrisk;
using oracle::compose_full_kernel;
using oracle::policy_loss_at;
using oracle::region_average_reward;
using oracle::region_stationary;
using oracle::Cube;

namespace {

std::filesystem::path repo_root() { return std::filesystem::path(TAILRISK_SOURCE_DIR); }

Scenario shipped(const char* file) {
  return load_scenario((repo_root() / "scenarios" / file).string());
}

void check_env_equal(const EnvironmentSpec& a, const EnvironmentSpec& b) {
  CHECK(a.state_count == b.state_count);
  CHECK(a.action_count == b.action_count);
  CHECK(a.observation_count == b.observation_count);
  CHECK(a.nominal_states == b.nominal_states);
  CHECK(a.disruption_states == b.disruption_states);
  CHECK(a.nominal_kernel == b.nominal_kernel);
  CHECK(a.disruption_kernel == b.disruption_kernel);
  CHECK(a.epsilon == b.epsilon);
  CHECK(a.delta == b.delta);
  CHECK(a.entry_state == b.entry_state);
  CHECK(a.return_state == b.return_state);
  CHECK(a.obs_map == b.obs_map);
  CHECK(a.reward == b.reward);
  CHECK(a.tau0 == b.tau0);
  CHECK(a.delta_tau == b.delta_tau);
}

void check_learners_equal(const LearnerSpec& a, const LearnerSpec& b) {
  CHECK(a.eta == b.eta);
  CHECK(a.alpha == b.alpha);
  CHECK(a.gamma == b.gamma);
  CHECK(a.xi == b.xi);
  CHECK(a.r_min == b.r_min);
  CHECK(a.r_max == b.r_max);
  CHECK(a.t0 == b.t0);
}

void check_experiment_equal(const ExperimentSpec& a, const ExperimentSpec& b) {
  CHECK(a.horizon == b.horizon);
  CHECK(a.t_star == b.t_star);
  CHECK(a.training_budget == b.training_budget);
  CHECK(a.epsilon_sweep == b.epsilon_sweep);
  CHECK(a.mu_ratio == b.mu_ratio);
  CHECK(a.window == b.window);
  CHECK(a.band_fraction == b.band_fraction);
  CHECK(a.documented_margin == b.documented_margin);
  CHECK(a.recovery_normalization == b.recovery_normalization);
  CHECK(a.start_state == b.start_state);
}

std::string exception_text(const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path fresh_dir(const char* tag) {
  auto p = std::filesystem::temp_directory_path() / (std::string("tailrisk_test_") + tag);
  std::filesystem::remove_all(p);
  return p;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t nl = text.find('\n', pos);
    out.push_back(text.substr(pos, (nl == std::string::npos ? text.size() : nl) - pos));
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("shipped desk scenario file mirrors the in-tree fixture") {
  const Scenario file = shipped("disruption-6state.json");
  const Scenario fix = fixtures::disruption6();
  CHECK(file.name == fix.name);
  REQUIRE(file.seed.has_value());
  CHECK(*file.seed == *fix.seed);
  CHECK(file.policies == fix.policies);
  check_env_equal(file.env, fix.env);
  check_learners_equal(file.learners, fix.learners);
  check_experiment_equal(file.experiment, fix.experiment);
  // file-loaded scenarios carry their own hash; in-memory ones do not
  CHECK(file.source_sha256.size() == 64);
  CHECK(fix.source_sha256.empty());
  CHECK(file.source_sha256 ==
        sha256_hex(read_file((repo_root() / "scenarios" / "disruption-6state.json").string())));
}

TEST_CASE("shipped contrast scenario differs from the desk only where documented") {
  const Scenario contrast = shipped("disruption-6state-contrast.json");
  const Scenario desk = fixtures::disruption6(0.3);
  CHECK(contrast.name == "disruption-6state-contrast");
  CHECK(contrast.env.epsilon == 0.3);
  check_env_equal(contrast.env, desk.env);
  CHECK(contrast.policies == desk.policies);
  check_learners_equal(contrast.learners, desk.learners);
  CHECK(contrast.experiment.documented_margin == 0.0);
  REQUIRE(contrast.experiment.epsilon_sweep.size() == 6);
  CHECK(contrast.experiment.epsilon_sweep.front() == 0.3);
  for (size_t k = 1; k < 6; ++k) {
    CHECK(contrast.experiment.epsilon_sweep[k] ==
          doctest::Approx(0.1 * contrast.experiment.epsilon_sweep[k - 1]).epsilon(1e-12));
  }
}

TEST_CASE("TOML twin parses to the same scenario as the JSON desk") {
  const Scenario toml = shipped("nominal-6state.toml");
  const Scenario json = shipped("disruption-6state.json");
  CHECK(toml.name == "nominal-6state");
  REQUIRE(toml.seed.has_value());
  CHECK(*toml.seed == *json.seed);
  CHECK(toml.policies == json.policies);
  check_env_equal(toml.env, json.env);
  check_learners_equal(toml.learners, json.learners);
  check_experiment_equal(toml.experiment, json.experiment);
}

TEST_CASE("shipped aliasing and injective files mirror their fixtures") {
  const Scenario a_file = shipped("aliasing-4state.json");
  const Scenario a_fix = fixtures::aliasing4();
  CHECK(a_file.name == a_fix.name);
  CHECK(*a_file.seed == *a_fix.seed);
  CHECK(a_file.policies == a_fix.policies);
  check_env_equal(a_file.env, a_fix.env);
  check_experiment_equal(a_file.experiment, a_fix.experiment);

  const Scenario i_file = shipped("injective-5state.json");
  const Scenario i_fix = fixtures::injective5();
  CHECK(i_file.name == i_fix.name);
  CHECK(*i_file.seed == *i_fix.seed);
  CHECK(i_file.policies == i_fix.policies);
  check_env_equal(i_file.env, i_fix.env);
  check_experiment_equal(i_file.experiment, i_fix.experiment);
}

TEST_CASE("prop1 on the desk: linear verdict, unit slope, sweep-spaced ratios") {
  const Scenario sc = fixtures::disruption6();
  const Prop1Result r = run_prop1(sc);
  const EnvironmentSpec& e = sc.env;
  const Cube full = compose_full_kernel(e, e.epsilon);

  // the reference-policy conditional laws, recomputed the long way
  const auto pi_n = region_stationary(e, e.nominal_kernel, e.nominal_states, sc.policies[0]);
  const auto pi_d = region_stationary(e, e.disruption_kernel, e.disruption_states, sc.policies[0]);

  // blind optimum: least nominal-law risk, exhaustive over the class
  int best = 0;
  double best_risk = std::numeric_limits<double>::infinity();
  for (size_t t = 0; t < sc.policies.size(); ++t) {
    double risk_n = 0.0;
    for (size_t i = 0; i < e.nominal_states.size(); ++i) {
      risk_n += pi_n[i] * policy_loss_at(e, full, sc.policies[t], e.nominal_states[i],
                                         sc.learners.r_min, sc.learners.r_max);
    }
    if (risk_n < best_risk) {
      best_risk = risk_n;
      best = static_cast<int>(t);
    }
  }
  CHECK(r.theta_index == best);
  CHECK(r.theta_index == 0);

  double max_abs = 0.0;
  for (int s = 0; s < e.state_count; ++s) {
    max_abs = std::max(max_abs, std::abs(policy_loss_at(e, full, sc.policies[0], s,
                                                        sc.learners.r_min, sc.learners.r_max)));
  }
  CHECK(r.max_abs_loss == doctest::Approx(max_abs).epsilon(1e-12));

  // tail at every sweep point is eps_k times the same conditional constant
  double c_d = 0.0;
  for (size_t i = 0; i < e.disruption_states.size(); ++i) {
    c_d += pi_d[i] * policy_loss_at(e, full, sc.policies[0], e.disruption_states[i],
                                    sc.learners.r_min, sc.learners.r_max);
  }
  REQUIRE(r.epsilons == sc.experiment.epsilon_sweep);
  REQUIRE(r.tail.size() == r.epsilons.size());
  for (size_t k = 0; k < r.tail.size(); ++k) {
    CHECK(r.tail[k] == doctest::Approx(r.epsilons[k] * c_d).epsilon(1e-11));
    CHECK(std::abs(r.tail[k]) <= r.epsilons[k] * r.max_abs_loss * (1.0 + 1e-12) + 1e-15);
  }
  CHECK(r.tail_bound_ok);
  CHECK(r.base_epsilon == doctest::Approx(0.1).epsilon(1e-12));

  REQUIRE(r.slope.has_value());
  CHECK(*r.slope == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(*r.slope - 1.0) < 0.05);

  // error sequence against the direct two-term evaluation and its limit
  std::vector<double> base_mass(static_cast<size_t>(e.state_count), 0.0);
  for (size_t i = 0; i < e.nominal_states.size(); ++i) {
    base_mass[static_cast<size_t>(e.nominal_states[i])] = (1.0 - r.epsilons[0]) * pi_n[i];
  }
  for (size_t i = 0; i < e.disruption_states.size(); ++i) {
    base_mass[static_cast<size_t>(e.disruption_states[i])] = r.epsilons[0] * pi_d[i];
  }
  std::vector<double> f(static_cast<size_t>(e.state_count), 0.0);
  for (int s = 0; s < e.state_count; ++s) {
    f[static_cast<size_t>(s)] =
        policy_loss_at(e, full, sc.policies[0], s, sc.learners.r_min, sc.learners.r_max);
  }
  const Event d(e.disruption_states);
  double off_d = 0.0;
  for (int s = 0; s < e.state_count; ++s) {
    if (!d.contains(s)) off_d += f[static_cast<size_t>(s)] * base_mass[static_cast<size_t>(s)];
  }
  const double limit = off_d / (1.0 - r.base_epsilon);
  REQUIRE(r.errors.size() == r.epsilons.size());
  for (size_t p = 0; p < r.errors.size(); ++p) {
    const double direct = oracle::direct_reweighted_integral(f, base_mass, d, r.base_epsilon,
                                                             r.epsilons[p], 1234 + p);
    CHECK(r.errors[p] == doctest::Approx(std::abs(direct - limit)).epsilon(1e-8));
    CHECK(r.errors[p] > 0.0);
  }

  REQUIRE(r.ratios.size() == r.errors.size() - 1);
  for (double ratio : r.ratios) CHECK(ratio == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.verdict.kind == ConvergenceKind::kLinear);
  CHECK(r.verdict.rate == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(r.rho_declared == 0.1);
}

TEST_CASE("prop1 with a half-rate schedule reports every ratio as 0.5") {
  const Scenario sc = fixtures::disruption6();
  const std::vector<double> sweep{0.5, 0.25, 0.125, 0.0625, 0.03125};
  const Prop1Result r = run_prop1(sc, sweep, 0.5);
  CHECK(r.rho_declared == 0.5);
  REQUIRE(r.ratios.size() == 4);
  for (double ratio : r.ratios) CHECK(ratio == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.verdict.kind == ConvergenceKind::kLinear);
  CHECK(r.verdict.rate == doctest::Approx(0.5).epsilon(1e-9));
  REQUIRE(r.slope.has_value());
  CHECK(*r.slope == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("prop1 single-point sweep comes back inconclusive, not an error") {
  const Prop1Result r = run_prop1(fixtures::disruption6(), {0.5}, 0.5);
  CHECK(r.verdict.kind == ConvergenceKind::kInconclusive);
  CHECK(r.errors.size() == 1);
  CHECK(r.ratios.empty());
  CHECK_FALSE(r.slope.has_value());
}

TEST_CASE("prop1 rejects degenerate sweeps and missing disruption regions") {
  const Scenario sc = fixtures::disruption6();
  CHECK_THROWS_AS(run_prop1(sc, {}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(run_prop1(sc, {0.0, 0.1}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(run_prop1(sc, {1.0}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(run_prop1(sc, {0.1, 0.1}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(run_prop1(sc, {0.01, 0.1}, 0.1), std::invalid_argument);
  const std::string msg =
      exception_text([&] { run_prop1(fixtures::aliasing4(), {0.1, 0.01}, 0.1); });
  CHECK(msg.find("disruption region") != std::string::npos);
}

TEST_CASE("erm neglect on the desk: tiny bound, blind choice, documented gap") {
  const Scenario sc = fixtures::disruption6();
  const ErmNeglectResult r = run_erm_neglect(sc);
  const EnvironmentSpec& e = sc.env;

  // worst one-step leak equals the composed remainder, straight off the kernel
  const Cube full = compose_full_kernel(e, e.epsilon);
  double hazard = 0.0;
  for (int s : e.nominal_states) {
    for (int a = 0; a < e.action_count; ++a) {
      double mass = 0.0;
      for (int s2 : e.disruption_states) {
        mass += full[static_cast<size_t>(s)][static_cast<size_t>(a)][static_cast<size_t>(s2)];
      }
      hazard = std::max(hazard, mass);
    }
  }
  CHECK(r.hazard == doctest::Approx(hazard).epsilon(1e-12));
  CHECK(r.hazard == doctest::Approx(e.epsilon).epsilon(1e-9));
  CHECK(r.sampling_bound ==
        doctest::Approx(1.0 - std::pow(1.0 - hazard, r.training_budget)).epsilon(1e-9));
  CHECK(r.sampling_bound < 0.05);
  CHECK(r.training_budget == 10000);

  // class scans on the conditional blocks as the independent argmax oracle
  int blind = 0, aware = 0;
  double best_n = -1.0, best_d = -1.0;
  std::vector<double> on_d;
  for (size_t t = 0; t < sc.policies.size(); ++t) {
    const double jn = region_average_reward(e, e.nominal_kernel, e.nominal_states, sc.policies[t]);
    const double jd =
        region_average_reward(e, e.disruption_kernel, e.disruption_states, sc.policies[t]);
    on_d.push_back(jd);
    if (jn > best_n) {
      best_n = jn;
      blind = static_cast<int>(t);
    }
    if (jd > best_d) {
      best_d = jd;
      aware = static_cast<int>(t);
    }
  }
  CHECK(r.blind_optimum == blind);
  CHECK(r.aware_optimum == aware);
  CHECK(r.blind_optimum == 0);
  CHECK(r.aware_optimum == 7);

  // the desk seed never leaves the nominal block during training
  CHECK_FALSE(r.crossed_during_training);
  CHECK(r.disruption_steps == 0);
  CHECK(r.erm_choice == r.blind_optimum);

  CHECK(r.reward_on_d_erm == doctest::Approx(on_d[0]).epsilon(1e-10));
  CHECK(r.reward_on_d_aware == doctest::Approx(on_d[7]).epsilon(1e-10));
  CHECK(r.gap == doctest::Approx(on_d[7] - on_d[0]).epsilon(1e-9));
  CHECK(r.gap >= r.documented_margin);
  CHECK(r.documented_margin == 0.5);
}

TEST_CASE("erm neglect contrast: a frequent disruption is learned, gap collapses") {
  const ErmNeglectResult r = run_erm_neglect(shipped("disruption-6state-contrast.json"));
  CHECK(r.crossed_during_training);
  CHECK(r.disruption_steps > 1000);  // 30% hazard per step, so D is everywhere
  CHECK(r.erm_choice == r.aware_optimum);
  CHECK(std::abs(r.gap) <= 1e-12);
  CHECK(r.sampling_bound == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("erm neglect rejects a zero training budget and a missing region") {
  Scenario sc = fixtures::disruption6();
  sc.experiment.training_budget = 0;
  const std::string msg = exception_text([&] { run_erm_neglect(sc); });
  CHECK(msg.find("training budget required") != std::string::npos);
  CHECK_THROWS_AS(run_erm_neglect(fixtures::aliasing4()), std::invalid_argument);
}

TEST_CASE("run_markov picks the nominal block when a disruption region exists") {
  const MarkovResult desk = run_markov(fixtures::disruption6());
  CHECK(desk.region == "nominal");
  CHECK(desk.policy_index == 0);
  CHECK(desk.report.gap == doctest::Approx(0.45).epsilon(1e-9));
  CHECK(desk.report.o_prev == 0);
  CHECK(desk.report.o == 1);
  CHECK(desk.report.o_next == 0);

  const MarkovResult alias = run_markov(fixtures::aliasing4());
  CHECK(alias.region == "full");
  CHECK(alias.report.gap == doctest::Approx(0.45).epsilon(1e-9));
  CHECK(alias.report.gap >= 0.1);
  CHECK(alias.report.o_prev == 0);
  CHECK(alias.report.o == 1);
  CHECK(alias.report.o_next == 2);

  const MarkovResult inj = run_markov(fixtures::injective5());
  CHECK(inj.report.gap <= 1e-12);
}

TEST_CASE("run_markov: one observation means no detectable order gap") {
  Scenario sc = fixtures::aliasing4();
  sc.env.observation_count = 1;
  sc.env.obs_map = {{1}, {1}, {1}, {1}};
  sc.policies = {{0}};
  const MarkovResult r = run_markov(sc);
  CHECK(r.report.gap == 0.0);
}

TEST_CASE("run_markov refuses a reducible chain") {
  Scenario sc = fixtures::aliasing4();
  sc.env.nominal_kernel = {
      {{0.5, 0.5, 0.0, 0.0}},
      {{0.5, 0.5, 0.0, 0.0}},
      {{0.0, 0.0, 0.5, 0.5}},
      {{0.0, 0.0, 0.5, 0.5}},
  };
  const std::string msg = exception_text([&] { run_markov(sc); });
  CHECK(msg.find("closed communicating classes") != std::string::npos);
}

TEST_CASE("adaptation on the desk: frozen stalls, hedge recovers within the bound") {
  const Scenario sc = fixtures::disruption6();
  const AdaptationResult r = run_adaptation(sc);
  const EnvironmentSpec& e = sc.env;

  CHECK(r.t_star == 100);
  CHECK(r.horizon == 10100);
  CHECK(r.window == 500);
  CHECK(r.frozen_choice == 0);

  // with delta = 0 the post-event world is exactly the disruption block;
  // exhaustive state-policy scan as the value oracle
  const double best_gain =
      oracle::best_average_reward_exhaustive(e.disruption_kernel,
                                             {e.reward[3], e.reward[4], e.reward[5]})
          .first;
  CHECK(r.post_shift_optimum == doctest::Approx(best_gain).epsilon(1e-8));
  CHECK(r.band == doctest::Approx(0.1 * r.post_shift_optimum).epsilon(1e-12));
  CHECK(r.pre_event_baseline ==
        doctest::Approx(region_average_reward(e, e.nominal_kernel, e.nominal_states,
                                              sc.policies[0]))
            .epsilon(1e-10));

  CHECK(r.hedge_eta == doctest::Approx(std::sqrt(8.0 * std::log(8.0) / 10100.0)).epsilon(1e-12));
  CHECK(r.regret_bound == doctest::Approx(2.0 * std::sqrt(10100.0 * std::log(8.0))).epsilon(1e-12));
  CHECK(r.hedge_regret >= 0.0);
  CHECK(r.hedge_regret <= r.regret_bound);
  REQUIRE(r.recovery_bound_steps.has_value());
  CHECK(*r.recovery_bound_steps ==
        static_cast<long long>(std::ceil(r.regret_bound / 0.09)));

  REQUIRE(r.runs.size() == 3);
  const LearnerRun& frozen = r.runs[0];
  const LearnerRun& hedge = r.runs[1];
  const LearnerRun& qlearner = r.runs[2];
  CHECK(frozen.name == "frozen_erm");
  CHECK(hedge.name == "hedge");
  CHECK(qlearner.name == "qlearner");

  // ten thousand post-event steps and the frozen policy never re-enters the band
  CHECK(r.horizon - r.t_star == 10000);
  CHECK_FALSE(frozen.recovery_steps.has_value());
  CHECK(frozen.final_window_average < r.post_shift_optimum - r.band);

  REQUIRE(hedge.recovery_steps.has_value());
  CHECK(*hedge.recovery_steps == 551);
  CHECK(*hedge.recovery_steps <= *r.recovery_bound_steps);
  CHECK(hedge.final_window_average >= r.post_shift_optimum - r.band);
  CHECK(hedge.final_window_average >= 0.9 * r.post_shift_optimum);

  // the tabular learner lands between the frozen desk and the expert mixture
  CHECK(qlearner.final_window_average > frozen.final_window_average);
  CHECK(qlearner.final_window_average < hedge.final_window_average);

  for (const LearnerRun& run : r.runs) {
    CHECK(run.series.per_step_reward.size() == static_cast<size_t>(r.horizon));
    CHECK(run.series.window == r.window);
    CHECK(run.final_window_average == run.series.moving_avg.back());
  }
}

TEST_CASE("adaptation shift report: observation laws by hand") {
  const Scenario sc = fixtures::disruption6();
  const AdaptationResult r = run_adaptation(sc);
  const EnvironmentSpec& e = sc.env;

  const auto pi_n = region_stationary(e, e.nominal_kernel, e.nominal_states, sc.policies[0]);
  const auto pi_d = region_stationary(e, e.disruption_kernel, e.disruption_states, sc.policies[0]);
  std::vector<double> qn(static_cast<size_t>(e.observation_count), 0.0);
  std::vector<double> qd(static_cast<size_t>(e.observation_count), 0.0);
  for (size_t i = 0; i < e.nominal_states.size(); ++i) {
    for (int o = 0; o < e.observation_count; ++o) {
      qn[static_cast<size_t>(o)] +=
          pi_n[i] * e.obs_map[static_cast<size_t>(e.nominal_states[i])][static_cast<size_t>(o)];
    }
  }
  // delta = 0: the full-chain stationary law conditioned on D is the
  // disruption block's own stationary law
  for (size_t i = 0; i < e.disruption_states.size(); ++i) {
    for (int o = 0; o < e.observation_count; ++o) {
      qd[static_cast<size_t>(o)] +=
          pi_d[i] * e.obs_map[static_cast<size_t>(e.disruption_states[i])][static_cast<size_t>(o)];
    }
  }
  REQUIRE(r.q_nominal.mass.size() == qn.size());
  REQUIRE(r.q_disruption.mass.size() == qd.size());
  for (size_t o = 0; o < qn.size(); ++o) {
    CHECK(r.q_nominal.mass[o] == doctest::Approx(qn[o]).epsilon(1e-9));
    CHECK(r.q_disruption.mass[o] == doctest::Approx(qd[o]).epsilon(1e-7));
  }
  CHECK(r.q_nominal.mass[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(r.q_nominal.mass[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));

  double tv = 0.0, overlap = 0.0;
  bool kl_inf = false;
  for (size_t o = 0; o < qn.size(); ++o) {
    tv += std::abs(qn[o] - qd[o]);
    if (qn[o] > 0.0) overlap += qd[o];
    if (qd[o] > 0.0 && qn[o] <= 0.0) kl_inf = true;
  }
  CHECK(r.shift.tv == doctest::Approx(0.5 * tv).epsilon(1e-7));
  CHECK(r.shift.tv >= 0.2);
  CHECK(r.shift.support_overlap == doctest::Approx(overlap).epsilon(1e-7));
  CHECK(r.shift.support_overlap > 0.0);
  CHECK(r.shift.kl_infinite == kl_inf);
  CHECK(kl_inf);
}

TEST_CASE("adaptation is deterministic across calls") {
  const Scenario sc = fixtures::disruption6();
  const AdaptationResult a = run_adaptation(sc);
  const AdaptationResult b = run_adaptation(sc);
  REQUIRE(a.runs.size() == b.runs.size());
  for (size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].series.per_step_reward == b.runs[i].series.per_step_reward);
  }
  CHECK(a.hedge_regret == b.hedge_regret);
}

TEST_CASE("adaptation with instant reversion: everyone is back within one window") {
  const Scenario sc = fixtures::disruption6(1e-6, 1.0);
  const AdaptationResult r = run_adaptation(sc);
  CHECK(r.post_shift_optimum > 0.9);  // the world reverts, so the band is the nominal one
  for (const LearnerRun& run : r.runs) {
    REQUIRE(run.recovery_steps.has_value());
    CHECK(*run.recovery_steps <= r.window);
  }
}

TEST_CASE("adaptation preconditions: forced event step and reachable region") {
  const std::string msg = exception_text([&] { run_adaptation(fixtures::aliasing4()); });
  CHECK(msg.find("t_star") != std::string::npos);

  Scenario unreachable = fixtures::disruption6(0.0);
  const std::string msg2 = exception_text([&] { run_adaptation(unreachable); });
  CHECK(msg2.find("epsilon") != std::string::npos);
}

TEST_CASE("experiments refuse to invent a seed") {
  Scenario sc = fixtures::disruption6();
  sc.seed.reset();
  const std::string msg = exception_text([&] { run_erm_neglect(sc); });
  CHECK(msg.find("seed") != std::string::npos);
  CHECK_THROWS_AS(run_adaptation(sc), std::invalid_argument);
}

TEST_CASE("run_one engages exactly the requested experiment") {
  const Scenario sc = shipped("disruption-6state.json");
  const RunResult p = run_one(sc, "prop1");
  CHECK(p.prop1.has_value());
  CHECK_FALSE(p.erm_neglect.has_value());
  CHECK_FALSE(p.markov.has_value());
  CHECK_FALSE(p.adaptation.has_value());
  CHECK(p.scenario_name == "disruption-6state");
  CHECK(p.scenario_sha256 == sc.source_sha256);
  CHECK(p.seed == 20240915);

  CHECK(run_one(sc, "erm-neglect").erm_neglect.has_value());
  CHECK(run_one(sc, "markov").markov.has_value());
  CHECK(run_one(sc, "adaptation").adaptation.has_value());

  const std::string msg = exception_text([&] { run_one(sc, "everything"); });
  CHECK(msg.find("unknown experiment") != std::string::npos);
}

TEST_CASE("write_results is deterministic and matches the golden manifest") {
  const Scenario sc = shipped("disruption-6state.json");
  const RunResult result = run_all(sc);

  const auto dir_a = fresh_dir("out_a");
  const auto dir_b = fresh_dir("out_b");
  const std::string manifest_a = write_results(result, dir_a.string());
  const std::string manifest_b = write_results(result, dir_b.string());
  CHECK(manifest_a == manifest_b);
  CHECK(manifest_a == read_file((dir_a / "manifest.json").string()));

  // every listed file exists and hashes to its manifest entry
  size_t listed = 0;
  for (const auto& line : lines_of(manifest_a)) {
    const size_t at = line.find("\"path\": \"");
    if (at == std::string::npos) continue;
    const size_t start = at + 9;
    const std::string name = line.substr(start, line.find('"', start) - start);
    ++listed;
    const std::string content = read_file((dir_a / name).string());
    const std::string digest = sha256_hex(content);
    bool found = false;
    for (const auto& other : lines_of(manifest_a)) {
      if (other.find(digest) != std::string::npos) found = true;
    }
    CHECK_MESSAGE(found, name, " hash missing from manifest");
  }
  CHECK(listed == 6);

  CHECK(manifest_a ==
        read_file((repo_root() / "tests" / "golden" / "disruption-6state.manifest.json").string()));

  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("written artifacts have the documented shape") {
  const Scenario sc = shipped("disruption-6state.json");
  const RunResult result = run_all(sc);
  const auto dir = fresh_dir("out_shape");
  write_results(result, dir.string());

  const auto sweep = lines_of(read_file((dir / "prop1_sweep.csv").string()));
  REQUIRE(sweep.size() == 7);
  CHECK(sweep[0] == "epsilon,tail_risk,mu_p_error,ratio");
  CHECK(sweep[1].back() == ',');  // no ratio on the first row

  const auto series = lines_of(read_file((dir / "series_hedge.csv").string()));
  REQUIRE(series.size() == static_cast<size_t>(sc.experiment.horizon) + 1);
  CHECK(series[0] == "t,reward,moving_avg,phase");
  CHECK(series[100].find(",nominal") != std::string::npos);   // t = 99
  CHECK(series[101].find(",adaptation") != std::string::npos);  // t = t_star
  CHECK(series.back().find(",recovered") != std::string::npos);

  const auto frozen = lines_of(read_file((dir / "series_frozen_erm.csv").string()));
  CHECK(frozen.back().find(",adaptation") != std::string::npos);  // never recovered

  const std::string summary = read_file((dir / "summary.json").string());
  CHECK(summary.find("\"artifact_version\": \"0.1.0\"") != std::string::npos);
  CHECK(summary.find("\"scenario\": \"disruption-6state\"") != std::string::npos);
  CHECK(summary.find("\"phase_definition\"") != std::string::npos);
  CHECK(summary.find(sc.source_sha256) != std::string::npos);

  std::filesystem::remove_all(dir);
}

TEST_CASE("write_results reports an unusable output directory by path") {
  const Scenario sc = fixtures::aliasing4();
  const RunResult result = run_one(sc, "markov");
  const auto blocker = std::filesystem::temp_directory_path() / "tailrisk_test_blocker";
  { std::FILE* f = std::fopen(blocker.string().c_str(), "w"); REQUIRE(f); std::fclose(f); }
  const std::string target = (blocker / "sub").string();
  const std::string msg = exception_text([&] { write_results(result, target); });
  CHECK(msg.find(target) != std::string::npos);
  std::filesystem::remove(blocker);
}
