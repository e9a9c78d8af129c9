#include "tailrisk/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tailrisk/env.hpp"
#include "tailrisk/io.hpp"
#include "tailrisk/learners.hpp"
#include "tailrisk/numeric.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

namespace {

using nlohmann::json;

struct Setup {
  EnvironmentModel env;
  PolicyClass cls;
  LossBinding binding;

  explicit Setup(const Scenario& sc)
      : env(sc.environment()),
        cls(sc.policy_class()),
        binding(sc.learners.r_min, sc.learners.r_max) {
    cls.check_for(env);
  }
};

std::uint64_t require_seed(const Scenario& sc) {
  if (!sc.seed) throw std::invalid_argument("scenario has no seed (no implicit entropy)");
  return *sc.seed;
}

// Expected one-step reward of playing `table` from state s.
double policy_state_reward(const EnvironmentModel& env, const Policy& table, int s) {
  const auto values = env.expected_action_values(s);
  const auto& obs = env.obs_row(s);
  CompensatedSum acc;
  for (int o = 0; o < env.observation_count(); ++o) {
    const double po = obs[static_cast<size_t>(o)];
    if (po == 0.0) continue;
    acc.add(po * values[static_cast<size_t>(table.action_at(o))]);
  }
  return acc.value();
}

// Loss rows over states, one per policy in the class.
LossTable policy_loss_table(const EnvironmentModel& env, const PolicyClass& cls,
                            const LossBinding& binding) {
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<size_t>(cls.size()));
  for (int t = 0; t < cls.size(); ++t) {
    std::vector<double> row;
    row.reserve(static_cast<size_t>(env.state_count()));
    for (int s = 0; s < env.state_count(); ++s) {
      row.push_back(binding.loss(policy_state_reward(env, cls.at(t), s)));
    }
    rows.push_back(std::move(row));
  }
  return LossTable::from_rows(rows);
}

std::vector<double> mixture_mass(const std::vector<double>& pi_n, const std::vector<double>& pi_d,
                                 double eps) {
  std::vector<double> mass(pi_n.size(), 0.0);
  for (size_t i = 0; i < pi_n.size(); ++i) {
    mass[i] = (1.0 - eps) * pi_n[i] + eps * pi_d[i];
  }
  return mass;
}

// argmax of the conditional long-run reward over the class; strict > keeps
// the lowest index on exact ties.
int best_in_class(const EnvironmentModel& env, const PolicyClass& cls,
                  const std::optional<Event>& region, std::vector<double>* gains = nullptr) {
  int best = 0;
  double best_gain = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < cls.size(); ++i) {
    const double g = policy_average_reward(env, cls.at(i), region);
    if (gains) gains->push_back(g);
    if (g > best_gain) {
      best_gain = g;
      best = i;
    }
  }
  return best;
}

// Where the system lives after the event: everything reachable from the
// disruption region under any action.  With no return path this is D itself;
// with delta > 0 it reaches back into the nominal block.
Event post_event_region(const EnvironmentModel& env) {
  const int n = env.state_count();
  std::vector<bool> in(static_cast<size_t>(n), false);
  std::vector<int> stack = env.disruption().members();
  for (int s : stack) in[static_cast<size_t>(s)] = true;
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (int a = 0; a < env.action_count(); ++a) {
      const auto& row = env.kernel_row(s, a);
      for (int j = 0; j < n; ++j) {
        if (row[static_cast<size_t>(j)] > 0.0 && !in[static_cast<size_t>(j)]) {
          in[static_cast<size_t>(j)] = true;
          stack.push_back(j);
        }
      }
    }
  }
  std::vector<int> members;
  for (int s = 0; s < n; ++s) {
    if (in[static_cast<size_t>(s)]) members.push_back(s);
  }
  return Event(members);
}

// Train-then-freeze, shared by the neglect and adaptation experiments so the
// frozen agent is the same object either way.
ErmLearner train_erm(const Scenario& sc, const Setup& su, const RngStream& root,
                     Trajectory* traj_out = nullptr) {
  const int budget = sc.experiment.training_budget;
  if (budget < 1) throw std::invalid_argument("training budget required (experiment.training_budget >= 1)");
  const int t0 = sc.learners.t0 > 0 ? sc.learners.t0 : budget;
  ErmLearner erm(su.cls, su.binding, t0, su.env.action_count());
  RngStream agent_stream = root.split("erm-train-agent");
  Trajectory traj = run_episode(su.env, erm, budget, EventSchedule{}, root.split("erm-train-env"),
                                agent_stream, sc.experiment.start_state);
  if (!erm.frozen()) erm.train();  // t0 beyond the budget: freeze on what was seen
  if (traj_out) *traj_out = std::move(traj);
  return erm;
}

}  // namespace

Prop1Result run_prop1(const Scenario& scenario) {
  return run_prop1(scenario, scenario.experiment.epsilon_sweep, scenario.experiment.mu_ratio);
}

Prop1Result run_prop1(const Scenario& scenario, const std::vector<double>& sweep, double rho) {
  Setup su(scenario);
  const EnvironmentModel& env = su.env;
  if (env.disruption().empty()) {
    throw std::invalid_argument("the prop1 experiment needs a disruption region");
  }
  if (sweep.empty()) throw std::invalid_argument("epsilon sweep must be non-empty");
  for (size_t k = 0; k < sweep.size(); ++k) {
    if (!(sweep[k] > 0.0) || !(sweep[k] < 1.0)) {
      throw std::invalid_argument("epsilon sweep entries must lie in (0, 1)");
    }
    if (k > 0 && !(sweep[k] < sweep[k - 1])) {
      throw std::invalid_argument("epsilon sweep must be strictly decreasing");
    }
  }

  // Conditional laws from the reference (first) policy; they do not change
  // across the sweep -- only the mixing weight does.
  const Policy& reference = su.cls.at(0);
  const auto pi_n = stationary_occupancy(env, reference, env.nominal());
  const auto pi_d = stationary_occupancy(env, reference, env.disruption());
  const Event d = env.disruption();
  const LossTable loss = policy_loss_table(env, su.cls, su.binding);

  Prop1Result out;
  out.rho_declared = rho;
  out.epsilons = sweep;
  out.theta_index = exact_minimizer(FiniteProbabilitySpace(pi_n), loss);
  for (double v : loss.row(out.theta_index)) {
    out.max_abs_loss = std::max(out.max_abs_loss, std::abs(v));
  }

  out.tail.assign(sweep.size(), 0.0);
  std::vector<int> bound_ok(sweep.size(), 0);
  parallel_for(sweep.size(), [&](size_t k) {
    const FiniteProbabilitySpace space(mixture_mass(pi_n, pi_d, sweep[k]));
    const double t = tail_risk(space, loss, out.theta_index, d);
    out.tail[k] = t;
    bound_ok[k] =
        std::abs(t) <= event_probability(space, d) * out.max_abs_loss + 1e-15 ? 1 : 0;
  });
  out.tail_bound_ok = std::all_of(bound_ok.begin(), bound_ok.end(), [](int v) { return v == 1; });

  // mu_p family on the widest space; the sweep doubles as the weight
  // schedule, clamped by one ulp so the identity case stays admissible.
  const FiniteProbabilitySpace base(mixture_mass(pi_n, pi_d, sweep[0]));
  out.base_epsilon = event_probability(base, d);
  EpsilonSchedule schedule;
  schedule.values = sweep;
  schedule.values[0] = std::min(sweep[0], out.base_epsilon);
  schedule.check_for(out.base_epsilon);
  out.errors = tail_limit_sweep(base, loss, out.theta_index, d, schedule);
  for (size_t k = 1; k < out.errors.size(); ++k) {
    out.ratios.push_back(out.errors[k - 1] > 0.0
                             ? out.errors[k] / out.errors[k - 1]
                             : std::numeric_limits<double>::quiet_NaN());
  }
  out.verdict = classify_convergence(out.errors);

  if (sweep.size() >= 2 &&
      std::all_of(out.tail.begin(), out.tail.end(), [](double t) { return t > 0.0; })) {
    double mx = 0.0, my = 0.0;
    for (size_t k = 0; k < sweep.size(); ++k) {
      mx += std::log(sweep[k]);
      my += std::log(out.tail[k]);
    }
    mx /= static_cast<double>(sweep.size());
    my /= static_cast<double>(sweep.size());
    double sxx = 0.0, sxy = 0.0;
    for (size_t k = 0; k < sweep.size(); ++k) {
      const double dx = std::log(sweep[k]) - mx;
      sxx += dx * dx;
      sxy += dx * (std::log(out.tail[k]) - my);
    }
    if (sxx > 0.0) out.slope = sxy / sxx;
  }
  return out;
}

ErmNeglectResult run_erm_neglect(const Scenario& scenario) {
  Setup su(scenario);
  const EnvironmentModel& env = su.env;
  if (env.disruption().empty()) {
    throw std::invalid_argument("the neglect experiment needs a disruption region");
  }

  ErmNeglectResult out;
  out.training_budget = scenario.experiment.training_budget;
  out.documented_margin = scenario.experiment.documented_margin;

  // Worst-case one-step mass from the nominal region into D; an episode of
  // length l samples D with probability at most 1 - (1 - hazard)^l.
  for (int s : env.nominal().members()) {
    for (int a = 0; a < env.action_count(); ++a) {
      const auto& row = env.kernel_row(s, a);
      CompensatedSum mass;
      for (int s2 : env.disruption().members()) mass.add(row[static_cast<size_t>(s2)]);
      out.hazard = std::max(out.hazard, mass.value());
    }
  }
  out.sampling_bound = out.hazard >= 1.0
                           ? 1.0
                           : -std::expm1(static_cast<double>(out.training_budget) *
                                         std::log1p(-out.hazard));

  RngStream root(require_seed(scenario));
  Trajectory traj;
  ErmLearner erm = train_erm(scenario, su, root, &traj);
  out.erm_choice = erm.chosen();
  for (int s : traj.states) {
    if (env.disruption().contains(s)) ++out.disruption_steps;
  }
  out.crossed_during_training = out.disruption_steps > 0;

  std::vector<double> on_n, on_d;
  out.blind_optimum = best_in_class(env, su.cls, env.nominal(), &on_n);
  out.aware_optimum = best_in_class(env, su.cls, env.disruption(), &on_d);
  out.reward_on_d_erm = on_d[static_cast<size_t>(out.erm_choice)];
  out.reward_on_d_blind = on_d[static_cast<size_t>(out.blind_optimum)];
  out.reward_on_d_aware = on_d[static_cast<size_t>(out.aware_optimum)];
  out.gap = out.reward_on_d_aware - out.reward_on_d_erm;
  return out;
}

MarkovResult run_markov(const Scenario& scenario) {
  Setup su(scenario);
  MarkovResult out;
  out.policy_index = 0;
  const bool has_d = !su.env.disruption().empty();
  out.region = has_d ? "nominal" : "full";
  const std::optional<Event> region =
      has_d ? std::optional<Event>(su.env.nominal()) : std::nullopt;
  out.report = markov_order_gap(su.env, su.cls.at(0), region);
  return out;
}

AdaptationResult run_adaptation(const Scenario& scenario) {
  Setup su(scenario);
  const EnvironmentModel& env = su.env;
  const ExperimentSpec& x = scenario.experiment;
  if (x.t_star < 0) {
    throw std::invalid_argument(
        "the adaptation experiment needs a forced event step (experiment.t_star)");
  }
  if (env.disruption().empty() || !(scenario.env.epsilon > 0.0)) {
    throw std::invalid_argument(
        "the adaptation experiment needs a reachable disruption region "
        "(non-empty disruption set and epsilon > 0)");
  }

  AdaptationResult out;
  out.t_star = x.t_star;
  out.horizon = x.horizon;
  out.window = x.window;
  out.band_fraction = x.band_fraction;

  RngStream root(require_seed(scenario));
  ErmLearner erm = train_erm(scenario, su, root);
  out.frozen_choice = erm.chosen();

  double eta = scenario.learners.eta;
  if (eta == 0.0) {
    eta = std::min(1.0, std::sqrt(8.0 * std::log(static_cast<double>(su.cls.size())) /
                                  static_cast<double>(x.horizon)));
  }
  out.hedge_eta = eta;
  HedgeLearner hedge(su.cls, su.binding, eta);
  QLearner qlearner(env.observation_count(), env.action_count(), scenario.learners.alpha,
                    scenario.learners.gamma, scenario.learners.xi);

  // Paired runs: one environment stream shared by every learner, exploration
  // streams split per learner name so adding one never perturbs another.
  const EventSchedule schedule{x.t_star};
  const RngStream env_stream = root.split("adapt-env");
  struct Slot {
    const char* name;
    Agent* agent;
    Trajectory traj;
  };
  std::array<Slot, 3> slots{{{"frozen_erm", &erm, {}}, {"hedge", &hedge, {}},
                             {"qlearner", &qlearner, {}}}};
  parallel_for(slots.size(), [&](size_t i) {
    RngStream agent_stream = root.split(std::string("adapt-agent-") + slots[i].name);
    slots[i].traj = run_episode(env, *slots[i].agent, x.horizon, schedule, env_stream,
                                agent_stream, x.start_state);
  });

  // The recovered band is anchored to the best achievable long-run average of
  // the chain the system actually lives in after the event.
  out.post_shift_optimum = optimal_average_reward(env, post_event_region(env)).gain;
  out.band = x.band_fraction * out.post_shift_optimum;
  out.pre_event_baseline = policy_average_reward(env, su.cls.at(out.frozen_choice), env.nominal());

  for (const Slot& slot : slots) {
    LearnerRun run;
    run.name = slot.name;
    run.series = performance_series(slot.traj, x.window);
    run.recovery_steps = recovery_time(run.series, out.post_shift_optimum, out.band, x.t_star);
    run.final_window_average = run.series.moving_avg.back();
    out.runs.push_back(std::move(run));
  }

  out.hedge_regret = hedge.regret();
  out.regret_bound =
      2.0 * std::sqrt(static_cast<double>(x.horizon) * std::log(static_cast<double>(su.cls.size())));
  if (x.recovery_normalization > 0.0) {
    out.recovery_bound_steps =
        static_cast<long long>(std::ceil(out.regret_bound / x.recovery_normalization));
  }

  // Observation laws before and during disruption, both under the deployed
  // (frozen) policy: Q_N from the nominal-restricted chain, Q_D from the full
  // stationary law conditioned on D (sojourn-weighted, so delta = 1 gives the
  // arrival law).
  const Policy& deployed = su.cls.at(out.frozen_choice);
  const auto occ_n = stationary_occupancy(env, deployed, env.nominal());
  out.q_nominal = induced_observation_distribution(env, env.nominal(), occ_n);
  const auto occ_full = stationary_occupancy(env, deployed);
  std::vector<double> occ_d(occ_full.size(), 0.0);
  double d_mass = 0.0;
  for (int s : env.disruption().members()) d_mass += occ_full[static_cast<size_t>(s)];
  if (d_mass <= 0.0) {
    throw std::runtime_error("the stationary law puts no mass on the disruption region");
  }
  for (int s : env.disruption().members()) {
    occ_d[static_cast<size_t>(s)] = occ_full[static_cast<size_t>(s)] / d_mass;
  }
  out.q_disruption = induced_observation_distribution(env, env.disruption(), occ_d);
  out.shift = shift_report(out.q_nominal, out.q_disruption);
  return out;
}

RunResult run_one(const Scenario& scenario, const std::string& experiment) {
  RunResult res;
  res.scenario_name = scenario.name;
  res.scenario_sha256 = scenario.source_sha256;
  res.seed = require_seed(scenario);
  if (experiment == "prop1") {
    res.prop1 = run_prop1(scenario);
  } else if (experiment == "erm-neglect") {
    res.erm_neglect = run_erm_neglect(scenario);
  } else if (experiment == "markov") {
    res.markov = run_markov(scenario);
  } else if (experiment == "adaptation") {
    res.adaptation = run_adaptation(scenario);
  } else {
    throw std::invalid_argument("unknown experiment '" + experiment +
                                "' (expected prop1, erm-neglect, markov, or adaptation)");
  }
  return res;
}

RunResult run_all(const Scenario& scenario) {
  RunResult res;
  res.scenario_name = scenario.name;
  res.scenario_sha256 = scenario.source_sha256;
  res.seed = require_seed(scenario);
  res.prop1 = run_prop1(scenario);
  res.erm_neglect = run_erm_neglect(scenario);
  res.markov = run_markov(scenario);
  res.adaptation = run_adaptation(scenario);
  return res;
}

namespace {

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string prop1_csv(const Prop1Result& p) {
  std::string out = "epsilon,tail_risk,mu_p_error,ratio\n";
  for (size_t k = 0; k < p.epsilons.size(); ++k) {
    out += format_double(p.epsilons[k]);
    out += ',';
    out += format_double(p.tail[k]);
    out += ',';
    out += format_double(p.errors[k]);
    out += ',';
    if (k > 0 && std::isfinite(p.ratios[k - 1])) out += format_double(p.ratios[k - 1]);
    out += '\n';
  }
  return out;
}

std::string phase_at(int t, int t_star, const std::optional<int>& recovery) {
  if (t < t_star) return "nominal";
  if (recovery && t >= t_star + *recovery) return "recovered";
  return "adaptation";
}

std::string series_csv(const LearnerRun& run, int t_star) {
  std::string out = "t,reward,moving_avg,phase\n";
  const auto& rewards = run.series.per_step_reward;
  for (size_t t = 0; t < rewards.size(); ++t) {
    out += std::to_string(t);
    out += ',';
    out += format_double(rewards[t]);
    out += ',';
    if (const auto avg = run.series.average_at(static_cast<int>(t))) {
      out += format_double(*avg);
    }
    out += ',';
    out += phase_at(static_cast<int>(t), t_star, run.recovery_steps);
    out += '\n';
  }
  return out;
}

json prop1_summary(const Prop1Result& p) {
  double max_dev = 0.0;
  for (double r : p.ratios) {
    if (std::isfinite(r)) max_dev = std::max(max_dev, std::abs(r - p.rho_declared));
  }
  json j;
  j["theta_index"] = p.theta_index;
  j["base_epsilon"] = p.base_epsilon;
  j["rho_declared"] = p.rho_declared;
  j["max_abs_loss"] = p.max_abs_loss;
  j["points"] = p.epsilons.size();
  j["verdict"] = to_string(p.verdict.kind);
  j["rate"] = p.verdict.rate;
  j["verdict_matches_declared"] =
      p.verdict.kind == ConvergenceKind::kLinear && std::abs(p.verdict.rate - p.rho_declared) <= 1e-9;
  j["max_ratio_deviation"] = max_dev;
  j["tail_slope"] = optional_number(p.slope);
  j["tail_bound_satisfied"] = p.tail_bound_ok;
  return j;
}

json erm_summary(const ErmNeglectResult& e) {
  json j;
  j["per_step_hazard"] = e.hazard;
  j["sampling_bound"] = e.sampling_bound;
  j["training_budget"] = e.training_budget;
  j["erm_choice"] = e.erm_choice;
  j["blind_optimum"] = e.blind_optimum;
  j["aware_optimum"] = e.aware_optimum;
  j["erm_matches_blind"] = e.erm_choice == e.blind_optimum;
  j["reward_on_d"] = {{"erm", e.reward_on_d_erm},
                      {"blind", e.reward_on_d_blind},
                      {"aware", e.reward_on_d_aware}};
  j["conditional_gap"] = e.gap;
  j["documented_margin"] = e.documented_margin;
  j["gap_meets_margin"] = e.gap >= e.documented_margin;
  j["crossed_during_training"] = e.crossed_during_training;
  j["disruption_steps_in_training"] = e.disruption_steps;
  return j;
}

json markov_summary(const MarkovResult& m) {
  json j;
  j["gap"] = m.report.gap;
  j["witness"] = {{"o_prev", m.report.o_prev}, {"o", m.report.o}, {"o_next", m.report.o_next}};
  j["region"] = m.region;
  j["policy_index"] = m.policy_index;
  return j;
}

json adaptation_summary(const AdaptationResult& a) {
  json j;
  j["t_star"] = a.t_star;
  j["horizon"] = a.horizon;
  j["window"] = a.window;
  j["post_shift_optimum"] = a.post_shift_optimum;
  j["band"] = a.band;
  j["band_fraction"] = a.band_fraction;
  j["pre_event_baseline"] = a.pre_event_baseline;
  j["frozen_choice"] = a.frozen_choice;
  j["hedge_eta"] = a.hedge_eta;
  j["hedge_regret"] = a.hedge_regret;
  j["regret_bound"] = a.regret_bound;
  j["regret_within_bound"] = a.hedge_regret <= a.regret_bound;
  j["recovery_bound_steps"] =
      a.recovery_bound_steps ? json(*a.recovery_bound_steps) : json(nullptr);
  j["phase_definition"] =
      "nominal before t_star; adaptation from t_star until the moving average re-enters "
      "[post_shift_optimum - band, inf) and stays for a full window; recovered afterwards";
  json learners = json::object();
  for (const LearnerRun& run : a.runs) {
    json r;
    r["recovered"] = run.recovery_steps.has_value();
    r["recovery_steps"] = run.recovery_steps ? json(*run.recovery_steps) : json(nullptr);
    r["final_window_average"] = run.final_window_average;
    if (run.name == "hedge" && a.recovery_bound_steps) {
      r["within_recovery_bound"] =
          run.recovery_steps && *run.recovery_steps <= *a.recovery_bound_steps;
    }
    learners[run.name] = std::move(r);
  }
  j["learners"] = std::move(learners);
  return j;
}

json shift_json(const AdaptationResult& a) {
  json j;
  j["tv"] = a.shift.tv;
  j["kl"] = a.shift.kl_infinite ? json(nullptr) : json(a.shift.kl);
  j["kl_infinite"] = a.shift.kl_infinite;
  j["support_overlap"] = a.shift.support_overlap;
  j["q_nominal"] = a.q_nominal.mass;
  j["q_disruption"] = a.q_disruption.mass;
  j["policy_index"] = a.frozen_choice;
  return j;
}

}  // namespace

std::string write_results(const RunResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory " + out_dir + ": " + ec.message());
  }

  std::vector<std::pair<std::string, std::string>> files;  // name -> content

  json summary;
  summary["artifact_version"] = kArtifactVersion;
  summary["scenario"] = result.scenario_name;
  summary["scenario_sha256"] = result.scenario_sha256;
  summary["seed"] = result.seed;
  json experiments = json::object();
  if (result.prop1) {
    experiments["prop1"] = prop1_summary(*result.prop1);
    files.emplace_back("prop1_sweep.csv", prop1_csv(*result.prop1));
  }
  if (result.erm_neglect) experiments["erm_neglect"] = erm_summary(*result.erm_neglect);
  if (result.markov) experiments["markov"] = markov_summary(*result.markov);
  if (result.adaptation) {
    experiments["adaptation"] = adaptation_summary(*result.adaptation);
    for (const LearnerRun& run : result.adaptation->runs) {
      files.emplace_back("series_" + run.name + ".csv", series_csv(run, result.adaptation->t_star));
    }
    files.emplace_back("shift_report.json", shift_json(*result.adaptation).dump(2) + "\n");
  }
  summary["experiments"] = std::move(experiments);
  files.emplace_back("summary.json", summary.dump(2) + "\n");

  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  json manifest;
  manifest["artifact_version"] = kArtifactVersion;
  json listing = json::array();
  for (const auto& [name, content] : files) {
    atomic_write((fs::path(out_dir) / name).string(), content);
    listing.push_back({{"path", name}, {"sha256", sha256_hex(content)}});
  }
  manifest["files"] = std::move(listing);
  const std::string text = manifest.dump(2) + "\n";
  atomic_write((fs::path(out_dir) / "manifest.json").string(), text);
  return text;
}

}  // namespace tailrisk
