#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailrisk/env.hpp"
#include "tailrisk/learners.hpp"

namespace tailrisk {

// Environment block as authored in scenario files.  The nominal / disruption
// kernels are conditional (rows live within their region and sum to 1); the
// crossing mass epsilon and return mass delta are mixed in by environment().
struct EnvironmentSpec {
  int state_count = 0;
  int action_count = 0;
  int observation_count = 0;
  std::vector<int> nominal_states;
  std::vector<int> disruption_states;
  // nominal_kernel[i][a][j]: i, j index nominal_states; likewise disruption.
  std::vector<std::vector<std::vector<double>>> nominal_kernel;
  std::vector<std::vector<std::vector<double>>> disruption_kernel;
  double epsilon = 0.0;
  double delta = 0.0;
  int entry_state = -1;   // disruption state that receives the crossing mass
  int return_state = -1;  // nominal state that receives the return mass
  std::vector<std::vector<double>> obs_map;  // [state][observation]
  std::vector<std::vector<double>> reward;   // [next_state][action]
  double tau0 = 0.0;
  double delta_tau = 1.0;
};

struct LearnerSpec {
  double eta = 0.0;  // expert-weighting rate; 0 means pick sqrt(8 ln N / T)
  double alpha = 0.1;
  double gamma = 0.95;
  double xi = 0.05;
  double r_min = 0.0;  // reward range for the loss binding
  double r_max = 1.0;
  int t0 = 0;  // ERM auto-train threshold; 0 means the training budget
};

struct ExperimentSpec {
  int horizon = 10000;
  int t_star = -1;  // forced event step; -1 disables the schedule
  int training_budget = 10000;
  std::vector<double> epsilon_sweep;
  double mu_ratio = 0.1;  // declared geometric ratio of the sweep
  int window = 500;
  double band_fraction = 0.1;
  double documented_margin = 0.0;
  // Per-step loss gap used to turn the regret bound into a step count for
  // the documented recovery bound.
  double recovery_normalization = 0.0;
  int start_state = 0;
};

struct Scenario {
  std::string name;
  EnvironmentSpec env;
  std::vector<std::vector<int>> policies;
  LearnerSpec learners;
  ExperimentSpec experiment;
  std::optional<std::uint64_t> seed;
  std::string source_sha256;  // hash of the file this came from, if any

  // Compose the full kernel from the conditional blocks.  Crossing mass goes
  // to entry_state and return mass to return_state as an exact remainder, so
  // composed rows sum to 1 up to one rounding of the authored row.
  EnvironmentConfig environment() const;
  EnvironmentConfig environment_with_epsilon(double epsilon) const;
  PolicyClass policy_class() const;
};

// Field-addressed problems; empty means the scenario is usable.
std::vector<std::string> validate_scenario(const Scenario& scenario);

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string what, std::vector<std::string> problems)
      : std::runtime_error(std::move(what)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

// Parse (JSON or TOML by extension), apply the optional seed override, then
// validate.  Throws ScenarioError carrying the full problem list.
Scenario load_scenario(const std::string& path,
                       std::optional<std::uint64_t> seed_override = std::nullopt);

// Same, from an in-memory document; used by load_scenario and the tests.
Scenario parse_scenario(const std::string& text, bool toml,
                        std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace tailrisk
