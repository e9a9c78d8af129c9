#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tailrisk/experiments.hpp"
#include "tailrisk/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"tailrisk: rare-disruption experiments on finite decision processes"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a scenario file, reporting every problem");
  validate->add_option("file", validate_path, "scenario file (.json or .toml)")->required();

  std::string experiment;
  std::string scenario_path;
  std::string out_dir;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("experiment", experiment, "prop1 | erm-neglect | markov | adaptation")
      ->required();
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  auto* run_seed = run->add_option("--seed", seed, "override the scenario's seed");
  run->add_option("--out", out_dir, "output directory")->required();

  auto* all = app.add_subcommand("all", "run every experiment");
  all->add_option("--scenario", scenario_path, "scenario file")->required();
  auto* all_seed = all->add_option("--seed", seed, "override the scenario's seed");
  all->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      const tailrisk::Scenario sc = tailrisk::load_scenario(validate_path);
      std::printf("ok: %s (scenario '%s')\n", validate_path.c_str(), sc.name.c_str());
      return 0;
    }

    std::optional<std::uint64_t> seed_override;
    if ((run->parsed() && run_seed->count() > 0) || (all->parsed() && all_seed->count() > 0)) {
      seed_override = seed;
    }
    const tailrisk::Scenario sc = tailrisk::load_scenario(scenario_path, seed_override);
    const tailrisk::RunResult result =
        all->parsed() ? tailrisk::run_all(sc) : tailrisk::run_one(sc, experiment);
    tailrisk::write_results(result, out_dir);
    std::printf("wrote %s/manifest.json\n", out_dir.c_str());
    return 0;
  } catch (const tailrisk::ScenarioError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
