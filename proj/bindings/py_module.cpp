// Python face of the lab: scenario loading plus the four experiments and the
// artifact writer.  Result structs are mirrored read-only; anything heavier
// (plotting, frames) belongs on the Python side of the fence.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "tailrisk/experiments.hpp"
#include "tailrisk/metrics.hpp"
#include "tailrisk/scenario.hpp"

namespace py = pybind11;
using namespace tailrisk;

PYBIND11_MODULE(_core, m) {
  m.doc() = "tailrisk-lab: rare-disruption risk experiments on desk-scale environments";
  m.attr("ARTIFACT_VERSION") = kArtifactVersion;

  py::register_exception<ScenarioError>(m, "ScenarioError");

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_readonly("seed", &Scenario::seed)
      .def_readonly("source_sha256", &Scenario::source_sha256)
      .def_property_readonly(
          "policy_count", [](const Scenario& s) { return s.policies.size(); })
      .def("__repr__", [](const Scenario& s) {
        return "<Scenario '" + s.name + "' (" + std::to_string(s.policies.size()) +
               " policies)>";
      });

  m.def("load_scenario", &load_scenario, py::arg("path"),
        py::arg("seed") = std::optional<std::uint64_t>{},
        "Load and validate a scenario file (JSON or TOML); `seed` overrides the file's.");
  m.def("parse_scenario", &parse_scenario, py::arg("text"), py::arg("toml") = false,
        py::arg("seed") = std::optional<std::uint64_t>{},
        "Parse scenario text; set toml=True for TOML input.");
  m.def("validate_scenario", &validate_scenario, py::arg("scenario"),
        "Field-addressed problems; an empty list means the scenario is usable.");

  py::class_<ConvergenceVerdict>(m, "ConvergenceVerdict")
      .def_property_readonly(
          "kind", [](const ConvergenceVerdict& v) { return std::string(to_string(v.kind)); })
      .def_readonly("rate", &ConvergenceVerdict::rate);

  py::class_<Prop1Result>(m, "Prop1Result")
      .def_readonly("theta_index", &Prop1Result::theta_index)
      .def_readonly("base_epsilon", &Prop1Result::base_epsilon)
      .def_readonly("rho_declared", &Prop1Result::rho_declared)
      .def_readonly("max_abs_loss", &Prop1Result::max_abs_loss)
      .def_readonly("epsilons", &Prop1Result::epsilons)
      .def_readonly("tail", &Prop1Result::tail)
      .def_readonly("errors", &Prop1Result::errors)
      .def_readonly("ratios", &Prop1Result::ratios)
      .def_readonly("verdict", &Prop1Result::verdict)
      .def_readonly("slope", &Prop1Result::slope)
      .def_readonly("tail_bound_ok", &Prop1Result::tail_bound_ok);

  py::class_<ErmNeglectResult>(m, "ErmNeglectResult")
      .def_readonly("hazard", &ErmNeglectResult::hazard)
      .def_readonly("sampling_bound", &ErmNeglectResult::sampling_bound)
      .def_readonly("training_budget", &ErmNeglectResult::training_budget)
      .def_readonly("erm_choice", &ErmNeglectResult::erm_choice)
      .def_readonly("blind_optimum", &ErmNeglectResult::blind_optimum)
      .def_readonly("aware_optimum", &ErmNeglectResult::aware_optimum)
      .def_readonly("reward_on_d_erm", &ErmNeglectResult::reward_on_d_erm)
      .def_readonly("reward_on_d_blind", &ErmNeglectResult::reward_on_d_blind)
      .def_readonly("reward_on_d_aware", &ErmNeglectResult::reward_on_d_aware)
      .def_readonly("gap", &ErmNeglectResult::gap)
      .def_readonly("documented_margin", &ErmNeglectResult::documented_margin)
      .def_readonly("crossed_during_training", &ErmNeglectResult::crossed_during_training)
      .def_readonly("disruption_steps", &ErmNeglectResult::disruption_steps);

  py::class_<MarkovGapReport>(m, "MarkovGapReport")
      .def_readonly("gap", &MarkovGapReport::gap)
      .def_readonly("o_prev", &MarkovGapReport::o_prev)
      .def_readonly("o", &MarkovGapReport::o)
      .def_readonly("o_next", &MarkovGapReport::o_next);

  py::class_<MarkovResult>(m, "MarkovResult")
      .def_readonly("report", &MarkovResult::report)
      .def_readonly("region", &MarkovResult::region)
      .def_readonly("policy_index", &MarkovResult::policy_index);

  py::class_<PerformanceSeries>(m, "PerformanceSeries")
      .def_readonly("per_step_reward", &PerformanceSeries::per_step_reward)
      .def_readonly("window", &PerformanceSeries::window)
      .def_readonly("moving_avg", &PerformanceSeries::moving_avg)
      .def("average_at", &PerformanceSeries::average_at, py::arg("step"));

  py::class_<ShiftReport>(m, "ShiftReport")
      .def_readonly("tv", &ShiftReport::tv)
      .def_readonly("kl", &ShiftReport::kl)
      .def_readonly("kl_infinite", &ShiftReport::kl_infinite)
      .def_readonly("support_overlap", &ShiftReport::support_overlap);

  py::class_<ObservationDistribution>(m, "ObservationDistribution")
      .def_readonly("mass", &ObservationDistribution::mass);

  py::class_<LearnerRun>(m, "LearnerRun")
      .def_readonly("name", &LearnerRun::name)
      .def_readonly("series", &LearnerRun::series)
      .def_readonly("recovery_steps", &LearnerRun::recovery_steps)
      .def_readonly("final_window_average", &LearnerRun::final_window_average);

  py::class_<AdaptationResult>(m, "AdaptationResult")
      .def_readonly("t_star", &AdaptationResult::t_star)
      .def_readonly("horizon", &AdaptationResult::horizon)
      .def_readonly("window", &AdaptationResult::window)
      .def_readonly("post_shift_optimum", &AdaptationResult::post_shift_optimum)
      .def_readonly("band", &AdaptationResult::band)
      .def_readonly("band_fraction", &AdaptationResult::band_fraction)
      .def_readonly("pre_event_baseline", &AdaptationResult::pre_event_baseline)
      .def_readonly("frozen_choice", &AdaptationResult::frozen_choice)
      .def_readonly("hedge_eta", &AdaptationResult::hedge_eta)
      .def_readonly("hedge_regret", &AdaptationResult::hedge_regret)
      .def_readonly("regret_bound", &AdaptationResult::regret_bound)
      .def_readonly("recovery_bound_steps", &AdaptationResult::recovery_bound_steps)
      .def_readonly("shift", &AdaptationResult::shift)
      .def_readonly("q_nominal", &AdaptationResult::q_nominal)
      .def_readonly("q_disruption", &AdaptationResult::q_disruption)
      .def_readonly("runs", &AdaptationResult::runs);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("scenario_name", &RunResult::scenario_name)
      .def_readonly("scenario_sha256", &RunResult::scenario_sha256)
      .def_readonly("seed", &RunResult::seed)
      .def_readonly("prop1", &RunResult::prop1)
      .def_readonly("erm_neglect", &RunResult::erm_neglect)
      .def_readonly("markov", &RunResult::markov)
      .def_readonly("adaptation", &RunResult::adaptation);

  m.def("run_prop1", py::overload_cast<const Scenario&>(&run_prop1), py::arg("scenario"),
        "Tail scaling and mu_p error sweep using the scenario's declared sweep.");
  m.def("run_prop1",
        py::overload_cast<const Scenario&, const std::vector<double>&, double>(&run_prop1),
        py::arg("scenario"), py::arg("sweep"), py::arg("rho"),
        "Same with an explicit strictly-decreasing sweep and declared ratio.");
  m.def("run_erm_neglect", &run_erm_neglect, py::arg("scenario"));
  m.def("run_markov", &run_markov, py::arg("scenario"));
  m.def("run_adaptation", &run_adaptation, py::arg("scenario"));
  m.def("run_one", &run_one, py::arg("scenario"), py::arg("experiment"),
        "experiment: prop1 | erm-neglect | markov | adaptation");
  m.def("run_all", &run_all, py::arg("scenario"));
  m.def("write_results", &write_results, py::arg("result"), py::arg("out_dir"),
        "Write summary.json, CSV series, reports, and manifest.json; returns the manifest text.");
}
