"""Python face of tailrisk-lab.

Everything lives in the compiled core; this package just re-exports it.
"""

from ._core import (
    ARTIFACT_VERSION,
    AdaptationResult,
    ConvergenceVerdict,
    ErmNeglectResult,
    LearnerRun,
    MarkovGapReport,
    MarkovResult,
    ObservationDistribution,
    PerformanceSeries,
    Prop1Result,
    RunResult,
    Scenario,
    ScenarioError,
    ShiftReport,
    load_scenario,
    parse_scenario,
    run_adaptation,
    run_all,
    run_erm_neglect,
    run_markov,
    run_one,
    run_prop1,
    validate_scenario,
    write_results,
)

__version__ = ARTIFACT_VERSION

__all__ = [
    "ARTIFACT_VERSION",
    "AdaptationResult",
    "ConvergenceVerdict",
    "ErmNeglectResult",
    "LearnerRun",
    "MarkovGapReport",
    "MarkovResult",
    "ObservationDistribution",
    "PerformanceSeries",
    "Prop1Result",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "ShiftReport",
    "load_scenario",
    "parse_scenario",
    "run_adaptation",
    "run_all",
    "run_erm_neglect",
    "run_markov",
    "run_one",
    "run_prop1",
    "validate_scenario",
    "write_results",
]
