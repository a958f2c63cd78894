from emsnm.harness.report import ReportTable, emit_report
from emsnm.harness.runner import (
    ComparisonRecord,
    RunResult,
    compare_model_vs_sim,
    compare_run,
    derive_cost_params,
    run_scenario,
)
from emsnm.harness.scenario import Scenario, load_scenario, parse_scenario

__all__ = [
    "ComparisonRecord",
    "ReportTable",
    "RunResult",
    "Scenario",
    "compare_model_vs_sim",
    "compare_run",
    "derive_cost_params",
    "emit_report",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
]
