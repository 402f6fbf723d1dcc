"""Scenario runner, run manifests and the command-line entry point."""

from .config import SCENARIOS, ScenarioConfig
from .manifest import RunManifest, write_result
from .scenarios import (
    ScenarioResult,
    run_fig2f,
    run_fig4,
    run_scaling,
    run_scenario,
    run_supp_note2,
    run_tomo_demo,
)

__all__ = ["SCENARIOS", "ScenarioConfig", "RunManifest", "ScenarioResult", "write_result", "run_fig2f",
           "run_fig4", "run_scaling", "run_scenario", "run_supp_note2", "run_tomo_demo"]
