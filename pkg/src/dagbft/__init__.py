"""Deterministic simulator for DAG-based BFT consensus with a steady-state fast path
and an asynchronous fallback, plus the property checkers used to test it."""
from .harness import Fault, Scenario, fuzz_scenario, simulate
from .replay import replay_figure
from .report import RunReport, analyze, run_scenario

__all__ = ["Fault", "Scenario", "RunReport", "analyze", "fuzz_scenario", "replay_figure",
           "run_scenario", "simulate"]
__version__ = "0.1.0"
