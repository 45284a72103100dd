"""Simulation executive: scenarios, clock, integrator, closed-loop runs and logs."""
from aerobat_guard.harness.integrate import NonFiniteStateError, SimClock, rk4_step
from aerobat_guard.harness.scenario import (Scenario, ScenarioError, dumps_scenario, load_scenario, loads_scenario,
                                            preset_scenario, save_scenario)
from aerobat_guard.harness.sim import COLUMNS, DivergenceError, RunLog, read_log, run, write_log

__all__ = ["NonFiniteStateError", "SimClock", "rk4_step", "Scenario", "ScenarioError", "dumps_scenario",
           "load_scenario", "loads_scenario", "preset_scenario", "save_scenario", "COLUMNS", "DivergenceError",
           "RunLog", "read_log", "run", "write_log"]
