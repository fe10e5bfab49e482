from .engine import Event, LatencyModel, Simulator
from .metrics import RequestRecord, RunMetrics, percentile
from .runner import ScenarioRun, SweepResult, adoption_sweep, run
from .scenario import DatasetSpec, Scenario, load_scenario

__all__ = [
    "DatasetSpec",
    "Event",
    "LatencyModel",
    "RequestRecord",
    "RunMetrics",
    "Scenario",
    "ScenarioRun",
    "Simulator",
    "SweepResult",
    "adoption_sweep",
    "load_scenario",
    "percentile",
    "run",
]
