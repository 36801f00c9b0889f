"""tacsim: deterministic multi-agent airspace simulator with an
intent-carrying V2V tactical coordination protocol, an
impairment-parameterized broadcast channel, and a three-baseline
evaluation harness."""

from .config import ScenarioConfig, SweepPlan
from .engine import Engine
from .metrics import RunMetrics
from .runner import run_scenario, run_sweep

__all__ = ["Engine", "RunMetrics", "ScenarioConfig", "SweepPlan",
           "run_scenario", "run_sweep"]
__version__ = "0.1.0"
