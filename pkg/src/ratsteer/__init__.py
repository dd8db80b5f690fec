"""Multi-RAT (LTE + 5G NR) downlink simulator with learned traffic steering."""
from .config import ExperimentConfig, load_config, parse_config, scaled_config
from .metrics import run_sweep, summarize
from .sim import World, run

__all__ = ["ExperimentConfig", "World", "load_config", "parse_config", "run", "run_sweep",
           "scaled_config", "summarize"]
