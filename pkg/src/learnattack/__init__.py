"""Simulation of learning-based man-in-the-middle attacks on control loops.

An attacker eavesdrops on a feedback loop, identifies the plant, then
feeds the controller fictitious sensor readings while driving the plant
with malicious inputs.  The controller runs a statistical test on its
innovation sequence.  This package runs those experiments and evaluates
the matching analytic bounds on the deception probability.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config, loads_config
from .core import ConfigError, DegenerateDataError, RandomSource, derive_seed, operator_norm
from .harness import TrialOutcome, monte_carlo, run_trial, sweep

__all__ = [
    "ConfigError",
    "DegenerateDataError",
    "ExperimentConfig",
    "RandomSource",
    "TrialOutcome",
    "__version__",
    "derive_seed",
    "load_config",
    "loads_config",
    "monte_carlo",
    "operator_norm",
    "run_trial",
    "sweep",
]
