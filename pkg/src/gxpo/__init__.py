"""Fixed-cost geometric lookahead for policy updates, with baselines and exact checks."""

from .baselines import SfpoConfig, grpo_step, sfpo_step
from .core import AdamW, GradientOracle, NonFiniteError, PlainGD, make_optimizer, optim_step, total_passes
from .runner import Updater, run
from .update import GxpoConfig, GxpoRuntime, StepDiagnostics, gxpo_step

__all__ = [
    "AdamW", "GradientOracle", "GxpoConfig", "GxpoRuntime", "NonFiniteError", "PlainGD", "SfpoConfig",
    "StepDiagnostics", "Updater", "grpo_step", "gxpo_step", "make_optimizer", "optim_step", "run",
    "sfpo_step", "total_passes",
]
