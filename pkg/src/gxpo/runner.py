"""Uniform stepping interface over the three update rules."""

from __future__ import annotations

from .baselines import SfpoConfig, grpo_step, sfpo_step
from .core import GradientOracle, OptimizerState
from .update import GxpoConfig, GxpoRuntime, gxpo_step

METHODS = ("grpo", "sfpo", "gxpo")


class Updater:
    """Owns the optimizer state and gate runtime for one run."""

    def __init__(self, method: str, opt: OptimizerState, gxpo: GxpoConfig | None = None,
                 sfpo: SfpoConfig | None = None):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
        self.method = method
        self.opt = opt
        self.gxpo = gxpo or GxpoConfig()
        self.sfpo = sfpo or SfpoConfig()
        window = self.gxpo.window if method == "gxpo" else self.sfpo.window
        self.runtime = GxpoRuntime(window=window)

    @property
    def s_star(self) -> int | None:
        return self.runtime.s_star

    def step(self, oracle: GradientOracle, theta):
        if self.method == "gxpo":
            return gxpo_step(oracle, theta, self.opt, self.gxpo, self.runtime)
        if self.method == "sfpo":
            return sfpo_step(oracle, theta, self.opt, self.sfpo, self.runtime)
        out = grpo_step(oracle, theta, self.opt, step=self.runtime.t)
        self.runtime.t += 1
        return out


def run(updater: Updater, oracle: GradientOracle, theta0, steps: int):
    """Apply ``steps`` outer updates; returns final parameters and diagnostics."""
    theta = theta0
    diags = []
    for _ in range(steps):
        theta, d = updater.step(oracle, theta)
        diags.append(d)
    return theta, diags
