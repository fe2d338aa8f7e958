"""Reference update rules: single-pass GRPO-style step and SFPO-style K-step lookahead."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GradientOracle, NonFiniteError, OptimizerState, as_param, check_finite, optim_step
from .update import GxpoRuntime, StepDiagnostics, _cos, fallback_step, reposition


@dataclass(frozen=True)
class SfpoConfig:
    K: int = 3
    alpha: float = 0.5
    tau: float | None = None
    window: int = 20
    eps_z: float = 1e-8

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def grpo_step(oracle: GradientOracle, theta, opt: OptimizerState, step: int = 0):
    return fallback_step(oracle, as_param(theta, oracle.dimension), opt, step)


def sfpo_step(oracle: GradientOracle, theta, opt: OptimizerState, cfg: SfpoConfig,
              rt: GxpoRuntime | None = None) -> tuple[np.ndarray, StepDiagnostics]:
    """K explicit fast steps, blend toward the K-th iterate, one corrective step.

    With a runtime and ``cfg.tau`` set, the corrective norm feeds the same
    z-score gate as GXPO.
    """
    theta0 = as_param(theta, oracle.dimension)
    t = rt.t if rt is not None else 0
    if rt is not None and not rt.active:
        theta_next, diag = fallback_step(oracle, theta0, opt, t)
        diag.s_star = rt.s_star
        rt.t += 1
        return theta_next, diag

    fast = theta0
    g0 = g1 = None
    try:
        for k in range(cfg.K):
            g = oracle.grad(fast)
            if k == 0:
                g0 = g
            elif k == 1:
                g1 = g
            fast = check_finite(optim_step(opt, fast, g), f"fast iterate {k + 1}")
        theta_tilde = reposition(theta0, fast, cfg.alpha)
        g_slow = oracle.grad(theta_tilde)
        theta_next = check_finite(optim_step(opt, theta_tilde, g_slow), "theta_next")
    except NonFiniteError as exc:
        exc.dump = {"step": t, "method": "sfpo", **exc.dump}
        raise

    norm_slow = float(np.linalg.norm(g_slow))
    z = None
    if rt is not None:
        tau = cfg.tau if cfg.tau is not None else float("inf")
        z = rt.observe(norm_slow, tau, cfg.eps_z)
        rt.t += 1
    diag = StepDiagnostics(
        step=t,
        phase="active",
        passes_this_step=cfg.K + 1,
        norm_g0=float(np.linalg.norm(g0)),
        norm_g1=float(np.linalg.norm(g1)) if g1 is not None else None,
        norm_gslow=norm_slow,
        cos_g0_gslow=_cos(g0, g_slow),
        z_score=z,
        s_star=rt.s_star if rt is not None else None,
    )
    return theta_next, diag
