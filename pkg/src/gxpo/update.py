"""The GXPO outer step: two probe gradients, per-coordinate geometric
extrapolation, partial repositioning, a corrective gradient, and a permanent
z-score shutoff gate."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import GradientOracle, NonFiniteError, OptimizerState, as_param, check_finite, optim_step


@dataclass(frozen=True)
class GxpoConfig:
    K: int = 3
    alpha: float = 0.5
    delta: float = 1e-8
    tau: float = 0.5
    window: int = 20
    eps_z: float = 1e-8
    eps_r: float = 1e-6
    r_max: float = 10.0
    # restore the optimizer moments taken at theta0 before the corrective step
    restore_moments: bool = False

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if not (self.eps_z > 0 and self.eps_r >= 0 and self.r_max > 0):
            raise ValueError("eps_z, r_max must be positive and eps_r non-negative")

    @classmethod
    def exact(cls, K: int, alpha: float = 1.0) -> "GxpoConfig":
        """Clean surrogate settings: every nonzero coordinate active, no clamp, gate off."""
        return cls(K=K, alpha=alpha, delta=0.0, tau=math.inf, eps_r=0.0, r_max=math.inf)


@dataclass
class GxpoRuntime:
    window: int = 20
    buffer: deque = field(default=None)
    s_star: int | None = None
    t: int = 0

    def __post_init__(self):
        if self.buffer is None:
            self.buffer = deque(maxlen=self.window)

    @property
    def active(self) -> bool:
        return self.s_star is None or self.t < self.s_star

    def observe(self, norm: float, tau: float, eps_z: float) -> float | None:
        """Score ``norm`` against the buffer, maybe trigger shutoff, then push it."""
        z = z_score(self.buffer, norm, eps_z)
        if z is not None and z >= tau and self.s_star is None:
            self.s_star = self.t + 1
        self.buffer.append(norm)
        return z


@dataclass
class StepDiagnostics:
    step: int
    phase: str
    passes_this_step: int
    norm_g0: float
    norm_g1: float | None = None
    norm_gslow: float | None = None
    cos_g0_gslow: float | None = None
    active_fraction: float | None = None
    retention_mean: float | None = None
    retention_std: float | None = None
    scale_mean: float | None = None
    disp_ratio: float | None = None
    demoted: int = 0
    z_score: float | None = None
    s_star: int | None = None

    def as_row(self) -> dict:
        return asdict(self)


def retention_ratios(g0, g1, delta: float, r_max: float = math.inf) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate ``g1/g0`` on the active set ``|g0| > delta``.

    Inactive entries of the returned ratio vector are NaN.
    """
    g0 = as_param(g0)
    g1 = as_param(g1, g0.shape[0])
    active = np.abs(g0) > delta
    ratios = np.full_like(g0, np.nan)
    ratios[active] = np.clip(g1[active] / g0[active], -r_max, r_max)
    return ratios, active


def geometric_sum(x, n: int, eps_r: float = 1e-6):
    """``sum_{k<n} x**k``, elementwise; equals ``n`` where ``|1 - x| < eps_r``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    s = np.ones_like(x)
    for _ in range(n - 1):
        s = s * x + 1.0
    s = np.where(np.abs(1.0 - x) < eps_r, float(n), s)
    return s if s.ndim else float(s)


def scale_factors(ratios, active, K: int, eps_r: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """``S_K(r)/S_2(r)`` on active coordinates, 1 elsewhere.

    Active coordinates whose two-step sum vanishes (``|1 + r| < eps_r``, or
    exactly zero) are demoted to scale 1; the demotion mask is returned.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    ratios = np.asarray(ratios, dtype=np.float64)
    active = np.asarray(active, dtype=bool)
    scale = np.ones_like(ratios)
    r = ratios[active]
    s2 = geometric_sum(r, 2, eps_r)
    sk = geometric_sum(r, K, eps_r)
    degenerate = (np.abs(s2) < eps_r) | (s2 == 0.0)
    vals = np.ones_like(r)
    np.divide(sk, s2, out=vals, where=~degenerate)
    scale[active] = vals
    demoted = np.zeros_like(active)
    demoted[np.flatnonzero(active)[degenerate]] = True
    return scale, demoted


def extrapolate(theta0, theta2, scale) -> np.ndarray:
    theta0 = as_param(theta0)
    theta2 = as_param(theta2, theta0.shape[0])
    out = theta0 + (theta2 - theta0) * np.asarray(scale, dtype=np.float64)
    return check_finite(out, "extrapolated parameters")


def reposition(theta0, thetaK, alpha: float) -> np.ndarray:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    theta0 = as_param(theta0)
    return theta0 + alpha * (as_param(thetaK, theta0.shape[0]) - theta0)


def z_score(buffer, norm: float, eps_z: float = 1e-8) -> float | None:
    """Standardized ``norm`` against the buffer (population std); None if len < 2."""
    if len(buffer) < 2:
        return None
    b = np.asarray(buffer, dtype=np.float64)
    return float((norm - b.mean()) / (b.std() + eps_z))


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def fallback_step(oracle: GradientOracle, theta, opt: OptimizerState, step: int) -> tuple[np.ndarray, StepDiagnostics]:
    g0 = oracle.grad(theta)
    theta_next = check_finite(optim_step(opt, theta, g0), "parameters", {"step": step, "stage": "fallback"})
    return theta_next, StepDiagnostics(step=step, phase="fallback", passes_this_step=1,
                                       norm_g0=float(np.linalg.norm(g0)))


def gxpo_step(oracle: GradientOracle, theta, opt: OptimizerState, cfg: GxpoConfig,
              rt: GxpoRuntime) -> tuple[np.ndarray, StepDiagnostics]:
    theta0 = as_param(theta, oracle.dimension)
    t = rt.t
    if not rt.active:
        theta_next, diag = fallback_step(oracle, theta0, opt, t)
        diag.s_star = rt.s_star
        rt.t += 1
        return theta_next, diag

    dump: dict = {"step": t}
    snap = opt.snapshot() if cfg.restore_moments else None
    try:
        g0 = oracle.grad(theta0)
        theta1 = check_finite(optim_step(opt, theta0, g0), "theta1")
        g1 = oracle.grad(theta1)
        theta2 = check_finite(optim_step(opt, theta1, g1), "theta2")

        ratios, active = retention_ratios(g0, g1, cfg.delta, cfg.r_max)
        scale, demoted = scale_factors(ratios, active, cfg.K, cfg.eps_r)
        dump.update(norm_g0=float(np.linalg.norm(g0)), norm_g1=float(np.linalg.norm(g1)),
                    max_abs_scale=float(np.max(np.abs(scale))) if scale.size else 0.0)
        thetaK = extrapolate(theta0, theta2, scale)
        theta_tilde = reposition(theta0, thetaK, cfg.alpha)

        g_slow = oracle.grad(theta_tilde)
        if snap is not None:
            opt.restore(snap)
        theta_next = check_finite(optim_step(opt, theta_tilde, g_slow), "theta_next")
    except NonFiniteError as exc:
        exc.dump = {**dump, **exc.dump}
        raise

    norm_slow = float(np.linalg.norm(g_slow))
    z = rt.observe(norm_slow, cfg.tau, cfg.eps_z)

    d2 = float(np.linalg.norm(theta2 - theta0))
    eff = active & ~demoted
    r_act = ratios[eff]
    diag = StepDiagnostics(
        step=t,
        phase="active",
        passes_this_step=3,
        norm_g0=float(np.linalg.norm(g0)),
        norm_g1=float(np.linalg.norm(g1)),
        norm_gslow=norm_slow,
        cos_g0_gslow=_cos(g0, g_slow),
        active_fraction=float(eff.mean()) if eff.size else 0.0,
        retention_mean=float(r_act.mean()) if r_act.size else None,
        retention_std=float(r_act.std()) if r_act.size else None,
        scale_mean=float(scale[eff].mean()) if r_act.size else None,
        disp_ratio=float(np.linalg.norm(thetaK - theta0)) / d2 if d2 > 0 else 0.0,
        demoted=int(demoted.sum()),
        z_score=z,
        s_star=rt.s_star,
    )
    rt.t += 1
    return theta_next, diag
