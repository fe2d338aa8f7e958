"""Parameter vectors, pass-counting gradient oracles and inner optimizer steps.

Every update rule in the package talks to an objective through a
:class:`GradientOracle`, which counts gradient evaluations ("backward passes").
Optimizer steps never evaluate gradients themselves.

The adaptive-moment optimizer is AdamW with bias correction and decoupled
weight decay.  One call ``step(theta, g)`` with step counter ``t`` (after
increment) computes::

    theta <- theta * (1 - lr * weight_decay)
    m     <- beta1 * m + (1 - beta1) * g
    v     <- beta2 * v + (1 - beta2) * g**2
    m_hat  = m / (1 - beta1**t)
    v_hat  = v / (1 - beta2**t)
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

When ``clip_norm`` is set, ``g`` is rescaled to L2 norm ``clip_norm`` before it
is consumed (both optimizers).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np


class DimensionError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    """Raised when a parameter or gradient vector contains NaN/Inf.

    ``index`` is the first offending coordinate; ``dump`` carries whatever
    context the raising code had (stage name, partial diagnostics).
    """

    def __init__(self, message: str, index: int | None = None, dump: dict | None = None):
        super().__init__(message)
        self.index = index
        self.dump = dump or {}


def as_param(x, dim: int | None = None) -> np.ndarray:
    """Return a fresh 1-D float64 copy of ``x``, checking dimension if given."""
    arr = np.array(x, dtype=np.float64).reshape(-1)
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.shape[0]}")
    return arr


def check_finite(x: np.ndarray, what: str, dump: dict | None = None) -> np.ndarray:
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        i = int(bad[0])
        raise NonFiniteError(f"non-finite {what} at coordinate {i}: {x[i]!r}", index=i, dump=dump)
    return x


class Objective(Protocol):
    dimension: int

    def loss(self, theta: np.ndarray) -> float: ...

    def grad(self, theta: np.ndarray) -> np.ndarray: ...


class GradientOracle:
    """Wraps an objective and counts gradient evaluations.

    ``loss_scale`` multiplies both loss and gradient; it is the hook used to
    inject gradient-norm spikes in gate experiments.
    """

    def __init__(self, objective: Objective):
        self.objective = objective
        self.dimension = int(objective.dimension)
        self.pass_count = 0
        self.loss_scale = 1.0

    def grad(self, theta: np.ndarray) -> np.ndarray:
        theta = as_param(theta, self.dimension)
        g = np.asarray(self.objective.grad(theta), dtype=np.float64)
        self.pass_count += 1
        if self.loss_scale != 1.0:
            g = g * self.loss_scale
        return check_finite(g, "gradient")

    def loss(self, theta: np.ndarray) -> float:
        """Forward evaluation only; does not count as a pass."""
        return self.loss_scale * float(self.objective.loss(as_param(theta, self.dimension)))

    @property
    def has_hessian(self) -> bool:
        return hasattr(self.objective, "hessian")

    def hessian(self, theta: np.ndarray) -> np.ndarray:
        if not self.has_hessian:
            raise TypeError(f"{type(self.objective).__name__} has no analytic Hessian")
        return self.loss_scale * np.asarray(self.objective.hessian(as_param(theta, self.dimension)))


def _prepare(theta, g, clip_norm: float | None) -> tuple[np.ndarray, np.ndarray]:
    theta = as_param(theta)
    g = as_param(g, theta.shape[0])
    check_finite(g, "gradient input")
    if clip_norm is not None:
        norm = float(np.linalg.norm(g))
        if norm > clip_norm:
            g = g * (clip_norm / norm)
    return theta, g


@dataclass
class PlainGD:
    lr: float
    clip_norm: float | None = None
    kind = "plain-gd"

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")

    def step(self, theta, g) -> np.ndarray:
        theta, g = _prepare(theta, g, self.clip_norm)
        return theta - self.lr * g

    def snapshot(self):
        return None

    def restore(self, snap) -> None:
        pass


@dataclass
class AdamW:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    clip_norm: float | None = None
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)
    t: int = 0
    kind = "adamw"

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1, beta2 must lie in (0, 1)")

    def step(self, theta, g) -> np.ndarray:
        theta, g = _prepare(theta, g, self.clip_norm)
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        elif self.m.shape != theta.shape:
            raise DimensionError(f"moment dimension {self.m.shape[0]} != {theta.shape[0]}")
        self.t += 1
        theta = theta * (1.0 - self.lr * self.weight_decay)
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def snapshot(self):
        return copy.deepcopy((self.m, self.v, self.t))

    def restore(self, snap) -> None:
        self.m, self.v, self.t = copy.deepcopy(snap)


OptimizerState = PlainGD | AdamW


def make_optimizer(kind: str, lr: float, **kwargs) -> OptimizerState:
    if kind == "plain-gd":
        return PlainGD(lr=lr, clip_norm=kwargs.get("clip_norm"))
    if kind == "adamw":
        return AdamW(lr=lr, **kwargs)
    raise ValueError(f"unknown optimizer kind {kind!r}")


def optim_step(state: OptimizerState, theta, g) -> np.ndarray:
    """One inner optimizer step; mutates adaptive state, evaluates no gradient."""
    return state.step(theta, g)


def total_passes(T: int, s_star: int) -> int:
    """Backward passes over ``T`` steps when extrapolation stops at ``s_star``."""
    if not 0 <= s_star <= T:
        raise ValueError(f"need 0 <= s_star <= T, got s_star={s_star}, T={T}")
    return 3 * s_star + (T - s_star)
