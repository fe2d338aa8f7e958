"""Analytic objectives with exact gradients, and plain-GD reference trajectories."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .core import GradientOracle, as_param, check_finite


class QuadraticObjective:
    """``L(theta) = 0.5 * theta^T H theta``."""

    third_derivative_bound = 0.0

    def __init__(self, H, diagonal: bool | None = None, spec: "ObjectiveSpec | None" = None):
        H = np.array(H, dtype=np.float64)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("H must be square")
        if np.max(np.abs(H - H.T), initial=0.0) > 1e-12:
            raise ValueError("H must be symmetric")
        H = 0.5 * (H + H.T)
        off = H - np.diag(np.diag(H))
        if diagonal is None:
            diagonal = not np.any(off)
        if diagonal and np.any(off):
            raise ValueError("diagonal objective has nonzero off-diagonal entries")
        self.H = H
        self.H.setflags(write=False)
        self.diagonal = bool(diagonal)
        self.dimension = H.shape[0]
        self.spec = spec

    def loss(self, theta) -> float:
        theta = as_param(theta, self.dimension)
        return 0.5 * float(theta @ self.H @ theta)

    def grad(self, theta) -> np.ndarray:
        theta = as_param(theta, self.dimension)
        if self.diagonal:
            return np.diag(self.H) * theta
        return self.H @ theta

    def hessian(self, theta=None) -> np.ndarray:
        return self.H


class CubicPerturbedObjective:
    """``L(theta) = 0.5 theta^T H theta + c * sum(theta**3)``.

    The third-derivative tensor is ``6c`` on the superdiagonal, so its
    operator norm is exactly ``6|c|``.
    """

    def __init__(self, base: QuadraticObjective, c: float, spec: "ObjectiveSpec | None" = None):
        self.base = base
        self.c = float(c)
        self.dimension = base.dimension
        self.third_derivative_bound = 6.0 * abs(self.c)
        self.spec = spec

    def loss(self, theta) -> float:
        theta = as_param(theta, self.dimension)
        return self.base.loss(theta) + self.c * float(np.sum(theta**3))

    def grad(self, theta) -> np.ndarray:
        theta = as_param(theta, self.dimension)
        return self.base.grad(theta) + 3.0 * self.c * theta * theta

    def hessian(self, theta) -> np.ndarray:
        theta = as_param(theta, self.dimension)
        return self.base.H + np.diag(6.0 * self.c * theta)


class LogisticObjective:
    """Mean logistic negative log-likelihood plus ``0.5 * l2 * ||theta||^2``."""

    def __init__(self, X, y, l2: float = 1e-2, spec: "ObjectiveSpec | None" = None):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y disagree on the number of samples")
        self.l2 = float(l2)
        self.dimension = self.X.shape[1]
        self.spec = spec

    def loss(self, theta) -> float:
        theta = as_param(theta, self.dimension)
        z = self.X @ theta
        # log(1 + e^z) - y z, computed stably
        nll = np.logaddexp(0.0, z) - self.y * z
        return float(nll.mean()) + 0.5 * self.l2 * float(theta @ theta)

    def grad(self, theta) -> np.ndarray:
        theta = as_param(theta, self.dimension)
        p = 0.5 * (1.0 + np.tanh(0.5 * (self.X @ theta)))
        return self.X.T @ (p - self.y) / self.y.shape[0] + self.l2 * theta


def make_random_quadratic(d: int, eigen_range=(0.1, 1.0), diagonal: bool = False, seed: int = 0) -> QuadraticObjective:
    """Reproducible diagonal-positive or SPD quadratic with spectrum in ``eigen_range``."""
    lo, hi = map(float, eigen_range)
    if not (0 < lo <= hi < np.inf):
        raise ValueError(f"invalid eigen_range {eigen_range!r}")
    rng = np.random.default_rng(seed)
    eig = rng.uniform(lo, hi, size=d)
    if diagonal:
        H = np.diag(eig)
    else:
        Q, R = np.linalg.qr(rng.standard_normal((d, d)))
        Q = Q * np.sign(np.diag(R))
        H = (Q * eig) @ Q.T
        H = 0.5 * (H + H.T)
    spec = ObjectiveSpec(family="quadratic", dimension=d, seed=seed, eigen_lo=lo, eigen_hi=hi, diagonal=diagonal)
    return QuadraticObjective(H, diagonal=diagonal, spec=spec)


def make_cubic(d: int, c: float, eigen_range=(0.1, 1.0), diagonal: bool = False, seed: int = 0) -> CubicPerturbedObjective:
    base = make_random_quadratic(d, eigen_range, diagonal, seed)
    spec = ObjectiveSpec(family="cubic", dimension=d, seed=seed, eigen_lo=base.spec.eigen_lo,
                         eigen_hi=base.spec.eigen_hi, diagonal=diagonal, cubic=c)
    return CubicPerturbedObjective(base, c, spec=spec)


def make_logistic(d: int, n_samples: int = 200, noise: float = 0.1, l2: float = 1e-2, seed: int = 0) -> LogisticObjective:
    """Labels from a random ground-truth separator with a fraction ``noise`` flipped."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_samples, d))
    w = rng.standard_normal(d)
    y = (X @ w > 0).astype(np.float64)
    flip = rng.random(n_samples) < noise
    y[flip] = 1.0 - y[flip]
    spec = ObjectiveSpec(family="logistic", dimension=d, seed=seed, n_samples=n_samples, noise=noise, l2=l2)
    return LogisticObjective(X, y, l2, spec=spec)


@dataclass
class ObjectiveSpec:
    """Plain-text description from which an objective is rebuilt bit-identically."""

    family: str
    dimension: int
    seed: int = 0
    eigen_lo: float = 0.1
    eigen_hi: float = 1.0
    diagonal: bool = False
    cubic: float = 0.0
    n_samples: int = 200
    noise: float = 0.1
    l2: float = 1e-2

    def build(self):
        if self.family == "quadratic":
            return make_random_quadratic(self.dimension, (self.eigen_lo, self.eigen_hi), self.diagonal, self.seed)
        if self.family == "cubic":
            return make_cubic(self.dimension, self.cubic, (self.eigen_lo, self.eigen_hi), self.diagonal, self.seed)
        if self.family == "logistic":
            return make_logistic(self.dimension, self.n_samples, self.noise, self.l2, self.seed)
        raise ValueError(f"unknown objective family {self.family!r}")

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)!r}\n".replace("'", "") for f in fields(self))

    @classmethod
    def from_text(cls, text: str) -> "ObjectiveSpec":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (s.strip() for s in line.partition("="))
            if not sep or key not in types:
                raise ValueError(f"line {lineno}: bad objective spec entry {line!r}")
            kw[key] = _coerce(value, types[key])
        return cls(**kw)


def _coerce(value: str, typ: str):
    if typ == "bool":
        if value.lower() not in ("true", "false"):
            raise ValueError(f"expected true/false, got {value!r}")
        return value.lower() == "true"
    if typ == "int":
        return int(value)
    if typ == "float":
        return float(value)
    return value


def closed_form_gradient(q: QuadraticObjective, g0, eta: float, n: int) -> np.ndarray:
    """``(I - eta H)^n g0`` by ``n`` matrix-vector products."""
    if n < 0:
        raise ValueError("n must be >= 0")
    g = as_param(g0, q.dimension)
    for _ in range(n):
        g = g - eta * (q.H @ g)
    return g


def gd_trajectory(oracle, theta0, eta: float, n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Plain-GD iterates ``theta_0..theta_n`` paired with their gradients.

    ``oracle`` may be a :class:`GradientOracle` or a bare objective.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    theta = as_param(theta0)
    out = []
    for k in range(n + 1):
        g = np.asarray(oracle.grad(theta), dtype=np.float64)
        out.append((theta, g))
        if k < n:
            theta = check_finite(theta - eta * g, f"GD iterate {k + 1}")
    return out


def counting(objective) -> GradientOracle:
    return GradientOracle(objective)


def central_difference(f, theta, h: float = 1e-6) -> np.ndarray:
    """Coordinate-wise ``(f(theta + h e_i) - f(theta - h e_i)) / 2h``."""
    theta = as_param(theta)
    out = np.empty_like(theta)
    for i in range(theta.shape[0]):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (f(theta + e) - f(theta - e)) / (2.0 * h)
    return out
