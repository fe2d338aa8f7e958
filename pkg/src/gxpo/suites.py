"""Verification suites: randomized instances checked against exact oracles.

Each suite returns one row per instance (columns from :mod:`gxpo.schema`) and
the names of failing instances.  Instance generation is seeded from
``RunConfig.suite_seed`` so reruns are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .core import GradientOracle, PlainGD, total_passes
from .grpo_toy import GrpoLoss, ToyTask, sample_rollouts
from .runner import Updater
from .schema import VERIFY
from .testbed import central_difference, gd_trajectory, make_cubic, make_logistic, make_random_quadratic
from .theory import alignment_check, budget_check, displacement_error, ratio_bias_check
from .update import GxpoConfig, GxpoRuntime, gxpo_step

EXACT_RTOL = 1e-10
BIAS_ATOL = 1e-10
GRADCHECK_RTOL = 1e-5
K_CYCLE = (2, 3, 5, 10)


@dataclass
class SuiteResult:
    name: str
    rows: list[dict] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def columns(self) -> tuple[str, ...]:
        return VERIFY[self.name]

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        head = f"{self.name}: {len(self.rows)} rows, {len(self.failures)} failing"
        return head if self.ok else f"{head}; first failure: {self.failures[0]}"


def _rng(cfg: RunConfig, salt: int) -> np.random.Generator:
    return np.random.default_rng([cfg.suite_seed, salt])


def _n(cfg: RunConfig, default: int) -> int:
    return default if cfg.instances is None else cfg.instances


def _rel_error(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.abs(a - b)
    denom = np.abs(b)
    if np.any((denom == 0) & (diff > 0)):
        return math.inf
    return float(np.max(diff / np.where(denom > 0, denom, 1.0), initial=0.0))


def exactness(cfg: RunConfig) -> SuiteResult:
    """One clean GXPO step against K+1 plain-GD steps on diagonal quadratics."""
    res = SuiteResult("exactness")
    rng = _rng(cfg, 1)
    for i in range(_n(cfg, 100)):
        d = int(rng.integers(1, 65))
        K = K_CYCLE[i % len(K_CYCLE)]
        q = make_random_quadratic(d, (0.1, 1.0), diagonal=True, seed=int(rng.integers(2**31)))
        # eta * h <= 1/2 keeps every retention ratio >= 1/2
        eta = float(rng.uniform(0.2, 0.5) / np.max(np.diag(q.H)))
        theta0 = rng.standard_normal(d)
        oracle = GradientOracle(q)
        theta_gx, _ = gxpo_step(oracle, theta0, PlainGD(lr=eta), GxpoConfig.exact(K), GxpoRuntime())
        theta_gd = gd_trajectory(q, theta0, eta, K + 1)[K + 1][0]
        err = _rel_error(theta_gx, theta_gd)
        ok = err <= EXACT_RTOL and oracle.pass_count == 3
        res.rows.append(dict(instance=i, d=d, K=K, eta=eta, max_rel_error=err,
                             passes=oracle.pass_count, ok=ok))
        if not ok:
            res.failures.append(f"instance {i} (d={d}, K={K}): rel error {err:.3e}")
    return res


def _bound_instance(kind: str, rng: np.random.Generator):
    d = int(rng.integers(1, 33))
    seed = int(rng.integers(2**31))
    if kind == "diagonal":
        obj = make_random_quadratic(d, (0.1, 1.0), diagonal=True, seed=seed)
    elif kind == "spd":
        obj = make_random_quadratic(d, (0.1, 1.0), diagonal=False, seed=seed)
    else:
        c = float(rng.uniform(-0.05, 0.05))
        obj = make_cubic(d, c, (0.1, 1.0), diagonal=bool(rng.integers(2)), seed=seed)
    return d, obj


def bounds(cfg: RunConfig) -> SuiteResult:
    """Measured surrogate displacement against the combined error bound."""
    res = SuiteResult("bounds")
    n = _n(cfg, 100)
    rng = _rng(cfg, 2)
    idx = 0
    for kind in ("diagonal", "spd", "cubic"):
        for j in range(n):
            d, obj = _bound_instance(kind, rng)
            K = K_CYCLE[j % len(K_CYCLE)]
            eta = float(10 ** rng.uniform(-3, -1))
            theta0 = rng.standard_normal(d)
            g0 = obj.grad(theta0)
            # alternate between a near-empty and a populated inactive set
            delta = 1e-12 if j % 2 == 0 else float(np.quantile(np.abs(g0), 0.2))
            rep = displacement_error(obj, theta0, eta, K, delta, family=kind)
            row = rep.as_row()
            row.update(instance=idx, d=d)
            res.rows.append(row)
            if not (rep.satisfied and rep.hypotheses_ok):
                res.failures.append(f"instance {idx} ({kind}, d={d}, K={K}): measured "
                                    f"{rep.measured_error:.3e} > bound {rep.bound:.3e}")
            idx += 1
    return res


def bias(cfg: RunConfig) -> SuiteResult:
    """Coupling-bias identity of the first-probe retention ratio on SPD quadratics."""
    res = SuiteResult("bias")
    rng = _rng(cfg, 3)
    for i in range(_n(cfg, 100)):
        d = int(rng.integers(2, 33))
        q = make_random_quadratic(d, (0.1, 1.0), diagonal=False, seed=int(rng.integers(2**31)))
        eta = float(10 ** rng.uniform(-4, -2))
        theta0 = rng.standard_normal(d)
        # keep every |g0_i| away from zero so the ratios are well conditioned
        for _ in range(100):
            g0 = q.grad(theta0)
            small = np.abs(g0) < 1e-3
            if not small.any():
                break
            theta0 = rng.standard_normal(d)
        g0 = q.grad(theta0)
        resid = ratio_bias_check(q, theta0, eta)
        off = q.H - np.diag(np.diag(q.H))
        b = np.abs(eta * (off @ g0) / g0)
        worst = float(np.max(np.abs(resid)))
        ok = worst <= BIAS_ATOL
        res.rows.append(dict(instance=i, d=d, eta=eta, min_abs_g0=float(np.min(np.abs(g0))),
                             max_abs_bias=float(b.max()), max_abs_residual=worst, ok=ok))
        if not ok:
            res.failures.append(f"instance {i} (d={d}): residual {worst:.3e}")
    return res


def alignment(cfg: RunConfig) -> SuiteResult:
    """Whenever the sufficient condition holds the modelled inner product is positive."""
    res = SuiteResult("alignment")
    rng = _rng(cfg, 4)
    for i in range(_n(cfg, 1000)):
        d = int(rng.integers(1, 33))
        diag = bool(i % 2)
        q = make_random_quadratic(d, (0.1, 1.0), diagonal=diag, seed=int(rng.integers(2**31)))
        K = K_CYCLE[i % len(K_CYCLE)]
        alpha = float(rng.uniform(0.0, 1.0))
        eta = float(10 ** rng.uniform(-3, 0))
        theta0 = rng.standard_normal(d)
        rep = alignment_check(q, theta0, eta, K, alpha)
        ok = (not rep.condition_holds) or rep.modelled_inner > 0
        row = rep.as_row()
        row.update(instance=i, family="diagonal" if diag else "spd", d=d, ok=ok)
        res.rows.append(row)
        if not ok:
            res.failures.append(f"instance {i} (d={d}, K={K}): condition holds but inner "
                                f"product {rep.modelled_inner:.3e} <= 0")
    return res


def budget(cfg: RunConfig) -> SuiteResult:
    """m clean outer steps match (K+1)m GD steps, obey the loss bound, and cost 3m passes."""
    res = SuiteResult("budget")
    idx = 0
    for seed in range(3 if cfg.instances is None else cfg.instances):
        rng = _rng(cfg, 100 + seed)
        d = int(rng.integers(1, 17))
        q = make_random_quadratic(d, (0.1, 1.0), diagonal=True, seed=int(rng.integers(2**31)))
        eta = float(rng.uniform(0.2, 0.5) / np.max(np.diag(q.H)))
        theta0 = rng.standard_normal(d)
        for K in (3, 5, 10):
            for m in range(11):
                rep = budget_check(q, theta0, eta, K, m)
                row = rep.as_row()
                row.update(instance=idx, seed=seed, d=d)
                res.rows.append(row)
                if not rep.ok:
                    res.failures.append(f"instance {idx} (seed={seed}, K={K}, m={m}): "
                                        f"rel error {rep.max_rel_error:.3e}, passes {rep.pass_count}")
                idx += 1
    return res


def gate(cfg: RunConfig) -> SuiteResult:
    """A one-step gradient-scale spike must shut extrapolation off permanently.

    Rows are per outer step.  The run uses plain GD on a slowly contracting
    diagonal quadratic so the corrective norms drift down smoothly before the
    spike, then continues ``gate_extra_steps`` steps past it.
    """
    res = SuiteResult("gate")
    rng = _rng(cfg, 5)
    q = make_random_quadratic(8, (0.1, 1.0), diagonal=True, seed=int(rng.integers(2**31)))
    theta = rng.standard_normal(8)
    tau = 2.0 if cfg.tau is None else cfg.tau
    gcfg = GxpoConfig(K=cfg.K, alpha=1.0, delta=0.0, tau=tau, window=cfg.window, eps_z=cfg.eps_z,
                      eps_r=0.0, r_max=math.inf)
    updater = Updater("gxpo", PlainGD(lr=0.01), gxpo=gcfg)
    oracle = GradientOracle(q)
    spike = cfg.spike_step
    expected_s = spike + 1
    T = spike + 1 + cfg.gate_extra_steps
    for t in range(T):
        oracle.loss_scale = cfg.spike_factor if t == spike else 1.0
        before = oracle.pass_count
        theta, diag = updater.step(oracle, theta)
        used = oracle.pass_count - before
        want = 3 if t < expected_s else 1
        ok = used == want == diag.passes_this_step and (
            (updater.s_star is None) if t < spike else updater.s_star == expected_s)
        res.rows.append(dict(step=t, phase=diag.phase, passes_this_step=used,
                             passes_cumulative=oracle.pass_count, norm_gslow=diag.norm_gslow,
                             z_score=diag.z_score, s_star=updater.s_star, ok=ok))
        if not ok:
            res.failures.append(f"step {t}: {used} passes, s*={updater.s_star} (expected {want} passes, "
                                f"s*={'unset' if t < spike else expected_s})")
    if oracle.pass_count != total_passes(T, expected_s):
        res.failures.append(f"total passes {oracle.pass_count} != {total_passes(T, expected_s)}")
    return res


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(a - b)) / scale


def _kink_free(loss: GrpoLoss, theta, margin: float) -> bool:
    rho = loss._parts(theta)[2]
    lo, hi = 1.0 - loss.eps_clip, 1.0 + loss.eps_clip
    return bool(np.all(np.abs(rho - lo) > margin) and np.all(np.abs(rho - hi) > margin))


def gradcheck(cfg: RunConfig) -> SuiteResult:
    """Analytic gradients against central differences (h = 1e-6)."""
    res = SuiteResult("gradcheck")
    n = _n(cfg, 50)
    rng = _rng(cfg, 6)
    idx = 0
    for _ in range(n):
        d = int(rng.integers(1, 17))
        obj = make_logistic(d, n_samples=int(rng.integers(20, 200)), seed=int(rng.integers(2**31)))
        theta = rng.standard_normal(d)
        g, fd = obj.grad(theta), central_difference(obj.loss, theta)
        err = _relative_gap(g, fd)
        ok = err <= GRADCHECK_RTOL
        res.rows.append(dict(instance=idx, family="logistic", d=d, grad_norm=float(np.linalg.norm(g)),
                             rel_error=err, ok=ok))
        if not ok:
            res.failures.append(f"instance {idx} (logistic, d={d}): rel error {err:.3e}")
        idx += 1
    for _ in range(n):
        task = ToyTask.random(int(rng.integers(1, 9)), int(rng.integers(2, 7)), seed=int(rng.integers(2**31)))
        d = task.Q * task.V
        theta_old = rng.standard_normal(d)
        batch = sample_rollouts(task, theta_old, int(rng.integers(2, 9)), seed=int(rng.integers(2**31)))
        loss = GrpoLoss(task, batch, rng.standard_normal(d), eps_clip=0.2, beta=float(rng.uniform(1e-3, 0.1)))
        # the clipped surrogate has kinks at rho = 1 +- eps; sample away from them
        for _ in range(100):
            theta = theta_old + 0.2 * rng.standard_normal(d)
            if _kink_free(loss, theta, 1e-3):
                break
        g, fd = loss.grad(theta), central_difference(loss.loss, theta)
        err = _relative_gap(g, fd)
        ok = err <= GRADCHECK_RTOL
        res.rows.append(dict(instance=idx, family="grpo", d=d, grad_norm=float(np.linalg.norm(g)),
                             rel_error=err, ok=ok))
        if not ok:
            res.failures.append(f"instance {idx} (grpo, d={d}): rel error {err:.3e}")
        idx += 1
    return res


SUITES = {
    "exactness": exactness,
    "bounds": bounds,
    "bias": bias,
    "alignment": alignment,
    "budget": budget,
    "gate": gate,
    "gradcheck": gradcheck,
}


def run_suite(name: str, cfg: RunConfig | None = None) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    return SUITES[name](cfg or RunConfig())
