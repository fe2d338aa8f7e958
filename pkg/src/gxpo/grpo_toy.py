"""Tabular softmax policy with verifiable 0/1 rewards and a fixed-batch GRPO loss.

Each question has ``V`` candidate answers, one of them correct.  The policy is
a ``Q x V`` logit table flattened row-major into the parameter vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import SfpoConfig
from .core import GradientOracle, NonFiniteError, make_optimizer
from .runner import Updater
from .update import GxpoConfig


@dataclass(frozen=True)
class ToyTask:
    Q: int
    V: int
    correct: tuple[int, ...]

    def __post_init__(self):
        if len(self.correct) != self.Q or not all(0 <= c < self.V for c in self.correct):
            raise ValueError("correct answers must be Q indices in [0, V)")

    @classmethod
    def random(cls, Q: int = 8, V: int = 4, seed: int = 0) -> "ToyTask":
        rng = np.random.default_rng(seed)
        return cls(Q, V, tuple(int(c) for c in rng.integers(0, V, size=Q)))

    def reward(self, answers: np.ndarray) -> np.ndarray:
        return (answers == np.asarray(self.correct)[:, None]).astype(np.float64)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def expected_reward(task: ToyTask, theta) -> float:
    pi = softmax_rows(np.asarray(theta, dtype=np.float64).reshape(task.Q, task.V))
    return float(pi[np.arange(task.Q), list(task.correct)].mean())


@dataclass
class RolloutBatch:
    answers: np.ndarray  # (Q, G) int
    rewards: np.ndarray  # (Q, G) in {0, 1}
    behavior_probs: np.ndarray  # (Q, G) pi_old(answer)

    @property
    def group_size(self) -> int:
        return self.answers.shape[1]


def sample_rollouts(task: ToyTask, theta, G: int, seed) -> RolloutBatch:
    if G < 2:
        raise ValueError("group size must be >= 2")
    rng = np.random.default_rng(seed)
    pi = softmax_rows(np.asarray(theta, dtype=np.float64).reshape(task.Q, task.V))
    cdf = np.cumsum(pi, axis=1)
    u = rng.random((task.Q, G))
    answers = np.empty((task.Q, G), dtype=np.int64)
    for q in range(task.Q):
        answers[q] = np.minimum(np.searchsorted(cdf[q], u[q], side="right"), task.V - 1)
    probs = np.take_along_axis(pi, answers, axis=1)
    return RolloutBatch(answers, task.reward(answers), probs)


def group_advantages(rewards, eps_a: float = 1e-6) -> np.ndarray:
    """Group-normalized advantages along the last axis; zero-variance groups give 0."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.shape[-1] < 2:
        raise ValueError("group size must be >= 2")
    mean = r.mean(axis=-1, keepdims=True)
    std = r.std(axis=-1, keepdims=True)
    adv = (r - mean) / (std + eps_a)
    return np.where(std > 0, adv, 0.0)


class GrpoLoss:
    """Clipped-surrogate GRPO loss on a frozen batch, plus exact KL to a reference.

    ``loss = -mean_{q,i} min(rho A, clip(rho, 1-eps, 1+eps) A) + beta * mean_q KL(pi_q || ref_q)``
    """

    def __init__(self, task: ToyTask, batch: RolloutBatch, ref_logits, eps_clip: float = 0.2,
                 beta: float = 1e-3, eps_a: float = 1e-6):
        self.task = task
        self.batch = batch
        self.Q, self.V = task.Q, task.V
        self.dimension = task.Q * task.V
        ref = np.asarray(ref_logits, dtype=np.float64)
        if ref.size != self.dimension or batch.answers.shape[0] != task.Q:
            raise ValueError("batch / policy dimension mismatch")
        self.ref_logp = log_softmax_rows(ref.reshape(self.Q, self.V))
        self.eps_clip = eps_clip
        self.beta = beta
        self.advantages = group_advantages(batch.rewards, eps_a)
        self.last_clip_fraction = 0.0
        self.last_kl = 0.0

    def _parts(self, theta):
        logits = np.asarray(theta, dtype=np.float64).reshape(self.Q, self.V)
        logp = log_softmax_rows(logits)
        pi = np.exp(logp)
        lp_a = np.take_along_axis(logp, self.batch.answers, axis=1)
        rho = np.exp(lp_a - np.log(self.batch.behavior_probs))
        A = self.advantages
        clipped = np.clip(rho, 1.0 - self.eps_clip, 1.0 + self.eps_clip)
        unclipped_wins = rho * A <= clipped * A
        surr = np.where(unclipped_wins, rho * A, clipped * A)
        kl_q = np.sum(pi * (logp - self.ref_logp), axis=1)
        return logp, pi, rho, A, surr, unclipped_wins, kl_q

    def stats(self, theta) -> dict:
        _, _, rho, _, _, _, kl_q = self._parts(theta)
        outside = (rho < 1.0 - self.eps_clip) | (rho > 1.0 + self.eps_clip)
        return {"clip_fraction": float(outside.mean()), "kl": float(kl_q.mean())}

    def loss(self, theta) -> float:
        _, _, _, _, surr, _, kl_q = self._parts(theta)
        return float(-surr.mean() + self.beta * kl_q.mean())

    def grad(self, theta) -> np.ndarray:
        logp, pi, rho, A, _, live, kl_q = self._parts(theta)
        n = rho.size
        G = self.batch.group_size
        # d rho / d logits_q = rho * (e_a - pi_q)
        w = np.where(live, rho * A, 0.0) / n  # (Q, G)
        grad = np.zeros((self.Q, self.V))
        np.add.at(grad, (np.repeat(np.arange(self.Q), G), self.batch.answers.ravel()), -w.ravel())
        grad += w.sum(axis=1, keepdims=True) * pi
        kl_grad = pi * (logp - self.ref_logp - kl_q[:, None])
        grad += self.beta * kl_grad / self.Q
        outside = (rho < 1.0 - self.eps_clip) | (rho > 1.0 + self.eps_clip)
        self.last_clip_fraction = float(outside.mean())
        self.last_kl = float(kl_q.mean())
        return grad.ravel()


def grpo_loss_oracle(theta_old, batch: RolloutBatch, task: ToyTask, ref_logits, eps_clip: float = 0.2,
                     beta: float = 1e-3) -> GradientOracle:
    """Pass-counting oracle over a frozen batch sampled under ``theta_old``."""
    theta_old = np.asarray(theta_old, dtype=np.float64)
    pi_old = softmax_rows(theta_old.reshape(task.Q, task.V))
    if not np.allclose(np.take_along_axis(pi_old, batch.answers, axis=1), batch.behavior_probs,
                       rtol=1e-12, atol=0.0):
        raise ValueError("batch was not sampled under theta_old")
    return GradientOracle(GrpoLoss(task, batch, ref_logits, eps_clip, beta))


@dataclass
class ToyConfig:
    method: str = "gxpo"
    Q: int = 8
    V: int = 4
    task_seed: int = 0
    group_size: int = 8
    steps: int = 60
    optimizer: str = "adamw"
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float | None = None
    eps_clip: float = 0.2
    kl_beta: float = 1e-3
    # tighter ratio clamp than the library default: Adam probes flip gradient signs
    gxpo: GxpoConfig = field(default_factory=lambda: GxpoConfig(tau=2.0, r_max=1.0))
    sfpo: SfpoConfig = field(default_factory=lambda: SfpoConfig(tau=2.0))

    def make_optimizer(self):
        if self.optimizer == "adamw":
            return make_optimizer("adamw", self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.adam_eps,
                                  weight_decay=self.weight_decay, clip_norm=self.clip_norm)
        return make_optimizer(self.optimizer, self.lr, clip_norm=self.clip_norm)


def train_toy(cfg: ToyConfig, seed: int) -> tuple[list[dict], list]:
    """One training run; returns one row per outer step plus the step diagnostics."""
    task = ToyTask.random(cfg.Q, cfg.V, cfg.task_seed)
    theta = np.zeros(task.Q * task.V)
    ref = theta.copy()
    updater = Updater(cfg.method, cfg.make_optimizer(), gxpo=cfg.gxpo, sfpo=cfg.sfpo)
    passes = 0
    rows, diags = [], []
    for step in range(cfg.steps):
        batch = sample_rollouts(task, theta, cfg.group_size, seed=(seed, step))
        oracle = grpo_loss_oracle(theta, batch, task, ref, cfg.eps_clip, cfg.kl_beta)
        try:
            theta, diag = updater.step(oracle, theta)
        except NonFiniteError as exc:
            exc.dump = {"seed": seed, "method": cfg.method, **exc.dump}
            raise
        passes += oracle.pass_count
        loss = oracle.objective
        rows.append({
            "step": step,
            "mean_reward": float(batch.rewards.mean()),
            "expected_reward": expected_reward(task, theta),
            "passes_cumulative": passes,
            "phase": diag.phase,
            "clip_fraction": loss.last_clip_fraction,
            "kl_penalty": cfg.kl_beta * loss.last_kl,
            "z_score": diag.z_score,
        })
        diags.append(diag)
    return rows, diags


def aggregate_curves(runs: list[list[dict]]) -> list[dict]:
    """Per-step mean over seeds of the training-curve rows."""
    out = []
    for step_rows in zip(*runs):
        mr = np.array([r["mean_reward"] for r in step_rows])
        er = np.array([r["expected_reward"] for r in step_rows])
        out.append({
            "step": step_rows[0]["step"],
            "n_seeds": len(step_rows),
            "mean_reward": float(mr.mean()),
            "mean_reward_std": float(mr.std()),
            "expected_reward": float(er.mean()),
            "expected_reward_std": float(er.std()),
            "passes_cumulative": float(np.mean([r["passes_cumulative"] for r in step_rows])),
            "active_seeds": sum(r["phase"] == "active" for r in step_rows),
        })
    return out
