"""Run configuration parsed from plain ``key=value`` files."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .baselines import SfpoConfig
from .grpo_toy import ToyConfig
from .update import GxpoConfig


class ConfigError(ValueError):
    pass


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _opt_float(s: str) -> float | None:
    return None if s.lower() in ("none", "") else float(s)


def _bool(s: str) -> bool:
    if s.lower() not in ("true", "false", "1", "0"):
        raise ValueError(f"expected true/false, got {s!r}")
    return s.lower() in ("true", "1")


@dataclass
class RunConfig:
    method: str = "gxpo"
    # update rule
    K: int = 3
    alpha: float = 0.5
    delta: float = 1e-8
    tau: float | None = 2.0
    window: int = 20
    eps_z: float = 1e-8
    eps_r: float = 1e-6
    r_max: float = 1.0
    restore_moments: bool = False
    # inner optimizer
    optimizer: str = "adamw"
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float | None = None
    # toy task and loss
    Q: int = 8
    V: int = 4
    task_seed: int = 0
    group_size: int = 8
    eps_clip: float = 0.2
    kl_beta: float = 1e-3
    # run control
    steps: int = 60
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out: str = "runs"
    sweep_alpha: tuple[float, ...] = (0.1, 0.5, 1.0)
    sweep_K: tuple[int, ...] = (3, 5, 10)
    # verification suites
    instances: int | None = None
    suite_seed: int = 0
    spike_step: int = 50
    spike_factor: float = 10.0
    gate_extra_steps: int = 1000

    def gxpo_config(self, **over) -> GxpoConfig:
        kw = dict(K=self.K, alpha=self.alpha, delta=self.delta,
                  tau=math.inf if self.tau is None else self.tau, window=self.window,
                  eps_z=self.eps_z, eps_r=self.eps_r, r_max=self.r_max, restore_moments=self.restore_moments)
        kw.update(over)
        return GxpoConfig(**kw)

    def sfpo_config(self, **over) -> SfpoConfig:
        kw = dict(K=self.K, alpha=self.alpha, tau=self.tau, window=self.window, eps_z=self.eps_z)
        kw.update(over)
        return SfpoConfig(**kw)

    def toy_config(self, K: int | None = None, alpha: float | None = None) -> ToyConfig:
        over = {}
        if K is not None:
            over["K"] = K
        if alpha is not None:
            over["alpha"] = alpha
        return ToyConfig(
            method=self.method, Q=self.Q, V=self.V, task_seed=self.task_seed, group_size=self.group_size,
            steps=self.steps, optimizer=self.optimizer, lr=self.lr, beta1=self.beta1, beta2=self.beta2,
            adam_eps=self.adam_eps, weight_decay=self.weight_decay, clip_norm=self.clip_norm,
            eps_clip=self.eps_clip, kl_beta=self.kl_beta,
            gxpo=self.gxpo_config(**over), sfpo=self.sfpo_config(**over),
        )

    def validate(self) -> "RunConfig":
        if self.method not in ("grpo", "sfpo", "gxpo"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.optimizer not in ("plain-gd", "adamw"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.steps < 0 or not self.seeds:
            raise ConfigError("steps must be >= 0 and at least one seed given")
        try:
            self.toy_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def with_seed(self, seed: int | None) -> "RunConfig":
        return self if seed is None else replace(self, seeds=(seed,))


_PARSERS = {
    "int": int, "float": float, "str": str, "bool": _bool,
    "float | None": _opt_float, "int | None": lambda s: None if s.lower() == "none" else int(s),
    "tuple[int, ...]": _ints, "tuple[float, ...]": _floats,
}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key=value`` lines; ``#`` starts a comment; unknown keys are errors."""
    types = {f.name: f.type for f in fields(RunConfig)}
    kw = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in kw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            kw[key] = _PARSERS[types[key]](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    try:
        return RunConfig(**kw).validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    path = Path(path)
    return parse_config(path.read_text(), str(path))
