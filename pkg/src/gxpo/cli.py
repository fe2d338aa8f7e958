"""``gxpo verify | train | sweep`` entry point.

Exit status: 0 when everything requested passed, 1 when a suite instance fails
or a run diverges, 2 for usage and config errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import schema
from .config import ConfigError, RunConfig, load_config
from .core import NonFiniteError
from .grpo_toy import aggregate_curves, train_toy
from .suites import SUITES, run_suite


def _fmt_num(x: float) -> str:
    return f"{x:g}"


def cmd_verify(cfg: RunConfig, suites: list[str], out: Path) -> int:
    status = 0
    for name in suites:
        res = run_suite(name, cfg)
        path = schema.write_csv(out / f"verify_{name}.csv", res.columns, res.rows)
        print(f"{'PASS' if res.ok else 'FAIL'} {res.summary()} -> {path}")
        if not res.ok:
            status = 1
    return status


def _train_runs(cfg: RunConfig, K: int | None = None, alpha: float | None = None):
    toy = cfg.toy_config(K=K, alpha=alpha)
    return {seed: train_toy(toy, seed) for seed in cfg.seeds}


def cmd_train(cfg: RunConfig, out: Path) -> int:
    runs = _train_runs(cfg)
    for seed, (rows, diags) in runs.items():
        schema.write_csv(out / f"train_{cfg.method}_seed{seed}.csv", schema.TRAIN, rows)
        schema.write_csv(out / f"diag_{cfg.method}_seed{seed}.csv", schema.DIAGNOSTICS,
                         [d.as_row() for d in diags])
    agg = aggregate_curves([rows for rows, _ in runs.values()])
    path = schema.write_csv(out / f"train_{cfg.method}_aggregate.csv", schema.AGGREGATE, agg)
    if agg:
        last = agg[-1]
        print(f"{cfg.method}: {len(cfg.seeds)} seeds, {len(agg)} steps, final expected reward "
              f"{last['expected_reward']:.4f}, batch reward {last['mean_reward']:.4f}, "
              f"passes {last['passes_cumulative']:g} -> {path}")
    return 0


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    for alpha in cfg.sweep_alpha:
        for K in cfg.sweep_K:
            runs = _train_runs(cfg, K=K, alpha=alpha)
            agg = aggregate_curves([rows for rows, _ in runs.values()])
            name = f"sweep_{cfg.method}_alpha{_fmt_num(alpha)}_K{K}.csv"
            schema.write_csv(out / name, schema.AGGREGATE, agg)
            final = agg[-1]["expected_reward"] if agg else float("nan")
            print(f"alpha={_fmt_num(alpha)} K={K}: final expected reward {final:.4f} -> {out / name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config `out`)")
    common.add_argument("--seed", metavar="N", type=int,
                        help="single training seed, or the instance seed for verify")

    p = argparse.ArgumentParser(prog="gxpo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    choices = sorted(SUITES) + ["all"]
    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("suite", nargs="?", choices=choices, help="suite to run (default: all)")
    v.add_argument("--suite", dest="suite_flag", metavar="NAME", choices=choices)
    sub.add_parser("train", parents=[common], help="toy training runs, one CSV per seed")
    sub.add_parser("sweep", parents=[common], help="alpha x K grid of seed-averaged curves")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"gxpo: config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out if args.out is not None else cfg.out)

    try:
        if args.command == "verify":
            if args.suite and args.suite_flag and args.suite != args.suite_flag:
                parser.error("conflicting suite names")
            name = args.suite_flag or args.suite or "all"
            if args.seed is not None:
                cfg = replace(cfg, suite_seed=args.seed)
            return cmd_verify(cfg, list(SUITES) if name == "all" else [name], out)
        cfg = cfg.with_seed(args.seed)
        if args.command == "train":
            return cmd_train(cfg, out)
        return cmd_sweep(cfg, out)
    except NonFiniteError as exc:
        print(f"gxpo: diverged: {exc}; state: {exc.dump}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
