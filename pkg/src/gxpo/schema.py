"""Fixed CSV column sets and a deterministic writer.

The same tables are rendered into ``CSV_SCHEMA.md`` at the repository root.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

DIAGNOSTICS = (
    "step", "phase", "passes_this_step", "norm_g0", "norm_g1", "norm_gslow", "cos_g0_gslow",
    "active_fraction", "retention_mean", "retention_std", "scale_mean", "disp_ratio", "demoted",
    "z_score", "s_star",
)

TRAIN = ("step", "mean_reward", "expected_reward", "passes_cumulative", "phase",
         "clip_fraction", "kl_penalty", "z_score")

AGGREGATE = ("step", "n_seeds", "mean_reward", "mean_reward_std", "expected_reward",
             "expected_reward_std", "passes_cumulative", "active_seeds")

VERIFY = {
    "exactness": ("instance", "d", "K", "eta", "max_rel_error", "passes", "ok"),
    "bounds": ("instance", "family", "d", "K", "eta", "delta", "rho_max", "R", "G", "M3", "C_KR", "D_KR",
               "E_off", "E_ratio", "E_nonquad", "bound", "roundoff", "measured_error",
               "inactive_fraction", "hypotheses_ok", "satisfied", "note"),
    "bias": ("instance", "d", "eta", "min_abs_g0", "max_abs_bias", "max_abs_residual", "ok"),
    "alignment": ("instance", "family", "d", "K", "eta", "alpha", "condition_lhs", "condition_rhs",
                  "condition_holds", "modelled_inner", "measured_cos", "ok"),
    "budget": ("instance", "seed", "d", "K", "m", "eta", "rho", "loss_initial", "loss_gxpo", "loss_bound",
               "max_rel_error", "pass_count", "expected_passes", "points_match", "loss_bound_holds",
               "loss_bound_strict", "passes_match", "ok"),
    "gate": ("step", "phase", "passes_this_step", "passes_cumulative", "norm_gslow", "z_score", "s_star", "ok"),
    "gradcheck": ("instance", "family", "d", "grad_norm", "rel_error", "ok"),
}

DESCRIPTIONS = {
    "diagnostics": "per outer step of any update rule (`diag_<method>_seed<N>.csv`)",
    "train": "toy training curve per seed (`train_<method>_seed<N>.csv`)",
    "aggregate": "seed-averaged curve (`train_<method>_aggregate.csv`, `sweep_<method>_alpha<a>_K<k>.csv`)",
}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    return path


def render_markdown() -> str:
    lines = ["# CSV schemas", "",
             "Every CSV written by the `gxpo` CLI has exactly the header listed here.",
             "Empty cells mean \"not applicable\" (e.g. `norm_g1` on a fallback step).", ""]
    for name, cols in (("diagnostics", DIAGNOSTICS), ("train", TRAIN), ("aggregate", AGGREGATE)):
        lines += [f"## {name}", "", DESCRIPTIONS[name], "", "`" + ",".join(cols) + "`", ""]
    for suite, cols in VERIFY.items():
        lines += [f"## verify {suite}", "", f"`verify_{suite}.csv`", "", "`" + ",".join(cols) + "`", ""]
    return "\n".join(lines)
