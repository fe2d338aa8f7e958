"""Shutoff and active-phase diagnostics of GXPO across the alpha x K grid.

Writes two CSVs at toy scale: ``shutoff_grid.csv`` (shutoff step and total
passes per alpha, K) and ``active_diagnostics.csv`` (medians over active
steps, per K).  Values are toy-scale and not comparable to LLM runs.
"""

import argparse
from pathlib import Path

import numpy as np

from gxpo.config import RunConfig
from gxpo.grpo_toy import train_toy
from gxpo.schema import write_csv

SHUTOFF = ("K", "alpha", "seed", "shutoff_step", "total_passes", "final_expected_reward")
ACTIVE = ("K", "policy_passes", "med_norm_g0", "med_norm_g1", "med_norm_gslow", "med_cos_g0_gslow",
          "retention_mean", "retention_std", "disp_ratio", "scale_mean", "inactive_fraction")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    cfg = RunConfig()
    shut, active = [], []
    for K in cfg.sweep_K:
        diags_K = []
        for alpha in cfg.sweep_alpha:
            for seed in range(args.seeds):
                rows, diags = train_toy(cfg.toy_config(K=K, alpha=alpha), seed)
                shut.append(dict(K=K, alpha=alpha, seed=seed, shutoff_step=diags[-1].s_star,
                                 total_passes=rows[-1]["passes_cumulative"],
                                 final_expected_reward=rows[-1]["expected_reward"]))
                diags_K += [d for d in diags if d.phase == "active"]

        def med(attr):
            vals = [getattr(d, attr) for d in diags_K if getattr(d, attr) is not None]
            return float(np.median(vals)) if vals else None

        active.append(dict(
            K=K, policy_passes=sorted({d.passes_this_step for d in diags_K}), med_norm_g0=med("norm_g0"),
            med_norm_g1=med("norm_g1"), med_norm_gslow=med("norm_gslow"), med_cos_g0_gslow=med("cos_g0_gslow"),
            retention_mean=med("retention_mean"), retention_std=med("retention_std"),
            disp_ratio=med("disp_ratio"), scale_mean=med("scale_mean"),
            inactive_fraction=1.0 - med("active_fraction"),
        ))
    for r in active:
        print(f"K={r['K']:>2} passes {r['policy_passes']} cos {r['med_cos_g0_gslow']:.3f} "
              f"retention {r['retention_mean']:.3f} +- {r['retention_std']:.3f} "
              f"disp {r['disp_ratio']:.3f} scale {r['scale_mean']:.3f}")
    out = Path(args.out)
    print("->", write_csv(out / "shutoff_grid.csv", SHUTOFF, shut))
    print("->", write_csv(out / "active_diagnostics.csv", ACTIVE, active))


if __name__ == "__main__":
    main()
