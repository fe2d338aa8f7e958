"""How tight is the combined displacement bound as the step size shrinks?

For each family and K, reports the median and max of measured error over the
bound across random instances at several step sizes.
"""

import argparse
from pathlib import Path

import numpy as np

from gxpo.schema import write_csv
from gxpo.testbed import make_cubic, make_random_quadratic
from gxpo.theory import displacement_error

COLUMNS = ("family", "K", "eta", "instances", "median_ratio", "max_ratio", "median_E_off",
           "median_E_ratio", "median_E_nonquad", "violations")


def build(family, d, seed, rng):
    if family == "cubic":
        return make_cubic(d, rng.uniform(-0.05, 0.05), seed=seed)
    return make_random_quadratic(d, diagonal=family == "diagonal", seed=seed)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--instances", type=int, default=40)
    args = ap.parse_args()
    rows = []
    for family in ("diagonal", "spd", "cubic"):
        for K in (3, 5, 10):
            for eta in (1e-1, 3e-2, 1e-2, 3e-3, 1e-3):
                rng = np.random.default_rng([K, int(eta * 1e4)])
                reps = []
                for i in range(args.instances):
                    d = int(rng.integers(2, 17))
                    obj = build(family, d, i, rng)
                    theta0 = rng.standard_normal(d)
                    delta = float(np.quantile(np.abs(obj.grad(theta0)), 0.2))
                    reps.append(displacement_error(obj, theta0, eta, K, delta, family=family))
                ratio = [r.measured_error / r.bound for r in reps if r.bound > 0]
                rows.append(dict(family=family, K=K, eta=eta, instances=len(reps),
                                 median_ratio=float(np.median(ratio)), max_ratio=float(np.max(ratio)),
                                 median_E_off=float(np.median([r.E_off for r in reps])),
                                 median_E_ratio=float(np.median([r.E_ratio for r in reps])),
                                 median_E_nonquad=float(np.median([r.E_nonquad for r in reps])),
                                 violations=sum(not r.satisfied for r in reps)))
                r = rows[-1]
                print(f"{family:>8} K={K:>2} eta={eta:.0e}  measured/bound median {r['median_ratio']:.3f} "
                      f"max {r['max_ratio']:.3f}  violations {r['violations']}")
    print("->", write_csv(Path(args.out) / "bound_scan.csv", COLUMNS, rows))


if __name__ == "__main__":
    main()
