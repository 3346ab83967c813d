"""Relative error of the total-weight estimate as k grows.

For a Pareto population, draws ``--seeds`` master samples and reports the
relative bias and RMSE of the subset-sum estimate of the total at each k,
along with the fitted log-log slope of RMSE against k (about -0.5 expected).

    python3 scripts/error_decay.py --n 100000 --seeds 50
"""

import argparse
import math

import numpy as np

from prisample.estimate import subset_sum
from prisample.model import TRUE, Feature, node
from prisample.playout import sample_by_predicate
from prisample.sampler import create_master


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--alpha", type=float, default=1.2)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--ks", default="250,500,1000,2000,4000,8000")
    ap.add_argument("--pop-seed", type=int, default=404)
    args = ap.parse_args()

    rng = np.random.default_rng(args.pop_seed)
    w = rng.pareto(args.alpha, args.n) + 1.0
    recs = [node(f"v{i}", w[i], 1, 0) for i in range(args.n)]
    truth = math.fsum(w.tolist())
    ks = [int(k) for k in args.ks.split(",")]

    err = {k: [] for k in ks}
    for seed in range(args.seeds):
        master = create_master(recs, Feature("fo"), 1000 + seed)
        for k in ks:
            err[k].append(subset_sum(sample_by_predicate(master, TRUE, k), "fo") / truth - 1)

    print("k,rel_bias,rel_rmse")
    rmse = []
    for k in ks:
        e = np.asarray(err[k])
        rmse.append(math.sqrt(np.mean(e**2)))
        print(f"{k},{e.mean():.3e},{rmse[-1]:.3e}")
    slope = np.polyfit(np.log(ks), np.log(rmse), 1)[0]
    print(f"# log-log slope of RMSE vs k: {slope:.3f}")


if __name__ == "__main__":
    main()
