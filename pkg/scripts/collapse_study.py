"""Median of the scaled non-cheapest queue maxima across r, with the collapse bound.

    python scripts/collapse_study.py --network scripts/configs/net_b.json --r 8 16 32 --reps 200
"""

import argparse

import numpy as np

from crpnet.experiment import ExperimentConfig, run_experiment
from crpnet.network import load_network, network_to_dict


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--network", required=True)
    ap.add_argument("--r", type=float, nargs="+", default=[8.0, 16.0, 32.0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--eps2", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    cfg = ExperimentConfig(network=network_to_dict(load_network(args.network)), policies=["dr", "priority"],
                           r_values=args.r, eps2=args.eps2, replications=args.reps, seed=args.seed,
                           tail_times=[1.0], workers=args.workers)
    table = run_experiment(cfg)
    print("policy,r,median,p90,bound,within_bound")
    for (policy, r), reps in table.replicates.items():
        col = np.array([rep["collapse"] for rep in reps])
        bound = table.select(policy=policy, r=r, statistic="collapse_median")[0]["reference"]
        within = f"{np.mean(col <= bound):.3f}" if bound is not None else ""
        print(f"{policy},{r:g},{np.median(col):.4f},{np.quantile(col, 0.9):.4f},"
              f"{'' if bound is None else f'{bound:.4f}'},{within}")


if __name__ == "__main__":
    main()
