"""Workload and cost tails at t = 1 against the reflected Brownian motion reference.

    python scripts/tail_study.py --network scripts/configs/net_b.json --r 8 32 --reps 2000
"""

import argparse

from crpnet.experiment import ExperimentConfig, run_experiment
from crpnet.network import load_network, network_to_dict


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--network", required=True)
    ap.add_argument("--r", type=float, nargs="+", default=[8.0, 32.0])
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--policies", nargs="+", default=["dr", "priority"])
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    cfg = ExperimentConfig(network=network_to_dict(load_network(args.network)), policies=args.policies,
                           r_values=args.r, replications=args.reps, seed=args.seed, tail_times=[1.0],
                           workers=args.workers)
    table = run_experiment(cfg)
    print(f"sigma2 = {table.sigma2:.6g}")
    print("policy,r,statistic,x,empirical,stderr,reference")
    for row in table.rows:
        if row["statistic"] in ("tail_workload", "tail_cost"):
            print(f"{row['policy']},{row['r']:g},{row['statistic']},{row['x']:.4f},{row['value']:.4f},"
                  f"{row['stderr']:.4f},{row['reference']:.4f}")


if __name__ == "__main__":
    main()
