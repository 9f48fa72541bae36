"""Share of review periods on which every good event holds, for a range of nominal period lengths.

    python scripts/good_events.py --network scripts/configs/net_b.json --l 50 100 200 --reps 100
"""

import argparse

import numpy as np

from crpnet.diagnostics import monitor_good_events
from crpnet.network import load_network
from crpnet.planner import make_static_plan
from crpnet.policy import fixed_parameters
from crpnet.simulator import run_dr_trajectory


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--network", required=True)
    ap.add_argument("--l", type=float, nargs="+", default=[50.0, 100.0, 200.0])
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--periods", type=float, default=20.0, help="horizon in multiples of l")
    ap.add_argument("--seed", type=int, default=10)
    args = ap.parse_args(argv)

    net = load_network(args.network)
    plan = make_static_plan(net)
    print("l,median_N,mean_N,A,B,C,D,E,case2")
    for l in args.l:
        params = fixed_parameters(l, plan)
        per_rep, flags, case2, periods = [], np.zeros(5), 0, 0
        for rep in range(args.reps):
            traj = run_dr_trajectory(net, plan, params, args.periods * l, seed=args.seed, replication=rep)
            diags = monitor_good_events(traj)
            per_rep.append(np.mean([d.N for d in diags]))
            flags += np.sum([[d.A, d.B, d.C, d.D, d.E] for d in diags], axis=0)
            case2 += sum(p.case == 2 for p in traj.periods)
            periods += len(diags)
        rates = ",".join(f"{v:.4f}" for v in flags / periods)
        print(f"{l:g},{np.median(per_rep):.4f},{np.mean(per_rep):.4f},{rates},{case2 / periods:.4f}")


if __name__ == "__main__":
    main()
