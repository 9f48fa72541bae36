"""Command-line entry point: ``crpnet <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .diagnostics import monitor_good_events
from .network import StructuralError, load_network
from .planner import AssumptionError, make_static_plan, solve_static_plan, verify_assumptions
from .policy import fixed_parameters, make_plan, scale_parameters
from .scaling import compute_sigma2, default_grid
from .simulator import KIND_NAMES, run_baseline_trajectory, run_dr_trajectory

EXIT_OK, EXIT_FAIL, EXIT_ASSUMPTION, EXIT_IO = 0, 1, 2, 3


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_plan(args) -> int:
    plan = make_static_plan(load_network(args.network))
    _dump(plan.to_dict())
    return EXIT_OK


def cmd_check(args) -> int:
    net = load_network(args.network)
    report = verify_assumptions(solve_static_plan(net), net)
    _dump(report.to_dict())
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_policy_step(args) -> int:
    net = load_network(args.network)
    plan = make_static_plan(net)
    params = fixed_parameters(args.l, plan, delta=args.delta)
    q = np.array([float(v) for v in args.q.split(",")])
    if len(q) != net.num_buffers:
        raise ValueError(f"--q needs {net.num_buffers} values, got {len(q)}")
    rp = make_plan(plan.to_permuted(q), params, plan)
    _dump(rp.to_dict(plan))
    return EXIT_OK


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_simulate(args) -> int:
    net = load_network(args.network)
    plan = make_static_plan(net)
    raw = args.r ** 2 * args.horizon
    if args.policy == "dr":
        params = scale_parameters(args.r, args.eps2, plan)
        traj = run_dr_trajectory(net, plan, params, raw, seed=args.seed)
    else:
        traj = run_baseline_trajectory(net, plan, raw, seed=args.seed, discipline=args.policy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = net.buffer_names
    W = traj.W
    _write_csv(out / "events.csv", ["t", "type", "index", *[f"Z_{b}" for b in names], "W"],
               ([repr(float(traj.t[i])), KIND_NAMES[traj.kind[i]], int(traj.idx[i]),
                 *[int(v) for v in traj.Z[i]], repr(float(W[i]))] for i in range(len(traj))))
    rows = []
    if traj.periods:
        for d, p in zip(monitor_good_events(traj), traj.periods):
            rows.append([p.k, repr(p.tau), p.case, repr(p.idle), repr(p.exec_time),
                         int(d.A), int(d.B), int(d.C), int(d.D), int(d.E), int(d.N)])
    _write_csv(out / "periods.csv", ["k", "tau", "case", "idle", "Texe", "A", "B", "C", "D", "E", "N"], rows)
    print(f"wrote {len(traj)} events and {len(rows)} periods to {out}")
    return EXIT_OK


def cmd_sigma(args) -> int:
    net = load_network(args.network)
    stats = compute_sigma2(net, make_static_plan(net))
    _dump({"sigma2": stats.sigma2, "Gamma": stats.Gamma.tolist()})
    return EXIT_OK


def cmd_scale(args) -> int:
    with open(args.traj, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    zcols = [i for i, h in enumerate(header) if h.startswith("Z_")]
    t = np.array([float(r[0]) for r in rows])
    Z = np.array([[float(r[i]) for i in zcols] for r in rows]).reshape(len(rows), len(zcols))
    W = np.array([float(r[header.index("W")]) for r in rows])
    r = float(args.r)
    T = t[-1] / r ** 2 if args.T is None else args.T
    grid = default_grid(T, points=args.points)
    idx = np.clip(np.searchsorted(t, grid * r ** 2, side="right") - 1, 0, None)
    out_rows = ([repr(float(g)), *[repr(float(v)) for v in Z[i] / r], repr(float(W[i] / r))]
                for g, i in zip(grid, idx))
    out = Path(args.out) if args.out else None
    head = ["t", *[f"{header[i]}_hat" for i in zcols], "W_hat"]
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(head)
        w.writerows(out_rows)
    else:
        _write_csv(out, head, out_rows)
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiment import ExperimentConfig, emit_results, run_experiment

    try:
        cfg = ExperimentConfig.from_json(args.config)
        if args.workers is not None:
            cfg.workers = args.workers
        net = cfg.load_network()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        table = run_experiment(cfg, net)
    except AssumptionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _dump(exc.report.to_dict())
        return EXIT_ASSUMPTION
    try:
        paths = emit_results(table, args.out or cfg.output_dir, cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crpnet", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="solve the static planning problem and print policy data")
    p.add_argument("network")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("check", help="check heavy traffic, resource pooling and BAB")
    p.add_argument("network")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("policy-step", help="print the review plan for one queue vector")
    p.add_argument("--network", required=True)
    p.add_argument("--l", type=float, required=True, help="nominal period length")
    p.add_argument("--q", required=True, help="comma-separated queue lengths")
    p.add_argument("--delta", type=float, default=None, help="override the ball radius factor")
    p.set_defaults(func=cmd_policy_step)

    p = sub.add_parser("simulate", help="simulate one trajectory and write events/periods CSV")
    p.add_argument("--network", required=True)
    p.add_argument("--policy", choices=["dr", "priority", "longest-queue"], default="dr")
    p.add_argument("--r", type=float, default=8.0)
    p.add_argument("--eps2", type=float, default=0.1)
    p.add_argument("--horizon", type=float, default=1.0, help="diffusion time; raw time is r^2 * horizon")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sigma", help="print Gamma and the workload variance")
    p.add_argument("--network", required=True)
    p.set_defaults(func=cmd_sigma)

    p = sub.add_parser("scale", help="diffusion-scale an events CSV onto a grid")
    p.add_argument("--traj", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--points", type=int, default=512)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("experiment", help="run a replication study from a config JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override the configured output directory")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AssumptionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (StructuralError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
