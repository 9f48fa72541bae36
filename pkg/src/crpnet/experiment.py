"""Replication studies across the scaling sequence and their machine-readable output."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import monitor_good_events, queue_bound_constant
from .network import NetworkSpec, load_network, network_from_dict, network_to_dict
from .planner import StaticPlan, make_static_plan
from .policy import Eps2RangeError, scale_parameters
from .scaling import collapse_statistic, compute_sigma2, diffusion_scale, rbm_tail
from .simulator import accumulate_cost, run_baseline_trajectory, run_dr_trajectory

POLICIES = ("dr", "priority", "longest-queue")
COLUMNS = ("policy", "r", "statistic", "x", "t", "value", "stderr", "reference")
DEFAULT_TAIL_MULTIPLES = (0.5, 1.0, 1.5)
DEFAULT_TAIL_TIMES = (0.5, 1.0)


@dataclass
class ExperimentConfig:
    """A replication study.  ``network`` is a path to a network JSON file or the
    parsed document itself.  ``tail_levels`` are cost levels x; when empty they
    default to multiples of (h_1/y_1) sigma sqrt(t) at each evaluation time."""

    network: str | dict
    policies: list[str] = field(default_factory=lambda: ["dr"])
    r_values: list[float] = field(default_factory=lambda: [8, 16, 32])
    eps2: float = 0.1
    horizon: float = 1.0
    replications: int = 200
    seed: int = 0
    output_dir: str = "results"
    tail_levels: list[float] = field(default_factory=list)
    tail_times: list[float] = field(default_factory=lambda: list(DEFAULT_TAIL_TIMES))
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        bad = [p for p in self.policies if p not in POLICIES]
        if bad:
            raise ValueError(f"unknown policies {bad}; choose from {POLICIES}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    def load_network(self) -> NetworkSpec:
        if isinstance(self.network, dict):
            return network_from_dict(self.network)
        return load_network(self.network)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ExperimentConfig":
        path = Path(path)
        cfg = json.loads(path.read_text())
        net = cfg.get("network")
        if isinstance(net, str) and not os.path.isabs(net):
            cfg["network"] = str(path.parent / net)
        return cls.from_dict(cfg)


@dataclass
class ResultTable:
    rows: list[dict] = field(default_factory=list)
    replicates: dict = field(default_factory=dict)
    sigma2: float | None = None

    def add(self, policy, r, statistic, x, t, value, stderr, reference) -> None:
        self.rows.append({"policy": policy, "r": r, "statistic": statistic, "x": x, "t": t,
                          "value": value, "stderr": stderr, "reference": reference})

    def select(self, **match) -> list[dict]:
        return [row for row in self.rows if all(row[k] == v for k, v in match.items())]

    def to_dict(self) -> dict:
        return {"columns": list(COLUMNS), "rows": self.rows, "sigma2": self.sigma2}

    @classmethod
    def from_dict(cls, d: dict) -> "ResultTable":
        return cls(rows=[dict(row) for row in d["rows"]], sigma2=d.get("sigma2"))


def binomial_stderr(p: float, reps: int) -> float:
    return math.sqrt(p * (1.0 - p) / reps)


def tail_grid(cfg: ExperimentConfig, plan: StaticPlan, sigma: float) -> list[tuple[float, float]]:
    """(x, t) pairs in cost units at which tail probabilities are evaluated."""
    ratio = plan.h[0] / plan.y[0]
    pairs = []
    for t in cfg.tail_times:
        levels = cfg.tail_levels or [c * ratio * sigma * math.sqrt(t) for c in DEFAULT_TAIL_MULTIPLES]
        pairs.extend((float(x), float(t)) for x in levels)
    return pairs


@dataclass
class _Job:
    net: dict
    policy: str
    r: float
    eps2: float
    horizon: float
    seed: int
    replication: int
    times: list[float]


_PLAN_CACHE: dict = {}


def _plan_for(net_doc: dict) -> tuple[NetworkSpec, StaticPlan]:
    key = json.dumps(net_doc, sort_keys=True)
    if key not in _PLAN_CACHE:
        net = network_from_dict(net_doc)
        _PLAN_CACHE[key] = (net, make_static_plan(net))
    return _PLAN_CACHE[key]


def simulate_replication(job: _Job) -> dict:
    """One replication: simulate to r^2 T, scale, and reduce to per-replication numbers."""
    net, plan = _plan_for(job.net)
    r = job.r
    raw_horizon = r ** 2 * job.horizon
    if job.policy == "dr":
        params = scale_parameters(r, job.eps2, plan)
        traj = run_dr_trajectory(net, plan, params, raw_horizon, seed=job.seed, replication=job.replication)
    else:
        traj = run_baseline_trajectory(net, plan, raw_horizon, seed=job.seed, discipline=job.policy,
                                       replication=job.replication)
    times = np.asarray(job.times, dtype=float)
    scaled = diffusion_scale(traj, r, grid=np.concatenate([[0.0], times]), T=job.horizon)
    out = {
        "replication": job.replication,
        "cost_at": (scaled.Z_hat[1:] @ net.holding_cost).tolist(),
        "W_at": scaled.W_hat[1:].tolist(),
        "z_sup": scaled.z_sup.tolist(),
        "average_cost": accumulate_cost(traj, net.holding_cost)[1] / r,
    }
    if job.policy == "dr":
        out["collapse"] = collapse_statistic(scaled)[0]
        diags = monitor_good_events(traj)
        out["periods"] = len(diags)
        out["good"] = sum(d.N for d in diags)
        out["case2"] = sum(p.case == 2 for p in traj.periods)
    else:
        rest = plan.buffer_permutation[1:]
        out["collapse"] = float(np.max(scaled.z_sup[rest])) if rest else 0.0
    return out


def _run_jobs(jobs: list[_Job], workers: int) -> list[dict]:
    if workers <= 1:
        return [simulate_replication(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so the reduction below sees replications in index order
        return list(pool.map(simulate_replication, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_experiment(cfg: ExperimentConfig, net: NetworkSpec | None = None) -> ResultTable:
    """Run every (policy, r) cell and aggregate in replication-index order."""
    net = cfg.load_network() if net is None else net
    plan = make_static_plan(net)  # raises AssumptionError before any simulation
    for d in list(net.interarrival_dist) + list(net.service_dist):
        if d is not None and not cfg.eps2 < d.eps1 / 3:
            raise Eps2RangeError(f"eps2 = {cfg.eps2} must be below eps1/3 = {d.eps1 / 3:.6g}")
    stats = compute_sigma2(net, plan)
    sigma = math.sqrt(stats.sigma2)
    pairs = tail_grid(cfg, plan, sigma)
    times = sorted({t for _, t in pairs})
    doc = network_to_dict(net)
    ratio = float(plan.h[0] / plan.y[0])
    table = ResultTable(sigma2=stats.sigma2)
    for policy in cfg.policies:
        for r in cfg.r_values:
            jobs = [_Job(doc, policy, float(r), cfg.eps2, cfg.horizon, cfg.seed, i, times)
                    for i in range(cfg.replications)]
            reps = _run_jobs(jobs, cfg.workers)
            table.replicates[(policy, float(r))] = reps
            _aggregate(table, policy, float(r), reps, pairs, times, sigma, ratio, plan, cfg)
    return table


def _reference(level_w: float, t: float, sigma: float) -> float | None:
    return rbm_tail(level_w, t, sigma) if sigma > 0 else None


def _aggregate(table, policy, r, reps, pairs, times, sigma, ratio, plan, cfg) -> None:
    n = len(reps)
    for x, t in pairs:
        ti = times.index(t)
        w = x / ratio
        ref = _reference(w, t, sigma)
        p_cost = sum(rep["cost_at"][ti] > x for rep in reps) / n
        table.add(policy, r, "tail_cost", x, t, p_cost, binomial_stderr(p_cost, n), ref)
        p_w = sum(rep["W_at"][ti] > w for rep in reps) / n
        table.add(policy, r, "tail_workload", w, t, p_w, binomial_stderr(p_w, n), ref)
    col = np.array([rep["collapse"] for rep in reps])
    bound = None
    if policy == "dr":
        l = float(r) ** (1 - cfg.eps2)
        bound = queue_bound_constant(plan) * l / r
    table.add(policy, r, "collapse_median", None, cfg.horizon, float(np.median(col)), None, bound)
    if bound is not None:
        frac = float(np.mean(col <= bound))
        table.add(policy, r, "collapse_within_bound", None, cfg.horizon, frac, binomial_stderr(frac, n), bound)
        periods = sum(rep["periods"] for rep in reps)
        good = sum(rep["good"] for rep in reps) / periods
        case2 = sum(rep["case2"] for rep in reps) / periods
        table.add(policy, r, "good_event_fraction", None, cfg.horizon, good, binomial_stderr(good, periods), None)
        table.add(policy, r, "case2_fraction", None, cfg.horizon, case2, binomial_stderr(case2, periods), None)
    cost = np.array([rep["average_cost"] for rep in reps])
    se = float(np.std(cost, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    table.add(policy, r, "average_cost", None, cfg.horizon, float(np.mean(cost)), se, None)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_results(table: ResultTable, directory: str | os.PathLike, cfg: ExperimentConfig | None = None) -> list[Path]:
    """Write results.csv, results.json and manifest.json into ``directory``."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "results.csv", out / "results.json", out / "manifest.json"]
        with open(paths[0], "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS)
            for row in table.rows:
                writer.writerow([_fmt(row[c]) for c in COLUMNS])
        paths[1].write_text(json.dumps(table.to_dict(), indent=2, sort_keys=True))
        manifest = {"version": __version__, "config": cfg.to_dict() if cfg is not None else None,
                    "seed": cfg.seed if cfg is not None else None, "columns": list(COLUMNS)}
        paths[2].write_text(json.dumps(manifest, indent=2, sort_keys=True))
    except OSError as exc:
        raise OSError(f"could not write results to {out}: {exc}") from exc
    return paths


def read_results(directory: str | os.PathLike) -> ResultTable:
    return ResultTable.from_dict(json.loads((Path(directory) / "results.json").read_text()))
