"""First-order network data, increment distributions and the JSON network format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

FAMILIES = ("exponential", "uniform", "deterministic", "gamma", "lognormal", "pareto")
DEFAULT_EPS1 = 0.5


class StructuralError(ValueError):
    """A network violates one of the structural invariants."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class ZeroRateError(ValueError):
    pass


@dataclass(frozen=True)
class DistributionSpec:
    """Unit-mean, strictly positive increment distribution.

    ``params`` per family:

    * exponential, deterministic: none
    * uniform: ``half_width`` w in (0, 1), support [1-w, 1+w]
    * gamma: ``shape`` k > 0 (scale 1/k)
    * lognormal: ``sigma`` s > 0 (log-mean -s^2/2)
    * pareto: ``alpha`` > 1, scale (alpha-1)/alpha
    """

    family: str = "exponential"
    params: dict = field(default_factory=dict)
    eps1: float = DEFAULT_EPS1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise StructuralError("distribution", f"unknown family {self.family!r}")
        if not self.eps1 > 0:
            raise StructuralError("distribution", "eps1 must be positive")
        req = {"uniform": "half_width", "gamma": "shape", "lognormal": "sigma", "pareto": "alpha"}
        key = req.get(self.family)
        if key is not None and key not in self.params:
            raise StructuralError("distribution", f"{self.family} needs parameter {key!r}")
        if self.family == "uniform" and not 0 < self.params["half_width"] < 1:
            raise StructuralError("distribution", "uniform half_width must lie in (0, 1)")
        if self.family == "gamma" and not self.params["shape"] > 0:
            raise StructuralError("distribution", "gamma shape must be positive")
        if self.family == "lognormal" and not self.params["sigma"] > 0:
            raise StructuralError("distribution", "lognormal sigma must be positive")
        if self.family == "pareto" and not self.params["alpha"] > 1:
            raise StructuralError("distribution", "pareto alpha must exceed 1 for a finite mean")

    @property
    def variance(self) -> float:
        f, p = self.family, self.params
        if f == "exponential":
            return 1.0
        if f == "deterministic":
            return 0.0
        if f == "uniform":
            return p["half_width"] ** 2 / 3.0
        if f == "gamma":
            return 1.0 / p["shape"]
        if f == "lognormal":
            return math.expm1(p["sigma"] ** 2)
        a = p["alpha"]
        return math.inf if a <= 2 else 1.0 / (a * (a - 2.0))

    def ppf(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF on (0, 1); every family is normalised to mean 1."""
        f, p = self.family, self.params
        if f == "exponential":
            return -np.log1p(-u)
        if f == "deterministic":
            return np.ones_like(u)
        if f == "uniform":
            w = p["half_width"]
            return (1.0 - w) + 2.0 * w * u
        if f == "gamma":
            from scipy.special import gammaincinv

            k = p["shape"]
            return gammaincinv(k, u) / k
        if f == "lognormal":
            from scipy.special import ndtri

            s = p["sigma"]
            return np.exp(s * ndtri(u) - 0.5 * s * s)
        a = p["alpha"]
        return (a - 1.0) / a * (1.0 - u) ** (-1.0 / a)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params), "eps1": self.eps1}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        return cls(d.get("family", "exponential"), dict(d.get("params", {})), d.get("eps1", DEFAULT_EPS1))


EXPONENTIAL = DistributionSpec()
DETERMINISTIC = DistributionSpec("deterministic")


def check_moments(dist: DistributionSpec) -> bool:
    """True iff E|X|^(2+2*eps1) is finite for the declared eps1."""
    if dist.family == "pareto":
        return dist.params["alpha"] > 2.0 + 2.0 * dist.eps1
    return True


@dataclass
class NetworkSpec:
    """Open processing network: m buffers, p servers, n activities.

    Activity j is served by ``activity_server[j]`` and drains
    ``activity_buffer[j]``; ``routing[j, l]`` is the probability that a job
    finished by activity j joins buffer l (the row deficit is the exit
    probability).
    """

    num_buffers: int
    num_servers: int
    activity_server: list[int]
    activity_buffer: list[int]
    routing: np.ndarray
    arrival_rate: np.ndarray
    mean_service: np.ndarray
    holding_cost: np.ndarray
    interarrival_dist: list[DistributionSpec | None] = None
    service_dist: list[DistributionSpec] = None
    discount_rate: float = 0.0
    buffer_names: list[str] | None = None
    server_names: list[str] | None = None

    def __post_init__(self):
        n = len(self.activity_server)
        self.activity_server = [int(s) for s in self.activity_server]
        self.activity_buffer = [int(b) for b in self.activity_buffer]
        self.routing = np.asarray(self.routing, dtype=float).reshape(n, self.num_buffers)
        self.arrival_rate = np.asarray(self.arrival_rate, dtype=float)
        self.mean_service = np.asarray(self.mean_service, dtype=float)
        self.holding_cost = np.asarray(self.holding_cost, dtype=float)
        if self.interarrival_dist is None:
            self.interarrival_dist = [EXPONENTIAL if lam > 0 else None for lam in self.arrival_rate]
        if self.service_dist is None:
            self.service_dist = [EXPONENTIAL] * n
        if self.buffer_names is None:
            self.buffer_names = [f"b{i + 1}" for i in range(self.num_buffers)]
        if self.server_names is None:
            self.server_names = [f"s{k + 1}" for k in range(self.num_servers)]

    @property
    def num_activities(self) -> int:
        return len(self.activity_server)

    @property
    def service_rate(self) -> np.ndarray:
        return 1.0 / self.mean_service

    @property
    def A(self) -> np.ndarray:
        """Capacity consumption matrix (p x n)."""
        a = np.zeros((self.num_servers, self.num_activities))
        a[self.activity_server, range(self.num_activities)] = 1.0
        return a

    @property
    def C(self) -> np.ndarray:
        """Constituency matrix (m x n)."""
        c = np.zeros((self.num_buffers, self.num_activities))
        c[self.activity_buffer, range(self.num_activities)] = 1.0
        return c

    @property
    def M(self) -> np.ndarray:
        return np.diag(self.mean_service)

    @property
    def R(self) -> np.ndarray:
        """Input-output matrix (C - P') M^-1."""
        return (self.C - self.routing.T) / self.mean_service

    @property
    def arriving(self) -> list[int]:
        return [k for k in range(self.num_buffers) if self.arrival_rate[k] != 0]

    @property
    def eps1(self) -> float:
        dists = [d for d in self.interarrival_dist if d is not None] + list(self.service_dist)
        return min(d.eps1 for d in dists)

    def exact(self, name: str) -> list:
        """Exact rational copy of a first-order vector or matrix (decimal reading of floats)."""
        arr = getattr(self, name)
        if arr.ndim == 1:
            return [Fraction(str(float(v))) for v in arr]
        return [[Fraction(str(float(v))) for v in row] for row in arr]

    def with_changes(self, **changes) -> "NetworkSpec":
        d = {
            "num_buffers": self.num_buffers,
            "num_servers": self.num_servers,
            "activity_server": list(self.activity_server),
            "activity_buffer": list(self.activity_buffer),
            "routing": self.routing.copy(),
            "arrival_rate": self.arrival_rate.copy(),
            "mean_service": self.mean_service.copy(),
            "holding_cost": self.holding_cost.copy(),
            "interarrival_dist": list(self.interarrival_dist),
            "service_dist": list(self.service_dist),
            "discount_rate": self.discount_rate,
            "buffer_names": list(self.buffer_names),
            "server_names": list(self.server_names),
        }
        d.update(changes)
        if "arrival_rate" in changes and "interarrival_dist" not in changes:
            lam = np.asarray(changes["arrival_rate"], dtype=float)
            d["interarrival_dist"] = [
                (old or EXPONENTIAL) if v > 0 else None for old, v in zip(self.interarrival_dist, lam)
            ]
        return NetworkSpec(**d)

    def drop_activity(self, j: int) -> "NetworkSpec":
        keep = [i for i in range(self.num_activities) if i != j]
        return self.with_changes(
            activity_server=[self.activity_server[i] for i in keep],
            activity_buffer=[self.activity_buffer[i] for i in keep],
            routing=self.routing[keep],
            mean_service=self.mean_service[keep],
            service_dist=[self.service_dist[i] for i in keep],
        )


@dataclass
class ValidationReport:
    checks: dict[str, bool]
    messages: dict[str, str]
    A: np.ndarray | None = None
    C: np.ndarray | None = None
    R: np.ndarray | None = None
    M: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def validate_network(spec: NetworkSpec, raise_on_error: bool = True) -> ValidationReport:
    m, p, n = spec.num_buffers, spec.num_servers, spec.num_activities
    checks: dict[str, bool] = {}
    msgs: dict[str, str] = {}

    def record(name: str, ok: bool, msg: str = ""):
        checks[name] = bool(ok)
        if not ok:
            msgs[name] = msg

    record("dimensions", m >= 1 and p >= 1 and n >= 1 and len(spec.activity_buffer) == n,
           "need m, p, n >= 1 and one buffer per activity")
    record("activity_indices",
           all(0 <= s < p for s in spec.activity_server) and all(0 <= b < m for b in spec.activity_buffer),
           "activity refers to an unknown server or buffer")
    if checks["activity_indices"]:
        used_servers = set(spec.activity_server)
        used_buffers = set(spec.activity_buffer)
        idle = sorted(set(range(p)) - used_servers)
        record("capacity_matrix", not idle, f"server(s) {idle} have no activity")
        orphan = sorted(set(range(m)) - used_buffers)
        record("constituency_matrix", not orphan, f"buffer(s) {orphan} have no activity")
    P = spec.routing
    record("routing", P.shape == (n, m) and bool(np.all(P >= 0)) and bool(np.all(P.sum(axis=1) <= 1 + 1e-12)),
           "routing rows must be nonnegative and sum to at most 1")
    lam = spec.arrival_rate
    record("arrival_rate", lam.shape == (m,) and bool(np.all(lam >= 0)) and bool(np.any(lam > 0)),
           "arrival rates must be nonnegative and not all zero")
    record("mean_service", spec.mean_service.shape == (n,) and bool(np.all(spec.mean_service > 0)),
           "mean service times must be positive")
    record("holding_cost", spec.holding_cost.shape == (m,) and bool(np.all(spec.holding_cost > 0)),
           "holding costs must be positive")
    record("discount_rate", spec.discount_rate >= 0, "discount rate must be nonnegative")
    dists_ok = len(spec.interarrival_dist) == m and len(spec.service_dist) == n and all(
        (d is not None) for k, d in enumerate(spec.interarrival_dist) if lam.shape == (m,) and lam[k] > 0)
    record("distributions", dists_ok, "every arriving buffer and activity needs a distribution")
    if dists_ok:
        bad = [d.family for d in list(spec.interarrival_dist) + list(spec.service_dist)
               if d is not None and not check_moments(d)]
        record("moments", not bad, f"2+2*eps1 moment infinite for {bad}")

    report = ValidationReport(checks, msgs)
    if report.ok:
        report.A, report.C, report.R, report.M = spec.A, spec.C, spec.R, spec.M
    elif raise_on_error:
        name = next(k for k, v in checks.items() if not v)
        raise StructuralError(name, msgs[name])
    return report


def network_from_dict(doc: dict[str, Any]) -> NetworkSpec:
    buffers = doc["buffers"]
    servers = doc["servers"]
    activities = doc["activities"]
    bnames = [b.get("name", f"b{i + 1}") for i, b in enumerate(buffers)]
    snames = [s if isinstance(s, str) else s.get("name") for s in servers]

    def lookup(ref, names, kind):
        if isinstance(ref, int):
            return ref
        try:
            return names.index(ref)
        except ValueError:
            raise StructuralError("references", f"unknown {kind} {ref!r}") from None

    m = len(buffers)
    routing = np.zeros((len(activities), m))
    for j, a in enumerate(activities):
        for r in a.get("routing", []):
            routing[j, lookup(r["to"], bnames, "buffer")] += r["prob"]
    lam = [float(b.get("lambda", 0.0)) for b in buffers]
    inter = [DistributionSpec.from_dict(b["interarrival"]) if lam[i] > 0 and b.get("interarrival") else
             (DistributionSpec() if lam[i] > 0 else None) for i, b in enumerate(buffers)]
    return NetworkSpec(
        num_buffers=m,
        num_servers=len(servers),
        activity_server=[lookup(a["server"], snames, "server") for a in activities],
        activity_buffer=[lookup(a["buffer"], bnames, "buffer") for a in activities],
        routing=routing,
        arrival_rate=lam,
        mean_service=[float(a["mean_service"]) for a in activities],
        holding_cost=[float(b["holding_cost"]) for b in buffers],
        interarrival_dist=inter,
        service_dist=[DistributionSpec.from_dict(a.get("service", {})) for a in activities],
        discount_rate=float(doc.get("discount_rate", 0.0)),
        buffer_names=bnames,
        server_names=snames,
    )


def network_to_dict(spec: NetworkSpec) -> dict[str, Any]:
    buffers = []
    for k in range(spec.num_buffers):
        d = spec.interarrival_dist[k]
        buffers.append({
            "name": spec.buffer_names[k],
            "lambda": float(spec.arrival_rate[k]),
            "holding_cost": float(spec.holding_cost[k]),
            "interarrival": d.to_dict() if d is not None else None,
        })
    activities = []
    for j in range(spec.num_activities):
        activities.append({
            "server": spec.server_names[spec.activity_server[j]],
            "buffer": spec.buffer_names[spec.activity_buffer[j]],
            "mean_service": float(spec.mean_service[j]),
            "service": spec.service_dist[j].to_dict(),
            "routing": [{"to": spec.buffer_names[l], "prob": float(spec.routing[j, l])}
                        for l in range(spec.num_buffers) if spec.routing[j, l] > 0],
        })
    doc = {"buffers": buffers, "servers": list(spec.server_names), "activities": activities}
    if spec.discount_rate:
        doc["discount_rate"] = spec.discount_rate
    return doc


def load_network(path: str | Path) -> NetworkSpec:
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def save_network(spec: NetworkSpec, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(spec), fh, indent=2)
