"""Event-driven simulation of an open processing network under discrete review or a baseline.

The simulator works in the network's own buffer labels; the discrete review
policy is consulted in relabelled coordinates and its outputs mapped back.
Service is head-of-line and preemptive-resume per activity: an activity that
has started a job owns it until completion, and resumes it with the remaining
work whenever it is next allowed to run.

Simultaneous events are handled in a fixed order: arrivals by buffer index,
then service completions by activity index, then policy control points.
Every arrival, completion and control point is written as its own record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network import NetworkSpec
from .planner import StaticPlan
from .policy import PolicyParams, ReviewPlan, make_plan
from .streams import PrimitiveStreams

START, ARRIVAL, COMPLETION, CONTROL, REVIEW, END = range(6)
KIND_NAMES = ("start", "arrival", "completion", "control", "review", "end")
DISCIPLINES = ("priority", "longest-queue")


@dataclass
class PeriodRecord:
    """One review period as planned and as it started."""

    k: int
    tau: float
    case: int
    idle: float
    exec_time: float
    plan: ReviewPlan
    z_start: np.ndarray
    residual_arrival: np.ndarray
    residual_service: np.ndarray
    record_index: int


@dataclass
class Trajectory:
    """Event-resolution record of a single run.

    Row ``i`` of each array is the state immediately after record ``i``; the
    path is piecewise constant between consecutive record times.  Counts are
    cumulative: ``E`` external arrivals per buffer, ``S`` service completions
    per activity, ``Phi`` routed-in jobs per buffer, ``T`` busy time per
    activity and ``I`` idle time per server.  ``cost`` is the undiscounted
    integral of h.Z and ``dcost`` the discounted one.
    """

    policy: str
    seed: int
    replication: int
    horizon: float
    z0: np.ndarray
    t: np.ndarray
    kind: np.ndarray
    idx: np.ndarray
    Z: np.ndarray
    E: np.ndarray
    S: np.ndarray
    Phi: np.ndarray
    T: np.ndarray
    I: np.ndarray
    cost: np.ndarray
    dcost: np.ndarray
    periods: list[PeriodRecord] = field(default_factory=list)
    final_residual_arrival: np.ndarray | None = None
    final_residual_service: np.ndarray | None = None
    net: NetworkSpec | None = None
    plan: StaticPlan | None = None
    params: PolicyParams | None = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def W(self) -> np.ndarray:
        return self.Z @ self.plan.y_original

    @property
    def I_W(self) -> np.ndarray:
        return self.I @ self.plan.pi

    def value_at(self, name: str, times) -> np.ndarray:
        """Right-continuous step-path values of a recorded array at arbitrary times."""
        pos = np.searchsorted(self.t, np.asarray(times, dtype=float), side="right") - 1
        return getattr(self, name)[np.clip(pos, 0, None)]

    def review_times(self) -> np.ndarray:
        return np.array([p.tau for p in self.periods])

    def residuals_after(self, k: int):
        """Residual interarrival and service times at the end of period k."""
        if k + 1 < len(self.periods):
            nxt = self.periods[k + 1]
            return nxt.residual_arrival, nxt.residual_service
        return self.final_residual_arrival, self.final_residual_service

    def period_end(self, k: int) -> float:
        if k + 1 < len(self.periods):
            return self.periods[k + 1].tau
        return min(self.periods[k].tau + self.periods[k].exec_time, self.horizon)


class _Engine:
    """Shared event loop; subclasses supply dispatch and control points."""

    policy_name = "none"

    def __init__(self, net: NetworkSpec, plan: StaticPlan, horizon: float, seed: int,
                 replication: int, z0, gamma: float | None):
        if not horizon > 0:
            raise ValueError("horizon must be positive")
        self.net, self.plan = net, plan
        self.horizon = float(horizon)
        self.seed, self.replication = int(seed), int(replication)
        self.streams = PrimitiveStreams(net, seed, replication)
        self.m, self.p, self.n = net.num_buffers, net.num_servers, net.num_activities
        self.buf = [int(b) for b in net.activity_buffer]
        self.srv = [int(s) for s in net.activity_server]
        self.h = [float(v) for v in net.holding_cost]
        self.gamma = float(net.discount_rate if gamma is None else gamma)

        self.t = 0.0
        self.Z = [int(v) for v in z0]
        if any(v < 0 for v in self.Z) or len(self.Z) != self.m:
            raise ValueError("initial state must be a nonnegative m-vector")
        self.z0 = np.array(self.Z, dtype=np.int64)
        self.E = [0] * self.m
        self.S = [0] * self.n
        self.Phi = [0] * self.m
        self.T = [0.0] * self.n
        self.I = [0.0] * self.p
        self.res: list[float | None] = [None] * self.n
        self.owned = [0] * self.m
        self.active = [-1] * self.p
        self.cost = 0.0
        self.dcost = 0.0
        self.hz = sum(h * z for h, z in zip(self.h, self.Z))
        inf = math.inf
        self.next_arr = [self.streams.draw_interarrival(k) if lam > 0 else inf
                         for k, lam in enumerate(net.arrival_rate)]
        self.records: list[tuple] = []
        self.periods: list[PeriodRecord] = []

    # -- bookkeeping ------------------------------------------------------
    def _record(self, kind: int, idx: int) -> None:
        self.records.append((self.t, kind, idx, tuple(self.Z), tuple(self.E), tuple(self.S),
                             tuple(self.Phi), tuple(self.T), tuple(self.I), self.cost, self.dcost))

    def _advance(self, t_next: float) -> None:
        dt = t_next - self.t
        if dt <= 0.0:
            return
        T, I, res = self.T, self.I, self.res
        for s, j in enumerate(self.active):
            if j >= 0:
                T[j] += dt
                res[j] -= dt
            else:
                I[s] += dt
        self.cost += self.hz * dt
        g = self.gamma
        if g > 0.0:
            self.dcost += self.hz * (math.exp(-g * self.t) - math.exp(-g * t_next)) / g
        else:
            self.dcost += self.hz * dt
        self.t = t_next

    def _available(self, b: int) -> bool:
        return self.Z[b] - self.owned[b] >= 1

    def _start_job(self, j: int) -> None:
        self.res[j] = self.streams.draw_service(j)
        self.owned[self.buf[j]] += 1

    def residual_arrivals(self) -> np.ndarray:
        return np.array([a - self.t if math.isfinite(a) else 0.0 for a in self.next_arr])

    def residual_services(self) -> np.ndarray:
        return np.array([0.0 if r is None else r for r in self.res])

    # -- hooks --------------------------------------------------------------
    def next_control(self) -> float:
        return math.inf

    def on_control(self) -> int:
        """Handle a control point at the current time; returns the record kind."""
        return CONTROL

    def on_completion(self, j: int) -> None:
        pass

    def dispatch(self) -> None:
        raise NotImplementedError

    def on_start(self) -> None:
        pass

    # -- main loop ------------------------------------------------------------
    def run(self) -> Trajectory:
        self._record(START, -1)
        self.on_start()
        self.dispatch()
        horizon = self.horizon
        m, n = self.m, self.n
        draw_inter = self.streams.draw_interarrival
        draw_route = self.streams.draw_route
        buf, h = self.buf, self.h
        while True:
            t_next = min(self.next_arr)
            for j in self.active:
                if j >= 0:
                    c = self.t + self.res[j]
                    if c < t_next:
                        t_next = c
            ctrl = self.next_control()
            if ctrl < t_next:
                t_next = ctrl
            if t_next > horizon:
                self._advance(horizon)
                self._record(END, -1)
                break
            finishing = [j for j in self.active if j >= 0 and self.t + self.res[j] <= t_next]
            self._advance(t_next)
            for k in range(m):
                if self.next_arr[k] <= t_next:
                    self.Z[k] += 1
                    self.E[k] += 1
                    self.hz += h[k]
                    self.next_arr[k] += draw_inter(k)
                    self._record(ARRIVAL, k)
            for j in sorted(finishing):
                b = buf[j]
                self.S[j] += 1
                self.Z[b] -= 1
                self.hz -= h[b]
                self.owned[b] -= 1
                self.res[j] = None
                dest = draw_route(j)
                if dest >= 0:
                    self.Z[dest] += 1
                    self.Phi[dest] += 1
                    self.hz += h[dest]
                self.on_completion(j)
                self._record(COMPLETION, j)
            if ctrl <= t_next:
                kind = self.on_control()
                self._record(kind, -1)
            self.dispatch()
        return self._trajectory()

    def _trajectory(self) -> Trajectory:
        rec = self.records
        m, n, p = self.m, self.n, self.p
        cols = list(zip(*rec))
        return Trajectory(
            policy=self.policy_name, seed=self.seed, replication=self.replication,
            horizon=self.horizon, z0=self.z0,
            t=np.array(cols[0]), kind=np.array(cols[1], dtype=np.int8), idx=np.array(cols[2], dtype=np.int64),
            Z=np.array(cols[3], dtype=np.int64).reshape(-1, m),
            E=np.array(cols[4], dtype=np.int64).reshape(-1, m),
            S=np.array(cols[5], dtype=np.int64).reshape(-1, n),
            Phi=np.array(cols[6], dtype=np.int64).reshape(-1, m),
            T=np.array(cols[7]).reshape(-1, n), I=np.array(cols[8]).reshape(-1, p),
            cost=np.array(cols[9]), dcost=np.array(cols[10]),
            periods=self.periods,
            final_residual_arrival=self.residual_arrivals(),
            final_residual_service=self.residual_services(),
            net=self.net, plan=self.plan, params=getattr(self, "params", None),
        )


class _DiscreteReview(_Engine):
    policy_name = "dr"

    def __init__(self, net, plan, params: PolicyParams, horizon, seed, replication, z0, gamma):
        if z0 is None:
            z0 = np.rint(plan.to_original(params.theta)).astype(np.int64)
        super().__init__(net, plan, horizon, seed, replication, z0, gamma)
        self.params = params
        self.perm = list(plan.buffer_permutation)
        self.by_server = [[j for j in plan.basic_set if self.srv[j] == s] for s in range(self.p)]
        self.slots: list[list[tuple[int, float, float]]] = [[] for _ in range(self.p)]
        self.controls: list[float] = []
        self.ci = 0
        self.review_at = 0.0
        self.done = [0] * self.n
        self.stopped = [False] * self.n
        self.cap = [0] * self.n

    def on_start(self) -> None:
        self._review()
        self._record(REVIEW, -1)

    def next_control(self) -> float:
        return self.controls[self.ci] if self.ci < len(self.controls) else math.inf

    def on_control(self) -> int:
        t = self.t
        while self.ci < len(self.controls) and self.controls[self.ci] <= t:
            self.ci += 1
        if t >= self.review_at:
            self._review()
            return REVIEW
        return CONTROL

    def on_completion(self, j: int) -> None:
        self.done[j] += 1

    def _review(self) -> None:
        t = self.t
        q = np.array(self.Z, dtype=float)[self.perm]
        rp = make_plan(q, self.params, self.plan)
        self.periods.append(PeriodRecord(
            k=len(self.periods), tau=t, case=rp.case_tag, idle=rp.idle_time, exec_time=rp.exec_time,
            plan=rp, z_start=np.array(self.Z, dtype=np.int64),
            residual_arrival=self.residual_arrivals(), residual_service=self.residual_services(),
            record_index=len(self.records),
        ))
        work_start = t + rp.idle_time
        end = t + rp.exec_time
        times = {work_start, end}
        for s, acts in enumerate(self.by_server):
            cur = work_start
            slots = []
            for j in acts:
                d = float(rp.activity_time[j])
                if d <= 0.0:
                    continue
                stop = min(cur + d, end)
                slots.append((j, cur, stop))
                times.add(stop)
                cur = stop
            self.slots[s] = slots
        self.controls = sorted(v for v in times if v > t)
        self.ci = 0
        self.review_at = end
        self.done = [0] * self.n
        self.stopped = [False] * self.n
        self.cap = [int(c) for c in rp.job_cap]

    def dispatch(self) -> None:
        t = self.t
        chosen = []
        for s in range(self.p):
            self.active[s] = -1
            for j, a, b in self.slots[s]:
                if a <= t < b:
                    chosen.append((j, s))
                    break
        chosen.sort()
        for j, s in chosen:
            if self.stopped[j] or self.done[j] >= self.cap[j]:
                continue
            if self.res[j] is None:
                if not self._available(self.buf[j]):
                    self.stopped[j] = True
                    continue
                self._start_job(j)
            self.active[s] = j


class _Baseline(_Engine):
    def __init__(self, net, plan, horizon, seed, replication, z0, gamma, discipline: str):
        if discipline not in DISCIPLINES:
            raise ValueError(f"discipline must be one of {DISCIPLINES}, got {discipline!r}")
        if z0 is None:
            z0 = np.zeros(net.num_buffers, dtype=np.int64)
        super().__init__(net, plan, horizon, seed, replication, z0, gamma)
        self.policy_name = discipline
        self.longest = discipline == "longest-queue"
        rank = plan.inverse_permutation  # relabelled index of each original buffer
        self.rank = rank
        acts = [[j for j in range(self.n) if self.srv[j] == s] for s in range(self.p)]
        self.by_server = [sorted(a, key=lambda j: (rank[self.buf[j]], j)) for a in acts]

    def dispatch(self) -> None:
        Z, buf, res = self.Z, self.buf, self.res
        for s, acts in enumerate(self.by_server):
            self.active[s] = -1
            best = -1
            if self.longest:
                best_len = -1
                for j in acts:
                    b = buf[j]
                    if (res[j] is not None or self._available(b)) and Z[b] > best_len:
                        best, best_len = j, Z[b]
            else:
                for j in acts:
                    if res[j] is not None or self._available(buf[j]):
                        best = j
                        break
            if best >= 0:
                if res[best] is None:
                    self._start_job(best)
                self.active[s] = best


def run_dr_trajectory(net: NetworkSpec, plan: StaticPlan, params: PolicyParams, horizon: float,
                      seed: int = 0, replication: int = 0, z0=None, gamma: float | None = None) -> Trajectory:
    """Simulate the discrete review policy from Z(0) = round(theta) with fresh arrival clocks."""
    return _DiscreteReview(net, plan, params, horizon, seed, replication, z0, gamma).run()


def run_baseline_trajectory(net: NetworkSpec, plan: StaticPlan, horizon: float, seed: int = 0,
                            discipline: str = "priority", replication: int = 0, z0=None,
                            gamma: float | None = None) -> Trajectory:
    """Simulate a work-conserving preemptive baseline, re-decided at every event.

    ``priority`` serves, at each server, the buffer with the lowest h/y rank
    that has a job available; ``longest-queue`` serves the longest such queue
    (ties to the lower rank).
    """
    return _Baseline(net, plan, horizon, seed, replication, z0, gamma, discipline).run()


def compute_workload(Z, y) -> float | np.ndarray:
    return np.asarray(Z, dtype=float) @ np.asarray(y, dtype=float)


def accumulate_cost(traj: Trajectory, h, gamma: float = 0.0) -> tuple[float, float]:
    """Discounted and time-average holding cost of the piecewise-constant path."""
    h = np.asarray(h, dtype=float)
    t = np.append(traj.t, traj.horizon)[1:]
    t0 = traj.t
    rate = traj.Z @ h
    if gamma > 0:
        disc = float(np.sum(rate * (np.exp(-gamma * t0) - np.exp(-gamma * t)) / gamma))
    else:
        disc = float(np.sum(rate * (t - t0)))
    avg = float(np.sum(rate * (t - t0)) / traj.horizon)
    return disc, avg


def ledger_residual(traj: Trajectory) -> np.ndarray:
    """Z(t) - [Z(0) + E(t) + routed-in(t) - C S(t)] at every record (integer array)."""
    C = traj.net.C.astype(np.int64)
    return traj.Z - (traj.z0 + traj.E + traj.Phi - traj.S @ C.T)


def capacity_violation(traj: Trajectory) -> float:
    """Largest excess of per-server busy-time increment over elapsed time between records."""
    busy = traj.T @ traj.net.A.T
    dt = np.diff(traj.t)
    db = np.diff(busy, axis=0)
    if len(dt) == 0:
        return 0.0
    return float(np.max(db - dt[:, None]))


def netput_workload(traj: Trajectory) -> dict[str, np.ndarray]:
    """Workload reconstructed from primitives: W = X_W + I_W + I_N.

    X = Z(0) + (E - lambda t) + (routed-in - P'S) - (C - P')(S - mu T) is the
    centred netput, X_W = y'X, I_W = pi'I and I_N = eta'T_N.
    """
    net, plan = traj.net, traj.plan
    t = traj.t[:, None]
    P = net.routing
    C = net.C
    S = traj.S.astype(float)
    X = (traj.z0 + (traj.E - net.arrival_rate * t) + (traj.Phi - S @ P)
         - (S - traj.T * net.service_rate) @ (C - P.T).T)
    y = plan.y_original
    X_W = X @ y
    I_W = traj.I @ plan.pi
    I_N = traj.T[:, plan.nonbasic_set] @ plan.eta if plan.nonbasic_set else np.zeros(len(traj.t))
    return {"X_W": X_W, "I_W": I_W, "I_N": I_N, "W": X_W + I_W + I_N}
