"""Per-period good-event monitors for discrete review trajectories."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .planner import StaticPlan
from .policy import PolicyParams, in_ball
from .simulator import Trajectory


class MissingDetailError(ValueError):
    pass


@dataclass
class PeriodDiagnostics:
    k: int
    tau: float
    end: float
    A: bool
    B: bool
    C: bool
    D: bool
    E: bool
    sup_rest: float
    b_bound: float
    e_threshold: float

    @property
    def N(self) -> bool:
        return self.A and self.B and not self.C and self.D and self.E

    def to_dict(self) -> dict:
        d = asdict(self)
        d["N"] = self.N
        return d


def queue_bound_constant(plan: StaticPlan) -> float:
    """2|theta*| + n(2|mu| + 1) + 2|lambda|(1 + y'theta*), with max norms; multiply by l."""
    ts = float(np.max(np.abs(plan.theta_star)))
    mu = float(np.max(np.abs(plan.mu)))
    lam = float(np.max(np.abs(plan.lam)))
    return 2 * ts + plan.num_activities * (2 * mu + 1) + 2 * lam * (1 + float(plan.y @ plan.theta_star))


def workload_threshold_constant(plan: StaticPlan) -> float:
    """y'theta* + mn|y|(2|mu| + 1) + 2|y| m y'theta* |lambda|; multiply by l."""
    m, n = plan.num_buffers, plan.num_activities
    y = float(np.max(np.abs(plan.y)))
    mu = float(np.max(np.abs(plan.mu)))
    lam = float(np.max(np.abs(plan.lam)))
    yt = float(plan.y @ plan.theta_star)
    return yt + m * n * y * (2 * mu + 1) + 2 * y * m * yt * lam


def idleness_above(W: np.ndarray, I_W: np.ndarray, threshold: float) -> float:
    """Integral of 1{W > threshold} dI_W for step paths sampled at consecutive records.

    Each increment of I_W between records i and i+1 accrues while the state of
    record i is in force, so it is weighted by the indicator at W[i].
    """
    dI = np.diff(I_W)
    return float(np.sum(dI[W[:-1] > threshold]))


def monitor_good_events(traj: Trajectory, params: PolicyParams | None = None,
                        plan: StaticPlan | None = None) -> list[PeriodDiagnostics]:
    params = traj.params if params is None else params
    plan = traj.plan if plan is None else plan
    if not traj.periods or traj.final_residual_service is None or params is None:
        raise MissingDetailError("trajectory has no review-period records with residual detail")
    l = params.l
    theta, radius = params.theta, params.radius
    b_bound = queue_bound_constant(plan) * l
    e_thr = workload_threshold_constant(plan) * l
    perm = plan.buffer_permutation
    Zp = traj.Z[:, perm]
    W = traj.W
    I_W = traj.I_W
    mu = plan.mu
    arriving = plan.to_original(plan.lam) > 0
    dcap = plan.delta * math.sqrt(l)
    out = []
    last = len(traj.t) - 1
    for k, per in enumerate(traj.periods):
        i0 = per.record_index
        i1 = traj.periods[k + 1].record_index if k + 1 < len(traj.periods) else last
        z_start, z_end = Zp[i0], Zp[i1]
        a = in_ball(z_start, theta, radius) and in_ball(z_end, theta, radius)
        sup_rest = float(Zp[i0:i1 + 1, 1:].max()) if Zp.shape[1] > 1 else 0.0
        done = traj.S[i1] - traj.S[i0]
        c = in_ball(z_start, theta, radius) and bool(np.any(done >= (2 * mu + 1) * l))
        ra, rs = traj.residuals_after(k)
        d = bool(np.all(rs <= dcap) and np.all(ra[arriving] <= dcap))
        e = idleness_above(W[i0:i1 + 1], I_W[i0:i1 + 1], e_thr) == 0.0
        out.append(PeriodDiagnostics(k, per.tau, traj.period_end(k), a, sup_rest <= b_bound, c, d, e,
                                     sup_rest, b_bound, e_thr))
    return out
