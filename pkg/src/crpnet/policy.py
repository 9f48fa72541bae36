"""Discrete review policy: per-review-point planning of idling, period length and activity times.

All buffer-indexed inputs and outputs are in the relabelled coordinates of
:class:`~crpnet.planner.StaticPlan` (buffer 0 is the cheapest per unit of
workload).  Activities keep their original indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .planner import StaticPlan

CASE_BALL = 1
CASE_STRETCH = 2


class Eps2RangeError(ValueError):
    pass


class OutOfBallError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyParams:
    """Scaled policy parameters for one member of the scaling sequence."""

    l: float
    theta: np.ndarray
    delta: float
    job_cap_divisor: int
    r: float = 1.0
    eps2: float | None = None

    def __post_init__(self):
        if not self.l > 0:
            raise ValueError(f"period length l must be positive, got {self.l}")
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))

    @property
    def radius(self) -> float:
        return self.delta * self.l


def scale_parameters(r: float, eps2: float, plan: StaticPlan, eps1: float | None = None) -> PolicyParams:
    """l = r^(1 - eps2) and theta = theta* l; requires 0 < eps2 < eps1 / 3."""
    eps1 = plan.eps1 if eps1 is None else eps1
    if not 0 < eps2 < eps1 / 3:
        raise Eps2RangeError(f"eps2 = {eps2} must lie in (0, eps1/3) = (0, {eps1 / 3:.6g})")
    l = float(r) ** (1.0 - eps2)
    return PolicyParams(l=l, theta=plan.theta_star * l, delta=plan.delta,
                        job_cap_divisor=plan.num_activities, r=float(r), eps2=eps2)


def fixed_parameters(l: float, plan: StaticPlan, delta: float | None = None) -> PolicyParams:
    """Parameters for a given period length, without reference to a scale index."""
    return PolicyParams(l=float(l), theta=plan.theta_star * l,
                        delta=plan.delta if delta is None else delta,
                        job_cap_divisor=plan.num_activities)


def in_ball(q, center, radius: float) -> bool:
    """Membership in the one-sided-in-buffer-0 ball around ``center``."""
    q = np.asarray(q, dtype=float)
    if not q[0] > center[0] - radius:
        return False
    return bool(np.all(np.abs(q[1:] - center[1:]) < radius))


def classify_state(q, params: PolicyParams) -> int:
    return CASE_BALL if in_ball(q, params.theta, params.radius) else CASE_STRETCH


@dataclass
class ReviewPlan:
    """Open-loop schedule for one review period."""

    case_tag: int
    idle_time: float
    exec_time: float
    activity_time: np.ndarray
    stretch: float
    target: np.ndarray
    job_cap: np.ndarray
    x: np.ndarray
    q_tilde: np.ndarray = field(default=None)

    @property
    def work_time(self) -> float:
        return self.exec_time - self.idle_time

    def to_dict(self, plan: StaticPlan | None = None) -> dict:
        target = self.target if plan is None else plan.to_original(self.target)
        return {
            "case": self.case_tag,
            "idle_time": self.idle_time,
            "exec_time": self.exec_time,
            "stretch": self.stretch,
            "activity_time": self.activity_time.tolist(),
            "x": self.x.tolist(),
            "target": np.asarray(target).tolist(),
            "job_cap": [int(c) for c in self.job_cap],
        }


def _job_caps(q, plan: StaticPlan, divisor: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([math.floor(q[b] / divisor) for b in plan.activity_buffer], dtype=np.int64)


def _expand(plan: StaticPlan, x_basic) -> np.ndarray:
    x = np.zeros(plan.num_activities)
    x[plan.basic_set] = x_basic
    return x


def plan_case1(q, params: PolicyParams, plan: StaticPlan) -> ReviewPlan:
    """Plan for a state inside the ball: one nominal period after any idling."""
    q = np.asarray(q, dtype=float)
    theta, l = params.theta, params.l
    if not in_ball(q, theta, params.radius):
        raise OutOfBallError(f"q = {q.tolist()} lies outside the ball of radius {params.radius:.6g}")
    y = plan.y
    idle = max(float(y @ (theta - q)), 0.0)
    t_exe = l + idle
    p = plan.num_servers
    rhs = np.concatenate([q + plan.lam * t_exe - theta, np.full(p, l)])
    sol = plan.Pi_inv @ rhs
    x_basic = sol[:-1] / l
    x = _expand(plan, x_basic)
    target = theta.copy()
    target[0] += max(float(y @ (q - theta)), 0.0) / y[0]
    return ReviewPlan(
        case_tag=CASE_BALL, idle_time=idle, exec_time=t_exe,
        activity_time=np.maximum(x, 0.0) * l, stretch=1.0, target=target,
        job_cap=_job_caps(q, plan, params.job_cap_divisor), x=x, q_tilde=q.copy(),
    )


def stretch_coefficient(q_tilde, params: PolicyParams, plan: StaticPlan) -> float:
    """Smallest C_s >= 1 keeping the stretched plan nonnegative."""
    b = len(plan.basic_set)
    dev = np.concatenate([params.theta - q_tilde, np.zeros(plan.num_servers)])
    v = np.abs(plan.Pi_inv[:b] @ dev) / params.l
    return max(float(np.max(v / plan.x_basic)), 1.0)


def plan_case2(q, params: PolicyParams, plan: StaticPlan) -> ReviewPlan:
    """Plan for a state outside the ball: idle up to the workload target, then run a
    period stretched by C_s that drives buffers 1.. back to their safety stocks."""
    q = np.asarray(q, dtype=float)
    theta, l = params.theta, params.l
    y = plan.y
    b, p = len(plan.basic_set), plan.num_servers
    idle = max(float(y @ (theta - q)), 0.0)
    q_tilde = q + plan.lam * idle
    cs = stretch_coefficient(q_tilde, params, plan)
    t_exe = idle + cs * l
    rhs = np.concatenate([q_tilde + plan.lam * l - theta, np.full(p, l)])
    x_basic = plan.x_basic * (1.0 - 1.0 / cs) + (plan.Pi_inv[:b] @ rhs) / (cs * l)
    x = _expand(plan, x_basic)
    target = theta.copy()
    target[0] = float(y @ (q_tilde - theta)) / y[0] + theta[0]
    return ReviewPlan(
        case_tag=CASE_STRETCH, idle_time=idle, exec_time=t_exe,
        activity_time=cs * np.maximum(x, 0.0) * l, stretch=cs, target=target,
        job_cap=_job_caps(q_tilde, plan, params.job_cap_divisor), x=x, q_tilde=q_tilde,
    )


def make_plan(q, params: PolicyParams, plan: StaticPlan) -> ReviewPlan:
    if np.any(np.asarray(q) < 0):
        raise ValueError("queue lengths must be nonnegative")
    if classify_state(q, params) == CASE_BALL:
        return plan_case1(q, params, plan)
    return plan_case2(q, params, plan)
