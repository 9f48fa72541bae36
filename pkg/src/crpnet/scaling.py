"""Diffusion scaling of trajectories, the one-dimensional regulator map and RBM references."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import queue_bound_constant
from .network import NetworkSpec
from .planner import StaticPlan
from .simulator import Trajectory

GRID_POINTS = 512


class HorizonError(ValueError):
    pass


class PreconditionError(ValueError):
    def __init__(self, failed: list[str]):
        super().__init__("sandwich preconditions violated: " + "; ".join(failed))
        self.failed = failed


class DomainError(ValueError):
    pass


@dataclass
class ScaledPath:
    """Diffusion-scaled processes on a time grid.

    ``S_hat`` and ``Phi_hat`` are the composed processes that enter the netput,
    i.e. the service and routing fluctuations evaluated at the cumulative busy
    time, and ``S_bar`` is S(T(r^2 t)) / r^2.  ``z_sup`` holds
    sup_{s <= T} Z_k(r^2 s) / r at event resolution, not just on the grid.
    """

    r: float
    t: np.ndarray
    Z_hat: np.ndarray
    W_hat: np.ndarray
    I_hat: np.ndarray
    I_W_hat: np.ndarray
    I_N_hat: np.ndarray
    Y_hat: np.ndarray
    E_hat: np.ndarray
    S_hat: np.ndarray
    Phi_hat: np.ndarray
    X_hat: np.ndarray
    X_W_hat: np.ndarray
    T_bar: np.ndarray
    S_bar: np.ndarray
    z_sup: np.ndarray
    review_times: np.ndarray
    horizon: float
    bound_constant: float = float("nan")
    l: float = float("nan")
    buffer_permutation: list[int] = field(default_factory=list)


def default_grid(T: float, review_times=(), points: int = GRID_POINTS) -> np.ndarray:
    base = np.linspace(0.0, T, points)
    extra = [v for v in review_times if 0.0 <= v <= T]
    return np.unique(np.concatenate([base, np.asarray(extra, dtype=float)]))


def _netput(traj: Trajectory, net: NetworkSpec, count_idx, times, busy) -> tuple:
    """Unscaled centred netput pieces from the counts at rows ``count_idx``, the busy
    times ``busy`` and the clock ``times``."""
    t = times[:, None]
    S = traj.S[count_idx].astype(float)
    E_c = traj.E[count_idx] - net.arrival_rate * t
    S_c = S - busy * net.service_rate
    Phi_c = traj.Phi[count_idx] - S @ net.routing
    X = traj.z0 + E_c + Phi_c - S_c @ (net.C - net.routing.T).T
    return E_c, S_c, Phi_c, X


def diffusion_scale(traj: Trajectory, r: float, grid=None, T: float | None = None) -> ScaledPath:
    """Scale time by r^2 and space by 1/r; requires the run to cover r^2 T."""
    net, plan = traj.net, traj.plan
    r = float(r)
    T = traj.horizon / r ** 2 if T is None else float(T)
    if traj.horizon < r ** 2 * T * (1 - 1e-12):
        raise HorizonError(f"trajectory horizon {traj.horizon} < r^2 T = {r ** 2 * T}")
    reviews = traj.review_times() / r ** 2
    grid = default_grid(T, reviews) if grid is None else np.asarray(grid, dtype=float)
    raw = grid * r ** 2
    idx = np.clip(np.searchsorted(traj.t, raw, side="right") - 1, 0, None)
    # busy and idle time are continuous: interpolate from the last record
    active = _busy_rates(traj, idx)
    lag = (raw - traj.t[idx])[:, None]
    Tb = traj.T[idx] + active * lag
    I = traj.I[idx] + (1.0 - active @ net.A.T) * lag
    E_c, S_c, Phi_c, X = _netput(traj, net, idx, raw, Tb)
    Z = traj.Z[idx].astype(float)
    Y = plan.x_star * raw[:, None] - Tb
    y = plan.y_original
    I_N = Tb[:, plan.nonbasic_set] @ plan.eta if plan.nonbasic_set else np.zeros(len(grid))
    inside = traj.t <= r ** 2 * T
    z_sup = traj.Z[inside].max(axis=0) / r
    return ScaledPath(
        r=r, t=grid, Z_hat=Z / r, W_hat=(Z @ y) / r, I_hat=I / r, I_W_hat=(I @ plan.pi) / r,
        I_N_hat=I_N / r, Y_hat=Y / r, E_hat=E_c / r, S_hat=S_c / r, Phi_hat=Phi_c / r,
        X_hat=X / r, X_W_hat=(X @ y) / r, T_bar=Tb / r ** 2, S_bar=traj.S[idx] / r ** 2,
        z_sup=z_sup, review_times=reviews[reviews <= T], horizon=T,
        bound_constant=queue_bound_constant(plan),
        l=traj.params.l if traj.params is not None else float("nan"),
        buffer_permutation=list(plan.buffer_permutation),
    )


def _busy_rates(traj: Trajectory, idx: np.ndarray) -> np.ndarray:
    """0/1 indicator of which activities are working just after each record in ``idx``."""
    nxt = np.minimum(idx + 1, len(traj.t) - 1)
    dt = traj.t[nxt] - traj.t[idx]
    dT = traj.T[nxt] - traj.T[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(dt[:, None] > 0, dT / np.where(dt > 0, dt, 1.0)[:, None], 0.0)
    return np.rint(rate)


def workload_step_paths(traj: Trajectory, r: float = 1.0, T: float | None = None):
    """Scaled (t, W, X_W, Y) at record times augmented with left limits, Y = I_W + I_N.

    Before every record after the first a point is inserted that carries the
    previous record's counts together with the busy and idle times accrued up to
    the new record's time.  The piecewise-linear netput is then represented at
    both ends of each segment, and increments of Y are attributed to the
    workload in force while they accrue.
    """
    net, plan = traj.net, traj.plan
    r = float(r)
    limit = traj.horizon if T is None else r ** 2 * T
    n_rec = int(np.searchsorted(traj.t, limit, side="right"))
    rows = np.arange(n_rec)
    count_idx = np.empty(2 * n_rec - 1, dtype=np.int64)
    clock_idx = np.empty(2 * n_rec - 1, dtype=np.int64)
    count_idx[0::2] = rows
    clock_idx[0::2] = rows
    count_idx[1::2] = rows[:-1]
    clock_idx[1::2] = rows[1:]
    times = traj.t[clock_idx]
    busy = traj.T[clock_idx]
    _, _, _, X = _netput(traj, net, count_idx, times, busy)
    y = plan.y_original
    I_N = busy[:, plan.nonbasic_set] @ plan.eta if plan.nonbasic_set else 0.0
    Yw = traj.I[clock_idx] @ plan.pi + I_N
    return times / r ** 2, (traj.Z[count_idx] @ y) / r, (X @ y) / r, Yw / r


def regulator_map(x, floor: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """One-dimensional regulator of a sampled path: psi = running sup of (-x), phi = x + psi.

    With ``floor`` the pushing term is sup_{s<=t} x(s)^- (never negative), the
    form used when the path starts at a nonnegative level.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy(), x.copy()
    psi = np.maximum.accumulate(-x)
    if floor:
        psi = np.maximum(psi, 0.0)
    return psi, x + psi


def sandwich_check(w, x, y, delta: float, tol: float = 1e-9) -> bool:
    """True iff psi(x) <= y <= psi(x) + delta at every sample.

    Preconditions, checked first: (i) w = x + y and w >= 0, (ii) y starts at 0
    and is nondecreasing, (iii) y increases only while w <= delta, an increment
    between samples i and i+1 being attributed to w[i].
    """
    w, x, y = (np.asarray(v, dtype=float) for v in (w, x, y))
    failed = []
    scale = 1.0 + float(np.max(np.abs(w), initial=0.0))
    if np.any(np.abs(w - (x + y)) > tol * scale) or np.any(w < -tol):
        failed.append("(i) w = x + y with w >= 0")
    dy = np.diff(y)
    if abs(y[0]) > tol or np.any(dy < -tol):
        failed.append("(ii) y nondecreasing from 0")
    if np.any((dy > tol) & (w[:-1] > delta + tol)):
        failed.append("(iii) y increases only while w <= delta")
    if failed:
        raise PreconditionError(failed)
    psi, _ = regulator_map(x)
    return bool(np.all(psi <= y + tol * scale) and np.all(y <= psi + delta + tol * scale))


@dataclass
class DiffusionStats:
    sigma2: float
    Gamma: np.ndarray
    Gamma0: np.ndarray
    Gamma_activity: list[np.ndarray]
    Omega: list[np.ndarray]


def compute_sigma2(net: NetworkSpec, plan: StaticPlan) -> DiffusionStats:
    """Brownian variance of the limiting workload, in the network's own buffer labels."""
    m, n = net.num_buffers, net.num_activities
    lam = net.arrival_rate
    g0 = np.zeros(m)
    for k in range(m):
        if lam[k] > 0:
            g0[k] = net.interarrival_dist[k].variance / lam[k]
    Gamma0 = np.diag(g0)
    R = net.R
    Omega, Gj = [], []
    Gamma = Gamma0.copy()
    for j in range(n):
        P = net.routing[j]
        om = np.diag(P) - np.outer(P, P)
        mj = float(net.mean_service[j])
        var_v = mj ** 2 * net.service_dist[j].variance
        g = (om + np.outer(R[:, j], R[:, j]) * var_v) / mj
        Omega.append(om)
        Gj.append(g)
        Gamma = Gamma + plan.x_star[j] * g
    y = plan.y_original
    return DiffusionStats(float(y @ Gamma @ y), Gamma, Gamma0, Gj, Omega)


def rbm_tail(w: float, t: float, sigma: float) -> float:
    """P(W*(t) > w) for a driftless RBM started at 0: 2 N(-w / (sigma sqrt t))."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if w <= 0:
        return 1.0
    return math.erfc(w / (sigma * math.sqrt(t)) / math.sqrt(2.0))


def collapse_statistic(scaled: ScaledPath) -> tuple[float, float]:
    """max over all but the cheapest buffer of sup Z_hat, and the reference bound on it."""
    bound = scaled.bound_constant * scaled.l / scaled.r
    rest = scaled.buffer_permutation[1:]
    stat = float(np.max(scaled.z_sup[rest])) if rest else 0.0
    return stat, bound
