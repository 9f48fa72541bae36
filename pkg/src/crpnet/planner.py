"""Static planning LP, structural assumptions, dual workload vectors and policy constants.

Everything up to the policy matrix is computed in exact rational arithmetic and
converted to floats only when stored on :class:`StaticPlan`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import lp
from .network import NetworkSpec, validate_network

BASIC_TOL = Fraction(1, 10**9)
HT_TOL = Fraction(1, 10**9)


class InfeasibleError(ValueError):
    pass


class NonUniqueError(ValueError):
    pass


class DegenerateDualError(ValueError):
    pass


class AssumptionError(ValueError):
    def __init__(self, report: "AssumptionReport"):
        failed = [k for k in ("heavy_traffic", "crp", "bab") if not getattr(report, k)]
        super().__init__(f"network fails assumption(s): {', '.join(failed)}")
        self.report = report


SingularError = lp.SingularError


@dataclass
class LPSolution:
    x_star: list[Fraction]
    rho_star: Fraction
    basic_set: list[int]

    @property
    def x(self) -> np.ndarray:
        return np.array([float(v) for v in self.x_star])


def _planning_lp(net: NetworkSpec):
    """Equality form over (x, rho, s): R x = lambda, A x - rho e + s = 0."""
    m, p, n = net.num_buffers, net.num_servers, net.num_activities
    R = _exact_R(net)
    A = net.A
    rows, rhs = [], []
    for i in range(m):
        rows.append(list(R[i]) + [Fraction(0)] + [Fraction(0)] * p)
        rhs.append(Fraction(str(float(net.arrival_rate[i]))))
    for k in range(p):
        rows.append([Fraction(int(A[k, j])) for j in range(n)] + [Fraction(-1)]
                    + [Fraction(int(k == q)) for q in range(p)])
        rhs.append(Fraction(0))
    cost = [Fraction(0)] * n + [Fraction(1)] + [Fraction(0)] * p
    return cost, rows, rhs


def _exact_R(net: NetworkSpec) -> list[list[Fraction]]:
    m, n = net.num_buffers, net.num_activities
    P = net.exact("routing")
    ms = net.exact("mean_service")
    return [[(Fraction(int(net.activity_buffer[j] == i)) - P[j][i]) / ms[j] for j in range(n)]
            for i in range(m)]


def _face_is_point(net: NetworkSpec, rho: Fraction) -> bool:
    """Exact check that {x >= 0 : R x = lambda, A x <= rho e} is a single point."""
    m, p, n = net.num_buffers, net.num_servers, net.num_activities
    R = _exact_R(net)
    A = net.A
    rows = [list(R[i]) + [Fraction(0)] * p for i in range(m)]
    rows += [[Fraction(int(A[k, j])) for j in range(n)] + [Fraction(int(k == q)) for q in range(p)]
             for k in range(p)]
    rhs = [Fraction(str(float(v))) for v in net.arrival_rate] + [rho] * p
    for j in range(n):
        c = [Fraction(0)] * (n + p)
        c[j] = Fraction(1)
        lo = lp.simplex(c, rows, rhs)
        c[j] = Fraction(-1)
        hi = lp.simplex(c, rows, rhs)
        if hi.status != "optimal" or lo.x[j] != hi.x[j]:
            return False
    return True


def solve_static_plan(net: NetworkSpec) -> LPSolution:
    """Minimise rho subject to R x = lambda, A x <= rho e, x >= 0 and certify uniqueness.

    The fast certificate is a strictly positive reduced cost on every nonbasic
    column; if some reduced cost vanishes, uniqueness is decided exactly by
    minimising and maximising every x_j over the optimal face.
    """
    validate_network(net)
    n = net.num_activities
    cost, rows, rhs = _planning_lp(net)
    res = lp.simplex(cost, rows, rhs)
    if res.status == "infeasible":
        raise InfeasibleError("no x >= 0 satisfies R x = lambda")
    if res.status != "optimal":
        raise InfeasibleError(f"static planning LP is {res.status}")
    rho = res.x[n]
    zero_rc = [j for j, d in enumerate(res.reduced_costs) if d == 0 and j not in res.basis]
    if zero_rc and not _face_is_point(net, rho):
        raise NonUniqueError("static planning problem has alternate optima")
    x = res.x[:n]
    basic = [j for j in range(n) if x[j] > BASIC_TOL]
    return LPSolution(x, rho, basic)


@dataclass
class AssumptionReport:
    heavy_traffic: bool
    crp: bool
    bab: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.heavy_traffic and self.crp and self.bab

    def to_dict(self) -> dict:
        return {"heavy_traffic": self.heavy_traffic, "crp": self.crp, "bab": self.bab,
                "ok": self.ok, "diagnostics": self.diagnostics}


def verify_assumptions(sol: LPSolution, net: NetworkSpec) -> AssumptionReport:
    m, p = net.num_buffers, net.num_servers
    A = net.A
    load = [sum((Fraction(int(A[k, j])) * sol.x_star[j] for j in range(net.num_activities)), Fraction(0))
            for k in range(p)]
    heavy = abs(sol.rho_star - 1) <= HT_TOL and all(abs(v - 1) <= HT_TOL for v in load)
    b = len(sol.basic_set)
    crp = p + m - b == 1
    R = _exact_R(net)
    uncovered = [i for i in range(m) if not any(R[i][j] > 0 for j in sol.basic_set)]
    diag = {
        "rho_star": float(sol.rho_star),
        "server_load": [float(v) for v in load],
        "num_basic": b,
        "p_plus_m_minus_b": p + m - b,
        "buffers_without_basic_activity": uncovered,
    }
    return AssumptionReport(heavy, crp, not uncovered, diag)


def compute_duals(sol: LPSolution, net: NetworkSpec):
    """Solve y'H = pi'B with pi'e = 1 exactly; returns (y, pi, eta) as Fraction lists
    in the network's own buffer labels."""
    m, p, n = net.num_buffers, net.num_servers, net.num_activities
    R = _exact_R(net)
    A = net.A
    basic = sol.basic_set
    nonbasic = [j for j in range(n) if j not in basic]
    # unknowns (y_1..y_m, pi_1..pi_p); rows: one per basic activity, then normalisation
    rows = [[R[i][j] for i in range(m)] + [-Fraction(int(A[k, j])) for k in range(p)] for j in basic]
    rows.append([Fraction(0)] * m + [Fraction(1)] * p)
    rhs = [Fraction(0)] * len(basic) + [Fraction(1)]
    if len(rows) != m + p or lp.rank(rows) != m + p:
        raise DegenerateDualError("dual system y'H = pi'B, pi'e = 1 is not uniquely solvable")
    sol_vec = lp.solve(rows, rhs)
    y, pi = sol_vec[:m], sol_vec[m:]
    if not all(v > 0 for v in y) or not all(v > 0 for v in pi):
        raise DegenerateDualError(f"duals not strictly positive: y={[float(v) for v in y]}, "
                                  f"pi={[float(v) for v in pi]}")
    eta = [sum((pi[k] * int(A[k, j]) for k in range(p)), Fraction(0))
           - sum((y[i] * R[i][j] for i in range(m)), Fraction(0)) for j in nonbasic]
    if any(v < 0 for v in eta):
        raise DegenerateDualError("pi'N >= y'J fails")
    return y, pi, eta


def order_buffers(h, y) -> list[int]:
    """Buffer relabelling making h_i / y_i nondecreasing (stable on ties).

    Entry ``i`` is the original label of the buffer that becomes buffer ``i``.
    """
    ratios = [float(hi) / float(yi) for hi, yi in zip(h, y)]
    return sorted(range(len(ratios)), key=lambda i: (ratios[i], i))


def build_policy_matrix(H, B):
    """Pi = [[H, e_1], [B, 0]] and its exact inverse (as Fraction matrices)."""
    m, b = len(H), len(H[0])
    p = len(B)
    if m + p != b + 1:
        raise lp.SingularError(f"policy matrix is {m + p} x {b + 1}, not square")
    Pi = [list(H[i]) + [Fraction(int(i == 0))] for i in range(m)]
    Pi += [list(B[k]) + [Fraction(0)] for k in range(p)]
    Pi = lp.to_fractions(Pi)
    return Pi, lp.inverse(Pi)


def compute_constants(x_basic, Pi_inv, y, mu, lam, n: int):
    """Safety-stock constants (C0, C1, theta*, delta bound) for the policy.

    ``x_basic`` holds x*_j for the basic activities in Pi's column order and ``y``
    is in relabelled buffer coordinates.  C0 minimises x*_j / |(Pi^-1 [e_i; 0])_j|
    over nonzero denominators and is capped at 1 when every denominator vanishes.
    """
    m = len(y)
    b = len(x_basic)
    ratios = []
    for i in range(m):
        for j in range(b):
            d = abs(Pi_inv[j][i])
            if d != 0:
                ratios.append(Fraction(x_basic[j]) / d)
    C0 = min(ratios) if ratios else Fraction(1)
    C1 = C0 * max(Fraction(yj) / Fraction(y[0]) for yj in y)
    theta_scalar = n * ((2 + float(C1) + float(C0)) * max(1.0, max(float(v) for v in mu)) + 1)
    delta_bound = float(C0) / (2 * m * (1 + float(sum(Fraction(v) for v in y)) * max(float(v) for v in lam)))
    return float(C0), float(C1), theta_scalar * np.ones(m), delta_bound


@dataclass
class StaticPlan:
    """Offline solution of the planning problem plus all policy data.

    Buffer-indexed quantities (``y``, ``lam``, ``h``, ``H``, ``J``, ``R``,
    ``theta_star``, ``activity_buffer``) are in relabelled coordinates where
    buffer 0 is the cheapest per unit of workload; ``buffer_permutation[i]``
    is the original label of relabelled buffer ``i``.  Activity indices are
    never relabelled; ``basic_set`` gives Pi's column order.
    """

    x_star: np.ndarray
    rho_star: float
    basic_set: list[int]
    nonbasic_set: list[int]
    H: np.ndarray
    J: np.ndarray
    B_mat: np.ndarray
    N_mat: np.ndarray
    y: np.ndarray
    pi: np.ndarray
    eta: np.ndarray
    Pi: np.ndarray
    Pi_inv: np.ndarray
    C0: float
    C1: float
    theta_star: np.ndarray
    delta: float
    delta_bound: float
    buffer_permutation: list[int]
    R: np.ndarray
    lam: np.ndarray
    h: np.ndarray
    mu: np.ndarray
    activity_buffer: list[int]
    activity_server: list[int]
    eps1: float
    report: AssumptionReport | None = None

    @property
    def num_buffers(self) -> int:
        return len(self.y)

    @property
    def num_servers(self) -> int:
        return len(self.pi)

    @property
    def num_activities(self) -> int:
        return len(self.x_star)

    @property
    def A(self) -> np.ndarray:
        a = np.zeros((self.num_servers, self.num_activities))
        a[self.activity_server, range(self.num_activities)] = 1.0
        return a

    @property
    def x_basic(self) -> np.ndarray:
        return self.x_star[self.basic_set]

    @property
    def inverse_permutation(self) -> list[int]:
        inv = [0] * len(self.buffer_permutation)
        for new, old in enumerate(self.buffer_permutation):
            inv[old] = new
        return inv

    def to_permuted(self, v) -> np.ndarray:
        return np.asarray(v)[self.buffer_permutation]

    def to_original(self, v) -> np.ndarray:
        return np.asarray(v)[self.inverse_permutation]

    @property
    def y_original(self) -> np.ndarray:
        return self.to_original(self.y)

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "rho_star": self.rho_star,
            "basic_set": list(self.basic_set),
            "buffer_permutation": list(self.buffer_permutation),
            "y": self.y_original.tolist(),
            "pi": self.pi.tolist(),
            "eta": self.eta.tolist(),
            "Pi": self.Pi.tolist(),
            "Pi_inv": self.Pi_inv.tolist(),
            "C0": self.C0,
            "C1": self.C1,
            "theta_star": self.to_original(self.theta_star).tolist(),
            "delta": self.delta,
            "delta_bound": self.delta_bound,
        }


def _f(a) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in a]) if a and isinstance(a[0], list) else \
        np.array([float(v) for v in a])


def make_static_plan(net: NetworkSpec, delta_fraction: float = 0.5) -> StaticPlan:
    """Run the whole offline pipeline; raises :class:`AssumptionError` unless
    heavy traffic, complete resource pooling and BAB all hold."""
    sol = solve_static_plan(net)
    report = verify_assumptions(sol, net)
    if not report.ok:
        raise AssumptionError(report)
    y, pi, eta = compute_duals(sol, net)
    perm = order_buffers(net.holding_cost, y)
    inv = [0] * len(perm)
    for new, old in enumerate(perm):
        inv[old] = new
    m, n = net.num_buffers, net.num_activities
    basic = sol.basic_set
    nonbasic = [j for j in range(n) if j not in basic]
    R = _exact_R(net)
    Rp = [R[perm[i]] for i in range(m)]
    A = lp.to_fractions(net.A.astype(int).tolist())
    H = [[Rp[i][j] for j in basic] for i in range(m)]
    J = [[Rp[i][j] for j in nonbasic] for i in range(m)]
    B = [[A[k][j] for j in basic] for k in range(net.num_servers)]
    N = [[A[k][j] for j in nonbasic] for k in range(net.num_servers)]
    yp = [y[perm[i]] for i in range(m)]
    Pi, Pi_inv = build_policy_matrix(H, B)
    lam_p = [Fraction(str(float(net.arrival_rate[perm[i]]))) for i in range(m)]
    C0, C1, theta_star, delta_bound = compute_constants(
        [sol.x_star[j] for j in basic], Pi_inv, yp, net.service_rate, lam_p, n)
    return StaticPlan(
        x_star=sol.x,
        rho_star=float(sol.rho_star),
        basic_set=basic,
        nonbasic_set=nonbasic,
        H=_f(H), J=np.array([[float(v) for v in row] for row in J]).reshape(m, len(nonbasic)),
        B_mat=_f(B), N_mat=np.array([[float(v) for v in row] for row in N]).reshape(net.num_servers, len(nonbasic)),
        y=_f(yp), pi=_f(pi), eta=np.array([float(v) for v in eta]),
        Pi=_f(Pi), Pi_inv=_f(Pi_inv),
        C0=C0, C1=C1, theta_star=theta_star,
        delta=delta_fraction * delta_bound, delta_bound=delta_bound,
        buffer_permutation=perm,
        R=_f(Rp),
        lam=net.arrival_rate[perm].copy(),
        h=net.holding_cost[perm].copy(),
        mu=net.service_rate.copy(),
        activity_buffer=[inv[b] for b in net.activity_buffer],
        activity_server=list(net.activity_server),
        eps1=net.eps1,
        report=report,
    )
