"""Acceptance suite.  Each test prints and records one PASS/FAIL line; the lines
are repeated in an "acceptance criteria" section at the end of the pytest run.

The Monte Carlo studies behind criteria 7-10 are shared through module fixtures.
"""

import time

import numpy as np
import pytest

from crpnet.examples import deterministic_net_b, net_a, net_b, random_plannable_network
from crpnet.experiment import ExperimentConfig, emit_results, run_experiment
from crpnet.diagnostics import monitor_good_events
from crpnet.network import network_to_dict
from crpnet.planner import compute_duals, make_static_plan, solve_static_plan
from crpnet.policy import PolicyParams, fixed_parameters, plan_case1, plan_case2
from crpnet.scaling import compute_sigma2, regulator_map, sandwich_check
from crpnet.simulator import (
    capacity_violation,
    ledger_residual,
    run_baseline_trajectory,
    run_dr_trajectory,
)

from oracles import running_inf_regulator, synthetic_sandwich_triple, vertex_enumeration_rho
from test_policy import (
    _case1_plan_checks,
    _case2_plan_checks,
    _near_target_checks,
    sample_in_ball,
    sample_out_of_ball,
)

MC_REPS = 2000
COLLAPSE_REPS = 200
TAIL_TOL = 0.07


@pytest.fixture
def verdict(pytestconfig):
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        pytestconfig.acceptance_lines[number] = line
        assert ok, line
    return record


def _checks(fn, *args):
    """Run an assertion helper; return (ok, message)."""
    try:
        fn(*args)
    except AssertionError as exc:
        return False, str(exc).splitlines()[0] if str(exc) else "assertion failed"
    return True, ""


def _mc_config(policies, r_values, reps):
    return ExperimentConfig(network=network_to_dict(net_b()), policies=policies, r_values=r_values,
                            eps2=0.1, horizon=1.0, replications=reps, seed=2024, tail_times=[1.0])


@pytest.fixture(scope="module")
def mc_dr():
    t0 = time.perf_counter()
    table = run_experiment(_mc_config(["dr"], [8, 32], MC_REPS))
    return table, time.perf_counter() - t0


@pytest.fixture(scope="module")
def mc_priority():
    t0 = time.perf_counter()
    table = run_experiment(_mc_config(["priority"], [32], MC_REPS))
    return table, time.perf_counter() - t0


# 1 ---------------------------------------------------------------------------

def test_criterion_01_planner_exactness(verdict):
    net = net_b()
    t0 = time.perf_counter()
    sol = solve_static_plan(net)
    y, pi, _ = compute_duals(sol, net)
    elapsed = time.perf_counter() - t0
    rho_o, x_o = vertex_enumeration_rho(net)
    ok = (np.allclose(sol.x, [1, 0.3, 0.7], atol=1e-9) and np.allclose(sol.x, x_o, atol=1e-9)
          and abs(float(sol.rho_star) - 1) <= 1e-9 and abs(rho_o - 1) <= 1e-9
          and np.allclose([float(v) for v in y], [0.5, 0.5], atol=1e-9)
          and np.allclose([float(v) for v in pi], [0.5, 0.5], atol=1e-9) and elapsed < 1.0)
    verdict(1, ok, f"x*={sol.x.tolist()} rho*={float(sol.rho_star)} y={[float(v) for v in y]} "
                   f"pi={[float(v) for v in pi]} ({elapsed:.3f}s)")


# 2 ---------------------------------------------------------------------------

def _pi_identities(plan):
    b = len(plan.basic_set)
    size = plan.Pi.shape[0]
    assert np.max(np.abs(plan.Pi @ plan.Pi_inv - np.eye(size))) <= 1e-12
    e = np.eye(size)
    assert np.allclose(plan.Pi_inv @ e[0], np.r_[np.zeros(b), 1.0], atol=1e-12)
    for i in range(plan.num_buffers):
        assert abs((plan.Pi_inv @ e[i])[-1] - plan.y[i] / plan.y[0]) <= 1e-12


def test_criterion_02_policy_matrix(verdict):
    pb, pa = make_static_plan(net_b()), make_static_plan(net_a())
    ok = (np.array_equal(pb.Pi, [[1, 1, 0, 1], [0, 0, 1, 0], [1, 0, 0, 0], [0, 1, 1, 0]])
          and np.array_equal(pb.Pi_inv, [[0, 0, 1, 0], [0, -1, 0, 1], [0, 1, 0, 0], [1, 1, -1, -1]])
          and np.array_equal(pa.Pi, [[1, 1], [1, 0]]) and np.array_equal(pa.Pi_inv, [[0, 1], [1, -1]]))
    msg = "hand-derived matrices " + ("match" if ok else "differ")
    rng = np.random.default_rng(2)
    failures = 0
    for plan in (pa, pb):
        failures += not _checks(_pi_identities, plan)[0]
    for _ in range(1000):
        _, plan = random_plannable_network(rng)
        failures += not _checks(_pi_identities, plan)[0]
    verdict(2, ok and failures == 0, f"{msg}; identity failures on 1000 random networks: {failures}")


# 3 ---------------------------------------------------------------------------

def test_criterion_03_plan_algebra(verdict):
    t0 = time.perf_counter()
    plan = make_static_plan(net_b())
    p100 = PolicyParams(l=100.0, theta=np.array([1080.0, 1080.0]), delta=0.03, job_cap_divisor=3)
    worked = [((1080, 1080), 0.0, (1, 0.3, 0.7), (1080, 1080)),
              ((1180, 1080), 0.0, (1, 0.3, 0.7), (1180, 1080)),
              ((1078, 1081), 0.5, (1, 0.2865, 0.7135), (1080, 1080))]
    ok_examples = True
    for q, idle, x, z in worked:
        rp = plan_case1(np.array(q, float), p100, plan)
        ok_examples &= (abs(rp.idle_time - idle) <= 1e-9 and np.allclose(rp.x, x, atol=1e-9)
                        and np.allclose(rp.target, z, atol=1e-9))
    rp = plan_case2(np.array([1080.0, 1200.0]), p100, plan)
    ok_examples &= (abs(rp.stretch - 4) <= 1e-9 and abs(rp.exec_time - 400) <= 1e-9
                    and np.allclose(rp.x, [1, 0, 1], atol=1e-9) and np.allclose(rp.target, [1200, 1080], atol=1e-9))
    rng = np.random.default_rng(33)
    p = fixed_parameters(100.0, plan)
    ok1, m1 = _checks(_case1_plan_checks, plan, p, sample_in_ball(rng, p.theta, p.radius, 10_000))
    ok2, m2 = _checks(_case2_plan_checks, plan, p, sample_out_of_ball(rng, p, 10_000))
    radius = plan.C0 / (2 * plan.num_buffers) * 100.0
    qs = plan.theta_star * 100.0 + rng.uniform(-radius, radius, size=(10_000, 2)) * (1 - 1e-9)
    qs[:, 0] += rng.uniform(0, 1000, size=10_000)
    okt, mt = _checks(_near_target_checks, plan, 100.0, qs)
    elapsed = time.perf_counter() - t0
    ok = ok_examples and ok1 and ok2 and okt and elapsed < 10
    verdict(3, ok, f"worked examples {'ok' if ok_examples else 'MISMATCH'}; plan bounds on 3x10^4 states "
                   f"{'ok' if ok1 and ok2 and okt else m1 or m2 or mt} ({elapsed:.1f}s)")


# 4 ---------------------------------------------------------------------------

def test_criterion_04_regulator(verdict):
    rng = np.random.default_rng(44)
    exact = comp = commute = 0
    for _ in range(1000):
        x = np.cumsum(rng.integers(-3, 4, size=int(rng.integers(1, 50)))).astype(float)
        psi, phi = regulator_map(x)
        exact += np.array_equal(psi, running_inf_regulator(x))
        moved = np.flatnonzero(np.diff(psi) > 0) + 1
        comp += bool(np.all(np.diff(psi) >= 0) and np.all(phi >= 0) and np.all(phi[moved] == 0))
        c = float(rng.uniform(0.1, 10))
        commute += np.allclose(regulator_map(c * x)[0], c * psi, rtol=1e-12, atol=1e-12)
    sandwich = 0
    for delta in (0.0, 0.1, 1.0):
        for _ in range(300):
            w, x, y = synthetic_sandwich_triple(rng, int(rng.integers(1, 100)), delta)
            sandwich += sandwich_check(w, x, y, delta)
    ok = exact == comp == commute == 1000 and sandwich == 900
    verdict(4, ok, f"oracle {exact}/1000, complementarity {comp}/1000, scaling {commute}/1000, "
                   f"sandwich {sandwich}/900")


# 5 ---------------------------------------------------------------------------

def test_criterion_05_conservation(verdict):
    rng = np.random.default_rng(55)
    bad_ledger = negative = worst = 0
    runs = 0
    for _ in range(100):
        net, plan = random_plannable_network(rng, families=True)
        params = fixed_parameters(5.0, plan)
        for seed in range(10):
            if seed % 2 == 0:
                traj = run_dr_trajectory(net, plan, params, 100.0, seed=seed)
            else:
                traj = run_baseline_trajectory(net, plan, 100.0, seed=seed)
            runs += 1
            bad_ledger += int(np.any(ledger_residual(traj) != 0))
            negative += int(traj.Z.min() < 0)
            worst = max(worst, capacity_violation(traj))
    ok = bad_ledger == 0 and negative == 0 and worst <= 1e-9
    verdict(5, ok, f"{runs} runs: nonzero ledger in {bad_ledger}, negative Z in {negative}, "
                   f"worst busy-time excess {worst:.2e}")


# 6 ---------------------------------------------------------------------------

def test_criterion_06_sigma2(verdict):
    values = {}
    for name, net in (("NET-A", net_a()), ("NET-B", net_b()), ("NET-B det", deterministic_net_b())):
        values[name] = compute_sigma2(net, make_static_plan(net)).sigma2
    ok = values["NET-A"] == 2.0 and abs(values["NET-B"] - 1.0495) <= 1e-3 and values["NET-B det"] == 0.0
    verdict(6, ok, ", ".join(f"{k} {v:.6g}" for k, v in values.items()))


# 7 ---------------------------------------------------------------------------

def test_criterion_07_collapse(verdict, mc_dr):
    table, _ = mc_dr
    t0 = time.perf_counter()
    mid = run_experiment(_mc_config(["dr"], [16], COLLAPSE_REPS))
    elapsed = time.perf_counter() - t0
    reps = {8: table.replicates[("dr", 8.0)][:COLLAPSE_REPS],
            16: mid.replicates[("dr", 16.0)],
            32: table.replicates[("dr", 32.0)][:COLLAPSE_REPS]}
    med = {r: float(np.median([rep["collapse"] for rep in v])) for r, v in reps.items()}
    bound = table.select(statistic="collapse_median", r=32.0)[0]["reference"]
    within = float(np.mean([rep["collapse"] <= bound for rep in reps[32]]))
    ok = med[8] > med[16] > med[32] and within >= 0.99
    verdict(7, ok, f"medians r=8 {med[8]:.3f}, r=16 {med[16]:.3f}, r=32 {med[32]:.3f}; "
                   f"within bound {bound:.2f} at r=32: {within:.3f} (r=16 run {elapsed:.0f}s)")


# 8 ---------------------------------------------------------------------------

def test_criterion_08_workload_tail(verdict, mc_dr):
    table, elapsed = mc_dr
    parts, ok = [], True
    for row32 in table.select(statistic="tail_workload", r=32.0):
        row8 = table.select(statistic="tail_workload", r=8.0, x=row32["x"])[0]
        d32 = abs(row32["value"] - row32["reference"])
        d8 = abs(row8["value"] - row8["reference"])
        ok &= d32 <= TAIL_TOL and d32 <= d8
        parts.append(f"w={row32['x']:.3f}: P={row32['value']:.3f} ref={row32['reference']:.3f} "
                     f"|d32|={d32:.3f} |d8|={d8:.3f}")
    verdict(8, ok, "; ".join(parts) + f" ({elapsed:.0f}s for both r)")


# 9 ---------------------------------------------------------------------------

def test_criterion_09_lower_bound(verdict, mc_dr, mc_priority):
    dr, _ = mc_dr
    prio, elapsed = mc_priority
    parts, ok_lower, ok_dr = [], True, True
    for row in prio.select(statistic="tail_cost", r=32.0):
        ok_lower &= row["value"] >= row["reference"] - 2 * row["stderr"]
        drow = dr.select(statistic="tail_cost", r=32.0, x=row["x"])[0]
        ok_dr &= abs(drow["value"] - drow["reference"]) <= TAIL_TOL
        parts.append(f"x={row['x']:.3f}: baseline {row['value']:.3f} dr {drow['value']:.3f} "
                     f"bound {row['reference']:.3f}")
    verdict(9, ok_lower and ok_dr, f"lower bound {'holds' if ok_lower else 'FAILS'}, dr matches "
                                   f"{'yes' if ok_dr else 'NO'}; " + "; ".join(parts) + f" ({elapsed:.0f}s)")


# 10 --------------------------------------------------------------------------

def test_criterion_10_good_events(verdict, mc_dr):
    net = net_b()
    plan = make_static_plan(net)
    medians = {}
    for l in (50.0, 100.0, 200.0):
        params = fixed_parameters(l, plan)
        fracs = []
        for rep in range(100):
            traj = run_dr_trajectory(net, plan, params, 20 * l, seed=10, replication=rep)
            diags = monitor_good_events(traj)
            fracs.append(np.mean([d.N for d in diags]))
        medians[l] = float(np.median(fracs))
    table, _ = mc_dr
    case2 = table.select(statistic="case2_fraction", r=32.0)[0]["value"]
    ok = medians[50.0] <= medians[100.0] <= medians[200.0] and case2 < 0.01
    verdict(10, ok, "median N fraction " + ", ".join(f"l={l:g}: {v:.3f}" for l, v in medians.items())
            + f"; Case-2 share at r=32: {case2:.3f}")


# 11 --------------------------------------------------------------------------

def test_criterion_11_reproducibility(verdict, tmp_path):
    cfg = ExperimentConfig(network=network_to_dict(net_b()), policies=["dr", "priority"], r_values=[4, 8],
                           replications=40, seed=11, tail_times=[0.5, 1.0])
    first = emit_results(run_experiment(cfg), tmp_path / "serial")[0].read_bytes()
    again = emit_results(run_experiment(cfg), tmp_path / "serial2")[0].read_bytes()
    cfg.workers = 2
    par = emit_results(run_experiment(cfg), tmp_path / "parallel")[0].read_bytes()
    ok = first == again == par
    verdict(11, ok, f"results.csv identical across serial, repeat and 2-worker runs: {ok} ({len(first)} bytes)")
