import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crpnet.examples import random_plannable_network
from crpnet.policy import (
    Eps2RangeError,
    OutOfBallError,
    PolicyParams,
    classify_state,
    fixed_parameters,
    make_plan,
    plan_case1,
    plan_case2,
    scale_parameters,
)


@pytest.fixture
def params100():
    # delta chosen so that the ball radius is 3 at l = 100
    return PolicyParams(l=100.0, theta=np.array([1080.0, 1080.0]), delta=0.03, job_cap_divisor=3)


def test_scale_parameters_r40(planb):
    p = scale_parameters(40, 0.1, planb)
    assert p.l == pytest.approx(40 ** 0.9)
    assert p.l == pytest.approx(27.66, abs=5e-3)
    np.testing.assert_allclose(p.theta, 10.8 * p.l)
    assert p.theta[0] == pytest.approx(298.7, abs=0.05)


def test_scale_parameters_unit(planb):
    p = scale_parameters(1, 0.1, planb)
    assert p.l == 1.0
    np.testing.assert_allclose(p.theta, planb.theta_star)


def test_eps2_range(planb):
    with pytest.raises(Eps2RangeError):
        scale_parameters(8, 0.4, planb)
    with pytest.raises(Eps2RangeError):
        scale_parameters(8, 0.0, planb)


def test_classify(planb):
    p = fixed_parameters(100.0, planb)
    th = p.theta
    assert p.radius == pytest.approx(1.6304, abs=1e-4)
    assert classify_state(th, p) == 1
    assert classify_state(th + [500, 0], p) == 1
    assert classify_state(th + [0, 120], p) == 2
    assert classify_state(th - [2, 0], p) == 2


@pytest.mark.parametrize("q, idle, x, z", [
    ((1080, 1080), 0.0, (1, 0.3, 0.7), (1080, 1080)),
    ((1180, 1080), 0.0, (1, 0.3, 0.7), (1180, 1080)),
    ((1078, 1081), 0.5, (1, 0.2865, 0.7135), (1080, 1080)),
])
def test_case1_worked_examples(planb, params100, q, idle, x, z):
    rp = plan_case1(np.array(q, float), params100, planb)
    assert rp.case_tag == 1
    assert rp.idle_time == pytest.approx(idle, abs=1e-9)
    assert rp.exec_time == pytest.approx(100 + idle, abs=1e-9)
    np.testing.assert_allclose(rp.x, x, atol=1e-9)
    np.testing.assert_allclose(rp.target, z, atol=1e-9)
    np.testing.assert_allclose(rp.activity_time, np.array(x) * 100, atol=1e-7)


def test_case2_worked_example(planb, params100):
    rp = plan_case2(np.array([1080.0, 1200.0]), params100, planb)
    assert rp.case_tag == 2
    assert rp.idle_time == 0
    assert rp.stretch == pytest.approx(4.0, abs=1e-9)
    assert rp.exec_time == pytest.approx(400.0, abs=1e-9)
    np.testing.assert_allclose(rp.x, [1.0, 0.0, 1.0], atol=1e-9)
    np.testing.assert_allclose(rp.target, [1200, 1080], atol=1e-9)


def test_case2_empty_system(planb, params100):
    rp = plan_case2(np.zeros(2), params100, planb)
    assert rp.idle_time == pytest.approx(1080)
    np.testing.assert_allclose(rp.q_tilde, [1404, 756])
    assert np.all(rp.x >= -1e-12)
    assert np.all(planb.A @ rp.x <= 1 + 1e-9)
    assert rp.target[1] == pytest.approx(1080)
    assert rp.target[0] - 1080 == pytest.approx(planb.y @ (rp.q_tilde - 1080) / planb.y[0])


def test_case1_out_of_ball(planb, params100):
    with pytest.raises(OutOfBallError):
        plan_case1(np.array([1080.0, 1200.0]), params100, planb)


def test_make_plan_dispatch(planb, params100):
    assert make_plan(np.array([1080.0, 1080.0]), params100, planb).case_tag == 1
    assert make_plan(np.array([0.0, 5000.0]), params100, planb).case_tag == 2
    np.testing.assert_allclose(make_plan(params100.theta, params100, planb).x, planb.x_star, atol=1e-12)
    with pytest.raises(ValueError):
        make_plan(np.array([-1.0, 3.0]), params100, planb)


def test_job_caps(planb, params100):
    rp = plan_case1(np.array([1081.0, 1079.0]), params100, planb)
    assert rp.job_cap.tolist() == [360, 360, 359]
    rp2 = plan_case2(np.zeros(2), params100, planb)
    assert rp2.job_cap.tolist() == [468, 468, 252]


def test_nonbasic_gets_no_time():
    net, plan = random_plannable_network(np.random.default_rng(3), extra_activities=2)
    p = fixed_parameters(50.0, plan)
    for q in (p.theta, np.zeros(plan.num_buffers), p.theta * 2):
        rp = make_plan(q, p, plan)
        assert np.all(rp.activity_time[plan.nonbasic_set] == 0)


def sample_in_ball(rng, theta, radius, count, top=None):
    m = len(theta)
    q = theta + rng.uniform(-radius, radius, size=(count, m)) * (1 - 1e-9)
    top = radius * 50 if top is None else top
    q[:, 0] = theta[0] - radius * (1 - 1e-9) + rng.uniform(0, top, size=count)
    return q


def _case1_plan_checks(plan, p, qs):
    for q in qs:
        rp = plan_case1(q, p, plan)
        xb = rp.x[plan.basic_set]
        assert np.all(xb >= 0.5 * plan.x_basic - 1e-9)
        # the target two ways: closed form, and the balance q + lambda T - R x l
        z_balance = q + plan.lam * rp.exec_time - plan.R @ rp.x * p.l
        np.testing.assert_allclose(rp.target, z_balance, rtol=1e-9, atol=1e-9 * p.l)
        assert np.all(rp.activity_time >= 0)
        assert np.all(plan.A @ rp.activity_time <= rp.work_time + 1e-9 * p.l)


def test_case1_bounds_net_b(planb):
    rng = np.random.default_rng(0)
    p = fixed_parameters(100.0, planb)
    _case1_plan_checks(planb, p, sample_in_ball(rng, p.theta, p.radius, 10_000))


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.sampled_from([10.0, 100.0, 1000.0]))
def test_case1_bounds_random_networks(seed, l):
    rng = np.random.default_rng(seed)
    _, plan = random_plannable_network(rng)
    p = fixed_parameters(l, plan)
    _case1_plan_checks(plan, p, sample_in_ball(rng, p.theta, p.radius, 200))


def _near_target_checks(plan, l, qs):
    theta = plan.theta_star * l
    b, pn = len(plan.basic_set), plan.num_servers
    for q in qs:
        sol = plan.Pi_inv @ np.concatenate([q + plan.lam * l - theta, np.full(pn, l)])
        assert np.all(sol[:b] / l >= 0.5 * plan.x_basic - 1e-9)
        assert sol[b] + theta[0] >= 0.5 * theta[0] - 1e-9


def test_near_target_bounds_net_b(planb):
    rng = np.random.default_rng(1)
    l = 100.0
    radius = planb.C0 / (2 * planb.num_buffers) * l
    # the ball around theta is two-sided in every buffer, plus any surplus in buffer 0
    qs = planb.theta_star * l + rng.uniform(-radius, radius, size=(10_000, 2)) * (1 - 1e-9)
    qs[:, 0] += rng.uniform(0, 1000, size=10_000)
    _near_target_checks(planb, l, qs)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_near_target_bounds_random_networks(seed):
    rng = np.random.default_rng(seed)
    _, plan = random_plannable_network(rng)
    l = 100.0
    radius = plan.C0 / (2 * plan.num_buffers) * l
    m = plan.num_buffers
    qs = plan.theta_star * l + rng.uniform(-radius, radius, size=(200, m)) * (1 - 1e-9)
    qs[:, 0] += rng.uniform(0, 10 * l, size=200)
    _near_target_checks(plan, l, qs)


def sample_out_of_ball(rng, p, count):
    m = len(p.theta)
    out = []
    while len(out) < count:
        q = rng.uniform(0, 2.5, size=m) * p.theta
        if rng.random() < 0.3:
            q = np.round(q)
        if classify_state(q, p) == 2:
            out.append(q)
    return np.array(out)


def _case2_plan_checks(plan, p, qs):
    for q in qs:
        rp = plan_case2(q, p, plan)
        assert rp.stretch >= 1.0
        assert plan.y @ rp.q_tilde >= plan.y @ p.theta - 1e-9 * p.l
        assert np.all(rp.x >= -1e-9)
        assert np.all(plan.A @ rp.x <= 1 + 1e-9)
        np.testing.assert_allclose(rp.target[1:], p.theta[1:], rtol=1e-12)
        z1 = plan.y @ (rp.q_tilde - p.theta) / plan.y[0] + p.theta[0]
        assert rp.target[0] == pytest.approx(z1, rel=1e-12)
        assert rp.target[0] >= p.theta[0] - 1e-9 * p.l
        balance = rp.q_tilde + plan.lam * rp.stretch * p.l - plan.R @ rp.activity_time
        np.testing.assert_allclose(rp.target, balance, rtol=1e-9, atol=1e-8 * p.l)
        assert np.all(plan.A @ rp.activity_time <= rp.work_time * (1 + 1e-12) + 1e-9)


def test_case2_bounds_net_b(planb):
    rng = np.random.default_rng(2)
    p = fixed_parameters(100.0, planb)
    _case2_plan_checks(planb, p, sample_out_of_ball(rng, p, 10_000))


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_case2_bounds_random_networks(seed):
    rng = np.random.default_rng(seed)
    _, plan = random_plannable_network(rng)
    p = fixed_parameters(100.0, plan)
    _case2_plan_checks(plan, p, sample_out_of_ball(rng, p, 100))


def test_workload_conserved_over_full_period(planb):
    p = fixed_parameters(100.0, planb)
    rng = np.random.default_rng(4)
    for q in sample_in_ball(rng, p.theta, p.radius, 500):
        rp = plan_case1(q, p, planb)
        if rp.idle_time == 0 and q[0] >= p.theta[0]:
            assert planb.y @ rp.target == pytest.approx(planb.y @ q, rel=1e-12)


def test_stretch_one_matches_case1_at_boundary(planb):
    p = fixed_parameters(100.0, planb)
    edge = p.theta + np.array([0.0, p.radius])
    inside = plan_case1(edge - [0, 1e-9], p, planb)
    outside = plan_case2(edge, p, planb)
    assert outside.stretch == 1.0
    np.testing.assert_allclose(outside.x, inside.x, atol=1e-9)
    np.testing.assert_allclose(outside.target, inside.target, atol=1e-6)
    assert outside.exec_time == pytest.approx(inside.exec_time, abs=1e-6)
