"""Reference networks and a generator of random networks with complete resource pooling."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .network import DETERMINISTIC, EXPONENTIAL, DistributionSpec, NetworkSpec


def net_a(dist: DistributionSpec = EXPONENTIAL) -> NetworkSpec:
    """Single-server single-buffer queue, lambda = 1, m_1 = 1."""
    return NetworkSpec(
        num_buffers=1, num_servers=1,
        activity_server=[0], activity_buffer=[0],
        routing=np.zeros((1, 1)),
        arrival_rate=[1.0], mean_service=[1.0], holding_cost=[1.0],
        interarrival_dist=[dist], service_dist=[dist],
    )


def net_b(dist: DistributionSpec = EXPONENTIAL, lam=(1.3, 0.7), mean_service=(1.0, 1.0, 1.0),
          h=(1.0, 2.0)) -> NetworkSpec:
    """Two servers, two buffers, three activities in an N shape.

    a1: (s1, b1), a2: (s2, b1), a3: (s2, b2); no routing.
    """
    return NetworkSpec(
        num_buffers=2, num_servers=2,
        activity_server=[0, 1, 1], activity_buffer=[0, 0, 1],
        routing=np.zeros((3, 2)),
        arrival_rate=list(lam), mean_service=list(mean_service), holding_cost=list(h),
        interarrival_dist=[dist if v > 0 else None for v in lam], service_dist=[dist] * 3,
    )


def deterministic_net_b(**kw) -> NetworkSpec:
    return net_b(DETERMINISTIC, **kw)


def random_crp_network(rng: np.random.Generator, max_buffers: int = 3, max_servers: int = 3,
                       extra_activities: int = 1, routing_mass: float = 0.3,
                       families: bool = False) -> NetworkSpec:
    """Random open network built to satisfy heavy traffic with complete resource pooling.

    Basic activities form a random spanning tree of the bipartite server/buffer
    graph (so b = m + p - 1), nominal rates split each server's capacity, and
    arrival rates are back-solved from R x* = lambda.  Nonbasic activities get
    slow service so that their reduced cost stays strictly positive.  The
    result still has to be checked with the planner; callers should retry on
    rejection.
    """
    m = int(rng.integers(1, max_buffers + 1))
    p = int(rng.integers(1, max_servers + 1))
    # random spanning tree on nodes buffers 0..m-1, servers m..m+p-1 by random attachment
    nodes = list(rng.permutation(m + p))
    edges = []
    seen = [nodes[0]]
    for v in nodes[1:]:
        other_side = [u for u in seen if (u < m) != (v < m)]
        if not other_side:
            # attach later once the other side appears
            seen.append(v)
            continue
        u = other_side[int(rng.integers(len(other_side)))]
        edges.append((u, v))
        seen.append(v)
    # reconnect isolated nodes (inserted before the other side existed)
    connected = {a for e in edges for a in e}
    for v in nodes:
        if v not in connected and (len(edges) > 0 or v != nodes[0]):
            opp = [u for u in range(m + p) if (u < m) != (v < m)]
            u = opp[int(rng.integers(len(opp)))]
            edges.append((u, v))
            connected |= {u, v}
    pairs = sorted({(max(e) - m, min(e)) for e in edges})  # (server, buffer)
    if len(pairs) != m + p - 1:
        return random_crp_network(rng, max_buffers, max_servers, extra_activities, routing_mass, families)
    n_basic = len(pairs)
    # work in exact decimals so the planner sees a heavy-traffic instance exactly
    x = [Fraction(0)] * n_basic
    for s in range(p):
        idx = [j for j, (sv, _) in enumerate(pairs) if sv == s]
        w = np.round(rng.dirichlet(np.ones(len(idx))) * 1000).astype(int)
        w = np.maximum(w, 1)
        w[-1] = 1000 - w[:-1].sum()
        if w[-1] <= 0:
            return random_crp_network(rng, max_buffers, max_servers, extra_activities, routing_mass, families)
        for j, wj in zip(idx, w):
            x[j] = Fraction(int(wj), 1000)
    mean_basic = [Fraction(int(v), 100) for v in rng.integers(50, 151, n_basic)]
    # feed-forward routing from buffer b to higher buffers only
    P = [[Fraction(0)] * m for _ in range(n_basic)]
    for j, (_, b) in enumerate(pairs):
        if b < m - 1 and rng.random() < 0.6:
            target = int(rng.integers(b + 1, m))
            P[j][target] = Fraction(int(rng.integers(5, int(routing_mass * 100) + 1)), 100)
    lam = [Fraction(0)] * m
    for j, (_, b) in enumerate(pairs):
        rate = x[j] / mean_basic[j]
        lam[b] += rate
        for l in range(m):
            lam[l] -= P[j][l] * rate
    if any(v < 0 for v in lam) or not any(v > 0 for v in lam):
        return random_crp_network(rng, max_buffers, max_servers, extra_activities, routing_mass, families)
    # rates must survive the float round trip exactly: keep those with short decimals
    lam_f = [float(v) for v in lam]
    if any(Fraction(str(f)) != v for f, v in zip(lam_f, lam)):
        return random_crp_network(rng, max_buffers, max_servers, extra_activities, routing_mass, families)
    lam = np.array(lam_f)
    P = np.array([[float(v) for v in row] for row in P])
    mean_basic = [float(v) for v in mean_basic]

    servers = [s for s, _ in pairs]
    buffers = [b for _, b in pairs]
    routing = [P[j] for j in range(n_basic)]
    means = list(mean_basic)
    for _ in range(extra_activities):
        s = int(rng.integers(p))
        b = int(rng.integers(m))
        if (s, b) in pairs:
            continue
        servers.append(s)
        buffers.append(b)
        routing.append(np.zeros(m))
        means.append(float(rng.integers(20, 41)))
    n = len(servers)

    def dist():
        if not families:
            return EXPONENTIAL
        fam = rng.choice(["exponential", "uniform", "deterministic", "gamma", "lognormal"])
        params = {"uniform": {"half_width": 0.5}, "gamma": {"shape": 2.0},
                  "lognormal": {"sigma": 0.5}}.get(str(fam), {})
        return DistributionSpec(str(fam), params)

    return NetworkSpec(
        num_buffers=m, num_servers=p,
        activity_server=servers, activity_buffer=buffers,
        routing=np.array(routing).reshape(n, m),
        arrival_rate=lam, mean_service=means,
        holding_cost=rng.uniform(0.5, 2.0, m).round(3),
        interarrival_dist=[dist() if v > 0 else None for v in lam],
        service_dist=[dist() for _ in range(n)],
    )


def random_plannable_network(rng: np.random.Generator, **kw):
    """Draw random CRP networks until the planner accepts one; returns (net, plan)."""
    from .planner import make_static_plan

    for _ in range(1000):
        net = random_crp_network(rng, **kw)
        try:
            return net, make_static_plan(net)
        except (ValueError, ArithmeticError):
            continue
    raise RuntimeError("could not generate a plannable network")
