"""Reproducible random streams for the 2n+m stochastic primitive sequences.

Every sequence (interarrivals of buffer k, services of activity j, routing of
activity j) owns a Philox stream keyed by ``(seed, replication, stream id)``.
Philox is counter based, so draw number ``i`` of a stream is the transform of
raw word ``i`` no matter how draws on different streams are interleaved.
"""

from __future__ import annotations

import numpy as np

from .network import NetworkSpec, ZeroRateError

BLOCK = 1024
_WORDS_PER_COUNTER = 4  # Philox4x64 emits four 64-bit words per counter step


def stream_key(seed: int, replication: int, stream: int) -> np.ndarray:
    return np.random.SeedSequence(seed, spawn_key=(replication, stream)).generate_state(2, np.uint64)


def uniforms(key: np.ndarray, start: int, count: int) -> np.ndarray:
    """Uniforms in the open interval (0, 1) for counter positions ``start .. start+count``.

    ``start`` must be a multiple of four.
    """
    bg = np.random.Philox(key=key, counter=[start // _WORDS_PER_COUNTER, 0, 0, 0])
    raw = bg.random_raw(count)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


class PrimitiveStreams:
    """Per-replication source of interarrival, service and routing draws.

    Stream ids: ``k`` for interarrivals of buffer k, ``m + j`` for service of
    activity j and ``m + n + j`` for routing of activity j.
    """

    def __init__(self, net: NetworkSpec, seed: int = 0, replication: int = 0):
        self.net = net
        self.seed = int(seed)
        self.replication = int(replication)
        m, n = net.num_buffers, net.num_activities
        self.num_streams = 2 * n + m
        self._keys = [stream_key(self.seed, self.replication, s) for s in range(self.num_streams)]
        self.counters = [0] * self.num_streams
        self._buf: list[list[float]] = [[] for _ in range(self.num_streams)]
        self._pos = [0] * self.num_streams
        self._block = [-1] * self.num_streams

        self._inter_scale = [1.0 / lam if lam > 0 else 0.0 for lam in net.arrival_rate]
        self._service_scale = [float(x) for x in net.mean_service]
        # routing: cumulative thresholds; a uniform beyond the last one means exit (-1)
        self._route_cum = [np.cumsum(row).tolist() for row in net.routing]
        self._dists = list(net.interarrival_dist) + list(net.service_dist)

    def _refill(self, s: int) -> None:
        b = self._block[s] + 1
        u = uniforms(self._keys[s], b * BLOCK, BLOCK)
        if s < len(self._dists):
            u = self._dists[s].ppf(u)
        self._buf[s] = u.tolist()
        self._block[s] = b
        self._pos[s] = 0

    def _next(self, s: int) -> float:
        pos = self._pos[s]
        if pos >= BLOCK or self._block[s] < 0:
            self._refill(s)
            pos = 0
        self._pos[s] = pos + 1
        self.counters[s] += 1
        return self._buf[s][pos]

    def base_draw(self, s: int, index: int) -> float:
        """Unit-mean draw number ``index`` of stream ``s`` (or the raw uniform for routing
        streams), computed directly from the counter without touching stream state."""
        start = (index // _WORDS_PER_COUNTER) * _WORDS_PER_COUNTER
        u = uniforms(self._keys[s], start, _WORDS_PER_COUNTER)[index - start : index - start + 1]
        if s < len(self._dists):
            u = self._dists[s].ppf(u)
        return float(u[0])

    def draw_interarrival(self, k: int) -> float:
        scale = self._inter_scale[k]
        if scale == 0.0:
            raise ZeroRateError(f"buffer {k} has no external arrivals")
        return self._next(k) * scale

    def draw_service(self, j: int) -> float:
        return self._next(self.net.num_buffers + j) * self._service_scale[j]

    def draw_route(self, j: int) -> int:
        """Next buffer for a job finished by activity j, or -1 for exit."""
        u = self._next(self.net.num_buffers + self.net.num_activities + j)
        for l, c in enumerate(self._route_cum[j]):
            if u < c:
                return l
        return -1


def draw_interarrival(streams: PrimitiveStreams, k: int) -> float:
    return streams.draw_interarrival(k)


def draw_service(streams: PrimitiveStreams, j: int) -> float:
    return streams.draw_service(j)


def draw_route(streams: PrimitiveStreams, j: int) -> int:
    return streams.draw_route(j)
