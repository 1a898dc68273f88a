"""Constant-speed travel model and nearest-vehicle queries over the fleet."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .core import EUCLIDEAN, MANHATTAN, BatchConfig, Location, Vehicle, round_half_up


def distance(a: Location, b: Location, metric: str = EUCLIDEAN) -> float:
    dx = a.x - b.x
    dy = a.y - b.y
    if metric == EUCLIDEAN:
        return math.hypot(dx, dy)
    if metric == MANHATTAN:
        return abs(dx) + abs(dy)
    raise ValueError(f"unknown metric {metric!r}")


def travel_time(a: Location, b: Location, config: BatchConfig) -> int:
    """Leg duration in whole seconds under the configured metric and speed."""
    return round_half_up(distance(a, b, config.metric) / config.speed)


def direction_angle_deg(base: Location, toward_a: Location, toward_b: Location) -> float:
    """Angle in degrees between the rays base->a and base->b (0 for degenerate rays)."""
    ax, ay = toward_a.x - base.x, toward_a.y - base.y
    bx, by = toward_b.x - base.x, toward_b.y - base.y
    na = math.hypot(ax, ay)
    nb = math.hypot(bx, by)
    if na == 0.0 or nb == 0.0:
        return 0.0
    cos = (ax * bx + ay * by) / (na * nb)
    return math.degrees(math.acos(max(-1.0, min(1.0, cos))))


class SpatialIndex:
    """k-d tree over vehicle locations, rebuilt at each batch boundary.

    Queries return exactly the k nearest vehicles satisfying a predicate,
    ordered by distance with ties broken by lower vehicle id. Euclidean
    ordering compares squared distances to stay determinate across
    platforms.
    """

    def __init__(self, vehicles: Sequence[Vehicle], config: BatchConfig):
        self.metric = config.metric
        self._vehicles = sorted(vehicles, key=lambda v: v.id)
        if self._vehicles:
            pts = np.array([[v.location.x, v.location.y] for v in self._vehicles])
            self._tree = cKDTree(pts)
        else:
            self._tree = None
        self._p = 2 if self.metric == EUCLIDEAN else 1

    def _key(self, origin: Location, loc: Location) -> float:
        dx = origin.x - loc.x
        dy = origin.y - loc.y
        if self.metric == EUCLIDEAN:
            return dx * dx + dy * dy
        return abs(dx) + abs(dy)

    def nearest(
        self,
        origin: Location,
        k: int,
        predicate: Callable[[Vehicle], bool] | None = None,
    ) -> list[Vehicle]:
        if k < 1:
            raise ValueError("k must be >= 1")
        if self._tree is None:
            return []
        n = len(self._vehicles)
        kk = min(n, max(2 * k, k + 8))
        while True:
            dist, idx = self._tree.query([origin.x, origin.y], k=kk, p=self._p)
            dist = np.atleast_1d(dist)
            idx = np.atleast_1d(idx)
            ranked = []
            for i in idx:
                v = self._vehicles[i]
                if predicate is None or predicate(v):
                    ranked.append((self._key(origin, v.location), v.id, v))
            ranked.sort(key=lambda t: (t[0], t[1]))
            if len(ranked) >= k:
                kth = ranked[k - 1][0]
                kth_tree = math.sqrt(kth) if self._p == 2 else kth
                # the k-th candidate must be strictly inside the scanned radius,
                # otherwise an unscanned vehicle could tie with a lower id
                if kk >= n or dist[-1] > kth_tree * (1 + 1e-12) + 1e-12:
                    return [t[2] for t in ranked[:k]]
            elif kk >= n:
                return [t[2] for t in ranked]
            kk = min(n, kk * 2)


def nearest_vehicles(
    origin: Location,
    k: int,
    fleet: Sequence[Vehicle],
    config: BatchConfig,
    predicate: Callable[[Vehicle], bool] | None = None,
) -> list[Vehicle]:
    """Up to k vehicles satisfying the predicate, closest first (ties by id)."""
    return SpatialIndex(fleet, config).nearest(origin, k, predicate)
