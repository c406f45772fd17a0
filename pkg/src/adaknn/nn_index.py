"""Exact nearest-neighbour queries over a fixed dataset.

Neighbours are ordered by ``(distance, sample index)``: ties at equal distance
go to the smaller index. For Euclidean data a ``scipy`` k-d tree produces a
candidate superset; the final distances are then recomputed with the metric
itself and sorted, so answers are bit-identical to :func:`brute_force_knn`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import Dataset, InputError, as_point, as_points

# relative slack on the tree radius; tree and metric distances differ by a few ulps
_RADIUS_SLACK = 1e-9


@dataclass(frozen=True)
class NeighborList:
    indices: np.ndarray
    distances: np.ndarray

    @property
    def k(self) -> int:
        return int(self.indices.size)

    @property
    def radius(self) -> float:
        return float(self.distances[-1])


@dataclass(frozen=True)
class DistanceProfile:
    """Distances from a query to all n samples, sorted; entry ``k-1`` is ``r_{k,n}(x)``."""

    indices: np.ndarray
    distances: np.ndarray

    @property
    def n(self) -> int:
        return int(self.distances.size)

    def radius(self, k: int) -> float:
        return float(self.distances[k - 1])

    def head(self, k: int) -> NeighborList:
        return NeighborList(self.indices[:k], self.distances[:k])


def _sorted_by_distance(idx: np.ndarray, dist: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((idx, dist))
    return idx[order], dist[order]


def _check_k(k, n: int) -> int:
    if isinstance(k, bool) or int(k) != k:
        raise InputError(f"k must be an integer, got {k!r}")
    k = int(k)
    if not 1 <= k <= n:
        raise InputError(f"k must lie in [1, {n}], got {k}")
    return k


def brute_force_knn(dataset: Dataset, x, k: int) -> NeighborList:
    """Full scan + sort. The reference every accelerated path is tested against."""
    x = as_point(x, dataset.dim)
    k = _check_k(k, dataset.n)
    dist = dataset.metric.to_many(dataset.points, x)
    idx, dist = _sorted_by_distance(np.arange(dataset.n), dist)
    return NeighborList(idx[:k], dist[:k])


class Index:
    """Read-only query structure over a :class:`Dataset`."""

    def __init__(self, dataset: Dataset, use_tree: bool | None = None):
        if dataset.n < 1:
            raise InputError("cannot index an empty dataset")
        self.dataset = dataset
        if use_tree is None:
            use_tree = dataset.metric.is_euclidean
        if use_tree and not dataset.metric.is_euclidean:
            raise InputError("the tree path is only available for the Euclidean metric")
        self._tree = cKDTree(dataset.points) if use_tree else None

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def uses_tree(self) -> bool:
        return self._tree is not None

    def _exact(self, idx: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dist = self.dataset.metric.to_many(self.dataset.points[idx], x)
        return _sorted_by_distance(idx, dist)

    def _candidates(self, x: np.ndarray, radius: float) -> np.ndarray:
        r = radius * (1.0 + _RADIUS_SLACK) + 1e-300
        return np.asarray(self._tree.query_ball_point(x, r), dtype=np.intp)

    def query_knn(self, x, k: int) -> NeighborList:
        x = as_point(x, self.dataset.dim)
        k = _check_k(k, self.n)
        if self._tree is None:
            return brute_force_knn(self.dataset, x, k)
        dk, _ = self._tree.query(x, k=[k])
        idx, dist = self._exact(self._candidates(x, float(dk[0])), x)
        return NeighborList(idx[:k], dist[:k])

    def query_support(self, x, k: int) -> NeighborList:
        """Every sample within ``r_{k,n}(x)``, ties at the k-th distance included."""
        x = as_point(x, self.dataset.dim)
        k = _check_k(k, self.n)
        if self._tree is None:
            prof = self.query_profile(x)
            m = int(np.searchsorted(prof.distances, prof.distances[k - 1], side="right"))
            return prof.head(m)
        dk, _ = self._tree.query(x, k=[k])
        idx, dist = self._exact(self._candidates(x, float(dk[0])), x)
        m = int(np.searchsorted(dist, dist[k - 1], side="right"))
        return NeighborList(idx[:m], dist[:m])

    def query_radius(self, x, r: float) -> NeighborList:
        """All samples with distance ``<= r``, sorted."""
        x = as_point(x, self.dataset.dim)
        if self._tree is None:
            dist = self.dataset.metric.to_many(self.dataset.points, x)
            idx = np.flatnonzero(dist <= r)
            idx, d = _sorted_by_distance(idx, dist[idx])
            return NeighborList(idx, d)
        idx, dist = self._exact(self._candidates(x, r), x)
        keep = dist <= r
        return NeighborList(idx[keep], dist[keep])

    def query_profile(self, x) -> DistanceProfile:
        x = as_point(x, self.dataset.dim)
        dist = self.dataset.metric.to_many(self.dataset.points, x)
        idx, dist = _sorted_by_distance(np.arange(self.n), dist)
        return DistanceProfile(idx, dist)

    def query_profiles(self, Q) -> tuple[np.ndarray, np.ndarray]:
        """Batched profiles: ``(indices, distances)`` arrays of shape ``(m, n)``.

        Row i equals ``query_profile(Q[i])``.
        """
        Q = as_points(Q, self.dataset.dim)
        dist = self.dataset.metric.cross(Q, self.dataset.points)
        # stable sort on distance == lexsort on (index, distance)
        order = np.argsort(dist, axis=1, kind="stable")
        return order, np.take_along_axis(dist, order, axis=1)


def build_index(dataset: Dataset, use_tree: bool | None = None) -> Index:
    return Index(dataset, use_tree)


def query_knn(index: Index, x, k: int) -> NeighborList:
    return index.query_knn(x, k)


def query_profile(index: Index, x) -> DistanceProfile:
    return index.query_profile(x)
