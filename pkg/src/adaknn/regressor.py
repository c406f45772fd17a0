"""Kernel-weighted k-NN regression estimate and its bias/variance split.

The estimate at ``x`` is ``sum_i w_i Y_i`` with
``w_i = K(rho(x, X_i) / r_k) / sum_j K(rho(x, X_j) / r_k)``, where ``r_k`` is
the distance to the k-th nearest sample. Every sample with ``rho <= r_k``
takes part, including ties beyond the k-th.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Kernel, TargetFunction, as_point
from .nn_index import DistanceProfile, Index, NeighborList, _check_k

BOX = Kernel()


@dataclass(frozen=True)
class WeightVector:
    """``kernel_values`` are the unnormalised ``K(rho / r_k)`` behind ``weights``."""

    indices: np.ndarray
    weights: np.ndarray
    radius: float
    kernel_values: np.ndarray | None = None

    @property
    def sq_sum(self) -> float:
        # sum K^2 / (sum K)^2 rounds once; summing squared weights can overshoot 1/k by an ulp
        if self.kernel_values is None:
            return float(np.dot(self.weights, self.weights))
        kv = self.kernel_values
        return float(np.dot(kv, kv) / (kv.sum() ** 2))

    @property
    def support_size(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True)
class Prediction:
    value: float
    k_used: int
    radius: float
    weight_sq_sum: float


def weighted_mean(weights: np.ndarray, values: np.ndarray) -> float:
    """``sum_i w_i v_i`` centred on ``v_0``, so that constant values come back exactly."""
    v0 = values[0]
    return float(v0 + np.dot(weights, values - v0))


def compute_weights(neighbors: DistanceProfile | NeighborList, kernel: Kernel, k: int) -> WeightVector:
    """Normalised kernel weights over the support ``{i : rho(x, X_i) <= r_k}``.

    ``neighbors`` must hold sorted distances covering at least the whole
    support (a full :class:`DistanceProfile`, or the output of
    :meth:`Index.query_support`). A zero radius puts uniform weight on the
    samples at distance zero.
    """
    dist = neighbors.distances
    k = _check_k(k, dist.size)
    r = float(dist[k - 1])
    m = int(np.searchsorted(dist, r, side="right"))
    idx = neighbors.indices[:m]
    if r == 0.0:
        kv = np.ones(m)
    else:
        kv = kernel(dist[:m] / r)
    return WeightVector(idx, kv / kv.sum(), r, kv)


def predict_fixed_k(index: Index, x, k: int, kernel: Kernel = BOX) -> Prediction:
    x = as_point(x, index.dataset.dim)
    wv = compute_weights(index.query_support(x, k), kernel, k)
    value = weighted_mean(wv.weights, index.dataset.labels[wv.indices])
    return Prediction(value, int(k), wv.radius, wv.sq_sum)


def conditional_mean_estimate(index: Index, x, k: int, kernel: Kernel, target: TargetFunction) -> float:
    """Same weights applied to the true target values: the noise-free estimate."""
    x = as_point(x, index.dataset.dim)
    wv = compute_weights(index.query_support(x, k), kernel, k)
    fx = target(index.dataset.points[wv.indices])
    return weighted_mean(wv.weights, fx)


def error_decomposition(index: Index, x, k: int, kernel: Kernel, target: TargetFunction) -> tuple[float, float]:
    """``(|f_nk - f~_nk|^2, |f~_nk - f(x)|^2)``; twice their sum bounds the squared error."""
    x = as_point(x, index.dataset.dim)
    wv = compute_weights(index.query_support(x, k), kernel, k)
    est = weighted_mean(wv.weights, index.dataset.labels[wv.indices])
    mean = weighted_mean(wv.weights, target(index.dataset.points[wv.indices]))
    fx = float(target(x))
    return (est - mean) ** 2, (mean - fx) ** 2


def predict_batch(sorted_labels: np.ndarray, sorted_dist: np.ndarray, ks: np.ndarray,
                  kernel: Kernel = BOX) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised :func:`predict_fixed_k` over rows of batched profiles.

    ``sorted_labels[i]`` are the labels in profile order of query i, and
    ``ks[i]`` is the k used for that query. Returns ``(values, radii, weight_sq_sums)``.
    """
    m, n = sorted_dist.shape
    ks = np.broadcast_to(np.asarray(ks, dtype=np.intp), (m,))
    r = sorted_dist[np.arange(m), ks - 1]
    inside = sorted_dist <= r[:, None]
    zero = r == 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(zero[:, None], 0.0, sorted_dist / np.where(zero, 1.0, r)[:, None])
    kv = np.where(inside, kernel(u), 0.0)
    total = kv.sum(axis=1, keepdims=True)
    w = kv / total
    y0 = sorted_labels[:, :1]
    values = y0[:, 0] + np.einsum("ij,ij->i", w, sorted_labels - y0)
    return values, r, np.einsum("ij,ij->i", kv, kv) / total[:, 0] ** 2
