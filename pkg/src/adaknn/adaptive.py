"""Per-query choice of k by balancing ``theta / k`` against ``r_k^2``.

For a query with sorted neighbour distances ``r_1 <= ... <= r_n`` and a cap
``Delta >= r_n``:

* ``k1`` is the largest k with ``Delta^2 * theta / k >= r_k^2``;
* ``k2 = min(k1 + 1, n)``;
* the chosen k minimises ``theta / k + r_k^2`` over ``{k1, k2}`` (ties to ``k1``).

Because ``Delta^2 theta / k`` decreases and ``r_k^2`` does not, the condition
holds on a prefix of ``[n]``, and it always holds at k = 1 when ``theta >= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import InputError, Kernel, NoiseModel, as_point
from .nn_index import DistanceProfile, Index
from .regressor import BOX, Prediction, compute_weights, weighted_mean


class DeltaCapPolicy(str, Enum):
    PROFILE_MAX = "profile-max"
    DIAMETER = "diameter"


@dataclass(frozen=True)
class AdaptiveConfig:
    """``delta_cap=None`` means the tightest admissible cap: the query's own max distance."""

    delta: float = 0.05
    theta: float = 1.0
    delta_cap: float | None = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InputError(f"delta must lie in (0, 1), got {self.delta}")
        if not (self.theta >= 1.0 and math.isfinite(self.theta)):
            raise InputError(f"theta must be finite and >= 1, got {self.theta}")
        if self.delta_cap is not None and not self.delta_cap >= 0.0:
            raise InputError(f"delta_cap must be >= 0, got {self.delta_cap}")

    @classmethod
    def for_sample(cls, n: int, delta: float = 0.05, theta: float | str = "ln2",
                   noise: NoiseModel | None = None, delta_cap: float | None = None) -> "AdaptiveConfig":
        """Resolve a theta policy for sample size n and check ``theta >= ln(n / delta)``."""
        th = resolve_theta(theta, n, delta, noise)
        if th < math.log(n / delta) * (1 - 1e-12):
            raise InputError(f"theta={th:g} is below ln(n/delta)={math.log(n / delta):g}")
        return cls(delta, th, delta_cap)


@dataclass(frozen=True)
class SelectionDiagnostics:
    k1: int
    k2: int
    objective_k1: float
    objective_k2: float
    chosen: int
    delta_cap: float


def balance_condition(delta_cap, theta, k, r):
    """``Delta^2 * theta / k >= r^2``; the single place this inequality is evaluated."""
    return (delta_cap * delta_cap * theta) / k >= r * r


def objective(theta, k, r):
    return theta / k + r * r


def select_k(profile: DistanceProfile, config: AdaptiveConfig) -> SelectionDiagnostics:
    dist = profile.distances
    n = dist.size
    if n < 1:
        raise InputError("empty distance profile")
    cap = float(dist[-1]) if config.delta_cap is None else float(config.delta_cap)
    if cap < dist[-1]:
        raise InputError(f"delta_cap={cap:g} is below the max distance {dist[-1]:g}")
    ks = np.arange(1, n + 1)
    ok = balance_condition(cap, config.theta, ks, dist)
    # prefix structure: k1 = last k where the condition holds
    k1 = int(np.flatnonzero(ok)[-1]) + 1
    k2 = min(k1 + 1, n)
    o1 = float(objective(config.theta, k1, dist[k1 - 1]))
    o2 = float(objective(config.theta, k2, dist[k2 - 1]))
    chosen = k2 if o2 < o1 else k1
    return SelectionDiagnostics(k1, k2, o1, o2, chosen, cap)


def select_k_batch(sorted_dist: np.ndarray, theta: float, delta_caps: np.ndarray | None = None):
    """Row-wise :func:`select_k`. Returns ``(k1, k2, chosen)`` integer arrays."""
    m, n = sorted_dist.shape
    caps = sorted_dist[:, -1] if delta_caps is None else np.asarray(delta_caps, dtype=np.float64)
    if np.any(caps < sorted_dist[:, -1]):
        raise InputError("delta_cap is below the max distance for some query")
    ks = np.arange(1, n + 1)
    ok = balance_condition(caps[:, None], theta, ks[None, :], sorted_dist)
    k1 = n - np.argmax(ok[:, ::-1], axis=1)
    k2 = np.minimum(k1 + 1, n)
    rows = np.arange(m)
    o1 = objective(theta, k1, sorted_dist[rows, k1 - 1])
    o2 = objective(theta, k2, sorted_dist[rows, k2 - 1])
    chosen = np.where(o2 < o1, k2, k1)
    return k1, k2, chosen


def predict_adaptive(index: Index, x, kernel: Kernel = BOX,
                     config: AdaptiveConfig | None = None) -> tuple[Prediction, SelectionDiagnostics]:
    x = as_point(x, index.dataset.dim)
    if config is None:
        config = AdaptiveConfig.for_sample(index.n)
    profile = index.query_profile(x)
    diag = select_k(profile, config)
    wv = compute_weights(profile, kernel, diag.chosen)
    value = weighted_mean(wv.weights, index.dataset.labels[wv.indices])
    return Prediction(value, diag.chosen, wv.radius, wv.sq_sum), diag


def diameter_caps(points: np.ndarray, queries: np.ndarray, metric) -> np.ndarray:
    """Per-query cap ``rho(x, X_0) + max_i rho(X_0, X_i)``.

    By the triangle inequality this bounds every ``rho(x, X_i)`` without a full profile.
    """
    r0 = float(metric.to_many(points, points[0]).max())
    return metric.to_many(queries, points[0]) + r0


def default_theta(n: int, delta: float, noise: NoiseModel | None = None) -> float:
    """``ln^2(n / delta)``, floored at ``ln(n / delta)`` and at 1. ``noise`` is not used."""
    if n < 1 or not 0.0 < delta < 1.0:
        raise InputError("default_theta needs n >= 1 and 0 < delta < 1")
    L = math.log(n / delta)
    return max(L * L, L, 1.0)


def noise_aware_theta(n: int, delta: float, noise: NoiseModel) -> float:
    """``t_Y(delta / 2n)^2 * ln(n / delta)``, floored at ``ln(n / delta)`` and at 1."""
    L = math.log(n / delta)
    t = noise.tail(delta / (2 * n))
    return max(t * t * L, L, 1.0)


def resolve_theta(theta: float | str, n: int, delta: float, noise: NoiseModel | None = None) -> float:
    """Theta policies: ``ln2`` (default), ``ln`` (= ln(n/delta)), ``noise`` or a number."""
    if isinstance(theta, str):
        t = theta.strip().lower()
        if t == "ln2":
            return default_theta(n, delta)
        if t == "ln":
            return max(math.log(n / delta), 1.0)
        if t == "noise":
            if noise is None:
                raise InputError("theta policy 'noise' needs a noise model")
            return noise_aware_theta(n, delta, noise)
        try:
            return float(t)
        except ValueError:
            raise InputError(f"unknown theta policy {theta!r}") from None
    return float(theta)
