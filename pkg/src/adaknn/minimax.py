"""The alternating-sign lower-bound construction, made numeric.

An r-net ``Z`` of the support carries one tent per center,
``f_z(x) = (lam / 5) * (tau * r_n - rho(x, z))_+``, and a sign vector turns
the tents into a Lipschitz target ``f_s = sum_z s_z f_z``. Recovering a sign
from the noisy labels inside one tent is a two-point Gaussian test whose
Bayes error is ``Phi(-||u||)``. The probe below sums those errors, weighted
by ``||f_z||^2`` in L2(mu), into an estimate of the risk floor. It is an
estimate of that bound, not a bound on every estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import EUCLIDEAN, InputError, Metric, TargetFunction, as_point, as_points, make_rng
from .worlds import WorldSpec, estimate_homogeneity_constants, sample_points

TAU_FLOOR = 1e-3


@dataclass(frozen=True)
class Net:
    centers: np.ndarray
    radius: float
    center_indices: np.ndarray

    @property
    def size(self) -> int:
        return int(self.centers.shape[0])


def greedy_net(points, r: float, metric: Metric = EUCLIDEAN) -> Net:
    """First-fit greedy r-net in input order.

    A point becomes a center iff it is at distance ``>= r`` from every earlier
    center. The result packs (centers pairwise ``>= r`` apart) and covers
    (every input point within ``r`` of a center).
    """
    if not r > 0:
        raise InputError(f"net radius must be > 0, got {r}")
    X = np.asarray(points, dtype=np.float64)
    if X.size == 0:
        return Net(np.zeros((0, X.shape[1] if X.ndim == 2 else 0)), float(r), np.zeros(0, dtype=np.intp))
    X = as_points(X)
    n = X.shape[0]
    blocked = np.zeros(n, dtype=bool)
    chosen = []
    i = 0
    while i < n:
        chosen.append(i)
        blocked |= metric.to_many(X, X[i]) < r
        free = np.flatnonzero(~blocked[i + 1:])
        if free.size == 0:
            break
        i = i + 1 + int(free[0])
    idx = np.asarray(chosen, dtype=np.intp)
    return Net(X[idx].copy(), float(r), idx)


def tent_value(z, tau: float, r_n: float, lam: float, x, metric: Metric = EUCLIDEAN):
    """``(lam / 5) * max(0, tau * r_n - rho(x, z))``; ``x`` may be one point or a set."""
    z = as_point(z)
    Xa = np.asarray(x, dtype=np.float64)
    single = Xa.ndim == 1
    dist = metric.to_many(as_points(Xa.reshape(1, -1) if single else Xa, z.size), z)
    val = (lam / 5.0) * np.maximum(0.0, tau * r_n - dist)
    return float(val[0]) if single else val


def tau_from_c1(c1: float, d: float) -> float:
    """``min(C1^(1/d) / 3, 1/4)``, floored at ``TAU_FLOOR``."""
    if d <= 0:
        return 0.25
    return max(TAU_FLOOR, min((max(c1, 0.0) ** (1.0 / d)) / 3.0, 0.25))


@dataclass(frozen=True)
class AlternatingTarget:
    net: Net
    signs: np.ndarray
    lam: float
    tau: float
    r_n: float

    def __post_init__(self):
        if self.signs.shape != (self.net.size,) or not np.all(np.abs(self.signs) == 1):
            raise InputError("signs must be a +-1 vector, one per net center")
        if not (self.lam > 0 and self.tau > 0 and self.r_n > 0):
            raise InputError("lam, tau and r_n must be > 0")
        if self.tau > 0.25:
            raise InputError("tau must be <= 1/4 for the tents to be disjoint")

    @property
    def peak(self) -> float:
        return self.lam * self.tau * self.r_n / 5.0

    def tents(self, X) -> np.ndarray:
        """Unsigned tent values, shape ``(len(X), |Z|)``."""
        X = as_points(X, self.net.centers.shape[1])
        dist = EUCLIDEAN.cross(X, self.net.centers)
        return (self.lam / 5.0) * np.maximum(0.0, self.tau * self.r_n - dist)

    def __call__(self, X) -> np.ndarray:
        Xa = np.asarray(X, dtype=np.float64)
        if Xa.ndim == 1:
            return float(self.tents(Xa.reshape(1, -1))[0] @ self.signs)
        return self.tents(Xa) @ self.signs

    def as_target(self) -> TargetFunction:
        return TargetFunction(lambda X: self.tents(X) @ self.signs, self.lam, "alternating")


def make_alternating_target(net: Net, lam: float, tau: float, rng, signs=None) -> AlternatingTarget:
    rng = make_rng(rng)
    if signs is None:
        signs = rng.choice(np.array([-1.0, 1.0]), size=net.size)
    return AlternatingTarget(net, np.asarray(signs, dtype=np.float64), float(lam), float(tau), float(net.radius))


def eval_alternating(target: AlternatingTarget, x):
    return target(x)


def std_normal_cdf(t):
    """Standard normal CDF (via the complementary error function)."""
    if np.ndim(t) == 0:
        return 0.5 * math.erfc(-float(t) / math.sqrt(2.0))
    return ndtr(np.asarray(t, dtype=np.float64))


def cell_flip_error(target: AlternatingTarget, z_index: int, sample_points_in_cell) -> float:
    """Bayes error ``Phi(-||u||)`` of recovering the sign of tent ``z_index``.

    ``u`` collects the tent values at the sample points; unit-variance
    Gaussian label noise is assumed.
    """
    P = np.asarray(sample_points_in_cell, dtype=np.float64)
    if P.size == 0:
        return 0.5
    P = as_points(P, target.net.centers.shape[1])
    u = tent_value(target.net.centers[z_index], target.tau, target.r_n, target.lam, P)
    return float(std_normal_cdf(-math.sqrt(float(np.dot(u, u)))))


# --------------------------------------------------------------------------
# probes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FloorRow:
    n: int
    floor_estimate: float
    floor_stderr: float
    net_size: int
    r_n: float
    excluded: bool


@dataclass(frozen=True)
class MinimaxProbe:
    rows: tuple[FloorRow, ...]
    scale_factor: float
    tau: float
    c1: float
    lam: float
    d: float

    def usable(self) -> list[FloorRow]:
        return [row for row in self.rows if not row.excluded]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("n,floor_estimate,net_size,r_n\n")
            for row in self.rows:
                fh.write(f"{row.n},{row.floor_estimate!r},{row.net_size},{row.r_n!r}\n")


def _seeds(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(int(rng.integers(2 ** 63))).spawn(count)]


def minimax_rate_probe(spec: WorldSpec, lam: float, n_grid, reps: int, rng,
                       support_size: int = 20000, tau: float | None = None) -> MinimaxProbe:
    """Risk-floor estimate ``sum_z Phi(-||u_z||) * ||f_z||^2`` for each n in ``n_grid``.

    The world is first rescaled to diameter <= 1. For each n the net radius is
    ``r_n = (lam^2 n)^(-1/(2+d))``, the net is built greedily over a large
    support sample (which also estimates ``||f_z||^2``), and ``||u_z||`` comes
    from fresh n-samples, averaged over ``reps``. Nets with fewer than two
    centers are flagged and reported with floor 0.
    """
    n_grid = [int(v) for v in n_grid]
    if n_grid != sorted(n_grid) or not n_grid or n_grid[0] < 1:
        raise InputError("n_grid must be sorted ascending with n >= 1")
    if not lam > 0 or reps < 1:
        raise InputError("need lam > 0 and reps >= 1")
    rng = make_rng(rng)
    world, factor = spec.diameter_rescaled()
    d = float(world.intrinsic_dim)
    gens = _seeds(rng, 1 + len(n_grid))
    support = sample_points(world, support_size, gens[0])
    if tau is None:
        if d <= 0:
            c1 = 1.0
        else:
            c1, _ = estimate_homogeneity_constants(support, d, gens[0])
        tau = tau_from_c1(c1, d)
    else:
        c1 = float("nan")
    rows = []
    for n, g in zip(n_grid, gens[1:]):
        r_n = (lam * lam * n) ** (-1.0 / (2.0 + d)) if d > 0 else 1.0
        net = greedy_net(support, r_n)
        if net.size < 2:
            rows.append(FloorRow(n, 0.0, 0.0, net.size, r_n, True))
            continue
        target = make_alternating_target(net, lam, tau, g, signs=np.ones(net.size))
        norms = np.mean(target.tents(support) ** 2, axis=0)
        vals = []
        for _ in range(reps):
            X = sample_points(world, n, g)
            u2 = np.sum(target.tents(X) ** 2, axis=0)
            vals.append(float(np.sum(std_normal_cdf(-np.sqrt(u2)) * norms)))
        se = float(np.std(vals, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
        rows.append(FloorRow(n, float(np.mean(vals)), se, net.size, r_n, False))
    return MinimaxProbe(tuple(rows), factor, float(tau), float(c1), float(lam), d)


def net_size_scaling(spec: WorldSpec, support_sample, eps_grid=(0.5, 0.25, 0.125, 0.0625),
                     center=None, r: float | None = None) -> tuple[float, list[tuple[float, int]]]:
    """Slope of ``log |Z|`` against ``log(1/eps)`` for ``(eps r)``-nets of ``B(x, r)``.

    Defaults: ``x`` is the support point nearest the sample mean and ``r`` is a
    quarter of the world's diameter bound.
    """
    P = support_sample.points if hasattr(support_sample, "points") else np.asarray(support_sample, dtype=np.float64)
    P = as_points(P)
    if center is None:
        center = P[np.argmin(EUCLIDEAN.to_many(P, P.mean(axis=0)))]
    center = as_point(center, P.shape[1])
    if r is None:
        r = 0.25 * spec.diameter_bound()
        if not r > 0:
            r = 1.0  # zero-diameter support: any radius gives a one-center net
    ball = P[EUCLIDEAN.to_many(P, center) <= r]
    sizes = []
    for e in eps_grid:
        if 0 < e < 1:
            sizes.append((float(e), greedy_net(ball, e * r).size))
    if len(sizes) < 2:
        raise InputError("need at least two usable eps values")
    x = np.log([1.0 / e for e, _ in sizes])
    y = np.log([s for _, s in sizes])
    return float(np.polyfit(x, y, 1)[0]), sizes
