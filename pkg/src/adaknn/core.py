"""Shared vocabulary: metrics, datasets, kernels, Lipschitz targets and noise models.

Points are plain ``numpy`` float arrays. A single point has shape ``(D,)`` and
a point set has shape ``(n, D)``. All randomness goes through an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import ndtri


class InputError(ValueError):
    """Invalid user input: bad arguments, malformed files, violated preconditions."""


def as_point(p, dim: int | None = None) -> np.ndarray:
    x = np.asarray(p, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1 or x.size == 0:
        raise InputError(f"a point must be a non-empty 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("point coordinates must be finite")
    if dim is not None and x.size != dim:
        raise InputError(f"dimension mismatch: expected {dim}, got {x.size}")
    return x


def as_points(P, dim: int | None = None) -> np.ndarray:
    X = np.asarray(P, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise InputError(f"a point set must be 2-D (n, D), got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("point coordinates must be finite")
    if dim is not None and X.shape[1] != dim:
        raise InputError(f"dimension mismatch: expected {dim}, got {X.shape[1]}")
    return X


def make_rng(seed) -> np.random.Generator:
    """Return a Generator; accepts an int seed, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

class MetricKind(str, Enum):
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"
    CHEBYSHEV = "chebyshev"


@dataclass(frozen=True)
class Metric:
    kind: MetricKind = MetricKind.EUCLIDEAN

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))

    @property
    def is_euclidean(self) -> bool:
        return self.kind is MetricKind.EUCLIDEAN

    def to_many(self, X: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Distances from one point ``x`` to every row of ``X``.

        Every distance in the package goes through this method, so that
        tree-accelerated and brute-force paths produce bit-identical values.
        """
        diff = X - x
        if self.kind is MetricKind.EUCLIDEAN:
            return np.sqrt(np.einsum("ij,ij->i", diff, diff))
        if self.kind is MetricKind.MANHATTAN:
            return np.abs(diff).sum(axis=1)
        return np.abs(diff).max(axis=1)

    def cross(self, Q: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Distance matrix of shape ``(len(Q), len(X))``; row i equals ``to_many(X, Q[i])``."""
        out = np.empty((Q.shape[0], X.shape[0]))
        for i in range(Q.shape[0]):
            out[i] = self.to_many(X, Q[i])
        return out


EUCLIDEAN = Metric()


def metric_dist(metric: Metric, p, q) -> float:
    p = as_point(p)
    q = as_point(q)
    if p.size != q.size:
        raise InputError(f"dimension mismatch: {p.size} vs {q.size}")
    return float(metric.to_many(q.reshape(1, -1), p)[0])


# --------------------------------------------------------------------------
# Dataset
# --------------------------------------------------------------------------

class Dataset:
    """Immutable labelled sample ``(X, Y)`` with its metric."""

    __slots__ = ("_X", "_Y", "_metric")

    def __init__(self, points, labels, metric: Metric = EUCLIDEAN):
        X = as_points(points)
        Y = np.asarray(labels, dtype=np.float64).reshape(-1)
        if X.shape[0] == 0:
            raise InputError("a dataset needs at least one sample")
        if X.shape[0] != Y.shape[0]:
            raise InputError(f"{X.shape[0]} points but {Y.shape[0]} labels")
        X = X.copy()
        Y = Y.copy()
        X.setflags(write=False)
        Y.setflags(write=False)
        self._X = X
        self._Y = Y
        self._metric = metric

    @property
    def points(self) -> np.ndarray:
        return self._X

    @property
    def labels(self) -> np.ndarray:
        return self._Y

    @property
    def metric(self) -> Metric:
        return self._metric

    @property
    def n(self) -> int:
        return self._X.shape[0]

    @property
    def dim(self) -> int:
        return self._X.shape[1]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Dataset(n={self.n}, D={self.dim}, metric={self._metric.kind.value})"


def write_dataset_csv(path, dataset: Dataset) -> None:
    path = Path(path)
    header = [f"x{j + 1}" for j in range(dataset.dim)] + ["y"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, y in zip(dataset.points, dataset.labels):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def read_points_csv(path, require_y: bool = False) -> tuple[np.ndarray, np.ndarray | None]:
    """Read ``x1,...,xD[,y]`` CSV. Errors name the offending line number."""
    path = Path(path)
    try:
        fh = path.open("r", newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        has_y = bool(header) and header[-1] == "y"
        xcols = header[:-1] if has_y else header
        expected = [f"x{j + 1}" for j in range(len(xcols))]
        if not xcols or xcols != expected:
            raise InputError(f"{path}: line 1: header must be x1,...,xD[,y], got {','.join(header)}")
        if require_y and not has_y:
            raise InputError(f"{path}: line 1: a 'y' column is required")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise InputError(f"{path}: line {lineno}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}: line {lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    A = np.array(rows, dtype=np.float64)
    if has_y:
        return A[:, :-1], A[:, -1]
    return A, None


def read_dataset_csv(path, metric: Metric = EUCLIDEAN) -> Dataset:
    X, Y = read_points_csv(path, require_y=True)
    return Dataset(X, Y, metric)


# --------------------------------------------------------------------------
# Kernels
# --------------------------------------------------------------------------

class KernelKind(str, Enum):
    BOX = "box"
    TRUNCATED_GAUSSIAN = "tgauss"
    LINEAR_FLOOR = "linear-floor"


@dataclass(frozen=True)
class Kernel:
    """Non-increasing profile on [0, 1] with ``K(1) > 0`` and ``K(u) = 0`` for ``u > 1``.

    ``linear-floor`` is ``1 - (1 - floor) * u`` on [0, 1]; ``floor`` must be
    positive, which is what rules out the plain triangular kernel.
    """

    kind: KernelKind = KernelKind.BOX
    floor: float = 0.5

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", KernelKind(self.kind))
        except ValueError:
            raise InputError(f"unknown kernel kind {self.kind!r}") from None
        if self.kind is KernelKind.LINEAR_FLOOR and not (0.0 < self.floor <= 1.0):
            raise InputError("linear-floor kernel needs 0 < floor <= 1 so that K(1) > 0")

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        inside = u <= 1.0
        if self.kind is KernelKind.BOX:
            val = np.ones_like(u)
        elif self.kind is KernelKind.TRUNCATED_GAUSSIAN:
            val = np.exp(-0.5 * np.square(np.minimum(u, 1.0)))
        else:
            val = 1.0 - (1.0 - self.floor) * np.minimum(u, 1.0)
        return np.where(inside, val, 0.0)

    @property
    def k0(self) -> float:
        return float(self(0.0))

    @property
    def k1(self) -> float:
        return float(self(1.0))

    @property
    def ratio(self) -> float:
        """``K(0) / K(1)``, the constant in the squared-weight bound."""
        return self.k0 / self.k1


def parse_kernel(text: str) -> Kernel:
    t = text.strip().lower()
    if t in ("box", "uniform"):
        return Kernel(KernelKind.BOX)
    if t in ("tgauss", "truncated-gaussian", "gaussian"):
        return Kernel(KernelKind.TRUNCATED_GAUSSIAN)
    if t.startswith("linear-floor"):
        _, _, f = t.partition(":")
        return Kernel(KernelKind.LINEAR_FLOOR, float(f) if f else 0.5)
    if t == "triangular":
        raise InputError("triangular kernel has K(1) = 0 and is not admissible")
    raise InputError(f"unknown kernel {text!r}")


def kernel_eval(kernel: Kernel, u: float) -> float:
    if not u >= 0:
        raise InputError(f"kernel argument must be >= 0, got {u}")
    return float(kernel(u))


# --------------------------------------------------------------------------
# Targets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetFunction:
    """A regression function with a declared Lipschitz constant.

    ``evaluator`` maps an ``(m, D)`` array to an ``(m,)`` array.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    lipschitz_lambda: float
    name: str = "custom"

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return np.asarray(self.evaluator(X.reshape(1, -1)), dtype=np.float64)[0]
        return np.asarray(self.evaluator(X), dtype=np.float64)

    def composed(self, transform: Callable[[np.ndarray], np.ndarray], name: str | None = None) -> "TargetFunction":
        """``f(transform(x))``; keeps λ, so ``transform`` must be 1-Lipschitz."""
        f = self.evaluator
        return TargetFunction(lambda X: f(transform(X)), self.lipschitz_lambda, name or self.name)


def constant_target(c: float) -> TargetFunction:
    return TargetFunction(lambda X: np.full(X.shape[0], float(c)), 0.0, f"const:{c}")


def coordinate_target(j: int = 0, lam: float = 1.0) -> TargetFunction:
    return TargetFunction(lambda X: lam * X[:, j], abs(lam), f"coord:{j}")


def linear_target(direction, lam: float = 1.0) -> TargetFunction:
    a = np.asarray(direction, dtype=np.float64)
    a = a / np.linalg.norm(a)
    return TargetFunction(lambda X: lam * (X @ a), abs(lam), "linear")


def sine_target(omega: float, lam: float = 1.0, j: int = 0) -> TargetFunction:
    return TargetFunction(lambda X: lam * np.sin(omega * X[:, j]) / omega, abs(lam), f"sine:{omega}")


def distance_target(center, lam: float = 1.0) -> TargetFunction:
    c = np.asarray(center, dtype=np.float64)
    return TargetFunction(lambda X: lam * EUCLIDEAN.to_many(X, c), abs(lam), "dist")


def parse_target(text: str, lam: float = 1.0, dim: int | None = None) -> TargetFunction:
    """Target ids: ``const:c``, ``coord:j``, ``sine:omega``, ``dist`` (to the origin)."""
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    try:
        if kind == "const":
            return constant_target(float(arg) if arg else 0.0)
        if kind == "coord":
            return coordinate_target(int(arg) if arg else 0, lam)
        if kind == "sine":
            return sine_target(float(arg) if arg else 2 * math.pi, lam)
        if kind == "dist":
            if dim is None:
                raise InputError("dist target needs the ambient dimension")
            return distance_target(np.zeros(dim), lam)
    except ValueError:
        raise InputError(f"bad target argument in {text!r}") from None
    raise InputError(f"unknown target {text!r}")


def lipschitz_audit(target: TargetFunction, X: np.ndarray, pairs: int, rng,
                    metric: Metric = EUCLIDEAN) -> float:
    """Largest observed ``|f(x) - f(x')| / rho(x, x')`` over random pairs drawn from ``X``."""
    rng = make_rng(rng)
    X = as_points(X)
    i = rng.integers(0, X.shape[0], pairs)
    j = rng.integers(0, X.shape[0], pairs)
    A, B = X[i], X[j]
    if metric.is_euclidean:
        dist = np.sqrt(np.einsum("ij,ij->i", A - B, A - B))
    else:
        dist = np.array([metric.to_many(B[t:t + 1], A[t])[0] for t in range(pairs)])
    df = np.abs(target(A) - target(B))
    keep = dist > 0
    if not np.any(keep):
        return 0.0
    return float(np.max(df[keep] / dist[keep]))


# --------------------------------------------------------------------------
# Noise
# --------------------------------------------------------------------------

class NoiseKind(str, Enum):
    NONE = "none"
    BOUNDED = "bounded"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class NoiseModel:
    """Additive label noise. ``bounded(M)`` is uniform on [-M, M]."""

    kind: NoiseKind = NoiseKind.NONE
    scale: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.scale < 0 or not math.isfinite(self.scale):
            raise InputError("noise scale must be finite and >= 0")

    @classmethod
    def none(cls):
        return cls(NoiseKind.NONE, 0.0)

    @classmethod
    def bounded(cls, m: float):
        return cls(NoiseKind.BOUNDED, m)

    @classmethod
    def gaussian(cls, sigma: float):
        return cls(NoiseKind.GAUSSIAN, sigma)

    @property
    def sigma_y(self) -> float:
        if self.kind is NoiseKind.BOUNDED:
            return self.scale / math.sqrt(3.0)
        if self.kind is NoiseKind.GAUSSIAN:
            return self.scale
        return 0.0

    def tail(self, delta: float) -> float:
        """Smallest t with ``P(|Y - f(x)| > t) <= delta``."""
        if delta >= 1.0 or self.kind is NoiseKind.NONE:
            return 0.0
        if delta <= 0.0:
            return self.scale if self.kind is NoiseKind.BOUNDED else math.inf
        if self.kind is NoiseKind.BOUNDED:
            return self.scale * (1.0 - delta)
        return self.scale * float(ndtri(1.0 - delta / 2.0))

    def draw(self, f_values, rng) -> np.ndarray:
        f = np.asarray(f_values, dtype=np.float64)
        if self.kind is NoiseKind.NONE or self.scale == 0.0:
            return f.copy()
        rng = make_rng(rng)
        if self.kind is NoiseKind.BOUNDED:
            return f + rng.uniform(-self.scale, self.scale, size=f.shape)
        return f + self.scale * rng.standard_normal(size=f.shape)

    def __str__(self):
        return self.kind.value if self.kind is NoiseKind.NONE else f"{self.kind.value}:{self.scale:g}"


def parse_noise(text: str) -> NoiseModel:
    kind, _, arg = text.strip().lower().partition(":")
    try:
        if kind == "none":
            return NoiseModel.none()
        if kind == "bounded":
            return NoiseModel.bounded(float(arg))
        if kind == "gaussian":
            return NoiseModel.gaussian(float(arg) if arg else 1.0)
    except ValueError:
        raise InputError(f"bad noise argument in {text!r}") from None
    raise InputError(f"unknown noise model {text!r}")


def draw_label(noise: NoiseModel, f_value: float, rng) -> float:
    return float(noise.draw(np.array([f_value]), rng)[0])
