"""Synthetic doubling-measure worlds with known intrinsic dimension.

Every world is sampled in canonical coordinates (the intrinsic coordinates
sit in the first ambient axes), optionally rotated by a seeded orthogonal
matrix, then multiplied by ``scale``:

``hyperplane``  uniform on the unit cube ``[0, 1]^d``
``sphere``      uniform on the unit sphere ``S^d`` in the first ``d + 1`` axes
``curve``       uniform by arc length on a serpentine polyline in the first two
                axes: ``runs`` horizontal unit runs, ``fold`` apart
``sparse``      at most d non-zero coordinates, chosen uniformly, values U[0, 1]
``atom``        a point mass at the origin
``mixture``     a weighted mixture of the above
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.special import betainc, gamma as gamma_fn

from .core import (EUCLIDEAN, Dataset, InputError, NoiseModel, TargetFunction, as_point,
                   as_points, make_rng)


class WorldKind(str, Enum):
    HYPERPLANE = "hyperplane"
    SPHERE = "sphere"
    CURVE = "curve"
    SPARSE = "sparse"
    ATOM = "atom"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class WorldSpec:
    kind: WorldKind
    d: int = 1
    D: int = 1
    runs: int = 5
    fold: float = 0.2
    rotate: bool = False
    seed: int = 0
    scale: float = 1.0
    components: tuple["WorldSpec", ...] = field(default=())
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", WorldKind(self.kind))
        except ValueError:
            raise InputError(f"unknown world kind {self.kind!r}") from None
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        k = self.kind
        if not self.scale > 0:
            raise InputError("scale must be > 0")
        if k is WorldKind.MIXTURE:
            if not self.components or len(self.components) != len(self.weights):
                raise InputError("a mixture needs matching components and weights")
            if any(c.kind is WorldKind.MIXTURE for c in self.components):
                raise InputError("nested mixtures are not supported")
            if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
                raise InputError("mixture weights must be >= 0 and sum to 1")
            dims = {c.D for c in self.components}
            if len(dims) != 1:
                raise InputError("mixture components must share the ambient dimension")
            object.__setattr__(self, "D", dims.pop())
            object.__setattr__(self, "d", max(c.intrinsic_dim for c in self.components))
            return
        if k is WorldKind.CURVE:
            object.__setattr__(self, "d", 1)
            if self.D < 2:
                raise InputError("a curve world needs D >= 2")
            if self.runs < 1 or not self.fold > 0:
                raise InputError("curve needs runs >= 1 and fold > 0")
        if k is WorldKind.ATOM:
            object.__setattr__(self, "d", 0)
            if self.D < 1:
                raise InputError("D must be >= 1")
            return
        if not 1 <= self.d <= self.D:
            raise InputError(f"need 1 <= d <= D, got d={self.d}, D={self.D}")
        if k is WorldKind.SPHERE and self.D < self.d + 1:
            raise InputError("a d-sphere needs D >= d + 1")

    # ---- geometry -------------------------------------------------------
    @property
    def intrinsic_dim(self) -> int:
        return self.d

    @property
    def rotation(self) -> np.ndarray:
        if not self.rotate:
            return np.eye(self.D)
        return _rotation(self.D, self.seed)

    def embed(self, C: np.ndarray) -> np.ndarray:
        """Canonical coordinates -> ambient points."""
        X = C @ self.rotation.T if self.rotate else C
        return X * self.scale

    def to_canonical(self, X) -> np.ndarray:
        X = as_points(X, self.D) / self.scale
        return X @ self.rotation if self.rotate else X

    def to_frame(self, X) -> np.ndarray:
        """Undo the rotation only (an isometry); canonical axes, ambient units."""
        X = as_points(X, self.D)
        return X @ self.rotation if self.rotate else X

    def frame_target(self, target: TargetFunction) -> TargetFunction:
        """``target`` read in the world's unrotated frame; same Lipschitz constant."""
        if self.kind is WorldKind.MIXTURE or not self.rotate:
            return target
        return target.composed(self.to_frame)

    def radius_bound(self) -> float:
        """Upper bound on the distance from the ambient origin to the support."""
        k = self.kind
        if k is WorldKind.HYPERPLANE or k is WorldKind.SPARSE:
            r = math.sqrt(self.d)
        elif k is WorldKind.SPHERE:
            r = 1.0
        elif k is WorldKind.CURVE:
            r = _curve_extent(self.runs, self.fold)
        elif k is WorldKind.ATOM:
            r = 0.0
        else:
            r = max(c.radius_bound() for c in self.components)
        return r * self.scale

    def diameter_bound(self) -> float:
        """Upper bound on the support diameter (exact for single components)."""
        k = self.kind
        if k is WorldKind.HYPERPLANE:
            diam = math.sqrt(self.d)
        elif k is WorldKind.SPHERE:
            diam = 2.0
        elif k is WorldKind.CURVE:
            diam = _curve_extent(self.runs, self.fold)
        elif k is WorldKind.SPARSE:
            diam = math.sqrt(min(2 * self.d, self.D))
        elif k is WorldKind.ATOM:
            diam = 0.0
        else:
            comps = self.components
            diam = max(c.diameter_bound() for c in comps)
            for i in range(len(comps)):
                for j in range(i + 1, len(comps)):
                    diam = max(diam, comps[i].radius_bound() + comps[j].radius_bound())
        return diam * self.scale

    def with_scale(self, scale: float) -> "WorldSpec":
        return replace(self, scale=scale)

    def diameter_rescaled(self) -> tuple["WorldSpec", float]:
        """World shrunk so that its diameter is at most 1, with the factor applied."""
        diam = self.diameter_bound()
        factor = 1.0 if diam <= 1.0 else 1.0 / diam
        return self.with_scale(self.scale * factor), factor

    # ---- serialisation --------------------------------------------------
    def to_string(self) -> str:
        return format_world(self)

    def to_config(self) -> dict:
        if self.kind is WorldKind.MIXTURE:
            out = {"kind": "mixture", "components": format_world(self)[len("mixture("):-1]}
            if self.scale != 1.0:
                out["scale"] = repr(self.scale)
            return out
        return dict(_fields_of(self))


@functools.lru_cache(maxsize=64)
def _rotation(D: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED, D]))
    q, r = np.linalg.qr(rng.standard_normal((D, D)))
    q = q * np.sign(np.diag(r))
    q.setflags(write=False)
    return q


def _curve_extent(runs: int, fold: float) -> float:
    return math.hypot(1.0, (runs - 1) * fold) if runs > 1 else 1.0


def curve_length(runs: int, fold: float) -> float:
    return runs + (runs - 1) * fold


# --------------------------------------------------------------------------
# serialisation helpers
# --------------------------------------------------------------------------

_DEFAULTS = WorldSpec(WorldKind.ATOM, D=1)


def _fields_of(spec: WorldSpec):
    yield "kind", spec.kind.value
    if spec.kind in (WorldKind.HYPERPLANE, WorldKind.SPHERE, WorldKind.SPARSE):
        yield "d", str(spec.d)
    yield "D", str(spec.D)
    if spec.kind is WorldKind.CURVE:
        yield "runs", str(spec.runs)
        yield "fold", repr(spec.fold)
    if spec.rotate:
        yield "rotate", "1"
        yield "seed", str(spec.seed)
    if spec.scale != 1.0:
        yield "scale", repr(spec.scale)


def format_world(spec: WorldSpec) -> str:
    """Compact one-line form, e.g. ``curve:D=5,runs=5,fold=0.2,rotate=1,seed=3``."""
    if spec.kind is WorldKind.MIXTURE:
        parts = " + ".join(f"{format_world(c)} @{w!r}" for c, w in zip(spec.components, spec.weights))
        s = f"mixture({parts})"
        return s if spec.scale == 1.0 else f"{s}:scale={spec.scale!r}"
    items = list(_fields_of(spec))
    return items[0][1] + ":" + ",".join(f"{k}={v}" for k, v in items[1:])


_BOOL = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}


def _spec_from_items(kind: str, items: dict) -> WorldSpec:
    kw = {}
    try:
        for key, val in items.items():
            if key in ("d", "D", "runs", "seed"):
                kw[key] = int(val)
            elif key in ("fold", "scale"):
                kw[key] = float(val)
            elif key == "rotate":
                kw[key] = _BOOL[val.strip().lower()]
            else:
                raise InputError(f"unknown world key {key!r}")
    except (ValueError, KeyError):
        raise InputError(f"bad world value in {items}") from None
    return WorldSpec(kind.strip().lower(), **kw)


def _parse_components(body: str) -> tuple[tuple[WorldSpec, ...], tuple[float, ...]]:
    comps, weights = [], []
    for part in body.split("+"):
        spec_text, at, w = part.rpartition("@")
        if not at:
            raise InputError(f"mixture component {part.strip()!r} lacks an @weight")
        try:
            weights.append(float(w))
        except ValueError:
            raise InputError(f"bad mixture weight {w!r}") from None
        comps.append(parse_world(spec_text.strip()))
    return tuple(comps), tuple(weights)


def parse_world(text: str) -> WorldSpec:
    text = text.strip()
    m = re.fullmatch(r"mixture\((.*)\)(?::scale=([^,]+))?", text)
    if m:
        comps, weights = _parse_components(m.group(1))
        return WorldSpec(WorldKind.MIXTURE, components=comps, weights=weights,
                         scale=float(m.group(2)) if m.group(2) else 1.0)
    kind, _, rest = text.partition(":")
    items = {}
    for tok in filter(None, (t.strip() for t in rest.split(","))):
        key, eq, val = tok.partition("=")
        if not eq:
            raise InputError(f"world option {tok!r} is not key=value")
        items[key.strip()] = val.strip()
    return _spec_from_items(kind, items)


def read_kv(path) -> dict:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq:
            raise InputError(f"{path}: line {lineno}: expected key = value")
        out[key.strip()] = val.strip()
    return out


def write_kv(path, items: dict) -> None:
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in items.items()), encoding="utf-8")


def world_from_config(items: dict) -> WorldSpec:
    items = dict(items)
    kind = items.pop("kind", None)
    if kind is None:
        raise InputError("world config needs a 'kind'")
    if kind.strip().lower() == "mixture":
        comps, weights = _parse_components(items.pop("components", ""))
        scale = float(items.pop("scale", 1.0))
        if items:
            raise InputError(f"unknown mixture keys {sorted(items)}")
        return WorldSpec(WorldKind.MIXTURE, components=comps, weights=weights, scale=scale)
    return _spec_from_items(kind, items)


def load_world(text_or_path: str) -> WorldSpec:
    """Compact string, or a path to a key-value world file."""
    p = Path(text_or_path)
    if p.is_file():
        return world_from_config(read_kv(p))
    return parse_world(text_or_path)


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------

def _serpentine(s: np.ndarray, runs: int, fold: float) -> np.ndarray:
    period = 1.0 + fold
    j = np.minimum(np.floor(s / period), runs - 1)
    rem = s - j * period
    on_run = rem <= 1.0
    even = (j % 2) == 0
    u = np.where(even, rem, 1.0 - rem)
    x = np.where(on_run, u, np.where(even, 1.0, 0.0))
    y = np.where(on_run, j * fold, j * fold + (rem - 1.0))
    return np.column_stack([x, y])


def _canonical_sample(spec: WorldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    C = np.zeros((n, spec.D))
    k = spec.kind
    if k is WorldKind.HYPERPLANE:
        C[:, :spec.d] = rng.uniform(0.0, 1.0, (n, spec.d))
    elif k is WorldKind.SPHERE:
        g = rng.standard_normal((n, spec.d + 1))
        C[:, :spec.d + 1] = g / np.linalg.norm(g, axis=1, keepdims=True)
    elif k is WorldKind.CURVE:
        s = rng.uniform(0.0, curve_length(spec.runs, spec.fold), n)
        C[:, :2] = _serpentine(s, spec.runs, spec.fold)
    elif k is WorldKind.SPARSE:
        vals = rng.uniform(0.0, 1.0, (n, spec.d))
        cols = np.argsort(rng.random((n, spec.D)), axis=1)[:, :spec.d]
        np.put_along_axis(C, cols, vals, axis=1)
    return C


def sample_points(spec: WorldSpec, n: int, rng, return_components: bool = False):
    """n i.i.d. points from the world; optionally the mixture component of each."""
    if n < 0:
        raise InputError("n must be >= 0")
    rng = make_rng(rng)
    if spec.kind is WorldKind.MIXTURE:
        comp = rng.choice(len(spec.components), size=n, p=np.asarray(spec.weights))
        X = np.zeros((n, spec.D))
        for c, sub in enumerate(spec.components):
            sel = np.flatnonzero(comp == c)
            if sel.size:
                X[sel] = sample_points(sub, sel.size, rng)
        X *= spec.scale
    else:
        comp = np.zeros(n, dtype=np.intp)
        X = spec.embed(_canonical_sample(spec, n, rng))
    return (X, comp) if return_components else X


def sample_world(spec: WorldSpec, n: int, target: TargetFunction, noise: NoiseModel, rng) -> Dataset:
    if n < 1:
        raise InputError("n must be >= 1")
    rng = make_rng(rng)
    X = sample_points(spec, n, rng)
    Y = noise.draw(target(X), rng)
    return Dataset(X, Y, EUCLIDEAN)


def write_sidecar(path, spec: WorldSpec, seed: int, n: int, target: str, lam: float, noise: NoiseModel) -> Path:
    meta = Path(str(path) + ".meta")
    items = {"world": format_world(spec), "seed": str(seed), "n": str(n),
             "target": target, "lam": repr(float(lam)), "noise": str(noise)}
    write_kv(meta, items)
    return meta


# --------------------------------------------------------------------------
# analytic ball masses
# --------------------------------------------------------------------------

def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / gamma_fn(d / 2 + 1)


def _interval_mass(c, r):
    return np.clip(c + r, 0.0, 1.0) - np.clip(c - r, 0.0, 1.0)


def _prim(u, r):
    """Antiderivative of ``sqrt(r^2 - u^2)`` on [-r, r]."""
    u = np.clip(u, -r, r)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(r > 0, u / np.where(r > 0, r, 1.0), 0.0)
    return 0.5 * (u * np.sqrt(np.maximum(r * r - u * u, 0.0)) + r * r * np.arcsin(np.clip(ratio, -1, 1)))


def _corner_area(x, y, r):
    """Area of ``{u^2 + v^2 <= r^2, u <= x, v <= y}``."""
    x = np.clip(x, -r, r)
    yy = np.clip(y, -r, r)
    a = np.sqrt(np.maximum(r * r - yy * yy, 0.0))

    def two_s(lo, hi):
        hi = np.maximum(hi, lo)
        return 2.0 * (_prim(hi, r) - _prim(lo, r))

    def y_plus_s(lo, hi):
        hi = np.maximum(hi, lo)
        return yy * (hi - lo) + _prim(hi, r) - _prim(lo, r)

    # for y >= 0 the full chord counts where |u| >= a; for y < 0 only |u| < a contributes
    mid = y_plus_s(-a, np.clip(x, -a, a))
    pos = two_s(-r, np.minimum(x, -a)) + mid + two_s(a, np.maximum(x, a))
    neg = mid
    out = np.where(yy >= 0, pos, neg)
    out = np.where(y >= r, two_s(-r, x), out)
    return np.where(y <= -r, 0.0, out)


def _square_disk_area(cx, cy, r):
    """Area of the disk ``B((cx, cy), r)`` inside ``[0, 1]^2``."""
    x0, x1 = -cx, 1.0 - cx
    y0, y1 = -cy, 1.0 - cy
    return (_corner_area(x1, y1, r) - _corner_area(x0, y1, r)
            - _corner_area(x1, y0, r) + _corner_area(x0, y0, r))


def _cube_ball_mass(c: np.ndarray, r: float) -> float:
    d = c.size
    if r <= 0:
        return 0.0
    if np.all(c - r >= 0) and np.all(c + r <= 1):
        return _unit_ball_volume(d) * r ** d
    if d == 1:
        return float(_interval_mass(c[0], r))
    if d == 2:
        return float(_square_disk_area(c[0], c[1], r))
    if d == 3:
        return _cube3_ball_mass(c, r)
    lo, hi = max(0.0, c[-1] - r), min(1.0, c[-1] + r)
    if hi <= lo:
        return 0.0
    val, _ = integrate.quad(lambda t: _cube_ball_mass(c[:-1], math.sqrt(max(r * r - (t - c[-1]) ** 2, 0.0))),
                            lo, hi, epsabs=1e-11, epsrel=1e-10, limit=200)
    return float(min(max(val, 0.0), 1.0))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _cube3_ball_mass(c: np.ndarray, r: float) -> float:
    """Volume of ``B(c, r)`` inside ``[0, 1]^3`` by slicing along the last axis.

    With ``t = c_3 + r sin(phi)`` the slice is a disk of radius ``r cos(phi)``.
    The slice area is smooth in ``phi`` except where that radius crosses an
    edge or corner distance of the square, so Gauss-Legendre is applied
    piecewise between those breakpoints.
    """
    lo = math.asin(max(-1.0, min(1.0, (0.0 - c[2]) / r)))
    hi = math.asin(max(-1.0, min(1.0, (1.0 - c[2]) / r)))
    qs = [abs(c[0]), abs(1 - c[0]), abs(c[1]), abs(1 - c[1])]
    qs += [math.hypot(a, b) for a in qs[:2] for b in qs[2:]]
    cuts = {lo, hi}
    for q in qs:
        if 0 < q < r:
            a = math.acos(q / r)
            cuts.update(v for v in (a, -a) if lo < v < hi)
    cuts = sorted(cuts)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        phi = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
        rho = r * np.cos(phi)
        area = _square_disk_area(c[0], c[1], rho)
        total += 0.5 * (b - a) * float(np.dot(_GL_WEIGHTS, area * rho))
    return float(min(max(total, 0.0), 1.0))


def _cap_fraction(t, d: int):
    """Fraction of ``S^d`` with first coordinate ``>= t``."""
    t = np.asarray(t, dtype=np.float64)
    tc = np.clip(t, -1.0, 1.0)
    half = 0.5 * betainc(d / 2.0, 0.5, np.clip(1.0 - tc * tc, 0.0, 1.0))
    out = np.where(tc >= 0, half, 1.0 - half)
    out = np.where(t >= 1.0, 0.0, out)
    return np.where(t <= -1.0, 1.0, out)


def true_ball_mass(spec: WorldSpec, x, r: float) -> float | None:
    """``mu(B(x, r))`` where it has a closed form; ``None`` means unavailable."""
    if spec.kind not in (WorldKind.HYPERPLANE, WorldKind.SPHERE):
        return None
    x = as_point(x, spec.D)
    return float(ball_masses(spec, x.reshape(1, -1), np.array([r]))[0, 0])


def ball_masses(spec: WorldSpec, centers, radii) -> np.ndarray | None:
    """Matrix of analytic masses, shape ``(len(centers), len(radii))``; ``None`` if unavailable."""
    if spec.kind not in (WorldKind.HYPERPLANE, WorldKind.SPHERE):
        return None
    C = spec.to_canonical(centers)
    radii = np.asarray(radii, dtype=np.float64) / spec.scale
    if spec.kind is WorldKind.HYPERPLANE:
        p = C[:, :spec.d]
        h2 = np.sum(C[:, spec.d:] ** 2, axis=1)
        inner = np.sqrt(np.maximum(radii[None, :] ** 2 - h2[:, None], 0.0))
        inner = np.where(radii[None, :] ** 2 >= h2[:, None], inner, -1.0)
        if spec.d == 1:
            out = _interval_mass(p[:, :1], inner)
        elif spec.d == 2:
            out = _square_disk_area(p[:, :1], p[:, 1:2], np.maximum(inner, 0.0))
        else:
            out = np.array([[_cube_ball_mass(p[i], float(max(rr, 0.0))) for rr in inner[i]]
                            for i in range(p.shape[0])])
        return np.where(inner > 0, np.clip(out, 0.0, 1.0), 0.0)
    d = spec.d
    p = C[:, :d + 1]
    h2 = np.sum(C[:, d + 1:] ** 2, axis=1)
    rho = np.linalg.norm(p, axis=1)
    r2 = radii[None, :] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rho[:, None] ** 2 + 1.0 - r2 + h2[:, None]) / (2.0 * rho[:, None])
    frac = _cap_fraction(t, d)
    at_origin = rho[:, None] == 0
    full = (1.0 + h2[:, None]) <= r2
    return np.where(at_origin, np.where(full, 1.0, 0.0), frac)


# --------------------------------------------------------------------------
# local dimension
# --------------------------------------------------------------------------

DEFAULT_EPS_GRID = (0.5, 0.6, 0.7, 0.8)


@dataclass(frozen=True)
class HomogeneityEstimate:
    """``d_hat`` is NaN when ``ok`` is False; ``reason`` then says why."""

    d_hat: float
    mass_pairs: tuple[tuple[float, float, float], ...]
    radius: float
    ok: bool = True
    reason: str = ""


def _failed(reason: str, radius: float = 0.0, pairs=()) -> HomogeneityEstimate:
    return HomogeneityEstimate(float("nan"), tuple(pairs), radius, False, reason)


def estimate_local_dimension(dataset: Dataset, x, r: float | None = None,
                             eps_grid=DEFAULT_EPS_GRID, mass_fraction: float = 0.2) -> HomogeneityEstimate:
    """Least-squares slope of log empirical ball mass against log radius.

    The radii are ``eps * r`` for each grid value plus ``r`` itself. Without an
    explicit ``r`` the ball is sized to hold ``mass_fraction`` of the sample.
    """
    x = as_point(x, dataset.dim)
    dist = np.sort(dataset.metric.to_many(dataset.points, x))
    n = dist.size
    if r is None:
        m = min(n, max(1, math.ceil(mass_fraction * n)))
        r = float(dist[m - 1])
    if not r > 0:
        return _failed("zero radius: the ball around x has no extent", float(r))
    if any(not 0.0 < e < 1.0 for e in eps_grid):
        raise InputError("eps grid values must lie in (0, 1)")
    outer = np.searchsorted(dist, r, side="right") / n
    pairs = tuple((float(e), float(np.searchsorted(dist, e * r, side="right") / n), float(outer))
                  for e in eps_grid)
    radii = [e * r for e, inner, _ in pairs if inner > 0]
    masses = [inner for _, inner, _ in pairs if inner > 0]
    if not masses:
        return _failed("every inner ball is empty", r, pairs)
    radii.append(r)
    masses.append(outer)
    lr, lm = np.log(radii), np.log(masses)
    slope = float(np.polyfit(lr, lm, 1)[0])
    return HomogeneityEstimate(max(slope, 0.0), pairs, r)


def estimate_homogeneity_constants(points, d: float, rng, n_centers: int = 64,
                                   eps_grid=DEFAULT_EPS_GRID, n_radii: int = 8,
                                   min_count: int = 20) -> tuple[float, float]:
    """Empirical ``(C1, C2)`` bracketing ``eps^d * mu(B(x, r)) / mu(B(x, eps r))``.

    Only balls whose inner ball holds at least ``min_count`` points are used.
    """
    X = as_points(points)
    rng = make_rng(rng)
    n = X.shape[0]
    centers = X[rng.choice(n, size=min(n_centers, n), replace=False)]
    lo, hi = math.inf, 0.0
    for c in centers:
        dist = np.sort(EUCLIDEAN.to_many(X, c))
        top = dist[-1]
        if top <= 0:
            continue
        r_min = dist[min(n - 1, max(min_count, 1) * 2)]
        if r_min <= 0:
            continue
        for r in np.geomspace(r_min, top, n_radii):
            outer = np.searchsorted(dist, r, side="right")
            for e in eps_grid:
                inner = np.searchsorted(dist, e * r, side="right")
                if inner < min_count:
                    continue
                q = (e ** d) * outer / inner
                lo, hi = min(lo, q), max(hi, q)
    if not math.isfinite(lo):
        return 1.0, 1.0
    return lo, hi


# --------------------------------------------------------------------------
# VC concentration
# --------------------------------------------------------------------------

def vc_alpha(n: int, delta: float, vc_dim: float) -> float:
    return (vc_dim * math.log(2 * n) + math.log(8.0 / delta)) / n


@dataclass(frozen=True)
class ConcentrationReport:
    trials: int
    a: float
    alpha_n: float
    delta: float
    balls_per_trial: int
    violations_forward: int
    violations_backward: int
    trials_violated: int

    @property
    def violation_rate(self) -> float:
        return self.trials_violated / self.trials

    @property
    def allowed_rate(self) -> float:
        """``delta`` plus three binomial standard deviations."""
        return self.delta + 3.0 * math.sqrt(self.delta * (1.0 - self.delta) / self.trials)

    @property
    def passed(self) -> bool:
        return self.violation_rate <= self.allowed_rate


def vc_concentration_check(spec: WorldSpec, n: int, delta: float, vc_dim: float, trials: int, rng,
                           a: float | None = None, n_centers: int = 32, n_radii: int = 24) -> ConcentrationReport:
    """Monte Carlo check of the two implications ``mu >= 3a => mu_n >= a`` and back.

    Each trial draws a fresh n-sample and tests the balls centred at its first
    ``n_centers`` points with radii on a geometric grid up to the diameter.
    """
    if spec.kind not in (WorldKind.HYPERPLANE, WorldKind.SPHERE):
        raise InputError(f"no analytic ball mass for world kind {spec.kind.value}")
    if not 0 < delta < 1 or n < 1 or trials < 1:
        raise InputError("need 0 < delta < 1, n >= 1, trials >= 1")
    rng = make_rng(rng)
    alpha = vc_alpha(n, delta, vc_dim)
    if a is None:
        a = alpha
    if a < alpha * (1 - 1e-12):
        raise InputError(f"a={a:g} is below alpha_n={alpha:g}")
    diam = spec.diameter_bound()
    radii = np.geomspace(diam * 1e-3, diam, n_radii)
    fwd = bwd = bad_trials = 0
    m = min(n_centers, n)
    for _ in range(trials):
        X = sample_points(spec, n, rng)
        centers = X[:m]
        mu = ball_masses(spec, centers, radii)
        emp = np.empty_like(mu)
        for i in range(m):
            dist = np.sort(EUCLIDEAN.to_many(X, centers[i]))
            emp[i] = np.searchsorted(dist, radii, side="right") / n
        f = int(np.sum((mu >= 3 * a) & (emp < a)))
        b = int(np.sum((emp >= 3 * a) & (mu < a)))
        fwd += f
        bwd += b
        bad_trials += int(f + b > 0)
    return ConcentrationReport(trials, float(a), alpha, float(delta), m * n_radii, fwd, bwd, bad_trials)
