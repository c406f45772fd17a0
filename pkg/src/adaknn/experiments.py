"""Rate-convergence experiments: MSE against n, and the fitted log-log slope.

Every (grid index, rep) pair draws from its own ``SeedSequence`` derived
from the config seed, so runs are reproducible and the pairs are
independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .adaptive import DeltaCapPolicy, diameter_caps, resolve_theta, select_k_batch
from .core import (EUCLIDEAN, Dataset, InputError, Kernel, NoiseModel, TargetFunction,
                   parse_kernel, parse_noise, parse_target)
from .nn_index import Index
from .regressor import BOX, predict_batch
from .worlds import WorldSpec, format_world, load_world, read_kv, sample_points

ZERO_ERROR = "degenerate: zero error"


class ExperimentError(RuntimeError):
    """An estimation failure inside a run, tagged with its (n, rep)."""


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldSpec
    target: str = "coord:0"
    lam: float = 1.0
    noise: NoiseModel = field(default_factory=lambda: NoiseModel.gaussian(0.2))
    n_grid: tuple[int, ...] = (256, 512, 1024, 2048, 4096, 8192)
    reps: int = 20
    queries: int = 200
    kernel: Kernel = BOX
    k: str | tuple[int, ...] = "adaptive"
    delta: float = 0.05
    theta: str | float = "ln2"
    delta_cap: DeltaCapPolicy = DeltaCapPolicy.PROFILE_MAX
    seed: int = 0
    out: str | None = None
    median_of_means: bool = False

    def __post_init__(self):
        grid = tuple(int(v) for v in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "delta_cap", DeltaCapPolicy(self.delta_cap))
        if not grid or list(grid) != sorted(grid) or len(set(grid)) != len(grid) or grid[0] < 1:
            raise InputError("n_grid must be strictly ascending with n >= 1")
        if self.reps < 1 or self.queries < 1:
            raise InputError("reps and queries must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise InputError("delta must lie in (0, 1)")
        if self.k != "adaptive":
            ks = tuple(int(v) for v in self.k)
            if not ks or min(ks) < 1:
                raise InputError("fixed k values must be >= 1")
            if max(ks) > grid[0]:
                raise InputError(f"fixed k={max(ks)} exceeds the smallest n={grid[0]}")
            object.__setattr__(self, "k", ks)

    @property
    def adaptive(self) -> bool:
        return self.k == "adaptive"

    def target_function(self) -> TargetFunction:
        return self.world.frame_target(parse_target(self.target, self.lam, self.world.D))

    def to_items(self) -> dict:
        return {
            "world": format_world(self.world), "target": self.target, "lam": repr(self.lam),
            "noise": str(self.noise), "n_grid": ",".join(map(str, self.n_grid)),
            "reps": str(self.reps), "queries": str(self.queries), "kernel": self.kernel.kind.value,
            "k": self.k if self.adaptive else ",".join(map(str, self.k)),
            "delta": repr(self.delta), "theta": str(self.theta),
            "delta_cap": self.delta_cap.value, "seed": str(self.seed),
            "median_of_means": "1" if self.median_of_means else "0",
        }


def parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)
    except ValueError:
        raise InputError(f"expected a comma-separated integer list, got {text!r}") from None


def parse_k(text: str) -> str | tuple[int, ...]:
    return "adaptive" if str(text).strip().lower() == "adaptive" else parse_int_list(text)


def parse_theta(text) -> str | float:
    t = str(text).strip().lower()
    if t in ("ln2", "ln", "noise"):
        return t
    try:
        v = float(t)
    except ValueError:
        raise InputError(f"theta must be ln2, ln, noise or a number, got {text!r}") from None
    if not v >= 1.0:
        raise InputError(f"theta must be >= 1, got {v}")
    return v


_KEYS = {"world", "target", "lam", "noise", "n_grid", "reps", "queries", "kernel", "k",
         "delta", "theta", "delta_cap", "seed", "out", "median_of_means"}


def config_from_items(items: dict) -> ExperimentConfig:
    """Build a config from string key/values (config file merged with CLI flags)."""
    bad = set(items) - _KEYS
    if bad:
        raise InputError(f"unknown config keys: {', '.join(sorted(bad))}")
    if "world" not in items:
        raise InputError("a world is required")
    kw = {"world": load_world(items["world"])}
    try:
        if "target" in items:
            kw["target"] = items["target"]
        if "lam" in items:
            kw["lam"] = float(items["lam"])
        if "noise" in items:
            kw["noise"] = parse_noise(items["noise"])
        if "n_grid" in items:
            kw["n_grid"] = parse_int_list(items["n_grid"])
        for key in ("reps", "queries", "seed"):
            if key in items:
                kw[key] = int(items[key])
        if "kernel" in items:
            kw["kernel"] = parse_kernel(items["kernel"])
        if "k" in items:
            kw["k"] = parse_k(items["k"])
        if "delta" in items:
            kw["delta"] = float(items["delta"])
        if "theta" in items:
            kw["theta"] = parse_theta(items["theta"])
        if "delta_cap" in items:
            kw["delta_cap"] = DeltaCapPolicy(items["delta_cap"])
        if "out" in items:
            kw["out"] = items["out"]
        if "median_of_means" in items:
            kw["median_of_means"] = str(items["median_of_means"]).strip().lower() in ("1", "true", "yes")
    except ValueError as exc:
        raise InputError(f"bad config value: {exc}") from None
    return ExperimentConfig(**kw)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    items = read_kv(path) if path else {}
    items.update(overrides or {})
    return config_from_items(items)


# --------------------------------------------------------------------------
# slope fit
# --------------------------------------------------------------------------

def fit_loglog_slope(points) -> tuple[float, float]:
    """OLS slope of ``ln mse`` on ``ln n`` and its 95% half-width.

    The half-width is ``t_{0.975, m-2} * SE``; it is NaN with only two points.
    """
    pts = [(float(n), float(m)) for n, m in points]
    if len(pts) < 2:
        raise InputError("need at least two points for a slope")
    if any(m <= 0 or not math.isfinite(m) for _, m in pts):
        raise InputError("mse values must be positive and finite")
    if any(n <= 0 for n, _ in pts):
        raise InputError("n values must be positive")
    x = np.log([n for n, _ in pts])
    y = np.log([m for _, m in pts])
    if np.ptp(x) == 0:
        raise InputError("need at least two distinct n values")
    fit = stats.linregress(x, y)
    if len(pts) == 2:
        return float(fit.slope), float("nan")
    half = float(stats.t.ppf(0.975, len(pts) - 2) * fit.stderr)
    return float(fit.slope), half


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RateRow:
    n: int
    mse: float
    mse_stderr: float
    mean_k: float


@dataclass(frozen=True)
class RateReport:
    label: str
    rows: tuple[RateRow, ...]
    slope: float
    slope_halfwidth: float
    status: str = "ok"
    rep_mse: tuple[tuple[float, ...], ...] = ()

    def render_csv(self) -> str:
        lines = ["n,mse,mse_stderr,mean_k"]
        lines += [f"{r.n},{r.mse!r},{r.mse_stderr!r},{r.mean_k!r}" for r in self.rows]
        lines.append(f"slope,{self.slope!r}")
        lines.append(f"slope_halfwidth,{self.slope_halfwidth!r}")
        if self.status != "ok":
            lines.append(f"status,{self.status}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        Path(path).write_text(self.render_csv(), encoding="utf-8")


def read_rate_csv(path) -> RateReport:
    rows, slope, half, status = [], float("nan"), float("nan"), "ok"
    for line in Path(path).read_text(encoding="utf-8").splitlines()[1:]:
        parts = line.split(",")
        if parts[0] == "slope":
            slope = float(parts[1])
        elif parts[0] == "slope_halfwidth":
            half = float(parts[1])
        elif parts[0] == "status":
            status = parts[1]
        else:
            rows.append(RateRow(int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3])))
    return RateReport(Path(path).stem, tuple(rows), slope, half, status)


# --------------------------------------------------------------------------
# runs
# --------------------------------------------------------------------------

def rep_seed(seed: int, grid_index: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(grid_index, rep)))


@dataclass(frozen=True)
class TrialData:
    """One (n, rep) draw: training set plus disjoint queries, already profiled."""

    train: Dataset
    queries: np.ndarray
    f_queries: np.ndarray
    order: np.ndarray
    sorted_dist: np.ndarray

    @property
    def sorted_labels(self) -> np.ndarray:
        return self.train.labels[self.order]


def draw_trial(world: WorldSpec, target: TargetFunction, noise: NoiseModel, n: int,
               queries: int, rng: np.random.Generator) -> TrialData:
    # one draw, split: the first n points train, the rest are queries
    X = sample_points(world, n + queries, rng)
    train_X, Q = X[:n], X[n:]
    Y = noise.draw(target(train_X), rng)
    train = Dataset(train_X, Y, EUCLIDEAN)
    order, dist = Index(train, use_tree=False).query_profiles(Q)
    return TrialData(train, Q, target(Q), order, dist)


def _adaptive_ks(trial: TrialData, theta: float, policy: DeltaCapPolicy) -> np.ndarray:
    caps = None
    if policy is DeltaCapPolicy.DIAMETER:
        caps = diameter_caps(trial.train.points, trial.queries, trial.train.metric)
    return select_k_batch(trial.sorted_dist, theta, caps)[2]


def _aggregate(per_rep: np.ndarray, mom: bool) -> tuple[float, float]:
    reps = per_rep.size
    se = float(np.std(per_rep, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    if mom:
        blocks = np.array_split(per_rep, min(reps, 5))
        return float(np.median([b.mean() for b in blocks])), se
    return float(per_rep.mean()), se


def run_rate_experiments(config: ExperimentConfig) -> list[RateReport]:
    """One report for the adaptive rule, or one per fixed k. Queries are never training points."""
    target = config.target_function()
    labels = ["adaptive"] if config.adaptive else [f"k={k}" for k in config.k]
    mse = {lab: np.zeros((len(config.n_grid), config.reps)) for lab in labels}
    kbar = {lab: np.zeros((len(config.n_grid), config.reps)) for lab in labels}
    for i, n in enumerate(config.n_grid):
        theta = resolve_theta(config.theta, n, config.delta, config.noise) if config.adaptive else None
        for rep in range(config.reps):
            try:
                trial = draw_trial(config.world, target, config.noise, n, config.queries,
                                   rep_seed(config.seed, i, rep))
                if config.adaptive:
                    plan = [("adaptive", _adaptive_ks(trial, theta, config.delta_cap))]
                else:
                    plan = [(f"k={k}", np.full(config.queries, k)) for k in config.k]
                ys = trial.sorted_labels
                for lab, ks in plan:
                    pred, _, _ = predict_batch(ys, trial.sorted_dist, ks, config.kernel)
                    err = (pred - trial.f_queries) ** 2
                    if not np.all(np.isfinite(err)):
                        raise FloatingPointError("non-finite prediction")
                    mse[lab][i, rep] = float(err.mean())
                    kbar[lab][i, rep] = float(np.mean(ks))
            except InputError as exc:
                raise InputError(f"n={n}, rep={rep}: {exc}") from exc
            except Exception as exc:
                raise ExperimentError(f"n={n}, rep={rep}: {type(exc).__name__}: {exc}") from exc
    reports = []
    for lab in labels:
        rows = []
        for i, n in enumerate(config.n_grid):
            m, se = _aggregate(mse[lab][i], config.median_of_means)
            rows.append(RateRow(n, m, se, float(kbar[lab][i].mean())))
        if any(r.mse == 0.0 for r in rows):
            slope, half, status = float("nan"), float("nan"), ZERO_ERROR
        else:
            slope, half = fit_loglog_slope([(r.n, r.mse) for r in rows])
            status = "ok"
        reports.append(RateReport(lab, tuple(rows), slope, half, status,
                                  tuple(tuple(float(v) for v in row) for row in mse[lab])))
    return reports


def run_rate_experiment(config: ExperimentConfig) -> RateReport:
    """The first report of :func:`run_rate_experiments` (the adaptive one for adaptive configs)."""
    return run_rate_experiments(config)[0]


# --------------------------------------------------------------------------
# oracle comparison
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleReport:
    n: int
    adaptive_mse: dict
    fixed_mse: np.ndarray
    mean_k: dict

    @property
    def best_k(self) -> int:
        return int(np.argmin(self.fixed_mse)) + 1

    @property
    def best_fixed_mse(self) -> float:
        return float(self.fixed_mse.min())

    def factor(self, label: str = "ln2") -> float:
        return self.adaptive_mse[label] / self.best_fixed_mse


def oracle_comparison(config: ExperimentConfig, n: int, k_max: int = 256,
                      thetas=("ln2",)) -> OracleReport:
    """Adaptive MSE (for each theta policy) next to every fixed k in ``1..k_max``.

    All estimators see the same trials; picking the best fixed k uses the
    test-set errors, which the adaptive rule never sees.
    """
    if not 1 <= k_max <= n:
        raise InputError("k_max must lie in [1, n]")
    cfg = replace(config, n_grid=(n,), k="adaptive")
    target = cfg.target_function()
    fixed = np.zeros(k_max)
    ada = {str(t): 0.0 for t in thetas}
    kbar = {str(t): 0.0 for t in thetas}
    for rep in range(cfg.reps):
        trial = draw_trial(cfg.world, target, cfg.noise, n, cfg.queries, rep_seed(cfg.seed, 0, rep))
        ys = trial.sorted_labels
        for t in thetas:
            theta = resolve_theta(t, n, cfg.delta, cfg.noise)
            ks = _adaptive_ks(trial, theta, cfg.delta_cap)
            pred, _, _ = predict_batch(ys, trial.sorted_dist, ks, cfg.kernel)
            ada[str(t)] += float(np.mean((pred - trial.f_queries) ** 2)) / cfg.reps
            kbar[str(t)] += float(ks.mean()) / cfg.reps
        # every support for k <= k_max fits in the first `width` columns
        kth = trial.sorted_dist[:, k_max - 1]
        width = int(max(np.searchsorted(row, r, side="right") for row, r in zip(trial.sorted_dist, kth)))
        D, Ysub = trial.sorted_dist[:, :width], ys[:, :width]
        for k in range(1, k_max + 1):
            pred, _, _ = predict_batch(Ysub, D, np.full(cfg.queries, k), cfg.kernel)
            fixed[k - 1] += float(np.mean((pred - trial.f_queries) ** 2)) / cfg.reps
    return OracleReport(n, ada, fixed, kbar)
