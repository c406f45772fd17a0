"""Acceptance criteria 1-11. Each test records one PASS/FAIL line (see conftest)."""

import math
import time

import numpy as np
import pytest

from adaknn.adaptive import AdaptiveConfig, balance_condition, resolve_theta, select_k, select_k_batch
from adaknn.core import (Dataset, Kernel, KernelKind, NoiseModel, coordinate_target, distance_target,
                         linear_target, lipschitz_audit, sine_target)
from adaknn.experiments import draw_trial, fit_loglog_slope, load_config, oracle_comparison, run_rate_experiment
from adaknn.minimax import greedy_net, make_alternating_target, minimax_rate_probe, net_size_scaling
from adaknn.nn_index import DistanceProfile, Index, brute_force_knn
from adaknn.regressor import compute_weights, predict_batch
from adaknn.worlds import WorldKind, WorldSpec, parse_world, sample_points, vc_concentration_check, vc_alpha

pytestmark = pytest.mark.acceptance

KERNELS = (Kernel(KernelKind.BOX), Kernel(KernelKind.TRUNCATED_GAUSSIAN))
N_GRID = (256, 512, 1024, 2048, 4096, 8192)


def _random_dataset(rng, with_ties: bool):
    n = int(rng.integers(1, 400))
    D = int(rng.integers(1, 6))
    X = rng.uniform(size=(n, D))
    if with_ties:
        X = np.round(X * 3) / 3
    return Dataset(X, rng.normal(size=n))


def test_c01_weight_bound(verdict):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    violations = checked = 0
    for i in range(1000):
        data = _random_dataset(rng, with_ties=i % 3 == 0)
        x = rng.uniform(size=data.dim)
        if i % 3 == 0:
            x = np.round(x * 3) / 3
        prof = Index(data).query_profile(x)
        k = int(rng.integers(1, data.n + 1))
        for kernel in KERNELS:
            wv = compute_weights(prof, kernel, k)
            checked += 1
            violations += not (wv.sq_sum <= kernel.k0 / (kernel.k1 * k))
    dt = time.perf_counter() - t0
    verdict(1, violations == 0 and dt < 10.0,
            f"sum w^2 <= K(0)/(K(1) k): {violations} violations over {checked} (triple, kernel) checks, {dt:.2f}s")


def test_c02_bias_bound(verdict):
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    violations = checked = 0
    worst = 0.0
    for i in range(1000):
        D = int(rng.integers(1, 5))
        lam = float(rng.uniform(0.2, 3.0))
        target = [coordinate_target(int(rng.integers(D)), lam), linear_target(rng.normal(size=D), lam),
                  sine_target(float(rng.uniform(1, 20)), lam), distance_target(rng.uniform(size=D), lam)][i % 4]
        n = int(rng.integers(50, 300))
        X = rng.uniform(size=(n, D))
        if i % 5 == 0:
            X = np.round(X * 4) / 4
        idx = Index(Dataset(X, target(X)))
        x = rng.uniform(size=D)
        fx = float(target(x))
        prof = idx.query_profile(x)
        for kernel in KERNELS:
            for k in range(1, 51):
                wv = compute_weights(prof, kernel, k)
                y = idx.dataset.labels[wv.indices]
                est = y[0] + float(np.dot(wv.weights, y - y[0]))
                bound = lam * wv.radius * (1 + 1e-9)
                checked += 1
                worst = max(worst, abs(est - fx) / bound if bound > 0 else 0.0)
                violations += not (abs(est - fx) <= bound)
    dt = time.perf_counter() - t0
    verdict(2, violations == 0 and dt < 30.0,
            f"|f_nk - f| <= lam r_k (1+1e-9): {violations} violations over {checked} checks "
            f"(worst ratio {worst:.3f}), {dt:.2f}s")


def test_c03_adaptive_selection(verdict):
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    bad = 0
    for i in range(1000):
        n = int(rng.integers(1, 300))
        dist = np.sort(rng.exponential(size=n) * rng.uniform(1e-3, 1e3))
        if i % 4 == 0:
            dist = np.sort(np.round(dist, 1))
        theta = float(rng.uniform(1.0, 200.0))
        cap = float(dist[-1]) * (1.0 if i % 2 else 1.0 + rng.exponential())
        diag = select_k(DistanceProfile(np.arange(n), dist), AdaptiveConfig(theta=theta, delta_cap=cap))
        scan = max(k for k in range(1, n + 1) if cap * cap * theta / k >= dist[k - 1] ** 2)
        witness = balance_condition(cap, theta, diag.k1, dist[diag.k1 - 1])
        if diag.k1 < n:
            witness = witness and not (cap * cap * theta / (diag.k1 + 1) >= dist[diag.k1] ** 2)
        bad += diag.k1 != scan or not witness
    dt = time.perf_counter() - t0
    verdict(3, bad == 0 and dt < 5.0, f"k1 == exhaustive scan and witness holds: {bad} failures over 1000, {dt:.2f}s")


@pytest.fixture(scope="module")
def d1_reports():
    return {D: run_rate_experiment(load_config(f"configs/accept_d1_D{D}.cfg")) for D in (5, 20)}


def test_c04_rate_d1(verdict, d1_reports):
    s5, s20 = d1_reports[5], d1_reports[20]
    ok = all(-0.85 <= r.slope <= -0.45 for r in (s5, s20))
    verdict(4, ok, f"d=1 slope R^5 = {s5.slope:.4f} +- {s5.slope_halfwidth:.4f}, "
                   f"R^20 = {s20.slope:.4f} +- {s20.slope_halfwidth:.4f}; window [-0.85, -0.45], target -2/3",
            info="mean k per n (R^5): " + ", ".join(f"{r.n}:{r.mean_k:.0f}" for r in s5.rows))


def test_c05_rate_d2(verdict):
    rep = run_rate_experiment(load_config("configs/accept_d2_D10.cfg"))
    verdict(5, -0.68 <= rep.slope <= -0.33,
            f"d=2 slope R^10 = {rep.slope:.4f} +- {rep.slope_halfwidth:.4f}; window [-0.68, -0.33], target -0.5")


def test_c06_adaptive_vs_oracle(verdict):
    cfg = load_config("configs/accept_d1_D5.cfg")
    rep = oracle_comparison(cfg, 4096, k_max=256, thetas=("ln2", "ln"))
    factor = rep.factor("ln2")
    verdict(6, factor <= 3.0,
            f"adaptive (theta = ln^2(n/delta)) MSE / best fixed-k MSE = {factor:.2f}, gate 3 "
            f"(adaptive {rep.adaptive_mse['ln2']:.3e} at mean k {rep.mean_k['ln2']:.0f}; "
            f"best fixed k = {rep.best_k}, MSE {rep.best_fixed_mse:.3e})",
            info=f"informational: theta = ln(n/delta) gives factor {rep.factor('ln'):.2f} "
                 f"at mean k {rep.mean_k['ln']:.0f}")


def test_c07_vc_concentration(verdict):
    t0 = time.perf_counter()
    parts, ok = [], True
    for seed, spec in enumerate((WorldSpec(WorldKind.HYPERPLANE, d=1, D=2),
                                 WorldSpec(WorldKind.HYPERPLANE, d=2, D=3))):
        vc = spec.D + 2
        rep = vc_concentration_check(spec, 2048, 0.05, vc, 200, np.random.default_rng(700 + seed),
                                     a=vc_alpha(2048, 0.05, vc))
        ok &= rep.passed
        parts.append(f"{spec.to_string()}: rate {rep.violation_rate:.3f} <= {rep.allowed_rate:.3f} "
                     f"(fwd {rep.violations_forward}, bwd {rep.violations_backward}, a={rep.a:.4f})")
    dt = time.perf_counter() - t0
    verdict(7, ok and dt < 60.0, "; ".join(parts) + f"; {dt:.1f}s")


def test_c08_nets(verdict):
    rng = np.random.default_rng(808)
    t0 = time.perf_counter()
    bad_nets = nets = 0
    for _ in range(60):
        n, D = int(rng.integers(1, 600)), int(rng.integers(1, 4))
        P = rng.uniform(size=(n, D))
        if rng.random() < 0.3:
            P = np.round(P * 5) / 5
        r = float(rng.uniform(0.03, 1.0))
        net = greedy_net(P, r)
        C = net.centers
        pair = np.sqrt(((C[:, None, :] - C[None, :, :]) ** 2).sum(-1))
        np.fill_diagonal(pair, np.inf)
        cover = np.sqrt(((P[:, None, :] - C[None, :, :]) ** 2).sum(-1)).min(axis=1)
        nets += 1
        bad_nets += not (pair.min() >= r and cover.max() <= r)
    slopes = {}
    for d in (1, 2):
        spec = WorldSpec(WorldKind.HYPERPLANE, d=d, D=d + 3, rotate=True, seed=8)
        S = sample_points(spec, 20_000, rng)
        center = spec.embed(np.r_[np.full(d, 0.5), np.zeros(3)][None, :])[0]
        slopes[d], _ = net_size_scaling(spec, S, (0.5, 0.25, 0.125, 0.0625), center=center, r=0.4)
    dt = time.perf_counter() - t0
    ok = bad_nets == 0 and all(abs(slopes[d] - d) <= 0.25 for d in (1, 2)) and dt < 60.0
    verdict(8, ok, f"{bad_nets}/{nets} nets fail packing/covering; net-size slope d=1: {slopes[1]:.3f}, "
                   f"d=2: {slopes[2]:.3f} (tolerance 0.25); {dt:.1f}s")


def _knn_mse_on_alternating(world, probe, reps, queries, seed):
    """Adaptive k-NN risk on sign-randomised alternating targets with N(0, 1) labels."""
    rng = np.random.default_rng(seed)
    support = sample_points(world, 20_000, rng)
    out = {}
    for row in probe.usable():
        net = greedy_net(support, row.r_n)
        errs = []
        for _ in range(reps):
            f = make_alternating_target(net, probe.lam, probe.tau, rng).as_target()
            trial = draw_trial(world, f, NoiseModel.gaussian(1.0), row.n, queries, rng)
            theta = resolve_theta("ln2", row.n, 0.05)
            ks = select_k_batch(trial.sorted_dist, theta)[2]
            pred, _, _ = predict_batch(trial.sorted_labels, trial.sorted_dist, ks)
            errs.append(np.mean((pred - trial.f_queries) ** 2))
        out[row.n] = float(np.mean(errs))
    return out


def test_c09_minimax_floor(verdict):
    spec = parse_world("curve:D=5,runs=5,fold=0.2,rotate=1,seed=3")
    probe = minimax_rate_probe(spec, 1.0, N_GRID, 10, np.random.default_rng(909))
    rows = probe.usable()
    slope, half = fit_loglog_slope([(r.n, r.floor_estimate) for r in rows])
    world, _ = spec.diameter_rescaled()
    mse = _knn_mse_on_alternating(world, probe, reps=10, queries=200, seed=910)
    ratios = [mse[r.n] / r.floor_estimate for r in rows]
    ok = len(rows) == len(N_GRID) and -0.82 <= slope <= -0.52 and min(ratios) > 0.1
    verdict(9, ok, f"floor slope {slope:.4f} +- {half:.4f} (window [-0.82, -0.52]); "
                   f"min k-NN MSE / floor = {min(ratios):.2f} (> 0.1 required)",
            info=f"tau={probe.tau:.3f}, scale={probe.scale_factor:.4f}, net sizes "
                 + ",".join(str(r.net_size) for r in rows))


def test_c10_alternating_lipschitz(verdict):
    rng = np.random.default_rng(1010)
    worst, targets, bad = 0.0, 0, 0
    for spec_text in ("curve:D=5,runs=5,fold=0.2,rotate=1,seed=3", "hyperplane:d=2,D=4,rotate=1,seed=2"):
        world, _ = parse_world(spec_text).diameter_rescaled()
        support = sample_points(world, 5000, rng)
        d = world.intrinsic_dim
        for lam in (0.5, 1.0, 2.0):
            for n in (256, 2048, 8192):
                r_n = (lam * lam * n) ** (-1.0 / (2 + d))
                f = make_alternating_target(greedy_net(support, r_n), lam, 0.25, rng)
                # stress pairs near and inside the tents as well as across the support
                near = f.net.centers[rng.integers(f.net.size, size=5000)]
                near = near + rng.normal(size=near.shape) * f.tau * r_n
                ratio = lipschitz_audit(f.as_target(), np.vstack([support, near]), 10_000, rng)
                worst = max(worst, ratio / lam)
                targets += 1
                bad += not (ratio <= lam * (1 + 1e-9))
    verdict(10, bad == 0, f"{bad}/{targets} alternating targets exceed lam (1+1e-9) on 10^4 pairs; "
                          f"worst ratio / lam = {worst:.4f}")


def test_c11_index_oracle(verdict):
    rng = np.random.default_rng(1111)
    mismatches = 0
    for i in range(1000):
        data = _random_dataset(rng, with_ties=i % 2 == 0)
        x = rng.uniform(size=data.dim)
        if i % 2 == 0:
            x = np.round(x * 3) / 3
        k = int(rng.integers(1, data.n + 1))
        a, b = Index(data).query_knn(x, k), brute_force_knn(data, x, k)
        mismatches += not (np.array_equal(a.indices, b.indices) and np.array_equal(a.distances, b.distances))
    verdict(11, mismatches == 0, f"{mismatches} mismatches over 1000 tree-vs-brute-force queries (half tie-heavy)")
