"""``adaknn`` command line: generate, predict, rates, diagnose, minimax.

Exit status: 0 on success, 1 on input or usage errors, 2 on internal failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .adaptive import DeltaCapPolicy, diameter_caps, resolve_theta, select_k_batch
from .core import (Dataset, InputError, make_rng, parse_kernel, parse_noise, parse_target,
                   read_dataset_csv, read_points_csv, write_dataset_csv)
from .experiments import (config_from_items, fit_loglog_slope, parse_int_list, parse_k, parse_theta,
                          run_rate_experiments)
from .minimax import minimax_rate_probe
from .nn_index import Index
from .regressor import predict_batch
from .worlds import (WorldKind, estimate_local_dimension, load_world, read_kv, sample_points, sample_world,
                     vc_concentration_check, write_sidecar)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _svg_path(out: str) -> Path:
    return Path(out).with_suffix(".svg")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_generate(args) -> int:
    world = load_world(args.world)
    noise = parse_noise(args.noise)
    target = world.frame_target(parse_target(args.target, args.lam, world.D))
    data = sample_world(world, args.n, target, noise, make_rng(args.seed))
    write_dataset_csv(args.out, data)
    write_sidecar(args.out, world, args.seed, args.n, args.target, args.lam, noise)
    print(f"wrote {args.n} points to {args.out}")
    return 0


def cmd_predict(args) -> int:
    train = read_dataset_csv(args.train)
    Q, _ = read_points_csv(args.queries)
    if Q.shape[1] != train.dim:
        raise InputError(f"queries have {Q.shape[1]} columns, training data has {train.dim}")
    kernel = parse_kernel(args.kernel)
    order, dist = Index(train, use_tree=False).query_profiles(Q)
    k = parse_k(args.k)
    if k == "adaptive":
        noise = parse_noise(args.noise) if args.noise else None
        theta = resolve_theta(parse_theta(args.theta), train.n, args.delta, noise)
        caps = None
        if DeltaCapPolicy(args.delta_cap) is DeltaCapPolicy.DIAMETER:
            caps = diameter_caps(train.points, Q, train.metric)
        ks = select_k_batch(dist, theta, caps)[2]
    else:
        if len(k) != 1:
            raise InputError("predict takes a single fixed k")
        if not 1 <= k[0] <= train.n:
            raise InputError(f"k must lie in [1, {train.n}]")
        ks = np.full(Q.shape[0], k[0])
    values, radii, _ = predict_batch(train.labels[order], dist, ks, kernel)
    cols = [f"x{j + 1}" for j in range(train.dim)] + ["y_hat", "k_chosen", "r_k"]
    lines = [",".join(cols)]
    for q, v, kk, r in zip(Q, values, ks, radii):
        lines.append(",".join([*(repr(float(c)) for c in q), repr(float(v)), str(int(kk)), repr(float(r))]))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {Q.shape[0]} predictions to {args.out}")
    return 0


_RATE_FLAGS = {"world": "world", "target": "target", "lam": "lam", "noise": "noise", "n_grid": "n_grid",
               "reps": "reps", "queries": "queries", "kernel": "kernel", "k": "k", "delta": "delta",
               "theta": "theta", "delta_cap": "delta_cap", "seed": "seed", "out": "out"}


def _merged_items(args, flags: dict) -> dict:
    items = read_kv(args.config) if args.config else {}
    for attr, key in flags.items():
        val = getattr(args, attr)
        if val is not None:
            items[key] = str(val)
    return items


def cmd_rates(args) -> int:
    items = _merged_items(args, _RATE_FLAGS)
    if args.median_of_means:
        items["median_of_means"] = "1"
    items.setdefault("out", "rates.csv")
    config = config_from_items(items)
    reports = run_rate_experiments(config)
    out = Path(config.out)
    if len(reports) == 1:
        reports[0].to_csv(out)
        written = [out]
    else:
        written = []
        for rep in reports:
            p = out.with_name(f"{out.stem}_{rep.label.replace('=', '')}{out.suffix}")
            rep.to_csv(p)
            written.append(p)
    from .plotting import plot_rates
    plot_rates(reports, _svg_path(str(out)))
    for rep, p in zip(reports, written):
        print(f"{rep.label}: slope={rep.slope:.4f} halfwidth={rep.slope_halfwidth:.4f} status={rep.status} -> {p}")
    return 0


def cmd_diagnose(args) -> int:
    world = load_world(args.world)
    rng = make_rng(args.seed)
    X = sample_points(world, args.n, rng)
    data = Dataset(X, np.zeros(args.n))
    centers = X[: min(args.centers, args.n)]
    lines = [",".join([f"x{j + 1}" for j in range(world.D)] + ["d_hat", "ok"])]
    d_hats = []
    for c in centers:
        est = estimate_local_dimension(data, c)
        d_hats.append(est.d_hat)
        lines.append(",".join([*(repr(float(v)) for v in c), repr(est.d_hat), "1" if est.ok else "0"]))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    finite = [v for v in d_hats if np.isfinite(v)]
    print(f"local dimension: median={np.median(finite) if finite else float('nan'):.3f} "
          f"over {len(finite)}/{len(d_hats)} centers (world d={world.intrinsic_dim}) -> {args.out}")
    from .plotting import plot_dimension_histogram
    plot_dimension_histogram(d_hats, _svg_path(args.out))
    if world.kind in (WorldKind.HYPERPLANE, WorldKind.SPHERE):
        rep = vc_concentration_check(world, args.n, args.delta, world.D + 2, args.trials, rng)
        print(f"vc: trials={rep.trials} a={rep.a:.6g} violations_forward={rep.violations_forward} "
              f"violations_backward={rep.violations_backward} rate={rep.violation_rate:.4f} "
              f"allowed={rep.allowed_rate:.4f} passed={int(rep.passed)}")
    else:
        print(f"vc: skipped (no analytic ball masses for {world.kind.value})")
    return 0


def cmd_minimax(args) -> int:
    items = _merged_items(args, {"world": "world", "lam": "lam", "n_grid": "n_grid", "reps": "reps",
                                 "seed": "seed", "out": "out"})
    if "world" not in items:
        raise InputError("a world is required")
    world = load_world(items["world"])
    try:
        lam = float(items.get("lam", 1.0))
        reps = int(items.get("reps", 10))
        seed = int(items.get("seed", 0))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    grid = parse_int_list(items.get("n_grid", "256,512,1024,2048,4096,8192"))
    out = items.get("out", "minimax.csv")
    probe = minimax_rate_probe(world, lam, grid, reps, make_rng(seed), support_size=args.support_size)
    probe.to_csv(out)
    from .plotting import plot_floor
    plot_floor(probe, _svg_path(out))
    usable = probe.usable()
    print(f"floor estimate (an estimate of the lower-bound construction, not a bound): "
          f"tau={probe.tau:.4g} scale={probe.scale_factor:.6g} usable={len(usable)}/{len(probe.rows)} -> {out}")
    if len(usable) >= 2 and all(r.floor_estimate > 0 for r in usable):
        slope, half = fit_loglog_slope([(r.n, r.floor_estimate) for r in usable])
        print(f"floor slope={slope:.4f} halfwidth={half:.4f}")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adaknn", description="k-NN regression with adaptive k: experiments and diagnostics")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("generate", help="sample a world to CSV")
    g.add_argument("--world", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--target", default="coord:0")
    g.add_argument("--lam", type=float, default=1.0)
    g.add_argument("--noise", default="gaussian:0.2")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    q = sub.add_parser("predict", help="predict at query points")
    q.add_argument("--train", required=True)
    q.add_argument("--queries", required=True)
    q.add_argument("--k", default="adaptive")
    q.add_argument("--kernel", default="box", choices=["box", "tgauss"])
    q.add_argument("--delta", type=float, default=0.05)
    q.add_argument("--theta", default="ln2")
    q.add_argument("--delta-cap", dest="delta_cap", default="profile-max", choices=["profile-max", "diameter"])
    q.add_argument("--noise", default=None, help="noise model, only for --theta noise")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_predict)

    r = sub.add_parser("rates", help="MSE against n with a log-log slope fit")
    r.add_argument("--config")
    r.add_argument("--world")
    r.add_argument("--target")
    r.add_argument("--lam", type=float)
    r.add_argument("--noise")
    r.add_argument("--n-grid", dest="n_grid")
    r.add_argument("--reps", type=int)
    r.add_argument("--queries", type=int)
    r.add_argument("--kernel", choices=["box", "tgauss"])
    r.add_argument("--k")
    r.add_argument("--delta", type=float)
    r.add_argument("--theta")
    r.add_argument("--delta-cap", dest="delta_cap", choices=["profile-max", "diameter"])
    r.add_argument("--seed", type=int)
    r.add_argument("--median-of-means", dest="median_of_means", action="store_true")
    r.add_argument("--out")
    r.set_defaults(func=cmd_rates)

    d = sub.add_parser("diagnose", help="local dimension map and VC concentration report")
    d.add_argument("--world", required=True)
    d.add_argument("--n", type=int, default=2048)
    d.add_argument("--centers", type=int, default=64)
    d.add_argument("--delta", type=float, default=0.05)
    d.add_argument("--trials", type=int, default=50)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default="diagnose.csv")
    d.set_defaults(func=cmd_diagnose)

    m = sub.add_parser("minimax", help="minimax floor probe")
    m.add_argument("--config")
    m.add_argument("--world")
    m.add_argument("--lam", type=float)
    m.add_argument("--n-grid", dest="n_grid")
    m.add_argument("--reps", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--support-size", dest="support_size", type=int, default=20000)
    m.add_argument("--out")
    m.set_defaults(func=cmd_minimax)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return 1
    except (InputError, ValueError, OSError) as exc:
        sys.stderr.write(f"adaknn: error: {exc}\n")
        return 1
    except Exception as exc:  # internal failure
        sys.stderr.write(f"adaknn: internal error: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
