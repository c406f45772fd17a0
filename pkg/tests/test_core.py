import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaknn.core import (EUCLIDEAN, Dataset, InputError, Kernel, KernelKind, Metric, MetricKind, NoiseModel,
                         coordinate_target, distance_target, draw_label, kernel_eval, linear_target,
                         lipschitz_audit, metric_dist, parse_kernel, parse_noise, parse_target,
                         read_dataset_csv, read_points_csv, sine_target, write_dataset_csv)

ALL_METRICS = [Metric(k) for k in MetricKind]
KERNELS = [Kernel(KernelKind.BOX), Kernel(KernelKind.TRUNCATED_GAUSSIAN), Kernel(KernelKind.LINEAR_FLOOR, 0.3)]


def test_metric_dist_examples():
    assert metric_dist(EUCLIDEAN, (0, 0), (3, 4)) == 5.0
    p = np.array([0.3, -1.2, 7.0])
    assert metric_dist(EUCLIDEAN, p, p) == 0.0
    assert metric_dist(EUCLIDEAN, np.ones(9), np.zeros(9)) == pytest.approx(3.0, abs=1e-15)


def test_metric_dist_dimension_mismatch():
    with pytest.raises(InputError):
        metric_dist(EUCLIDEAN, (0, 0), (1, 2, 3))


@pytest.mark.parametrize("metric", ALL_METRICS, ids=lambda m: m.kind.value)
def test_metric_axioms_on_random_triples(metric, rng):
    A, B, C = (rng.normal(size=(10_000, 4)) for _ in range(3))

    def d(P, Q):
        return np.array([metric.to_many(Q[i:i + 1], P[i])[0] for i in range(len(P))])

    ab, ba, bc, ac = d(A, B), d(B, A), d(B, C), d(A, C)
    assert np.all(ab >= 0)
    assert np.array_equal(ab, ba)
    assert np.all(d(A, A) == 0)
    assert np.all(ac <= (ab + bc) * (1 + 1e-12))


def test_known_metric_values():
    p, q = np.array([0.0, 0.0]), np.array([3.0, -4.0])
    assert metric_dist(Metric("manhattan"), p, q) == 7.0
    assert metric_dist(Metric("chebyshev"), p, q) == 4.0


def test_cross_matches_to_many(rng):
    X, Q = rng.normal(size=(50, 3)), rng.normal(size=(7, 3))
    M = EUCLIDEAN.cross(Q, X)
    for i in range(7):
        assert np.array_equal(M[i], EUCLIDEAN.to_many(X, Q[i]))


def test_dataset_validation_and_immutability():
    ds = Dataset([[0.0, 1.0], [2.0, 3.0]], [1.0, 2.0])
    assert ds.n == 2 and ds.dim == 2
    with pytest.raises(ValueError):
        ds.points[0, 0] = 5.0
    with pytest.raises(ValueError):
        ds.labels[0] = 5.0
    with pytest.raises(InputError):
        Dataset(np.zeros((0, 2)), [])
    with pytest.raises(InputError):
        Dataset([[0.0], [1.0]], [1.0])
    with pytest.raises(InputError):
        Dataset([[np.nan]], [1.0])


def test_dataset_copies_input():
    X = np.zeros((3, 2))
    ds = Dataset(X, np.zeros(3))
    X[0, 0] = 9.0
    assert ds.points[0, 0] == 0.0


def test_kernel_eval_examples():
    box, tg = Kernel(KernelKind.BOX), Kernel(KernelKind.TRUNCATED_GAUSSIAN)
    assert kernel_eval(box, 0.5) == 1.0
    assert kernel_eval(box, 1.2) == 0.0
    assert kernel_eval(tg, 1.0) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert kernel_eval(tg, 0.0) == tg.k0 == 1.0


def test_kernel_negative_argument_rejected():
    with pytest.raises(InputError):
        kernel_eval(Kernel(), -0.1)


def test_triangular_kernel_rejected():
    with pytest.raises(InputError):
        parse_kernel("triangular")
    with pytest.raises(InputError):
        Kernel(KernelKind.LINEAR_FLOOR, floor=0.0)


def test_parse_kernel_names():
    assert parse_kernel("box").kind is KernelKind.BOX
    assert parse_kernel("tgauss").kind is KernelKind.TRUNCATED_GAUSSIAN
    k = parse_kernel("linear-floor:0.25")
    assert k.kind is KernelKind.LINEAR_FLOOR and k.floor == 0.25


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.kind.value)
def test_kernel_invariants(kernel):
    u = np.linspace(0.0, 3.0, 3001)
    v = kernel(u)
    assert np.all(np.diff(v) <= 0)
    assert np.all(v[u > 1] == 0)
    assert kernel.k1 > 0 and math.isfinite(kernel.k0)
    assert kernel(np.array([1.0]))[0] == kernel.k1


def test_box_zero_exactly_beyond_one():
    u = np.array([1.0, np.nextafter(1.0, 2.0), 0.0])
    assert list(Kernel()(u)) == [1.0, 0.0, 1.0]


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10))
def test_kernel_monotone_property(a, b):
    lo, hi = min(a, b), max(a, b)
    for k in KERNELS:
        assert kernel_eval(k, lo) >= kernel_eval(k, hi)


def test_draw_label_examples():
    r = np.random.default_rng(0)
    assert draw_label(NoiseModel.none(), 3.7, r) == 3.7
    ys = NoiseModel.bounded(0.5).draw(np.zeros(100_000), r)
    assert ys.min() >= -0.5 and ys.max() <= 0.5
    g = NoiseModel.gaussian(1.0).draw(np.zeros(100_000), r)
    assert abs(g.mean()) <= 0.02


def test_noise_tail_properties():
    deltas = np.geomspace(1e-8, 0.99, 200)
    for m in (NoiseModel.bounded(0.7), NoiseModel.gaussian(0.3)):
        t = np.array([m.tail(d) for d in deltas])
        assert np.all(np.diff(t) <= 1e-15)
    assert all(NoiseModel.bounded(0.7).tail(d) <= 0.7 for d in deltas)
    g = NoiseModel.gaussian(1.0)
    # gaussian tail grows like sqrt(2 ln(1/delta))
    for d in (1e-4, 1e-8, 1e-12):
        assert g.tail(d) <= math.sqrt(2 * math.log(2 / d))
    assert g.tail(0.05) == pytest.approx(1.959963984540054, rel=1e-12)


def test_noise_sigma_y():
    assert NoiseModel.bounded(math.sqrt(3)).sigma_y == pytest.approx(1.0)
    assert NoiseModel.gaussian(0.2).sigma_y == 0.2
    assert NoiseModel.none().sigma_y == 0.0


def test_parse_noise():
    assert parse_noise("none").kind.value == "none"
    assert parse_noise("gaussian:0.2").scale == 0.2
    assert parse_noise("bounded:1").scale == 1.0
    with pytest.raises(InputError):
        parse_noise("cauchy:1")
    with pytest.raises(InputError):
        parse_noise("gaussian:-1")


def test_shipped_targets_pass_lipschitz_audit(rng):
    X = rng.uniform(-2, 2, size=(5000, 3))
    targets = [coordinate_target(1, 0.7), linear_target([1.0, -2.0, 0.5], 1.3), sine_target(7.0, 2.0),
               distance_target(np.array([0.1, 0.2, 0.3]), 0.9), parse_target("const:2")]
    for t in targets:
        assert lipschitz_audit(t, X, 10_000, rng) <= t.lipschitz_lambda * (1 + 1e-9)


def test_parse_target_errors():
    with pytest.raises(InputError):
        parse_target("wobble")
    with pytest.raises(InputError):
        parse_target("dist")
    with pytest.raises(InputError):
        parse_target("coord:x")


def test_target_single_point_and_batch():
    t = coordinate_target(0, 2.0)
    assert t(np.array([1.5, 0.0])) == 3.0
    assert list(t(np.array([[1.0, 0.0], [2.0, 0.0]]))) == [2.0, 4.0]


def test_csv_roundtrip(tmp_path, rng):
    ds = Dataset(rng.normal(size=(20, 3)), rng.normal(size=20))
    p = tmp_path / "d.csv"
    write_dataset_csv(p, ds)
    assert p.read_text().splitlines()[0] == "x1,x2,x3,y"
    back = read_dataset_csv(p)
    assert np.array_equal(back.points, ds.points) and np.array_equal(back.labels, ds.labels)


def test_csv_accepts_exponents(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("x1,y\n1e-3,2.5E+2\n")
    X, Y = read_points_csv(p, require_y=True)
    assert X[0, 0] == 1e-3 and Y[0] == 250.0


def test_csv_errors_name_the_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,x2,y\n1,2,3\n1,abc,3\n")
    with pytest.raises(InputError, match="line 3"):
        read_dataset_csv(p)
    p.write_text("x1,x2,y\n1,2,3\n1,2\n")
    with pytest.raises(InputError, match="line 3"):
        read_dataset_csv(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(InputError, match="line 1"):
        read_dataset_csv(p)
