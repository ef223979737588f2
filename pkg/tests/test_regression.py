import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frechetq.errors import EmptyInputError, InvalidParameterError, SpaceMismatchError
from frechetq.mean import PrototypeSet, quantized_frechet_mean
from frechetq.metric import Point, SpaceDescriptor, norm, squared_norm, total_variation
from frechetq.regression import (
    PiecewiseEstimator,
    VoronoiPartition,
    default_k_schedule,
    fit,
    fitted_empirical_risk,
    predict,
    voronoi_assign,
)


def v(*xs):
    return Point.vector(list(xs))


def part(*nuclei):
    return VoronoiPartition.from_nuclei([v(*n) if isinstance(n, tuple) else v(n) for n in nuclei])


TWO_CELL_DATA = [(v(0), v(0)), (v(10), v(1)), (v(0), v(0)), (v(10), v(1))]


# ---- voronoi_assign


def test_equidistant_goes_to_smaller_index():
    assert voronoi_assign(part(0, 2), v(1)) == 0


def test_strictly_nearer():
    assert voronoi_assign(part(0, 2), v(1.5)) == 1


def test_on_nucleus():
    assert voronoi_assign(part(0, 2, 5), v(5)) == 2
    assert voronoi_assign(part(5, 2, 5), v(5)) == 0


def test_assign_space_mismatch():
    with pytest.raises(SpaceMismatchError):
        voronoi_assign(part(0, 2), v(1, 1))


def test_cover_and_nearest():
    rng = np.random.default_rng(3)
    nuclei = rng.random((16, 2))
    partition = VoronoiPartition.from_nuclei([Point.vector(n) for n in nuclei])
    X = rng.random((10_000, 2))
    cells = partition.assign_array(X)
    assert cells.shape == (10_000,)
    assert np.all((cells >= 0) & (cells < 16))
    D = np.sqrt(((X[:, None, :] - nuclei[None, :, :]) ** 2).sum(-1))
    assert np.all(D[np.arange(len(X)), cells][:, None] <= D)
    # first minimiser wins
    first = np.array([next(j for j in range(16) if D[i, j] == D[i].min()) for i in range(200)])
    assert np.array_equal(cells[:200], first)


def test_assign_on_histograms():
    h = [Point.histogram([2.0, 0.0], 0.5), Point.histogram([0.0, 2.0], 0.5)]
    tv = SpaceDescriptor("density-grid", 2, "total-variation", 0.5)
    partition = VoronoiPartition.from_nuclei(h, tv)
    assert voronoi_assign(partition, Point.histogram([0.5, 1.5], 0.5)) == 1
    assert voronoi_assign(partition, Point.histogram([1.0, 1.0], 0.5)) == 0


# ---- default_k_schedule


@pytest.mark.parametrize("n,k", [(1, 1), (4096, 64), (100, 10), (99, 9), (2, 1)])
def test_k_schedule_values(n, k):
    assert default_k_schedule(n) == k


def test_k_schedule_rate():
    # direct evaluation: floor(sqrt(n)) ln n / n drops below 0.1 from n = 7999 on
    ratio = lambda n: default_k_schedule(n) * math.log(n) / n  # noqa: E731
    assert ratio(7998) > 0.1
    for n in list(range(7999, 70_000, 97)) + [2**20, 10**9]:
        assert ratio(n) <= 0.1
    assert ratio(4096) == pytest.approx(64 * math.log(4096) / 4096)
    assert ratio(10**12) < ratio(10**9) < ratio(10**6)


def test_k_schedule_rejects_zero():
    with pytest.raises(InvalidParameterError):
        default_k_schedule(0)


# ---- fit / predict


def test_fit_two_cells():
    est = fit(squared_norm(), TWO_CELL_DATA, [v(0), v(10)], [v(0), v(1)])
    assert est.values == (v(0), v(1))
    assert est.fallback_cells == ()
    assert fitted_empirical_risk(squared_norm(), est, TWO_CELL_DATA) == 0.0


def test_fit_single_point():
    y = v(3.5)
    est = fit(norm(), [(v(1), y)], [v(0)], [v(9), y])
    assert est.values == (y,)
    assert fitted_empirical_risk(norm(), est, [(v(1), y)]) == 0.0


def test_empty_cell_falls_back_to_unconditional_mean():
    rng = np.random.default_rng(0)
    xs = rng.normal(0.0, 0.5, size=30)
    ys = rng.normal(size=30)
    data = [(v(x), v(y)) for x, y in zip(xs, ys)]
    protos = [Point.vector([p]) for p in rng.normal(size=12)]
    est = fit(squared_norm(), data, [v(0), v(100)], protos)
    assert est.fallback_cells == (1,)
    pooled = quantized_frechet_mean(squared_norm(), [y for _, y in data], protos)
    assert est.values[1] == pooled.value


def test_predict_examples():
    est = fit(squared_norm(), TWO_CELL_DATA, [v(0), v(10)], [v(0), v(1)])
    assert predict(est, v(3)) == v(0)
    assert predict(est, v(10)) == v(1)
    assert predict(est, v(5)) == est.values[0]


def test_fit_empty_inputs():
    with pytest.raises(EmptyInputError):
        fit(norm(), [], [v(0)], [v(0)])
    with pytest.raises(EmptyInputError):
        fit(norm(), TWO_CELL_DATA, [], [v(0)])
    with pytest.raises(EmptyInputError):
        fit(norm(), TWO_CELL_DATA, [v(0)], [])


def test_fit_space_mismatch_names_record():
    data = TWO_CELL_DATA + [(v(1, 2), v(0))]
    with pytest.raises(SpaceMismatchError) as err:
        fit(norm(), data, [v(0), v(10)], [v(0), v(1)])
    assert err.value.index == 4


def test_fit_matches_per_cell_brute_force():
    rng = np.random.default_rng(17)
    X = rng.random((80, 2))
    Y = X.sum(axis=1, keepdims=True) + 0.1 * rng.normal(size=(80, 1))
    data = [(Point.vector(x), Point.vector(y)) for x, y in zip(X, Y)]
    nuclei = [Point.vector(n) for n in rng.random((6, 2))]
    protos = [Point.vector(p) for p in rng.normal(1.0, 0.5, size=(25, 1))]
    est = fit(squared_norm(), data, nuclei, protos)
    for j in range(6):
        members = [y.data[0] for x, y in data if voronoi_assign(est.partition, x) == j]
        if not members:
            assert j in est.fallback_cells
            continue
        sums = [sum((m - p.data[0]) ** 2 for m in members) for p in protos]
        assert est.values[j] == protos[int(np.argmin(sums))]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fit_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((40, 1))
    Y = X + 0.2 * rng.normal(size=(40, 1))
    data = [(Point.vector(x), Point.vector(y)) for x, y in zip(X, Y)]
    nuclei = [Point.vector(n) for n in rng.random((5, 1))]
    protos = [Point.vector(p) for p in rng.random((15, 1))]
    a = fit(squared_norm(), data, nuclei, protos)
    perm = rng.permutation(len(data))
    b = fit(squared_norm(), [data[i] for i in perm], nuclei, protos)
    assert a.value_indices == b.value_indices
    assert a.fallback_cells == b.fallback_cells


def test_piecewise_constant_on_grid():
    rng = np.random.default_rng(5)
    for k in (1, 2, 5, 16):
        X = rng.random((60, 2))
        Y = rng.normal(size=(60, 1))
        data = [(Point.vector(x), Point.vector(y)) for x, y in zip(X, Y)]
        nuclei = [Point.vector(n) for n in rng.random((k, 2))]
        protos = [Point.vector(p) for p in rng.normal(size=(20, 1))]
        est = fit(squared_norm(), data, nuclei, protos)
        g = np.linspace(0, 1, 41)
        grid = np.array([[a, b] for a in g for b in g])
        cells = est.partition.assign_array(grid)
        preds = est.predict_array(grid)
        for j in range(k):
            sel = preds[cells == j]
            if sel.size:
                assert np.all(sel == sel[0])
                assert np.all(sel == est.values[j].data)


def test_new_nucleus_can_merge_points_from_two_cells():
    # a Voronoi cell added later may straddle old cells, so fitted risk can go up
    data = [(v(-0.1), v(0)), (v(0.1), v(1))]
    protos = [v(0), v(1)]
    before = fit(squared_norm(), data, [v(-1), v(1)], protos)
    after = fit(squared_norm(), data, [v(-1), v(1), v(0)], protos)
    assert fitted_empirical_risk(squared_norm(), before, data) == 0.0
    assert fitted_empirical_risk(squared_norm(), after, data) == 0.5


def test_fit_minimises_over_piecewise_functions():
    # for a fixed partition, no other choice of prototype per cell does better
    rng = np.random.default_rng(23)
    for _ in range(100):
        n = int(rng.integers(10, 60))
        X = rng.random((n, 2))
        Y = np.sin(3 * X[:, :1]) + 0.1 * rng.normal(size=(n, 1))
        data = [(Point.vector(x), Point.vector(y)) for x, y in zip(X, Y)]
        k = int(rng.integers(1, 8))
        nuclei = [Point.vector(c) for c in rng.random((k, 2))]
        protos = [Point.vector(p) for p in rng.normal(size=(20, 1))]
        est = fit(squared_norm(), data, nuclei, protos)
        best = fitted_empirical_risk(squared_norm(), est, data)
        for _ in range(20):
            other = PiecewiseEstimator(est.partition, [protos[i] for i in rng.integers(0, 20, size=k)])
            assert best <= fitted_empirical_risk(squared_norm(), other, data) + 1e-12


def test_histogram_responses():
    h = [Point.histogram(a, 0.5) for a in ([2.0, 0.0], [0.0, 2.0], [1.0, 1.0])]
    data = [(v(0), h[0]), (v(0.1), h[0]), (v(5), h[1])]
    est = fit(total_variation(), data, [v(0), v(5)], h)
    assert est.values == (h[0], h[1])


def test_estimator_json_round_trip():
    est = fit(squared_norm(), TWO_CELL_DATA, [v(0), v(10), v(50)], [v(0), v(1)])
    obj = est.to_json()
    assert set(obj) >= {"nuclei", "values", "fallback_cells"}
    back = PiecewiseEstimator.from_json(obj)
    assert back.values == est.values and back.fallback_cells == est.fallback_cells == (2,)
    for x in (-3.0, 1.0, 5.0, 30.0, 100.0):
        assert predict(back, v(x)) == predict(est, v(x))


def test_estimator_needs_one_value_per_cell():
    with pytest.raises(InvalidParameterError):
        PiecewiseEstimator(part(0, 1), (v(0),))


def test_prototype_set_accepted():
    est = fit(squared_norm(), TWO_CELL_DATA, PrototypeSet((v(0), v(10))), PrototypeSet((v(0), v(1))))
    assert est.values == (v(0), v(1))
