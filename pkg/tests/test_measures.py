import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from otflat.errors import NegativeWeight
from otflat.generators import gen_cantor
from otflat.geometry import DyadicCube
from otflat.measures import (DiscreteMeasure, ScalarField, load_measure, mean_over_cube,
                             push_forward, restrict, reweight, save_measure, total_mass)


def line(xs, ws=None):
    xs = np.asarray(xs, dtype=float).reshape(-1, 1)
    ws = np.ones(len(xs)) if ws is None else ws
    return DiscreteMeasure(xs, ws, 1)


def test_total_mass_examples():
    assert total_mass(line([0, 1], [0.25, 0.75])) == 1.0
    assert total_mass(DiscreteMeasure.empty(2)) == 0.0
    assert total_mass(gen_cantor(3)) == pytest.approx(1.0, abs=1e-15)
    assert len(gen_cantor(3)) == 64


def test_constructor_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure([[0.0, 1.0]], [1.0, 2.0])
    with pytest.raises(NegativeWeight):
        DiscreteMeasure([[0.0]], [-1.0])
    with pytest.raises(ValueError):
        DiscreteMeasure([[np.nan]], [1.0])
    m = line([0, 1])
    with pytest.raises(ValueError):
        m.weights[0] = 3.0


def test_reweight_examples():
    m = line([0, 3])
    assert np.array_equal(reweight(m, ScalarField.constant(1.0)).weights, m.weights)
    assert reweight(m, ScalarField.constant(0.0)).is_empty
    ind = ScalarField(lambda x: ((x[:, 0] >= -1) & (x[:, 0] <= 1)).astype(float))
    r = reweight(m, ind)
    assert r.points.tolist() == [[0.0]] and r.weights.tolist() == [1.0]
    with pytest.raises(NegativeWeight):
        reweight(m, ScalarField.constant(-1.0))


def test_restrict_examples():
    m = line([0, 1, 2, 3], np.full(4, 0.25))
    assert len(restrict(m, lambda x: np.ones(len(x), bool))) == 4
    assert restrict(m, lambda x: np.zeros(len(x), bool)).is_empty
    r = restrict(m, lambda x: (x[:, 0] >= 1) & (x[:, 0] <= 2))
    assert r.points[:, 0].tolist() == [1.0, 2.0] and r.weights.tolist() == [0.25, 0.25]


def test_push_forward_examples():
    m = DiscreteMeasure([[0.0, 0.0], [1.0, 0.0]], [0.3, 0.7])
    shifted = push_forward(m, lambda x: x + np.array([1.0, 0.0]))
    assert shifted.points.tolist() == [[1.0, 0.0], [2.0, 0.0]]
    assert shifted.weights.tolist() == [0.3, 0.7]
    origin = push_forward(m, lambda x: np.zeros_like(x), merge=True)
    assert len(origin) == 1 and origin.weights[0] == pytest.approx(1.0)
    same = push_forward(m, lambda x: x, merge=True)
    assert total_mass(same) == pytest.approx(1.0)


def test_mean_over_cube_examples():
    m = DiscreteMeasure([[0.5, 0.5]], [1.0])
    assert mean_over_cube(m, DyadicCube.root((0.0, 0.0), 1.0)) == 1.0
    assert mean_over_cube(m, (np.zeros(2), 2.0)) == 0.25
    assert mean_over_cube(m, (np.array([3.0, 3.0]), 1.0)) == 0.0


def test_cube_is_half_open():
    m = DiscreteMeasure([[0.0, 0.0], [1.0, 0.5]], [1.0, 1.0])
    assert mean_over_cube(m, (np.zeros(2), 1.0)) == 1.0


def test_csv_and_json_roundtrip(tmp_path):
    m = gen_cantor(2)
    for name in ("m.csv", "m.json"):
        p = str(tmp_path / name)
        save_measure(m, p)
        back = load_measure(p)
        assert np.array_equal(back.points, m.points)
        assert np.array_equal(back.weights, m.weights)
    assert m.to_csv().splitlines()[0] == "x0,x1,w"


_pts = arrays(np.float64, st.tuples(st.integers(1, 12), st.just(2)),
              elements=st.floats(-5, 5, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(_pts, st.floats(0.0, 3.0), st.floats(-2, 2))
def test_mass_identities(P, c, cut):
    w = np.linspace(0.1, 1.0, len(P))
    m = DiscreteMeasure(P, w)
    f = ScalarField(lambda x: c * (1 + np.abs(x[:, 0])))
    expect = float(np.sum(w * f(P)))
    assert total_mass(reweight(m, f)) == pytest.approx(expect, rel=1e-12, abs=1e-300)
    T = push_forward(m, lambda x: 2.0 * x[:, ::-1] + 1.0)
    assert total_mass(T) == pytest.approx(total_mass(m), rel=1e-12)
    left = restrict(m, lambda x: x[:, 0] < cut)
    right = restrict(m, lambda x: ~(x[:, 0] < cut))
    assert total_mass(left) + total_mass(right) == pytest.approx(total_mass(m), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.floats(0.1, 4.0))
def test_mean_scales_with_volume(d, side):
    m = DiscreteMeasure(np.full((1, d), 0.05 * side), [1.0])
    a = mean_over_cube(m, (np.zeros(d), side))
    b = mean_over_cube(m, (np.zeros(d), 2 * side))
    assert b == pytest.approx(a / 2 ** d, rel=1e-12)
