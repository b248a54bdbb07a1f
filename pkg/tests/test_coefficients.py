import json
import math

import numpy as np
import pytest

from otflat.coefficients import (PlaneSearch, alpha_dist, alpha_p, alpha_p_at_plane, b_beta_inf,
                                 beta_inf, beta_p, c_b_l, dist_3b, dist_3b_lp, localize)
from otflat.errors import EmptyBall, ZeroMass
from otflat.generators import GraphSpec, gen_cantor, gen_flat, gen_graph, kink_profile
from otflat.geometry import AffinePlane, Ball, sample_plane_measure, standard_bump
from otflat.measures import DiscreteMeasure

X_AXIS = AffinePlane(np.zeros(2), np.array([[1.0, 0.0]]))


def dilate(m, lam, shift):
    return DiscreteMeasure(m.points * lam + shift, m.weights * lam, m.dim)


def two_lines(sep, res=400):
    x = (np.arange(res) + 0.5) / res * 2 - 1
    P = np.vstack([np.c_[x, np.full(res, sep / 2)], np.c_[x, np.full(res, -sep / 2)]])
    return DiscreteMeasure(P, np.full(2 * res, 1.0 / res))


def test_c_b_l_examples():
    B = Ball((0.0, 0.0), 0.2)
    lat = sample_plane_measure(X_AXIS, B, 0.002)
    assert c_b_l(lat, B, X_AXIS, 0.002) == pytest.approx(1.0, rel=1e-12)
    assert c_b_l(lat.scaled(2.0), B, X_AXIS, 0.002) == pytest.approx(2.0, rel=1e-12)
    far = DiscreteMeasure(lat.points + [0.0, 0.7], lat.weights)
    with pytest.raises(ZeroMass):
        c_b_l(far, B, X_AXIS, 0.002)


def test_alpha_flat_is_small_and_empty_ball_raises():
    mu = gen_flat(256)
    B = Ball((0.5, 0.0), 0.1)
    rep = alpha_p(2, mu, B)
    assert 0 <= rep.value <= 0.05
    assert rep.witness_plane.dist(np.array([B.center]))[0] < B.radius
    with pytest.raises(EmptyBall):
        alpha_p(2, mu, Ball((0.5, 1.0), 0.1))


def test_alpha_scale_invariance():
    mu = gen_graph(GraphSpec(kink_profile(0.3), 0.3, resolution=256))
    B = Ball((0.5, 0.0), 0.1)
    lam, shift = 2.0, np.array([0.25, -0.5])
    for p in (1, 2):
        a = alpha_p(p, mu, B, spacing=B.radius / 50).value
        b = alpha_p(p, dilate(mu, lam, shift), Ball(B.center * lam + shift, B.radius * lam),
                    spacing=lam * B.radius / 50).value
        assert b == pytest.approx(a, rel=1e-9)


def test_alpha_two_parallel_lines_increasing():
    r = 0.1
    B = Ball((0.0, 0.0), r)
    vals = [alpha_p(2, two_lines(s * r), B).value for s in (0.1, 0.2, 0.4)]
    assert vals[0] > 0
    assert vals[0] < vals[1] < vals[2]


def test_beta_examples():
    B = Ball((0.5, 0.5), 1.0)
    m = DiscreteMeasure(np.c_[np.linspace(0, 1, 7), 2 * np.linspace(0, 1, 7)], np.ones(7))
    assert beta_p(2, m, B).value == pytest.approx(0.0, abs=1e-12)
    assert beta_inf(m, B).value == pytest.approx(0.0, abs=1e-12)
    sq = DiscreteMeasure([[0, 0], [0, 1], [1, 0], [1, 1]], np.ones(4))
    # oracle: 1 degree grid over lines through the centroid
    best = min(sum((abs(-math.sin(t) * (x - 0.5) + math.cos(t) * (y - 0.5))) ** 2
                   for x, y in sq.points) for t in np.radians(np.arange(180)))
    assert beta_p(2, sq, B).value == pytest.approx(math.sqrt(best), rel=1e-9)
    assert beta_p(2, sq, B).value == pytest.approx(1.0, rel=1e-12)


def test_beta_p_holder_bound():
    rng = np.random.default_rng(2)
    for p in (1, 1.5, 2):
        m = DiscreteMeasure(rng.random((40, 2)), rng.random(40))
        B = Ball((0.5, 0.5), 0.4)
        rep = beta_p(p, m, B)
        L = rep.witness_plane
        inside = np.linalg.norm(m.points - B.center, axis=1) <= 2 * B.radius
        dmax = L.dist(m.points[inside]).max()
        mass = m.weights[inside].sum()
        assert rep.value <= dmax / B.radius * (mass / B.radius) ** (1 / p) + 1e-12


def test_beta_inf_outlier_and_range():
    r, h = 0.5, 0.05
    x = np.linspace(-0.9, 0.9, 37)
    P = np.vstack([np.c_[x, np.zeros_like(x)], [[0.1, h]]])
    m = DiscreteMeasure(P, np.ones(len(P)))
    B = Ball((0.0, 0.0), r)
    # the strip of width h is optimal: its midline puts everything within h/2
    assert beta_inf(m, B).value == pytest.approx(h / (2 * r), rel=1e-6)
    rng = np.random.default_rng(4)
    for _ in range(5):
        q = DiscreteMeasure(rng.normal(size=(20, 2)) * 0.3, np.ones(20))
        v = beta_inf(q, B).value
        assert 0 <= v <= 3


def test_b_beta_inf_examples():
    B = Ball((0.0, 0.0), 0.25)
    x = np.linspace(-1, 1, 2001)
    dense = DiscreteMeasure(np.c_[x, np.zeros_like(x)], np.full(x.size, 1e-3))
    assert b_beta_inf(dense, B).value <= 0.01
    half = dense.subset(x >= 0)
    assert 0.45 <= b_beta_inf(half, B).value <= 1.05
    single = DiscreteMeasure([[0.0, 0.0]], [1.0])
    assert b_beta_inf(single, B).value == pytest.approx(1.0, abs=0.05)


def test_dist_3b_matches_lp_oracle():
    rng = np.random.default_rng(6)
    B = Ball((0.0, 0.0), 0.3)
    for _ in range(15):
        mu = DiscreteMeasure(rng.uniform(-1, 1, (5, 2)), rng.random(5))
        nu = DiscreteMeasure(rng.uniform(-1, 1, (4, 2)), rng.random(4))
        assert dist_3b(mu, nu, B) == pytest.approx(dist_3b_lp(mu, nu, B), rel=1e-9, abs=1e-12)


def test_dist_3b_two_atoms_is_transport_cost():
    # both atoms deep inside 3B and close together: moving mass beats the boundary
    B = Ball((0.0, 0.0), 1.0)
    a = DiscreteMeasure([[0.0, 0.0]], [1.0])
    b = DiscreteMeasure([[0.3, 0.4]], [1.0])
    assert dist_3b(a, b, B) == pytest.approx(0.5)
    assert dist_3b_lp(a, b, B) == pytest.approx(0.5)


def test_alpha_dist_zero_on_flat_lattice():
    B = Ball((0.1, 0.0), 0.2)
    sp = B.radius / 50
    lat = sample_plane_measure(X_AXIS, B, sp).scaled(1.7)
    rep = alpha_dist(lat, B, spacing=sp)
    assert rep.value <= 1e-9


def test_alpha_dist_bounded_by_four_alpha1_of_double():
    # exact consequence of phi_2B = 1 on 3B with shared lattices and plane
    mu = gen_graph(GraphSpec(kink_profile(0.4, 0.47), 0.4, resolution=256))
    for c in (0.4, 0.5, 0.55):
        B = Ball((c, mu.points[int(c * 256), 1]), 0.05)
        sp = B.radius / 50
        a1 = alpha_p(1, mu, B.scaled(2.0), spacing=sp)
        ad = alpha_dist(mu, B, spacing=sp, seed_planes=[a1.witness_plane])
        assert ad.value <= 4 * a1.value + 1e-9


def test_lemma_projection_inequality_same_plane():
    mu = gen_cantor(3)
    B = Ball((0.3, 0.3), 0.15)
    rep = alpha_p(2, mu, B)
    L = rep.witness_plane
    phi = standard_bump(B)
    lhs = math.sqrt(B.radius ** -3 * float(np.sum(mu.weights * phi(mu.points)
                                                   * L.dist(mu.points) ** 2)))
    assert lhs <= rep.value + 1e-9


def test_p_monotonicity_normalized():
    mu = gen_graph(GraphSpec(kink_profile(0.5), 0.5, resolution=128))
    B = Ball((0.5, 0.0), 0.1)
    for L in (X_AXIS, AffinePlane.line2d(0.2, 0.0), AffinePlane.line2d(-0.3, 0.05)):
        w1 = alpha_p_at_plane(1, mu, B, L, B.radius / 40, normalized=True)
        w2 = alpha_p_at_plane(2, mu, B, L, B.radius / 40, normalized=True)
        assert w1 <= w2 + 1e-12


def test_ball_monotonicity_ratio_recorded():
    mu = gen_graph(GraphSpec(kink_profile(0.3), 0.3, resolution=512))
    search = PlaneSearch(exact_witness=False)
    ratios = []
    for cx in (0.3, 0.45, 0.5, 0.6):
        c = mu.points[int(cx * 512)]
        big = Ball(c, 0.12)
        small = Ball(c, 0.035)
        ratios.append(alpha_p(2, mu, small, search=search).value
                      / alpha_p(2, mu, big, search=search).value)
    assert all(np.isfinite(ratios))
    # regression value from the recorded suite constant
    assert max(ratios) <= 2.0


def test_scale_invariance_all_kinds():
    mu = gen_cantor(3)
    B = Ball((0.3, 0.3), 0.12)
    lam, shift = 2.0, np.array([1.0, -0.5])
    mu2 = dilate(mu, lam, shift)
    B2 = Ball(B.center * lam + shift, B.radius * lam)
    # the n = 1 normalisation r**-n compensates a length-scaled mass
    pairs = [
        (beta_p(2, mu, B).value, beta_p(2, mu2, B2).value),
        (beta_inf(mu, B).value, beta_inf(mu2, B2).value),
        (b_beta_inf(mu, B).value, b_beta_inf(mu2, B2).value),
        (alpha_dist(mu, B, spacing=B.radius / 40).value,
         alpha_dist(mu2, B2, spacing=B2.radius / 40).value),
    ]
    for a, b in pairs:
        assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


def test_report_json_keys():
    rep = alpha_p(2, gen_flat(64), Ball((0.5, 0.0), 0.2))
    obj = json.loads(rep.to_json())
    for key in ("kind", "p", "center", "radius", "value", "plane", "c_bl", "spacing"):
        assert key in obj
    assert obj["kind"] == "alpha_p" and obj["spacing"] == pytest.approx(0.2 / 200)


def test_localize_uses_bump():
    mu = gen_flat(64)
    B = Ball((0.5, 0.0), 0.1)
    loc = localize(mu, B)
    assert np.all(np.linalg.norm(loc.points - B.center, axis=1) < 3 * B.radius)
