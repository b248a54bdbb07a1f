"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line through ``conftest.record`` before it
asserts, so the summary shows every criterion even when some fail.
Run alone with ``pytest tests/test_acceptance.py -s``.
"""
import math
import os
import time

import numpy as np
import pytest

from conftest import record
from otflat.coefficients import PlaneSearch, alpha_dist, alpha_p
from otflat.generators import GraphSpec, gen_cantor, gen_density_cube, gen_flat, gen_graph, kink_profile
from otflat.geometry import Ball, DyadicCube, cube_bump, standard_bump
from otflat.measures import DiscreteMeasure
from otflat.multiscale import (CellValues, build_tree, carleson_scan, conditional_means,
                               haar_delta, key_lemma_rhs, localization_experiment, per_level_sums)
from otflat.transport import (_grid_shape, brute_force_wasserstein, displacement_stats,
                              knothe_map, wasserstein)

pytestmark = pytest.mark.acceptance

SQUARE = DyadicCube.root((0.0, 0.0), 1.0)
JOBS = min(4, os.cpu_count() or 1)


def rel_change(a, b):
    return abs(b - a) / max(abs(a), 1e-300)


def test_acceptance_01_oracle_equivalence():
    rng = np.random.default_rng(101)
    t0 = time.time()
    worst = 0.0
    for i in range(200):
        p = (1, 2)[i % 2]
        m, n = rng.integers(1, 6, 2)
        d = int(rng.integers(1, 4))
        a = DiscreteMeasure(rng.normal(size=(m, d)), rng.dirichlet(np.ones(m)))
        if i % 4 == 3:
            # equal-size uniform instances take the permutation oracle
            n = m
            a = DiscreteMeasure(a.points, np.full(m, 1.0 / m))
            b = DiscreteMeasure(rng.normal(size=(n, d)), np.full(n, 1.0 / n))
        else:
            b = DiscreteMeasure(rng.normal(size=(n, d)), rng.dirichlet(np.ones(n)))
        got = wasserstein(p, a, b).cost
        ref = brute_force_wasserstein(p, a, b)
        worst = max(worst, abs(got - ref) / max(ref, 1e-300))
    dt = time.time() - t0
    ok = worst <= 1e-9 and dt < 30
    record(1, ok, f"max rel err {worst:.2e}, {dt:.1f}s")
    assert ok


def test_acceptance_02_metric_facts():
    rng = np.random.default_rng(202)
    t0 = time.time()
    mono = tri = sym = 0.0
    for _ in range(1000):
        ms = []
        for _ in range(3):
            k = int(rng.integers(1, 9))
            ms.append(DiscreteMeasure(rng.random((k, 2)), rng.dirichlet(np.ones(k))))
        a, b, c = ms
        w1 = wasserstein(1, a, b).cost
        w2 = wasserstein(2, a, b).cost
        mono = max(mono, w1 - w2)
        for p in (1, 2):
            ab = wasserstein(p, a, b).cost
            ba = wasserstein(p, b, a).cost
            tri = max(tri, wasserstein(p, a, c).cost - ab - wasserstein(p, b, c).cost)
            sym = max(sym, abs(ab - ba))
    dt = time.time() - t0
    ok = mono <= 1e-12 and tri <= 1e-9 and sym <= 1e-9 and dt < 120
    record(2, ok, f"W1-W2 max {mono:.1e}, triangle excess {tri:.1e}, "
                  f"asymmetry {sym:.1e}, {dt:.1f}s")
    assert ok


def _lemma_measure(i, rng):
    kind = i % 3
    if kind == 0:
        s = rng.uniform(0, 0.5)
        return gen_graph(GraphSpec(kink_profile(s, rng.uniform(0.3, 0.7)), s, resolution=256))
    if kind == 1:
        return gen_cantor(int(rng.integers(2, 5)))
    return gen_density_cube((np.zeros(2), 1.0), (0.5, 2.0), 12, int(rng.integers(2 ** 31)))


def test_acceptance_03_projection_below_transport():
    rng = np.random.default_rng(303)
    t0 = time.time()
    worst, viol = -np.inf, 0
    for i in range(100):
        mu = _lemma_measure(i, rng)
        B = Ball(mu.points[rng.integers(len(mu))], rng.uniform(0.05, 0.2))
        rep = alpha_p(2, mu, B, spacing=B.radius / 100)
        L = rep.witness_plane
        phi = standard_bump(B)
        # mass that any coupling with the plane measure must move off L
        lhs = math.sqrt(B.radius ** -3 * float(np.sum(mu.weights * phi(mu.points)
                                                       * L.dist(mu.points) ** 2)))
        gap = lhs - rep.value
        worst = max(worst, gap)
        viol += gap > 1e-9
    dt = time.time() - t0
    ok = viol == 0 and dt < 300
    record(3, ok, f"violations {viol}/100, max(lhs - alpha2) {worst:.2e}, {dt:.1f}s")
    assert ok


def test_acceptance_04_flatness_zero():
    t0 = time.time()
    mu = gen_flat(256)
    B = Ball((0.5, 0.0), 0.1)
    a = alpha_p(2, mu, B, spacing=B.radius / 200).value
    b = alpha_p(2, mu, B, spacing=B.radius / 400).value
    dt = time.time() - t0
    ratio = a / b if b > 0 else math.inf
    ok = a <= 0.05 and ratio >= 1.5 and dt < 60
    record(4, ok, f"alpha2 {a:.5f} (<= 0.05: {a <= 0.05}), halving ratio {ratio:.4f} "
                  f"(>= 1.5: {ratio >= 1.5}), {dt:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def localization_runs():
    t0 = time.time()
    small = localization_experiment(200, seed=5, p=(1, 2))
    big = localization_experiment(400, seed=5, p=(1, 2))
    return small, big, time.time() - t0


def _localization_verdict(num, tag, runs):
    small, big, dt = runs
    s, b = small["results"][tag], big["results"][tag]
    change = rel_change(s["c_loc"], b["c_loc"])
    ok = s["finite"] and b["finite"] and change <= 0.25 and b["c_loc"] <= 100 and dt < 600
    record(num, ok, f"C_loc(p={tag}) {s['c_loc']:.4f} -> {b['c_loc']:.4f} "
                    f"(change {100 * change:.1f}%), all finite {s['finite'] and b['finite']}, "
                    f"{dt:.1f}s shared")
    return ok


def test_acceptance_05_localization_w2(localization_runs):
    assert _localization_verdict(5, "2", localization_runs)


def test_acceptance_06_localization_w1(localization_runs):
    assert _localization_verdict(6, "1", localization_runs)


def _lsq_slope(x, y):
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def test_acceptance_07_carleson_dichotomy():
    t0 = time.time()
    search = PlaneSearch(exact_witness=False)
    graph = gen_graph(GraphSpec(kink_profile(0.3), 0.3, resolution=4096))
    S_graph = {}
    for dep in (4, 5, 6):
        rep = carleson_scan(graph, SQUARE, (0, dep), jobs=JOBS, search=search)
        S_graph[dep] = rep.sums[SQUARE.id]
    growth_graph = S_graph[6] / S_graph[5] - 1
    ok_a = growth_graph <= 0.10

    depths, S_cantor, floor = [], [], []
    for k in (4, 5, 6):
        # deepest level whose cubes still hold several atoms
        dep = 2 * k - 2
        rep = carleson_scan(gen_cantor(k), SQUARE, (0, dep), jobs=JOBS, search=search)
        depths.append(dep)
        S_cantor.append(rep.sums[SQUARE.id])
        floor.append(sum(per_level_sums(rep, "beta2").values()))
    slope_S = _lsq_slope(depths, S_cantor)
    slope_floor = _lsq_slope(depths, floor)
    grow = [S_cantor[i + 1] / S_cantor[i] - 1 for i in range(2)]
    ok_slope = slope_S >= 0.5 * slope_floor and slope_floor > 0
    ok_grow = all(g >= 0.25 for g in grow)
    dt = time.time() - t0
    ok = ok_a and ok_slope and ok_grow and dt < 900
    record(7, ok, f"(a) graph S {S_graph[4]:.4f}/{S_graph[5]:.4f}/{S_graph[6]:.4f}, "
                  f"5->6 {100 * growth_graph:+.1f}% ({ok_a}); "
                  f"(b) cantor S {'/'.join(f'{s:.3f}' for s in S_cantor)}, slope {slope_S:.3f} "
                  f"vs floor slope {slope_floor:.3f} ({ok_slope}), growth "
                  f"{'/'.join(f'{100 * g:.1f}%' for g in grow)} ({ok_grow}); {dt:.0f}s, jobs {JOBS}")
    assert ok


def _knothe_trial(rng, i):
    d = 1 + i % 2
    res = 64 if d == 1 else 32
    R = DyadicCube.root((0.0,) * d, 1.0)
    lev = int(rng.integers(0, 3))
    Q = DyadicCube(lev, tuple(rng.integers(0, 2 ** lev, d)), R.origin, 1.0)
    n = res >> lev
    axes = [Q.corner_point[j] + (np.arange(n) + 0.5) * Q.side / n for j in range(d)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    # source density is a bump of the enclosing cube R, restricted to Q
    w = cube_bump(R)(X) * (Q.side / n) ** d
    s = DiscreteMeasure(X, w, d)
    u = (X - Q.corner_point) / Q.side
    family = int(rng.integers(3))
    if family == 0:
        hv = rng.uniform(-1, 1, len(X))
    elif family == 1:
        hv = np.where(u[:, rng.integers(d)] < rng.uniform(0.2, 0.8), 1.0, -1.0)
    else:
        k, ph = rng.integers(1, 4, d), rng.uniform(0, 2 * np.pi, d)
        hv = np.prod(np.sin(np.pi * k * u + ph), axis=1)
    hv = hv - (hv @ w) / w.sum()
    hv *= rng.uniform(0.01, 0.25) / np.abs(hv).max()
    U = knothe_map((Q.corner_point, Q.side), s, lambda P: hv)
    _, idx = _grid_shape(X, Q.corner_point, Q.side)
    got = U.pushforward_cells()[tuple(idx.T)]
    err = float(np.max(np.abs(got - w * (1 + hv)) / (w * (1 + hv))))
    return err, displacement_stats(U, s)["max"] / (Q.side * np.abs(hv).max())


def _knothe_constant(n, seed):
    rng = np.random.default_rng(seed)
    errs, ratios = zip(*(_knothe_trial(rng, i) for i in range(n)))
    return max(errs), max(ratios)


def test_acceptance_08_knothe():
    t0 = time.time()
    err100, ck100 = _knothe_constant(100, 808)
    err200, ck200 = _knothe_constant(200, 808)
    stable = rel_change(ck100, ck200) <= 0.20
    eps = 0.1
    X = ((np.arange(64) + 0.5) / 64)[:, None]
    s = DiscreteMeasure(X, np.full(64, 1 / 64), 1)
    U = knothe_map((np.zeros(1), 1.0), s, lambda P: np.where(P[:, 0] < 0.5, eps, -eps))
    example = U.max_displacement()
    ok_ex = abs(example - 0.04545) <= 1e-6
    dt = time.time() - t0
    ok = max(err100, err200) <= 1e-9 and stable and ok_ex and dt < 180
    record(8, ok, f"marginal rel err {max(err100, err200):.1e}, C_K {ck100:.4f} -> {ck200:.4f} "
                  f"(stable {stable}), closed-form example max displacement {example:.6f} "
                  f"vs 0.04545 ({ok_ex}), {dt:.1f}s")
    assert ok


def _all_cubes(root, depth):
    out, frontier = [], [root]
    for _ in range(depth):
        out.extend(frontier)
        frontier = [c for Q in frontier for c in Q.children()]
    return out


def test_acceptance_09_haar():
    t0 = time.time()
    rng = np.random.default_rng(909)
    ortho_max = energy_err = 0.0
    recon_exact = True
    for d in (1, 2):
        root = DyadicCube.root((0.0,) * d, 1.0)
        for k in range(1, 7):
            shape = (2 ** k,) * d
            # integer multiples of 4**k keep every cube mean an exact integer
            g = CellValues(root, k, rng.integers(-8, 9, shape).astype(float) * 2.0 ** (d * k))
            cubes = _all_cubes(root, k)
            M = np.stack([haar_delta(g, Q).values.ravel() for Q in cubes])
            gram = M @ M.T
            off = gram - np.diag(np.diag(gram))
            ortho_max = max(ortho_max, float(np.abs(off).max()))
            for j in range(k + 1):
                part = np.full(shape, g.mean()) + M[[Q.level < j for Q in cubes]].sum(axis=0).reshape(shape)
                recon_exact &= bool(np.array_equal(part, conditional_means(g, j).values))
            f = CellValues(root, k, rng.normal(size=shape))
            energy = sum(haar_delta(f, Q).norm_sq() for Q in cubes) + f.mean() ** 2
            energy_err = max(energy_err, abs(energy - f.norm_sq()) / f.norm_sq())
    dt = time.time() - t0
    ok = ortho_max == 0.0 and energy_err <= 1e-12 and recon_exact and dt < 30
    record(9, ok, f"max off-diagonal inner product {ortho_max}, energy rel err {energy_err:.1e}, "
                  f"reconstruction exact {recon_exact}, {dt:.1f}s")
    assert ok


def _key_lemma_trial(rng, res=16):
    R = (np.zeros(2), 1.0)
    base = gen_density_cube(R, (1.0, 1.0), res, 0)
    sigma = DiscreteMeasure(base.points, base.weights * cube_bump(R)(base.points))
    f = np.exp(rng.uniform(-math.log(2), math.log(2), len(sigma)))
    if rng.random() < 0.5:
        # deplete a random quadrant-sized patch so the stopping rule fires
        c = rng.random(2)
        f[np.all(np.abs(sigma.points - c) < 0.2, axis=1)] *= 0.05
    tw = sigma.weights * f
    tau = DiscreteMeasure(sigma.points, tw * sigma.weights.sum() / tw.sum())
    delta = 0.25

    def stop(Q):
        inside = Q.contains(sigma.points)
        s, t = sigma.weights[inside].sum(), tau.weights[inside].sum()
        return not (delta * s < t < s / delta)

    tree = build_tree(SQUARE, int(rng.integers(1, 4)), stop)
    rhs = key_lemma_rhs(sigma, tau, tree, delta=delta)
    return wasserstein(2, sigma, tau).cost ** 2 / rhs


def test_acceptance_10_key_lemma():
    t0 = time.time()
    rng = np.random.default_rng(1010)
    r100 = [_key_lemma_trial(rng) for _ in range(100)]
    rng = np.random.default_rng(1010)
    r200 = [_key_lemma_trial(rng) for _ in range(200)]
    c100, c200 = max(r100), max(r200)
    stable = rel_change(c100, c200) <= 0.20
    finite = bool(np.all(np.isfinite(r200)))
    # degenerate case, no stopping cubes
    R = (np.zeros(2), 1.0)
    base = gen_density_cube(R, (1.0, 1.0), 16, 0)
    sigma = DiscreteMeasure(base.points, base.weights * cube_bump(R)(base.points))
    full = build_tree(SQUARE, 3, lambda Q: False)
    bare = type(full)(SQUARE, full.members, frozenset())
    zero_l = wasserstein(2, sigma, sigma).cost
    zero_r = key_lemma_rhs(sigma, sigma, bare)
    dt = time.time() - t0
    ok = stable and finite and zero_l == 0.0 and zero_r == 0.0 and dt < 300
    record(10, ok, f"C_KL {c100:.4f} -> {c200:.4f} (stable {stable}), degenerate sides "
                   f"{zero_l}/{zero_r}, {dt:.1f}s")
    assert ok


def test_acceptance_11_distance_alpha_comparability():
    t0 = time.time()
    rng = np.random.default_rng(11)
    viol, worst, reverse = 0, 0.0, 0.0
    for i in range(50):
        if i % 3 == 2:
            mu = gen_cantor(4)
            cand = np.arange(len(mu))
        else:
            s, at = rng.uniform(0, 0.5), rng.uniform(0.3, 0.7)
            mu = gen_graph(GraphSpec(kink_profile(s, at), s, resolution=256))
            cand = np.nonzero((mu.points[:, 0] > 0.35) & (mu.points[:, 0] < 0.65))[0]
        B = Ball(mu.points[rng.choice(cand)], rng.uniform(0.03, 0.06))
        sp = B.radius / 50
        a1 = alpha_p(1, mu, B.scaled(2.0), spacing=sp)
        ad = alpha_dist(mu, B, spacing=sp, seed_planes=[a1.witness_plane])
        viol += ad.value > a1.value + 2 * sp
        worst = max(worst, ad.value / max(a1.value, 1e-300))
        if ad.value > 0:
            reverse = max(reverse, a1.value / ad.value)
    dt = time.time() - t0
    ok = viol == 0 and dt < 300
    record(11, ok, f"violations {viol}/50, max alpha_dist/alpha1(2B) {worst:.3f}, "
                   f"reverse constant {reverse:.3f}, {dt:.1f}s")
    assert ok
