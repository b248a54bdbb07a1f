"""Flatness coefficients of discrete measures.

All coefficients compare a measure, localised to a ball ``B`` of radius
``r``, with flat measures on affine n-planes.  The infimum over planes is
replaced by a finite search (weighted PCA seed plus refinement); every
report carries the witness plane so results can be re-evaluated.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.linalg import expm
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial import QhullError

from . import kernels
from .errors import EmptyBall, NoIntersection, TooLarge, ZeroMass
from .geometry import (AffinePlane, Ball, _bump_profile, fit_plane_pca,
                       sample_plane_measure, standard_bump, weighted_pca)
from .measures import DiscreteMeasure, reweight, total_mass
from .transport import MAX_ATOMS, wasserstein

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PlaneSearch:
    """Finite search standing in for the infimum over planes.

    For lines in the plane an angle-offset grid is scanned and the best
    cell is polished by golden-section search; other dimensions use
    Nelder-Mead over a rotation-plus-offset chart seeded at PCA.
    """

    n_angles: int = 180
    n_offsets: int = 21
    offset_span: float = 0.5      # grid offsets cover +-span*r around the seed
    polish_rounds: int = 3
    golden_iters: int = 40
    nm_maxfev: int = 400
    exact_witness: bool = True    # re-solve the witness with the network simplex
    seeds: tuple = ()             # extra candidate planes


DEFAULT_SEARCH = PlaneSearch()


@dataclass
class CoefficientReport:
    kind: str
    ball: Ball
    value: float
    witness_plane: Optional[AffinePlane]
    p: Optional[float] = None
    n: int = 1
    normalization: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "p": self.p, "n": self.n,
               "center": self.ball.center.tolist(), "radius": self.ball.radius,
               "value": self.value,
               "plane": None if self.witness_plane is None else self.witness_plane.to_dict(),
               "c_bl": self.normalization}
        if "spacing" in self.diagnostics:
            out["spacing"] = self.diagnostics["spacing"]
        out["diagnostics"] = {k: v for k, v in self.diagnostics.items() if k != "spacing"}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def default_spacing(r: float, n: int) -> float:
    # r/64 per axis for planes gives ~1e5 nodes in 3B; r/8 keeps n=2 tractable
    return r / 200.0 if n == 1 else r / 8.0


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def localize(mu: DiscreteMeasure, B: Ball) -> DiscreteMeasure:
    """``phi_B mu`` with zero-weight atoms removed."""
    return reweight(mu, standard_bump(B))


def plane_target(L: AffinePlane, B: Ball, spacing: float) -> DiscreteMeasure:
    """``phi_B`` times the lattice surrogate of the flat measure on ``L``."""
    return reweight(sample_plane_measure(L, B, spacing), standard_bump(B))


def _require_ball_hit(mu: DiscreteMeasure, B: Ball, k: float = 1.0):
    if mu.is_empty or not np.any(B.scaled(k).contains(mu.points)):
        raise EmptyBall(f"EmptyBall: no support point in {k:g}B")


def c_b_l(mu: DiscreteMeasure, B: Ball, L: AffinePlane, spacing: float) -> float:
    """Ratio of the bump integrals of ``mu`` and of the flat measure on ``L``.

    Raises
    ------
    ZeroMass
        If either integral vanishes.
    """
    phi = standard_bump(B)
    num = float(mu.weights @ phi(mu.points)) if not mu.is_empty else 0.0
    try:
        Lh = sample_plane_measure(L, B, spacing)
    except NoIntersection:
        raise ZeroMass("ZeroMass: plane misses the support of the bump") from None
    den = float(Lh.weights @ phi(Lh.points)) if not Lh.is_empty else 0.0
    if num <= 0 or den <= 0:
        raise ZeroMass("ZeroMass: vanishing bump integral")
    return num / den


def _line_through(center, theta, delta) -> AffinePlane:
    e = np.array([math.cos(theta), math.sin(theta)])
    nu = np.array([-e[1], e[0]])
    return AffinePlane(np.asarray(center) + delta * nu, e[None, :])


def _line_params(L: AffinePlane, center):
    e = L.frame[0]
    theta = math.atan2(e[1], e[0]) % math.pi
    e = np.array([math.cos(theta), math.sin(theta)])
    nu = np.array([-e[1], e[0]])
    return theta, float(nu @ (L.base - np.asarray(center)))


def _golden(f, lo, hi, iters):
    """Golden-section minimisation on ``[lo, hi]``; returns (x, f(x))."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


class _LineEngine:
    """Fast evaluation of line transport costs for n = 1.

    For a line L and a target carried by L, every coupling splits as
    ``|x - y|^2 = dist(x, L)^2 + |proj(x) - y|^2``, so ``W_2^2`` is the
    perpendicular energy plus a 1-D quantile cost.  For other exponents
    both pieces are lower bounds.
    """

    def __init__(self, phimu: DiscreteMeasure, B: Ball, spacing: float, p: float):
        self.B = B
        self.r = B.radius
        self.h = spacing
        self.p = float(p)
        self.X = phimu.points - B.center
        self.w = phimu.weights
        self.M = float(self.w.sum())
        K = int(math.ceil(3.0 * self.r / spacing)) + 1
        self.pos = (np.arange(-K, K) + 0.5) * spacing

    def target_rows(self, deltas):
        deltas = np.atleast_1d(deltas)
        rad = np.sqrt(self.pos[None, :] ** 2 + deltas[:, None] ** 2)
        phi = np.where(rad < 3.0 * self.r, _bump_profile(rad / self.r), 0.0)
        tw = phi * self.h
        tot = tw.sum(axis=1)
        c = np.where(tot > 0, self.M / np.where(tot > 0, tot, 1.0), np.inf)
        return tw * c[:, None], c

    def evaluate(self, theta, deltas):
        """Return (perp_p, line_p, c): p-th power costs per offset."""
        d = self.X.shape[1]
        e = np.zeros(d)
        nu = np.zeros(d)
        e[0], e[1] = math.cos(theta), math.sin(theta)
        nu[0], nu[1] = -e[1], e[0]
        t = self.X @ e
        order = np.argsort(t, kind="stable")
        xs = np.ascontiguousarray(t[order])
        ws = np.ascontiguousarray(self.w[order])
        a = self.X @ nu
        rest = self.X - np.outer(t, e) - np.outer(a, nu)
        rest2 = np.einsum("ij,ij->i", rest, rest)
        deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
        perp2 = (a[None, :] - deltas[:, None]) ** 2 + rest2[None, :]
        if self.p == 2:
            perp = perp2 @ self.w
        else:
            perp = np.sqrt(perp2) ** self.p @ self.w
        rows, c = self.target_rows(deltas)
        line = kernels.wasserstein_1d_batch(xs, ws, np.ascontiguousarray(self.pos),
                                            np.ascontiguousarray(rows), self.p)
        return perp, np.asarray(line), c


# ---------------------------------------------------------------------------
# alpha_p
# ---------------------------------------------------------------------------

def _alpha_exact_at(p, phimu, B, L, spacing):
    """Exact ``W_p(phi mu, c phi L)`` by the network simplex; returns (W, c)."""
    tgt = plane_target(L, B, spacing)
    if tgt.is_empty:
        raise ZeroMass("ZeroMass: empty plane target")
    c = total_mass(phimu) / total_mass(tgt)
    if len(phimu) > MAX_ATOMS or len(tgt) > MAX_ATOMS:
        if p == 2 and L.n == 1:
            return _alpha_identity_at(phimu, B, L, spacing), c
        raise TooLarge("TooLarge: localized instance exceeds the exact solver cap")
    return wasserstein(p, phimu, tgt.scaled(c)).cost, c


def _alpha_identity_at(phimu, B, L, spacing):
    """``W_2`` to a line target through the projection identity."""
    tgt = plane_target(L, B, spacing)
    c = total_mass(phimu) / total_mass(tgt)
    perp = float(phimu.weights @ L.dist(phimu.points) ** 2)
    s = L.coords(phimu.points)[:, 0]
    y = L.coords(tgt.points)[:, 0]
    from .transport import wasserstein_1d
    w1 = wasserstein_1d(2.0, s, phimu.weights, y, tgt.weights * c) ** 2
    return math.sqrt(perp + w1)


def _lower_bound(p, perp, line):
    """Bound on the p-th power cost from the perpendicular and 1-D parts.

    Exact for ``p = 2``.  For ``p = 1``, ``|x - y| >= cos(t) dist(x, L) +
    sin(t) |proj(x) - y|`` for every t, which gives the Euclidean norm of
    the two parts.  Otherwise each part alone is a bound.
    """
    if p == 2:
        return perp + line
    if p == 1:
        return np.hypot(perp, line)
    return np.maximum(perp, line)


def _search_line_alpha(p, phimu, B, spacing, search: PlaneSearch):
    """Grid plus golden-section search over lines meeting ``B`` in the plane."""
    eng = _LineEngine(phimu, B, spacing, p)
    r = B.radius
    lim = r * (1.0 - 1e-9)
    seed_planes = []
    try:
        seed_planes.append(fit_plane_pca(phimu, 1))
    except Exception:
        pass
    seed_planes.extend(search.seeds)
    pca_c = weighted_pca(phimu.points, phimu.weights)[0]

    def params_of(L):
        return _line_params(L, B.center)

    evals = 0
    exact_cache = {}

    def exact_value(theta, delta):
        nonlocal evals
        key = (round(theta, 14), round(delta / r, 14))
        if key not in exact_cache:
            L = _line_through(B.center, theta, delta)
            exact_cache[key] = _alpha_exact_at(p, phimu, B, L, spacing)[0]
            evals += 1
        return exact_cache[key]

    thetas = np.arange(search.n_angles) * math.pi / search.n_angles
    cand_t, cand_d, cand_lb = [], [], []
    for th in np.concatenate([thetas, [params_of(L)[0] for L in seed_planes]]):
        e = np.array([math.cos(th), math.sin(th)])
        nu = np.array([-e[1], e[0]])
        d0 = float(nu @ (pca_c - B.center))
        ds = d0 + np.linspace(-search.offset_span, search.offset_span, search.n_offsets) * r
        ds = np.unique(np.clip(ds, -lim, lim))
        perp, line, _ = eng.evaluate(th, ds)
        evals += ds.size
        lb = _lower_bound(p, perp, line)
        cand_t.append(np.full(ds.size, th))
        cand_d.append(ds)
        cand_lb.append(lb)
    for L in seed_planes:
        th, dl = params_of(L)
        dl = float(np.clip(dl, -lim, lim))
        perp, line, _ = eng.evaluate(th, [dl])
        cand_t.append(np.array([th]))
        cand_d.append(np.array([dl]))
        cand_lb.append(_lower_bound(p, perp, line))
    T = np.concatenate(cand_t)
    D = np.concatenate(cand_d)
    LB = np.concatenate(cand_lb)

    if p == 2:
        k = int(np.argmin(LB))
        best_t, best_d, best_f = float(T[k]), float(D[k]), float(LB[k])

        def f2(th, dl):
            nonlocal evals
            evals += 1
            pr, ln, _ = eng.evaluate(th, [dl])
            return float(pr[0] + ln[0])
    else:
        # branch and bound: exact solves in lower-bound order
        order = np.argsort(LB, kind="stable")
        best_f, best_t, best_d = np.inf, None, None
        for k in order:
            if LB[k] >= best_f:
                break
            v = exact_value(float(T[k]), float(D[k])) ** p
            if v < best_f:
                best_f, best_t, best_d = v, float(T[k]), float(D[k])

        def f2(th, dl):
            return exact_value(th, dl) ** p

    dth = math.pi / search.n_angles
    dd = search.offset_span * r * 2.0 / max(search.n_offsets - 1, 1)
    rounds = search.polish_rounds if p == 2 else 1
    iters = search.golden_iters if p == 2 else 12
    for _ in range(rounds):
        th_new, f_new = _golden(lambda t: f2(t, best_d), best_t - dth, best_t + dth, iters)
        if f_new < best_f:
            best_t, best_f = th_new, f_new
        lo, hi = max(best_d - dd, -lim), min(best_d + dd, lim)
        d_new, f_new = _golden(lambda s: f2(best_t, s), lo, hi, iters)
        if f_new < best_f:
            best_d, best_f = d_new, f_new
        dth *= 0.25
        dd *= 0.25
    L = _line_through(B.center, best_t, best_d)
    return L, best_f ** (1.0 / p), evals


def _chart(L0: AffinePlane, center, r, lim_factor=1.0):
    """Rotation-plus-offset chart around ``L0``; returns (plane_fn, x0)."""
    d, n = L0.d, L0.n
    basis = np.vstack([L0.frame, L0.normals])
    off0 = L0.normals @ (L0.base - center)
    lim = lim_factor * r * (1.0 - 1e-9)

    def plane(params):
        k = np.asarray(params[:n * (d - n)]).reshape(n, d - n)
        off = np.asarray(params[n * (d - n):], dtype=float)
        K = np.zeros((d, d))
        K[:n, n:] = k
        K[n:, :n] = -k.T
        rot = expm(K) @ basis
        nrm = np.linalg.norm(off)
        if nrm >= lim:
            off = off * (lim / nrm)
        return AffinePlane.from_frame(center + off @ rot[n:], rot[:n])

    x0 = np.concatenate([np.zeros(n * (d - n)), off0])
    return plane, x0, n * (d - n)


def _nelder_mead(obj, plane_fn, x0, nrot, r, maxfev):
    step = np.concatenate([np.full(nrot, 0.1), np.full(x0.size - nrot, 0.1 * r)])
    simplex = np.vstack([x0] + [x0 + np.eye(x0.size)[i] * step[i] for i in range(x0.size)])
    res = optimize.minimize(lambda z: obj(plane_fn(z)), x0, method="Nelder-Mead",
                            options={"initial_simplex": simplex, "maxfev": maxfev,
                                     "xatol": 1e-9 * max(r, 1e-300), "fatol": 0.0})
    return plane_fn(res.x), float(res.fun), int(res.nfev)


def alpha_p(p: float, mu: DiscreteMeasure, B: Ball, n: int = 1,
            spacing: Optional[float] = None, search: PlaneSearch = DEFAULT_SEARCH) -> CoefficientReport:
    """Transport flatness coefficient ``alpha_p(B)``.

    ``r**(-1 - n/p) * min_L W_p(phi_B mu, c_{B,L} phi_B L)`` over searched
    n-planes L meeting B, where the flat measure on L is a lattice of the
    given spacing.

    Raises
    ------
    EmptyBall
        If no support point lies in the closed ball.
    """
    _require_ball_hit(mu, B)
    r = B.radius
    spacing = default_spacing(r, n) if spacing is None else float(spacing)
    phimu = localize(mu, B)
    diag = {"spacing": spacing}
    if n == 1 and mu.dim == 2:
        L, fast, evals = _search_line_alpha(p, phimu, B, spacing, search)
        diag["search"] = "angle_grid+golden"
    else:
        try:
            L0 = fit_plane_pca(phimu, n)
        except Exception:
            L0 = AffinePlane(B.center, np.eye(mu.dim)[:n])
        plane_fn, x0, nrot = _chart(L0, B.center, r)

        def obj(L):
            try:
                if p == 2 and n == 1:
                    return _alpha_identity_at(phimu, B, L, spacing)
                return _alpha_exact_at(p, phimu, B, L, spacing)[0]
            except (ZeroMass, NoIntersection):
                return np.inf

        L, fast, evals = _nelder_mead(obj, plane_fn, x0, nrot, r, search.nm_maxfev)
        for S in search.seeds:
            v = obj(S)
            if v < fast:
                L, fast = S, v
        diag["search"] = "nelder_mead"
    diag["evaluations"] = evals
    diag["fast_cost"] = fast
    c = c_b_l(phimu, B, L, spacing)
    cost = fast
    if search.exact_witness:
        cost, c = _alpha_exact_at(p, phimu, B, L, spacing)
        diag["solver"] = "network_simplex"
    else:
        diag["solver"] = "projection_identity" if p == 2 and n == 1 else "network_simplex"
    diag["cost"] = cost
    value = r ** (-1.0 - n / p) * cost
    return CoefficientReport("alpha_p", B, value, L, p=float(p), n=n, normalization=c,
                             diagnostics=diag)


def alpha_p_at_plane(p: float, mu: DiscreteMeasure, B: Ball, L: AffinePlane,
                     spacing: float, normalized: bool = False) -> float:
    """Coefficient evaluated at a fixed plane with the exact solver.

    With ``normalized=True`` both localized measures are scaled to unit
    mass and the cost is divided by ``r``.
    """
    phimu = localize(mu, B)
    if not normalized:
        W, _ = _alpha_exact_at(p, phimu, B, L, spacing)
        return B.radius ** (-1.0 - L.n / p) * W
    tgt = plane_target(L, B, spacing)
    W = wasserstein(p, phimu.normalized(), tgt.normalized()).cost
    return W / B.radius


# ---------------------------------------------------------------------------
# beta coefficients
# ---------------------------------------------------------------------------

def _restrict_ball(mu: DiscreteMeasure, B: Ball, k: float) -> DiscreteMeasure:
    return mu.subset(B.scaled(k).contains(mu.points))


def beta_p(p: float, mu: DiscreteMeasure, B: Ball, n: int = 1,
           search: PlaneSearch = DEFAULT_SEARCH) -> CoefficientReport:
    """``min_L (r**-n sum_{x in 2B} w (dist(x, L)/r)**p)**(1/p)``.

    The weighted PCA plane is the exact minimiser for ``p = 2``.
    """
    _require_ball_hit(mu, B, 2.0)
    r = B.radius
    m2 = _restrict_ball(mu, B, 2.0)

    def val(L):
        return float((r ** -n * (m2.weights @ (L.dist(m2.points) / r) ** p)) ** (1.0 / p))

    c, vals, vecs = weighted_pca(m2.points, m2.weights)
    L = AffinePlane(c, vecs[:n])
    best = val(L)
    diag = {"search": "pca"}
    if p != 2:
        if n == 1 and mu.dim == 2:
            L, best = _beta_line_search(m2, r, p, search, L, best, val)
            diag["search"] = "angle_grid+golden"
        else:
            plane_fn, x0, nrot = _chart(L, c, np.inf)
            L2, v2, _ = _nelder_mead(val, plane_fn, x0, nrot, r, search.nm_maxfev)
            if v2 < best:
                L, best = L2, v2
            diag["search"] = "pca+nelder_mead"
    return CoefficientReport("beta_p", B, best, L, p=float(p), n=n, diagnostics=diag)


def _beta_line_search(m2, r, p, search, L0, best, val):
    """Per-angle convex minimisation in the offset, then angle polish."""
    X, w = m2.points, m2.weights
    L = L0

    def per_angle(th):
        nu = np.array([-math.sin(th), math.cos(th)])
        a = X @ nu
        lo, hi = float(a.min()), float(a.max())
        if hi - lo <= 0:
            return lo, 0.0
        s, f = _golden(lambda s: float(w @ np.abs(a - s) ** p), lo, hi, 60)
        return s, f

    ths = np.arange(2 * search.n_angles) * math.pi / (2 * search.n_angles)
    fs = [per_angle(t)[1] for t in ths]
    k = int(np.argmin(fs))
    dth = math.pi / (2 * search.n_angles)
    th, _ = _golden(lambda t: per_angle(t)[1], ths[k] - dth, ths[k] + dth, 40)
    s, _ = per_angle(th)
    nu = np.array([-math.sin(th), math.cos(th)])
    cand = AffinePlane(s * nu, np.array([[math.cos(th), math.sin(th)]]))
    v = val(cand)
    if v < best:
        L, best = cand, v
    return L, best


def _min_width_line(P: np.ndarray):
    """Line minimising the largest distance to a planar point set.

    The optimal strip has a side through a convex hull edge, so hull edge
    directions are exhaustive.  Returns (line, half width).
    """
    if P.shape[0] == 1:
        return AffinePlane(P[0], np.array([[1.0, 0.0]])), 0.0
    try:
        hull = ConvexHull(P)
        dirs = [P[j] - P[i] for i, j in hull.simplices]
    except QhullError:
        c, _, vecs = weighted_pca(P, np.ones(P.shape[0]))
        L = AffinePlane(c, vecs[:1])
        return L, float(L.dist(P).max())
    best = (np.inf, None)
    for v in dirs:
        e = v / np.linalg.norm(v)
        nu = np.array([-e[1], e[0]])
        a = P @ nu
        width = a.max() - a.min()
        if width < best[0]:
            best = (width, (e, 0.5 * (a.max() + a.min()) * nu))
    e, base = best[1]
    return AffinePlane(base, e[None, :]), 0.5 * float(best[0])


def beta_inf(mu: DiscreteMeasure, B: Ball, n: int = 1,
             search: PlaneSearch = DEFAULT_SEARCH) -> CoefficientReport:
    """``min_L max_{y in supp mu, |y - c| <= 2r} dist(y, L) / r``."""
    _require_ball_hit(mu, B, 2.0)
    r = B.radius
    P = _restrict_ball(mu, B, 2.0).points
    if n == 1 and mu.dim == 2:
        L, h = _min_width_line(P)
        return CoefficientReport("beta_inf", B, h / r, L, n=n,
                                 diagnostics={"search": "hull_min_width"})
    c, _, vecs = weighted_pca(P, np.ones(P.shape[0]))
    L0 = AffinePlane(c, vecs[:n])

    def val(L):
        return float(L.dist(P).max()) / r

    plane_fn, x0, nrot = _chart(L0, c, np.inf)
    L, v, _ = _nelder_mead(val, plane_fn, x0, nrot, r, search.nm_maxfev)
    if val(L0) <= v:
        L, v = L0, val(L0)
    return CoefficientReport("beta_inf", B, v, L, n=n, diagnostics={"search": "pca+nelder_mead"})


def b_beta_inf(mu: DiscreteMeasure, B: Ball, scale: Optional[float] = None, n: int = 1,
               spacing: Optional[float] = None,
               search: PlaneSearch = DEFAULT_SEARCH) -> CoefficientReport:
    """Bilateral coefficient over planes meeting ``2B``.

    ``max_{supp in 2B} dist(x, L)/l + max_{y in L cap 2B} dist(y, supp)/l``
    with the second maximum taken over a lattice on the plane and
    ``l = scale`` (default ``2r``).
    """
    _require_ball_hit(mu, B, 2.0)
    r = B.radius
    ell = 2.0 * r if scale is None else float(scale)
    spacing = r / 50.0 if spacing is None else float(spacing)
    P = _restrict_ball(mu, B, 2.0).points
    tree = cKDTree(mu.points)

    def val(L):
        t1 = float(L.dist(P).max())
        try:
            G = sample_plane_measure(L, B, spacing, reach=2.0).points
        except NoIntersection:
            return np.inf
        t2 = float(tree.query(G)[0].max()) if G.shape[0] else 0.0
        return (t1 + t2) / ell

    c, _, vecs = weighted_pca(P, np.ones(P.shape[0]))
    lim = 2.0 * r * (1.0 - 1e-9)
    if n == 1 and mu.dim == 2:
        best = (np.inf, 0.0, 0.0)
        for th in np.arange(search.n_angles) * math.pi / search.n_angles:
            for dl in np.linspace(-lim, lim, 2 * search.n_offsets - 1):
                v = val(_line_through(B.center, th, dl))
                if v < best[0]:
                    best = (v, th, dl)
        v, th, dl = best
        dth = math.pi / search.n_angles
        dd = 2 * lim / (2 * search.n_offsets - 2)
        for _ in range(search.polish_rounds):
            t2, f2 = _golden(lambda t: val(_line_through(B.center, t, dl)), th - dth, th + dth, 25)
            if f2 < v:
                th, v = t2, f2
            d2, f2 = _golden(lambda s: val(_line_through(B.center, th, s)),
                             max(dl - dd, -lim), min(dl + dd, lim), 25)
            if f2 < v:
                dl, v = d2, f2
            dth *= 0.25
            dd *= 0.25
        L = _line_through(B.center, th, dl)
        diag = {"search": "angle_grid+golden"}
    else:
        L0 = AffinePlane(c, vecs[:n])
        plane_fn, x0, nrot = _chart(L0, B.center, 2.0 * r)
        L, v, _ = _nelder_mead(val, plane_fn, x0, nrot, r, search.nm_maxfev)
        diag = {"search": "pca+nelder_mead"}
    diag.update(spacing=spacing, scale=ell)
    return CoefficientReport("b_beta_inf", B, v, L, n=n, diagnostics=diag)


# ---------------------------------------------------------------------------
# distance-based alpha
# ---------------------------------------------------------------------------

def _boundary_dist(points, B: Ball, k: float = 3.0):
    return np.maximum(k * B.radius - np.linalg.norm(points - B.center, axis=1), 0.0)


def dist_3b(mu: DiscreteMeasure, nu: DiscreteMeasure, B: Ball) -> float:
    """``sup |int f d(mu - nu)|`` over 1-Lipschitz f vanishing off ``3B``.

    Solved as a transport problem in which either measure may also send mass
    to the boundary of ``3B`` at cost equal to the distance to it; by linear
    programming duality this equals the supremum (the boundary arcs encode
    ``|f(x)| <= dist(x, complement)``).
    """
    def inside(m):
        if m.is_empty:
            return np.zeros((0, B.dim)), np.zeros(0)
        d = _boundary_dist(m.points, B)
        k = d > 0
        return m.points[k], m.weights[k]

    X, wx = inside(mu)
    Y, wy = inside(nu)
    if X.shape[0] == 0 and Y.shape[0] == 0:
        return 0.0
    dx = _boundary_dist(X, B) if X.shape[0] else np.zeros(0)
    dy = _boundary_dist(Y, B) if Y.shape[0] else np.zeros(0)
    m, n = X.shape[0], Y.shape[0]
    if m + 1 > MAX_ATOMS or n + 1 > MAX_ATOMS:
        raise TooLarge("TooLarge: dist_3B instance exceeds the solver cap")
    C = np.zeros((m + 1, n + 1))
    if m and n:
        diff = X[:, None, :] - Y[None, :, :]
        C[:m, :n] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    C[:m, n] = dx
    C[m, :n] = dy
    a = np.concatenate([wx, [wy.sum()]])
    b = np.concatenate([wy, [wx.sum()]])
    rows, cols, mass, _, _, _ = kernels.network_simplex(
        np.ascontiguousarray(a), np.ascontiguousarray(b), np.ascontiguousarray(C))
    return float(np.sum(mass * C[rows, cols]))


def dist_3b_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, B: Ball) -> float:
    """The same quantity as :func:`dist_3b` solved as the primal LP in the
    test-function values (HiGHS).  Quadratic constraint count; small inputs."""
    pts = np.vstack([mu.points, nu.points])
    signed = np.concatenate([mu.weights, -nu.weights])
    d = _boundary_dist(pts, B)
    keep = d > 0
    pts, signed, d = pts[keep], signed[keep], d[keep]
    N = pts.shape[0]
    if N == 0:
        return 0.0
    rows, rhs = [], []
    for i in range(N):
        for j in range(i + 1, N):
            dist = float(np.linalg.norm(pts[i] - pts[j]))
            r = np.zeros(N)
            r[i], r[j] = 1.0, -1.0
            rows.extend([r, -r])
            rhs.extend([dist, dist])
    A = np.array(rows) if rows else None
    res = optimize.linprog(-signed, A_ub=A, b_ub=rhs if rows else None,
                           bounds=list(zip(-d, d)), method="highs")
    return float(abs(res.fun))


def alpha_dist(mu: DiscreteMeasure, B: Ball, n: int = 1, spacing: Optional[float] = None,
               seed_planes: Sequence[AffinePlane] = (),
               search: PlaneSearch = DEFAULT_SEARCH) -> CoefficientReport:
    """``r**(-n-1) min_{a >= 0, L} dist_3B(mu, a * flat measure on L)``.

    Candidate planes are the PCA plane of ``phi_B mu``, any ``seed_planes``
    and a local grid around them.  Each candidate is scored at the two
    natural masses ``c_{B,L}`` and ``c_{2B,L}``; the best few are then
    minimised in ``a`` by golden-section search (the objective is convex
    in ``a``).  Plane lattices are anchored at the foot of the
    perpendicular from the centre, so they agree with those used for
    ``2B``.
    """
    _require_ball_hit(mu, B)
    r = B.radius
    spacing = default_spacing(r, n) if spacing is None else float(spacing)
    mu3 = mu.subset(_boundary_dist(mu.points, B) > 0)
    phimu = localize(mu, B)
    seeds = []
    try:
        seeds.append(fit_plane_pca(phimu, n))
    except Exception:
        seeds.append(AffinePlane(B.center, np.eye(mu.dim)[:n]))
    seeds.extend(seed_planes)

    cands = []
    for S in seeds:
        cands.append(S)
        if n == 1 and mu.dim == 2:
            th0, d0 = _line_params(S, B.center)
            for dth in np.linspace(-3, 3, 5) * math.pi / 180:
                for dd in np.linspace(-0.1, 0.1, 5) * r:
                    cands.append(_line_through(B.center, th0 + dth, d0 + dd))

    def lattice(L):
        return sample_plane_measure(L, B, spacing)

    def obj(L, a, lat=None):
        lat = lattice(L) if lat is None else lat
        return dist_3b(mu3, lat.scaled(a), B)

    scored = []
    for L in cands:
        try:
            lat = lattice(L)
        except NoIntersection:
            continue
        avals = [0.0]
        for k in (1.0, 2.0):
            try:
                avals.append(c_b_l(mu, B.scaled(k), L, spacing))
            except (ZeroMass, NoIntersection):
                pass
        vals = [(obj(L, a, lat), a) for a in avals]
        v, a = min(vals)
        scored.append((v, len(scored), L, a, max(avals)))
    scored.sort(key=lambda t: (t[0], t[1]))
    best_v, _, best_L, best_a, _ = scored[0]
    for v, _, L, a, amax in scored[:3]:
        lat = lattice(L)
        hi = 2.0 * max(amax, a, 1e-300)
        a2, v2 = _golden(lambda t: obj(L, t, lat), 0.0, hi, 30)
        if v2 < best_v:
            best_v, best_L, best_a = v2, L, a2
    diag = {"spacing": spacing, "candidates": len(scored), "dist_3B": best_v}
    return CoefficientReport("alpha_dist", B, r ** (-n - 1.0) * best_v, best_L, n=n,
                             normalization=best_a, diagnostics=diag)
