"""Exact discrete optimal transport, the W1 dual bound and the
Knothe-Rosenblatt rearrangement on cell grids."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import (EmptyMeasure, HTooLarge, MassMismatch, MeanNotZero,
                     NotLipschitz, TooLarge)
from .measures import DiscreteMeasure, ScalarField, _cube_parts, total_mass

MAX_ATOMS = 4000
BRUTE_FORCE_MAX = 6
MASS_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse coupling between two discrete measures.

    Attributes
    ----------
    rows, cols, mass : ndarray
        Pair list; ``mass[k]`` moves from source atom ``rows[k]`` to target
        atom ``cols[k]``.
    cost : float
        ``(sum mass * |x - y|**p) ** (1/p)``.
    u, v : ndarray or None
        Optimal dual potentials when produced by the exact solver.
    """

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    source_mass: float
    target_mass: float
    p: float
    cost: float
    u: Optional[np.ndarray] = field(default=None, repr=False)
    v: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def pairs(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.mass.tolist()))

    @property
    def cost_p(self) -> float:
        """The p-th power of :attr:`cost`."""
        return self.cost ** self.p

    def dense(self, m: int, n: int) -> np.ndarray:
        P = np.zeros((m, n))
        np.add.at(P, (self.rows, self.cols), self.mass)
        return P

    def recompute_cost(self, a: DiscreteMeasure, b: DiscreteMeasure) -> float:
        d = np.linalg.norm(a.points[self.rows] - b.points[self.cols], axis=1)
        return float(np.sum(self.mass * d ** self.p)) ** (1.0 / self.p)

    def check_marginals(self, a: DiscreteMeasure, b: DiscreteMeasure, rtol=1e-9) -> bool:
        rs = np.bincount(self.rows, self.mass, minlength=len(a))
        cs = np.bincount(self.cols, self.mass, minlength=len(b))
        scale = max(total_mass(a), total_mass(b))
        return bool(np.all(self.mass >= 0)
                    and np.allclose(rs, a.weights, rtol=0, atol=rtol * scale)
                    and np.allclose(cs, b.weights, rtol=0, atol=rtol * scale))

    def barycentric_map(self, b: DiscreteMeasure, n_source: int) -> "TransportMap":
        """Send each source atom to the mass-weighted mean of its row."""
        num = np.zeros((n_source, b.dim))
        np.add.at(num, self.rows, self.mass[:, None] * b.points[self.cols])
        den = np.bincount(self.rows, self.mass, minlength=n_source)
        out = np.where(den[:, None] > 0, num / np.where(den > 0, den, 1.0)[:, None], np.nan)
        return TransportMap(out)

    def to_json(self) -> str:
        return json.dumps({"p": self.p, "cost": self.cost,
                           "pairs": [[i, j, m] for i, j, m in self.pairs]})


@dataclass(frozen=True, eq=False)
class TransportMap:
    """Per-source-atom image points."""

    assignment: np.ndarray

    def push(self, source: DiscreteMeasure) -> DiscreteMeasure:
        return DiscreteMeasure(self.assignment, source.weights, source.dim)


def _check_pair(a: DiscreteMeasure, b: DiscreteMeasure) -> None:
    if a.is_empty or b.is_empty:
        raise EmptyMeasure("transport between empty measures")
    if a.dim != b.dim:
        raise ValueError("measures live in different dimensions")
    ma, mb = total_mass(a), total_mass(b)
    if ma <= 0 or mb <= 0:
        raise EmptyMeasure("measure with zero total mass")
    if abs(ma - mb) > MASS_RTOL * max(ma, mb):
        raise MassMismatch(f"MassMismatch: total masses {ma!r} and {mb!r} differ")


def cost_matrix(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if p == 2:
        return sq
    return np.sqrt(sq) ** p


def wasserstein(p: float, a: DiscreteMeasure, b: DiscreteMeasure) -> TransportPlan:
    """Exact optimal coupling for the cost ``|x - y|**p``.

    Solved with a network simplex on the complete bipartite graph.  The
    target weights are rescaled by the (at most 1e-9 relative) mass gap so
    the instance is balanced.

    Raises
    ------
    MassMismatch, EmptyMeasure, TooLarge
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    _check_pair(a, b)
    if len(a) > MAX_ATOMS or len(b) > MAX_ATOMS:
        raise TooLarge(f"TooLarge: {len(a)}x{len(b)} exceeds {MAX_ATOMS} atoms per side")
    C = np.ascontiguousarray(cost_matrix(a.points, b.points, p))
    wa = np.ascontiguousarray(a.weights, dtype=float)
    wb = np.ascontiguousarray(b.weights * (total_mass(a) / total_mass(b)), dtype=float)
    rows, cols, mass, u, v, _ = kernels.network_simplex(wa, wb, C)
    total = float(np.sum(mass * C[rows, cols]))
    return TransportPlan(rows, cols, mass, total_mass(a), total_mass(b), float(p),
                         max(total, 0.0) ** (1.0 / p), u, v)


def wasserstein_1d(p: float, x, wx, y, wy) -> float:
    """``W_p`` between two weighted point sets on the line (unsorted input)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ix, iy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    val = kernels.wasserstein_1d(np.ascontiguousarray(x[ix]),
                                 np.ascontiguousarray(np.asarray(wx, dtype=float)[ix]),
                                 np.ascontiguousarray(y[iy]),
                                 np.ascontiguousarray(np.asarray(wy, dtype=float)[iy]), float(p))
    return max(val, 0.0) ** (1.0 / p)


def brute_force_wasserstein(p, a: DiscreteMeasure, b: DiscreteMeasure):
    """Exhaustive oracle for small instances.

    Equal-size uniform-weight pairs are solved by trying every permutation.
    Otherwise every basic feasible solution is generated: a basis is a
    spanning tree of the bipartite support graph, and any tree has a leaf
    whose single cell carries that node's entire remaining mass, so peeling
    leaves recursively reaches every basis.  Sub-problems are memoised.

    Parameters
    ----------
    p : float or sequence of float
        Exponent(s).  A sequence evaluates every exponent over the same
        enumeration and returns an array.

    Raises
    ------
    TooLarge
        Above six atoms on either side.
    """
    _check_pair(a, b)
    m, n = len(a), len(b)
    if m > BRUTE_FORCE_MAX or n > BRUTE_FORCE_MAX:
        raise TooLarge(f"TooLarge: brute force limited to {BRUTE_FORCE_MAX} atoms per side")
    ps = np.atleast_1d(np.asarray(p, dtype=float))
    Cs = np.stack([cost_matrix(a.points, b.points, q) for q in ps], axis=-1)
    wa = a.weights.astype(float)
    wb = b.weights * (total_mass(a) / total_mass(b))
    if m == n and np.ptp(wa) == 0 and np.ptp(wb) == 0 and wa[0] == wb[0]:
        best = np.full(ps.size, np.inf)
        for s in itertools.permutations(range(n)):
            best = np.minimum(best, Cs[np.arange(m), list(s)].sum(axis=0))
        vals = best * wa[0]
    else:
        vals = _peel_bases(Cs, wa.tolist(), wb.tolist(), 1e-11 * total_mass(a))
    out = np.maximum(vals, 0.0) ** (1.0 / ps)
    return float(out[0]) if np.ndim(p) == 0 else out


def _peel_bases(Cs, wa, wb, tol):
    m, n = len(wa), len(wb)
    k = Cs.shape[-1]
    cells = [[tuple(Cs[i, j].tolist()) for j in range(n)] for i in range(m)]
    inf = (float("inf"),) * k
    zero = (0.0,) * k
    rk = range(k)
    memo = {}

    def solve(ra, rb):
        live_a = [i for i in range(m) if ra[i] > tol]
        live_b = [j for j in range(n) if rb[j] > tol]
        if not live_a and not live_b:
            return zero
        if not live_a or not live_b:
            return inf
        # peels along different orders differ only by rounding
        key = (tuple(round(x / tol) if x > tol else 0 for x in ra),
               tuple(round(y / tol) if y > tol else 0 for y in rb))
        hit = memo.get(key)
        if hit is not None:
            return hit
        best = list(inf)
        for i in live_a:
            x = ra[i]
            for j in live_b:
                y = rb[j]
                c = cells[i][j]
                if x <= y + tol:
                    # row i is a leaf hanging off column j
                    sub = solve(ra[:i] + (0.0,) + ra[i + 1:], rb[:j] + (y - x,) + rb[j + 1:])
                    for q in rk:
                        v = c[q] * x + sub[q]
                        if v < best[q]:
                            best[q] = v
                if y <= x + tol:
                    sub = solve(ra[:i] + (x - y,) + ra[i + 1:], rb[:j] + (0.0,) + rb[j + 1:])
                    for q in rk:
                        v = c[q] * y + sub[q]
                        if v < best[q]:
                            best[q] = v
        best = tuple(best)
        memo[key] = best
        return best

    return np.asarray(solve(tuple(wa), tuple(wb)))


def w1_dual_lower_bound(a: DiscreteMeasure, b: DiscreteMeasure, f) -> float:
    """``|int f da - int f db|`` for a 1-Lipschitz test function ``f``.

    Raises
    ------
    NotLipschitz
        If some pair of support points violates ``|f(x)-f(y)| <= |x-y|``.
    """
    pts = np.vstack([a.points, b.points])
    vals = np.asarray(f(pts), dtype=float).reshape(-1)
    gap = np.abs(vals[:, None] - vals[None, :])
    dist = np.sqrt(np.maximum(cost_matrix(pts, pts, 2), 0.0))
    if np.any(gap > dist * (1 + 1e-9) + 1e-15):
        raise NotLipschitz("NotLipschitz: test function exceeds slope 1 on the supports")
    fa, fb = vals[:len(a)], vals[len(a):]
    return float(abs(fa @ a.weights - fb @ b.weights))


# ---------------------------------------------------------------------------
# Knothe-Rosenblatt rearrangement
# ---------------------------------------------------------------------------

def _grid_shape(points: np.ndarray, corner: np.ndarray, side: float):
    """Recover per-axis cell counts and integer cell indices of a full grid
    of cell centres.  Returns ``(shape, index)`` or raises ValueError."""
    k, d = points.shape
    shape, idx = [], np.zeros((k, d), dtype=np.intp)
    for j in range(d):
        u = np.unique(points[:, j])
        nj = u.size
        h = side / nj
        centres = corner[j] + (np.arange(nj) + 0.5) * h
        if not np.allclose(u, centres, rtol=0, atol=1e-9 * side):
            raise ValueError("source measure is not supported on a regular cell-centre grid")
        shape.append(nj)
        idx[:, j] = np.clip(np.floor((points[:, j] - corner[j]) / h), 0, nj - 1).astype(np.intp)
    if int(np.prod(shape)) != k or np.unique(idx, axis=0).shape[0] != k:
        raise ValueError("source grid is incomplete or has repeated cells")
    return tuple(shape), idx


def _inv_cdf(cum: np.ndarray, u: float, edges: np.ndarray) -> float:
    """Left-continuous inverse of a piecewise-linear CDF.

    ``cum`` holds CDF values at ``edges`` (cum[0] == 0, cum[-1] == 1).  The
    smallest y with CDF(y) >= u is returned, so flat stretches resolve to
    their left end.
    """
    if u <= 0.0:
        return float(edges[0])
    k = int(np.searchsorted(cum, u, side="left"))
    k = min(max(k, 1), cum.size - 1)
    lo, hi = cum[k - 1], cum[k]
    t = 0.0 if hi <= lo else (u - lo) / (hi - lo)
    return float(edges[k - 1] + min(max(t, 0.0), 1.0) * (edges[k] - edges[k - 1]))


@dataclass(frozen=True, eq=False)
class KnotheMap(TransportMap):
    """Triangular monotone rearrangement between two cell densities on a cube.

    Mass inside each grid cell is spread uniformly, so every conditional CDF
    is piecewise linear.  ``source`` and ``target`` hold per-cell masses on a
    common grid of shape ``shape``.
    """

    corner: np.ndarray = None
    side: float = 1.0
    shape: tuple = ()
    source: np.ndarray = None
    target: np.ndarray = None

    @property
    def dim(self) -> int:
        return len(self.shape)

    def _edges(self, j):
        return self.corner[j] + self.side * np.arange(self.shape[j] + 1) / self.shape[j]

    def _conditional(self, dens: np.ndarray, prefix: tuple, j: int):
        """CDF values at the cell edges of axis ``j`` given the cells of the
        first ``j`` coordinates."""
        marg = dens.sum(axis=tuple(range(j + 1, self.dim))) if j + 1 < self.dim else dens
        row = marg[prefix]
        cum = np.concatenate([[0.0], np.cumsum(row)])
        return cum / cum[-1]

    def _cell(self, j, x):
        n = self.shape[j]
        t = int(np.floor((x - self.corner[j]) / self.side * n))
        return min(max(t, 0), n - 1)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        out = np.empty_like(X)
        for r, pt in enumerate(X):
            src_pref, tgt_pref = (), ()
            for j in range(self.dim):
                e = self._edges(j)
                F = self._conditional(self.source, src_pref, j)
                G = self._conditional(self.target, tgt_pref, j)
                c = self._cell(j, pt[j])
                t = (pt[j] - e[c]) / (e[c + 1] - e[c])
                u = F[c] + t * (F[c + 1] - F[c])
                y = _inv_cdf(G, u, e)
                out[r, j] = y
                src_pref += (c,)
                tgt_pref += (self._cell_of_value(G, u, j, y),)
        return out[0] if single else out

    def _cell_of_value(self, G, u, j, y):
        # the target cell whose CDF segment produced y
        k = int(np.searchsorted(G, u, side="left"))
        return min(max(k, 1), G.size - 1) - 1 if u > 0 else self._first_positive(G)

    @staticmethod
    def _first_positive(G):
        k = int(np.argmax(np.diff(G) > 0))
        return k

    def _pieces(self):
        """Enumerate the boxes on which the map is affine in each coordinate.

        Yields ``(target_cell, mass_fraction, sq_disp_max)`` where
        ``sq_disp_max`` bounds ``|Ux - x|**2`` on the box from above and is
        attained at one of its vertices.
        """
        out = []

        def rec(j, sp, tp, frac, sq):
            if j == self.dim:
                out.append((tp, frac, sq))
                return
            e = self._edges(j)
            F = self._conditional(self.source, sp, j)
            G = self._conditional(self.target, tp, j)
            for c in range(self.shape[j]):
                if F[c + 1] <= F[c]:
                    continue
                for k in range(self.shape[j]):
                    lo, hi = max(F[c], G[k]), min(F[c + 1], G[k + 1])
                    if hi <= lo:
                        continue
                    # u = F(x) is uniform given the prefix, so the piece
                    # carries conditional mass hi - lo
                    xs = e[c] + (np.array([lo, hi]) - F[c]) / (F[c + 1] - F[c]) * (e[c + 1] - e[c])
                    ys = e[k] + (np.array([lo, hi]) - G[k]) / (G[k + 1] - G[k]) * (e[k + 1] - e[k])
                    dj = float(np.max((ys - xs) ** 2))
                    rec(j + 1, sp + (c,), tp + (k,), frac * (hi - lo), sq + dj)

        rec(0, (), (), 1.0, 0.0)
        return out

    def pushforward_cells(self) -> np.ndarray:
        """Per-cell masses of the image of the cell-uniform source density."""
        total = float(self.source.sum())
        res = np.zeros(self.shape)
        for tp, frac, _ in self._pieces():
            res[tp] += frac * total
        return res

    def max_displacement(self) -> float:
        """``sup |Ux - x|`` over the whole cube (not only grid atoms)."""
        return float(np.sqrt(max(sq for _, _, sq in self._pieces())))


def knothe_map(Q, sigma0: DiscreteMeasure, h) -> KnotheMap:
    """Knothe-Rosenblatt map pushing ``sigma0`` to ``(1 + h) sigma0``.

    Parameters
    ----------
    Q : DyadicCube or (corner, side)
        The cube carrying the grid.
    sigma0 : DiscreteMeasure
        Strictly positive weights on every cell centre of a regular grid.
    h : callable
        Evaluated at cell centres.

    Raises
    ------
    HTooLarge
        If ``max |h| > 1`` on the grid.
    MeanNotZero
        If ``|sum h w| > 1e-9 sum w``.
    """
    corner, side = _cube_parts(Q)
    if sigma0.dim != corner.size:
        raise ValueError("cube and measure dimensions differ")
    if np.any(sigma0.weights <= 0):
        raise ValueError("source weights must be strictly positive")
    shape, idx = _grid_shape(sigma0.points, corner, side)
    hv = np.asarray(h(sigma0.points), dtype=float).reshape(-1)
    if np.max(np.abs(hv)) > 1.0 + 1e-12:
        raise HTooLarge(f"HTooLarge: sup|h| = {np.max(np.abs(hv)):.6g} > 1")
    tot = float(sigma0.weights.sum())
    if abs(float(hv @ sigma0.weights)) > 1e-9 * tot:
        raise MeanNotZero("MeanNotZero: h has nonzero mean against the source")
    s = np.zeros(shape)
    s[tuple(idx.T)] = sigma0.weights
    t = np.zeros(shape)
    t[tuple(idx.T)] = sigma0.weights * (1.0 + hv)
    km = KnotheMap(np.zeros_like(sigma0.points), corner, side, shape, s, t)
    object.__setattr__(km, "assignment", km(sigma0.points))
    return km


def displacement_stats(U: TransportMap, source: DiscreteMeasure) -> dict:
    """Maximum and weighted L2 displacement over the source atoms."""
    disp = np.linalg.norm(np.asarray(U.assignment) - source.points, axis=1)
    return {"max": float(disp.max(initial=0.0)),
            "l2": float(np.sqrt(np.sum(source.weights * disp ** 2)))}
