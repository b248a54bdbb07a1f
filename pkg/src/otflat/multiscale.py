"""Martingale differences, stopping-time trees, localisation diagnostics and
the dyadic Carleson scanner."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .coefficients import PlaneSearch, alpha_p, beta_p
from .errors import (ComparabilityViolated, MassMismatch, OutsideDomain,
                     ZeroMass, ZeroSigmaMass)
from .geometry import Ball, DyadicCube, WhitneyDecomposition
from .measures import DiscreteMeasure, ScalarField, in_cube, total_mass
from .transport import TransportPlan, wasserstein

DEFAULT_DELTA = 0.25


# ---------------------------------------------------------------------------
# piecewise-constant functions on a dyadic grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CellValues:
    """Function constant on the level-``level`` subcubes of ``root``.

    ``values`` has shape ``(2**k,) * d`` with ``k = level - root.level``,
    indexed by the integer offset of the cell inside the root.
    """

    root: DyadicCube
    level: int
    values: np.ndarray

    @property
    def k(self) -> int:
        return self.level - self.root.level

    @property
    def cell_volume(self) -> float:
        return (self.root.side * 2.0 ** -self.k) ** self.root.dim

    def inner(self, other: "CellValues") -> float:
        return float(np.sum(self.values * other.values) * self.cell_volume)

    def norm_sq(self) -> float:
        return self.inner(self)

    def mean(self) -> float:
        return float(self.values.mean())

    def _block(self, Q: DyadicCube):
        s = self.level - Q.level
        lo = [(i - r * 2 ** (Q.level - self.root.level)) * 2 ** s
              for i, r in zip(Q.index, self.root.index)]
        return tuple(slice(l, l + 2 ** s) for l in lo)

    def cube_mean(self, Q: DyadicCube) -> float:
        return float(self.values[self._block(Q)].mean())


def sample_cells(g, root: DyadicCube, level: int) -> CellValues:
    """Evaluate a field at the cell centres of the level-``level`` grid."""
    k = level - root.level
    n = 2 ** k
    h = root.side / n
    axes = [root.corner_point[i] + (np.arange(n) + 0.5) * h for i in range(root.dim)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, root.dim)
    return CellValues(root, level, np.asarray(g(X), dtype=float).reshape((n,) * root.dim))


def haar_delta(g, Q: DyadicCube, root: Optional[DyadicCube] = None,
               level: Optional[int] = None) -> CellValues:
    """Jump of Lebesgue means from ``Q`` to its children.

    ``g`` is a :class:`CellValues` (whose grid must be finer than ``Q``) or
    a callable sampled at cell centres of ``root`` at ``level``.  The
    result lives on the same grid and vanishes off ``Q``.
    """
    if not isinstance(g, CellValues):
        root = Q if root is None else root
        level = Q.level + 1 if level is None else level
        g = sample_cells(g, root, level)
    if g.level <= Q.level:
        raise ValueError("grid is not finer than the cube")
    out = np.zeros_like(g.values)
    mq = g.cube_mean(Q)
    for P in Q.children():
        blk = g._block(P)
        out[blk] = g.values[blk].mean() - mq
    return CellValues(g.root, g.level, out)


def conditional_means(g: CellValues, level: int) -> CellValues:
    """Replace each value by its mean over the enclosing level-``level`` cube."""
    s = g.level - level
    d = g.root.dim
    n = g.values.shape[0] // 2 ** s
    shp = []
    for _ in range(d):
        shp.extend([n, 2 ** s])
    blocks = g.values.reshape(shp)
    m = blocks.mean(axis=tuple(range(1, 2 * d, 2)), keepdims=True)
    return CellValues(g.root, g.level, np.broadcast_to(m, shp).reshape(g.values.shape).copy())


def delta_sigma(sigma: DiscreteMeasure, tau: DiscreteMeasure, Q: DyadicCube) -> dict:
    """Per-child values ``tau(P)/sigma(P) - tau(Q)/sigma(Q)``.

    Raises
    ------
    ZeroSigmaMass
        If ``sigma`` gives no mass to ``Q`` or one of its children.
    """
    def mass(m, C):
        return float(m.weights[in_cube(m.points, C.corner_point, C.side)].sum()) if len(m) else 0.0

    sq = mass(sigma, Q)
    if sq <= 0:
        raise ZeroSigmaMass(f"ZeroSigmaMass: sigma({Q.id}) = 0")
    base = mass(tau, Q) / sq
    out = {}
    for P in Q.children():
        sp = mass(sigma, P)
        if sp <= 0:
            raise ZeroSigmaMass(f"ZeroSigmaMass: sigma({P.id}) = 0")
        out[P] = mass(tau, P) / sp - base
    return out


def lebesgue_delta(m: DiscreteMeasure, Q: DyadicCube) -> dict:
    """Per-child ``m_P - m_Q`` with ``m_C = m(C) / vol(C)``."""
    def mean(C):
        return float(m.weights[in_cube(m.points, C.corner_point, C.side)].sum()) / C.volume

    mq = mean(Q)
    return {P: mean(P) - mq for P in Q.children()}


def piecewise_norm_sq(vals: dict) -> float:
    return float(sum(v * v * P.volume for P, v in vals.items()))


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicTree:
    root: DyadicCube
    members: frozenset
    stopping: frozenset

    def check(self) -> bool:
        """Ancestor closure, sibling completeness and disjointness."""
        if self.root not in self.members:
            return False
        for Q in self.members:
            if not self.root.contains_cube(Q):
                return False
            P = Q
            while P.level > self.root.level:
                P = P.parent()
                if P not in self.members:
                    return False
        for S in self.stopping:
            if S in self.members or S.level == self.root.level:
                return False
            if any(b not in self.stopping for b in S.siblings()):
                return False
            if S.parent() not in self.members:
                return False
        st = sorted(self.stopping, key=lambda c: c.level)
        for i, a in enumerate(st):
            for b in st[i + 1:]:
                if a.contains_cube(b):
                    return False
        return True


def build_tree(root: DyadicCube, depth: int, stop: Callable[[DyadicCube], bool]) -> DyadicTree:
    """Descend from ``root``; when any child of a member triggers ``stop``,
    or the children reach generation ``depth``, all the children become
    stopping cubes.  ``depth = 0`` gives the bare root."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    members, stopping = {root}, set()
    frontier = [root] if depth > 0 else []
    while frontier:
        nxt = []
        for Q in frontier:
            ch = Q.children()
            if ch[0].level - root.level >= depth or any(stop(P) for P in ch):
                stopping.update(ch)
            else:
                members.update(ch)
                nxt.extend(ch)
        frontier = nxt
    return DyadicTree(root, frozenset(members), frozenset(stopping))


def stop_when_sparse(sigma: DiscreteMeasure, tau: DiscreteMeasure, delta: float = DEFAULT_DELTA):
    """Stopping predicate ``tau(Q) <= delta * sigma(Q)``."""
    def pred(Q):
        return _mass(tau, Q) <= delta * _mass(sigma, Q)
    return pred


def _mass(m: DiscreteMeasure, Q: DyadicCube) -> float:
    if m.is_empty:
        return 0.0
    return float(m.weights[in_cube(m.points, Q.corner_point, Q.side)].sum())


def key_lemma_rhs(sigma: DiscreteMeasure, tau: DiscreteMeasure, tree: DyadicTree,
                  alpha_exp: float = 1.0, delta: Optional[float] = None) -> float:
    """Right-hand side of the tree transport estimate.

    ``sum_T (1/m_Q s) |D_Q(s - t)|^2 l^(2-a) L^a
    + sum_T |m_Q s - m_Q t|^2 / (m_Q s)^3 |D_Q s|^2 l^(2-a) L^a
    + sum_S l(Q)^2 t(Q)`` with Lebesgue martingale differences ``D_Q``,
    ``l = l(Q)`` and ``L = l(root)``.

    Raises
    ------
    MassMismatch
        If the two measures give the root different mass.
    ComparabilityViolated
        If ``delta`` is given and some member has ``tau(Q)/sigma(Q)``
        outside ``[delta, 1/delta]``.
    """
    R = tree.root
    sR, tR = _mass(sigma, R), _mass(tau, R)
    if abs(sR - tR) > 1e-9 * max(sR, tR, 1e-300):
        raise MassMismatch(f"MassMismatch: sigma(R) = {sR!r}, tau(R) = {tR!r}")
    LR = R.side
    total = 0.0
    for Q in sorted(tree.members, key=lambda c: (c.level, c.index)):
        sq, tq = _mass(sigma, Q), _mass(tau, Q)
        if sq <= 0:
            raise ZeroSigmaMass(f"ZeroSigmaMass: sigma({Q.id}) = 0")
        if delta is not None and not (delta * sq <= tq <= sq / delta):
            raise ComparabilityViolated(f"ComparabilityViolated at {Q.id}")
        ms, mt = sq / Q.volume, tq / Q.volume
        diff = {P: a - b for (P, a), b in zip(lebesgue_delta(sigma, Q).items(),
                                                lebesgue_delta(tau, Q).values())}
        scale = Q.side ** (2.0 - alpha_exp) * LR ** alpha_exp
        total += piecewise_norm_sq(diff) / ms * scale
        total += (ms - mt) ** 2 / ms ** 3 * piecewise_norm_sq(lebesgue_delta(sigma, Q)) * scale
    for S in sorted(tree.stopping, key=lambda c: (c.level, c.index)):
        total += S.side ** 2 * _mass(tau, S)
    return float(total)


# ---------------------------------------------------------------------------
# localisation
# ---------------------------------------------------------------------------

def good_set(mu: DiscreteMeasure, nu: DiscreteMeasure, plan: TransportPlan, R: DyadicCube,
             decomp: Optional[WhitneyDecomposition] = None) -> np.ndarray:
    """Indices of ``nu`` atoms in int R that move less than their Whitney cube.

    ``plan`` couples ``nu`` (rows) with ``mu`` (columns); each atom is sent
    to the barycentre of its row.  An atom x is kept when ``|x - Tx|`` is at
    most the side of the Whitney cube of x and, if Tx lies in int R, also at
    most the side of the Whitney cube of Tx.
    """
    W = WhitneyDecomposition(R) if decomp is None else decomp
    T = plan.barycentric_map(mu, len(nu)).assignment
    keep = []
    for i, x in enumerate(nu.points):
        try:
            Qx = W.lookup(x)
        except OutsideDomain:
            continue
        if not np.all(np.isfinite(T[i])):
            continue
        disp = float(np.linalg.norm(x - T[i]))
        if disp > Qx.side:
            continue
        try:
            QT = W.lookup(T[i])
        except OutsideDomain:
            QT = None
        if QT is not None and disp > QT.side:
            continue
        keep.append(i)
    return np.asarray(keep, dtype=np.intp)


def ball_bump(B: Ball) -> ScalarField:
    """``(dist(x, complement of B) / r)**2``: supported on ``B``, radial,
    quadratic at the sphere, with gradient ``2 dist / r**2``."""
    c, r = np.asarray(B.center, dtype=float), float(B.radius)

    def ev(x):
        t = np.linalg.norm(np.atleast_2d(x) - c, axis=1)
        return (np.maximum(r - t, 0.0) / r) ** 2

    return ScalarField(ev, 2.0 / r, "ball_bump")


def localized_trim(nu: DiscreteMeasure, phi, G) -> DiscreteMeasure:
    """``a * 1_G * phi * nu`` with ``a`` restoring the mass of ``phi nu``.

    Raises
    ------
    ZeroMass
        If ``phi nu`` gives no mass to ``G``.
    """
    G = np.asarray(G, dtype=np.intp)
    fw = nu.weights * np.asarray(phi(nu.points), dtype=float).reshape(-1)
    full = float(fw.sum())
    part = float(fw[G].sum()) if G.size else 0.0
    if part <= 0:
        raise ZeroMass("ZeroMass: the good set carries no localized mass")
    a = full / part
    keep = G[fw[G] > 0]
    return DiscreteMeasure(nu.points[keep], fw[keep] * a, nu.dim)


@dataclass(frozen=True)
class LocalizationRecord:
    w: float
    localized_w: float
    a: float
    ratio: float
    p: float = 2.0

    @property
    def w2(self) -> float:
        return self.w

    @property
    def localized_w2(self) -> float:
        return self.localized_w

    def to_dict(self) -> dict:
        return {"p": self.p, "w": self.w, "localized_w": self.localized_w,
                "a": self.a, "ratio": self.ratio}


def localization_ratio(mu: DiscreteMeasure, nu: DiscreteMeasure, B: Ball,
                       phi=None, p: float = 2.0) -> LocalizationRecord:
    """Compare ``W_p(phi mu, a phi nu)`` with ``W_p(mu, nu)``.

    Both measures are normalised to unit mass.  The default ``phi`` is
    :func:`ball_bump`, squared distance to the sphere over ``r**2``.

    Raises
    ------
    ZeroMass
        If ``phi`` integrates to zero against either measure.
    """
    phi = ball_bump(B) if phi is None else phi
    mu, nu = mu.normalized(), nu.normalized()
    fm = mu.weights * np.asarray(phi(mu.points)).reshape(-1)
    fn = nu.weights * np.asarray(phi(nu.points)).reshape(-1)
    if fm.sum() <= 0 or fn.sum() <= 0:
        raise ZeroMass("ZeroMass: bump has no mass against one of the measures")
    a = float(fm.sum() / fn.sum())
    w = wasserstein(p, mu, nu).cost
    km, kn = fm > 0, fn > 0
    lm = DiscreteMeasure(mu.points[km], fm[km], mu.dim)
    ln = DiscreteMeasure(nu.points[kn], fn[kn] * a, nu.dim)
    lw = wasserstein(p, lm, ln).cost
    if w > 0:
        ratio = lw / w
    else:
        ratio = 0.0 if lw == 0 else math.inf
    return LocalizationRecord(w, lw, a, ratio, float(p))


def localization_trial(i: int, seed: int, resolution: int = 16):
    """Seeded pair for the localisation experiment on the unit square.

    ``mu`` has i.i.d. density in ``[1/2, 2]`` on a ``resolution**2`` grid.
    Even trials draw ``nu`` independently the same way; odd trials move
    the atoms of ``mu`` by a common random shift and a small jitter.
    """
    from .generators import gen_density_cube

    rng = np.random.default_rng([seed, i])
    R = (np.zeros(2), 1.0)
    mu = gen_density_cube(R, (0.5, 2.0), resolution, int(rng.integers(2 ** 31)))
    if i % 2 == 0:
        nu = gen_density_cube(R, (0.5, 2.0), resolution, int(rng.integers(2 ** 31)))
    else:
        h = 1.0 / resolution
        shift = rng.uniform(-0.05, 0.05, 2)
        jitter = rng.uniform(-0.25 * h, 0.25 * h, mu.points.shape)
        nu = DiscreteMeasure(mu.points + shift + jitter, mu.weights, 2)
    return mu, nu, Ball((0.5, 0.5), 0.5)


def localization_experiment(n_trials: int, seed: int, p=2.0, resolution: int = 16) -> dict:
    """Maximum localisation ratio over seeded trials for each exponent.

    ``p`` may be a number or a sequence; the result maps ``str(p)`` to
    ``{"c_loc", "mean", "finite", "trials"}``.
    """
    ps = [float(t) for t in np.atleast_1d(p)]
    ratios = {q: [] for q in ps}
    for i in range(n_trials):
        mu, nu, B = localization_trial(i, seed, resolution)
        for q in ps:
            ratios[q].append(localization_ratio(mu, nu, B, p=q).ratio)
    out = {}
    for q in ps:
        r = np.asarray(ratios[q])
        out[_ptag(q)] = {"c_loc": float(r.max()), "mean": float(r.mean()),
                         "finite": bool(np.all(np.isfinite(r))), "trials": int(n_trials)}
    return {"seed": int(seed), "resolution": int(resolution), "results": out}


# ---------------------------------------------------------------------------
# Carleson scanner
# ---------------------------------------------------------------------------

@dataclass
class ScanReport:
    records: list
    sums: dict
    depths: tuple
    p: float
    diagnostics: dict = field(default_factory=dict)

    def recompute_sums(self) -> dict:
        return _carleson_sums(self.records, self.diagnostics.get("root_id"),
                              self.diagnostics.get("root_mass"), self.p)

    def to_jsonl(self, config: Optional[dict] = None) -> str:
        lines = []
        for rec in self.records:
            lines.append(json.dumps({"id": rec["id"], f"alpha{_ptag(self.p)}": rec["alpha"],
                                     "beta2": rec["beta2"], "mass": rec["mass"]}))
        summary = {"summary": {"depths": list(self.depths), "p": self.p, "sums": self.sums,
                               **self.diagnostics}}
        if config is not None:
            summary["config"] = config
        lines.append(json.dumps(summary))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["id", f"alpha{_ptag(self.p)}", "beta2", "mass"])
        for rec in self.records:
            wr.writerow([rec["id"], repr(rec["alpha"]), repr(rec["beta2"]), repr(rec["mass"])])
        return buf.getvalue()


def _ptag(p):
    return str(int(p)) if float(p).is_integer() else str(p)


def _cube_from_id(cid: str, root: DyadicCube) -> DyadicCube:
    lev, idx = cid.split(":")
    return DyadicCube(int(lev), tuple(int(t) for t in idx.split(",")), root.origin, root.root_side)


def _carleson_sums(records, root_id, root_mass, p):
    """``S(R) = (1/mu(R)) sum_{Q in records, Q inside R} alpha(Q)^2 mu(Q)``
    for the root and for every recorded cube."""
    by_id = {}
    for rec in records:
        by_id[rec["id"]] = rec
    parsed = [(tuple(int(t) for t in r["id"].split(":")[1].split(",")), int(r["id"].split(":")[0]),
               r["alpha"] ** 2 * r["mass"]) for r in records]
    sums = {}
    targets = [(root_id, root_mass)] + [(r["id"], r["mass"]) for r in records]
    for cid, mass in targets:
        if cid in sums or mass is None or mass <= 0:
            continue
        lev = int(cid.split(":")[0])
        idx = tuple(int(t) for t in cid.split(":")[1].split(","))
        tot = 0.0
        for qidx, qlev, contrib in parsed:
            if qlev < lev:
                continue
            s = qlev - lev
            if all((a >> s) == b for a, b in zip(qidx, idx)):
                tot += contrib
        sums[cid] = tot / mass
    return sums


def _scan_one(args):
    mu, Q, p, n, spacing_div, search = args
    pts = mu.points
    inside = np.nonzero(in_cube(pts, Q.corner_point, Q.side))[0]
    z = Q.center
    dz = np.linalg.norm(pts[inside] - z, axis=1)
    c_idx = inside[int(np.argmin(dz))]
    center = pts[c_idx]
    rad = float(np.linalg.norm(pts[inside] - center, axis=1).max())
    if rad <= 0:
        return None
    B = Ball(center, rad)
    a = alpha_p(p, mu, B, n=n, spacing=rad / spacing_div, search=search)
    b = beta_p(2, mu, B, n=n)
    return {"id": Q.id, "level": Q.level, "alpha": float(a.value), "beta2": float(b.value),
            "mass": float(mu.weights[inside].sum()), "center": center.tolist(), "radius": rad,
            "atoms": int(inside.size)}


def carleson_scan(mu: DiscreteMeasure, root: DyadicCube, depths, p: float = 2.0, n: int = 1,
                  spacing_div: float = 200.0, jobs: int = 1,
                  search: Optional[PlaneSearch] = None) -> ScanReport:
    """Evaluate ``alpha_p`` and ``beta_2`` on every occupied dyadic cube.

    Cubes at generations ``depths[0]..depths[1]`` (inclusive, relative to
    ``root``) with at least ``n + 2`` atoms are evaluated on the ball
    centred at the atom nearest the cube centre and just reaching every
    atom of the cube.  Sparser cubes are skipped and counted.
    """
    lo, hi = int(depths[0]), int(depths[1])
    search = PlaneSearch(exact_witness=False) if search is None else search
    in_root = in_cube(mu.points, root.corner_point, root.side)
    pts = mu.points[in_root]
    root_mass = float(mu.weights[in_root].sum())
    if root_mass <= 0:
        raise ZeroMass("ZeroMass: root cube carries no mass")
    tasks, skipped = [], 0
    for j in range(lo, hi + 1):
        lev = root.level + j
        s = root.root_side * 2.0 ** -lev
        idx = np.floor((pts - np.asarray(root.origin)) / s).astype(np.int64)
        uniq, counts = np.unique(idx, axis=0, return_counts=True)
        for u, c in zip(uniq, counts):
            Q = DyadicCube(lev, tuple(u.tolist()), root.origin, root.root_side)
            if c < n + 2:
                skipped += 1
                continue
            tasks.append((mu, Q, p, n, spacing_div, search))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_scan_one, tasks, chunksize=4))
    else:
        results = [_scan_one(t) for t in tasks]
    records = []
    for r in results:
        if r is None:
            skipped += 1
        else:
            records.append(r)
    records.sort(key=lambda r: (r["level"], r["id"]))
    sums = _carleson_sums(records, root.id, root_mass, p)
    diag = {"skipped": skipped, "evaluated": len(records), "root_id": root.id,
            "root_mass": root_mass, "spacing_div": spacing_div, "n": n}
    return ScanReport(records, sums, (lo, hi), float(p), diag)


def per_level_sums(report: ScanReport, key: str = "alpha") -> dict:
    """``(1/mu(root)) sum_{Q at level j} value(Q)^2 mu(Q)`` per level."""
    out = {}
    for rec in report.records:
        out[rec["level"]] = out.get(rec["level"], 0.0) + rec[key] ** 2 * rec["mass"]
    m = report.diagnostics["root_mass"]
    return {k: v / m for k, v in sorted(out.items())}
