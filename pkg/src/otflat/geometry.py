"""Balls, dyadic cubes, Whitney decompositions, affine planes and bumps."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional

import numpy as np

from .errors import Degenerate, NoIntersection, OutsideDomain
from .measures import DiscreteMeasure, ScalarField

# Whitney cubes Q are the maximal dyadic cubes whose concentric dilate
# WHITNEY_BUFFER * Q sits inside the open root cube.
WHITNEY_BUFFER = 9
WHITNEY_FAR = 25
WHITNEY_MAX_LEVEL = 60


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float)).copy()
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    def __eq__(self, other):
        return (isinstance(other, Ball) and self.radius == other.radius
                and np.array_equal(self.center, other.center))

    def __hash__(self):
        return hash((tuple(self.center.tolist()), self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    def scaled(self, k: float) -> "Ball":
        """Concentric ball with radius multiplied by ``k``."""
        return Ball(self.center, k * self.radius)

    def contains(self, points, closed: bool = True) -> np.ndarray:
        d = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return d <= self.radius if closed else d < self.radius

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "radius": self.radius}


# ---------------------------------------------------------------------------
# dyadic cubes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicCube:
    """Half-open dyadic cube ``origin + root_side * 2**-level * (index + [0,1)^d)``.

    Parameters
    ----------
    level : int
        Generation below the root lattice cube.
    index : tuple of int
        Integer position at that generation.
    origin, root_side
        Corner and side of the level-0 cube of the lattice.
    """

    level: int
    index: tuple
    origin: tuple = (0.0,)
    root_side: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(k) for k in self.index))
        origin = tuple(float(t) for t in np.atleast_1d(self.origin))
        if len(origin) == 1 and len(self.index) > 1:
            origin = origin * len(self.index)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def root(cls, corner, side: float) -> "DyadicCube":
        corner = tuple(float(t) for t in np.atleast_1d(corner))
        return cls(0, (0,) * len(corner), corner, float(side))

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return self.root_side * 2.0 ** (-self.level)

    @property
    def corner_point(self) -> np.ndarray:
        return np.asarray(self.origin) + self.side * np.asarray(self.index, dtype=float)

    @property
    def center(self) -> np.ndarray:
        return self.corner_point + 0.5 * self.side

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    @property
    def id(self) -> str:
        return f"{self.level}:" + ",".join(str(k) for k in self.index)

    def children(self) -> list:
        out = []
        for off in itertools.product((0, 1), repeat=self.dim):
            out.append(DyadicCube(self.level + 1,
                                  tuple(2 * k + o for k, o in zip(self.index, off)),
                                  self.origin, self.root_side))
        return out

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise ValueError("root has no parent")
        return DyadicCube(self.level - 1, tuple(k >> 1 for k in self.index),
                          self.origin, self.root_side)

    def siblings(self) -> list:
        return self.parent().children()

    def descendants(self, level: int) -> Iterator["DyadicCube"]:
        """All subcubes at absolute generation ``level``."""
        k = level - self.level
        if k < 0:
            return
        base = [2 ** k * i for i in self.index]
        for off in itertools.product(range(2 ** k), repeat=self.dim):
            yield DyadicCube(level, tuple(b + o for b, o in zip(base, off)),
                             self.origin, self.root_side)

    def contains_cube(self, other: "DyadicCube") -> bool:
        if other.level < self.level:
            return False
        s = other.level - self.level
        return all((k >> s) == i for k, i in zip(other.index, self.index))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        c = self.corner_point
        return np.all((pts >= c) & (pts < c + self.side), axis=1)

    def cube_containing(self, x, level: int) -> "DyadicCube":
        """Lattice cube at ``level`` holding point ``x`` (half-open)."""
        s = self.root_side * 2.0 ** (-level)
        idx = np.floor((np.asarray(x, dtype=float) - np.asarray(self.origin)) / s).astype(int)
        return DyadicCube(level, tuple(idx.tolist()), self.origin, self.root_side)

    def dilate_inside(self, lam: float, corner, side) -> bool:
        """Whether the closed concentric ``lam``-dilate sits in the open cube."""
        c = self.center
        h = 0.5 * lam * self.side
        corner = np.asarray(corner, dtype=float)
        return bool(np.all(c - h > corner) and np.all(c + h < corner + side))


def cubes_at_level(root: DyadicCube, level: int) -> list:
    return list(root.descendants(level))


# ---------------------------------------------------------------------------
# Whitney decomposition of a cube interior
# ---------------------------------------------------------------------------

class WhitneyDecomposition:
    """Implicit Whitney decomposition of the interior of a cube ``R``.

    Cubes are generated lazily; :meth:`lookup` descends the lattice and
    :meth:`cubes` enumerates up to a level.  Guarantees for every cube Q:
    ``5Q`` lies in int R, ``25Q`` meets the complement, neighbours (``5Q``
    overlapping ``5Q'``) differ in side by at most a factor 2, and points of
    Q satisfy ``5 side <= dist(x, boundary) <= 10 side``.
    """

    def __init__(self, R: DyadicCube, buffer: int = WHITNEY_BUFFER):
        self.R = R
        self.buffer = buffer
        self.corner = R.corner_point
        self.side = R.side

    @property
    def d(self) -> int:
        return self.R.dim

    def _axis_range(self, j: int):
        """Admissible index range per axis at relative generation j."""
        # centre (k + 1/2) s must be more than buffer*s/2 from both faces
        lo = int(np.floor((self.buffer - 1) / 2.0)) + 1
        hi = 2 ** j - lo - 1
        return lo, hi

    def is_admissible(self, Q: DyadicCube) -> bool:
        return Q.dilate_inside(self.buffer, self.corner, self.side)

    def lookup(self, x) -> DyadicCube:
        """The Whitney cube containing ``x``.

        Raises
        ------
        OutsideDomain
            If ``x`` is not in the open cube.
        """
        x = np.asarray(x, dtype=float)
        if not (np.all(x > self.corner) and np.all(x < self.corner + self.side)):
            raise OutsideDomain("OutsideDomain: point not in the open root cube")
        for j in range(1, WHITNEY_MAX_LEVEL):
            Q = self.R.cube_containing(x, self.R.level + j)
            if self.is_admissible(Q):
                return Q
        raise OutsideDomain("OutsideDomain: point too close to the boundary to resolve")

    def level_count(self, j: int) -> int:
        """Number of Whitney cubes at relative generation ``j``."""
        lo, hi = self._axis_range(j)
        nj = max(0, hi - lo + 1)
        if j == 0:
            return nj ** self.d
        plo, phi = self._axis_range(j - 1)
        npj = max(0, phi - plo + 1)
        return nj ** self.d - (2 ** self.d) * npj ** self.d

    def volume_up_to(self, level: int) -> float:
        return float(sum(self.level_count(j) * (self.side * 2.0 ** -j) ** self.d
                         for j in range(level + 1)))

    def cubes(self, max_level: int) -> Iterator[DyadicCube]:
        """Whitney cubes with relative generation at most ``max_level``."""
        for j in range(max_level + 1):
            lo, hi = self._axis_range(j)
            plo, phi = self._axis_range(j - 1) if j > 0 else (1, 0)
            if hi < lo:
                continue
            for idx in itertools.product(range(lo, hi + 1), repeat=self.d):
                if j > 0 and all(plo <= (k >> 1) <= phi for k in idx):
                    continue
                yield DyadicCube(self.R.level + j,
                                 tuple(2 ** j * i + k for i, k in zip(self.R.index, idx)),
                                 self.R.origin, self.R.root_side)


def whitney_decompose(R: DyadicCube, max_level: Optional[int] = None):
    """Whitney decomposition of int R.

    Returns the lazy :class:`WhitneyDecomposition`; with ``max_level`` the
    list of cubes up to that relative generation is returned instead.
    """
    W = WhitneyDecomposition(R)
    if max_level is None:
        return W
    return list(W.cubes(max_level))


def whitney_lookup(decomp: WhitneyDecomposition, x) -> DyadicCube:
    return decomp.lookup(x)


def dist_to_cube_boundary(points, corner, side) -> np.ndarray:
    """Distance from points inside a cube to its boundary (0 outside)."""
    pts = np.atleast_2d(points)
    corner = np.asarray(corner, dtype=float)
    inner = np.minimum(pts - corner, corner + side - pts).min(axis=1)
    return np.maximum(inner, 0.0)


# ---------------------------------------------------------------------------
# planes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AffinePlane:
    """``base + span(frame)`` with orthonormal rows in ``frame``."""

    base: np.ndarray
    frame: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.base, dtype=float)).copy()
        F = np.atleast_2d(np.asarray(self.frame, dtype=float)).copy()
        if F.shape[1] != b.size or F.shape[0] > b.size:
            raise ValueError("frame shape does not match basepoint")
        if not np.allclose(F @ F.T, np.eye(F.shape[0]), atol=1e-12):
            raise ValueError("frame is not orthonormal")
        b.setflags(write=False)
        F.setflags(write=False)
        object.__setattr__(self, "base", b)
        object.__setattr__(self, "frame", F)

    @classmethod
    def from_frame(cls, base, frame) -> "AffinePlane":
        """Orthonormalise ``frame`` (QR) before construction."""
        F = np.atleast_2d(np.asarray(frame, dtype=float))
        q, _ = np.linalg.qr(F.T)
        return cls(base, q.T[:F.shape[0]])

    @classmethod
    def line2d(cls, angle: float, offset: float) -> "AffinePlane":
        """Line ``{x : <x, nu> = offset}`` with ``nu = (-sin, cos)(angle)``."""
        e = np.array([np.cos(angle), np.sin(angle)])
        nu = np.array([-e[1], e[0]])
        return cls(offset * nu, e[None, :])

    @property
    def n(self) -> int:
        return self.frame.shape[0]

    @property
    def d(self) -> int:
        return self.base.size

    @cached_property
    def normals(self) -> np.ndarray:
        """Orthonormal complement of the frame, shape ``(d - n, d)``."""
        full = np.linalg.svd(self.frame, full_matrices=True)[2]
        return full[self.n:]

    def project(self, points) -> np.ndarray:
        p = np.atleast_2d(points) - self.base
        return self.base + (p @ self.frame.T) @ self.frame

    def coords(self, points) -> np.ndarray:
        """In-plane coordinates relative to ``base``."""
        return (np.atleast_2d(points) - self.base) @ self.frame.T

    def dist(self, points) -> np.ndarray:
        p = np.atleast_2d(points) - self.base
        r = p - (p @ self.frame.T) @ self.frame
        return np.linalg.norm(r, axis=1)

    def to_dict(self) -> dict:
        return {"base": self.base.tolist(), "frame": self.frame.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "AffinePlane":
        obj = json.loads(text)
        return cls(obj["base"], obj["frame"])


def weighted_pca(points: np.ndarray, weights: np.ndarray):
    """Weighted centroid, eigenvalues (descending) and eigenvectors (rows)."""
    w = weights / weights.sum()
    c = w @ points
    X = points - c
    cov = (X * w[:, None]).T @ X
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    return c, vals[order], vecs[:, order].T


def fit_plane_pca(m: DiscreteMeasure, n: int) -> AffinePlane:
    """Best-fitting n-plane in the weighted least-squares sense.

    Raises
    ------
    Degenerate
        If the weighted covariance has rank below ``n``.
    """
    if m.is_empty or m.weights.sum() <= 0:
        raise Degenerate("Degenerate: empty measure")
    c, vals, vecs = weighted_pca(m.points, m.weights)
    scale = max(float(np.abs(m.points - c).max()), 1e-300) ** 2
    if n > 0 and vals[n - 1] <= 1e-14 * scale:
        raise Degenerate(f"Degenerate: covariance rank below {n}")
    return AffinePlane(c, vecs[:n])


def plane_residual(m: DiscreteMeasure, L: AffinePlane) -> float:
    return float(m.weights @ L.dist(m.points) ** 2)


def sample_plane_measure(L: AffinePlane, B: Ball, spacing: float,
                         reach: float = 3.0, anchor=None) -> DiscreteMeasure:
    """Cell-centred lattice on ``L`` restricted to the open ball ``reach * B``.

    The lattice is ``anchor + (k + 1/2) * spacing`` along the frame, with
    ``anchor`` defaulting to the foot of the perpendicular from the centre
    of ``B``.  Each node carries weight ``spacing ** n``.

    Raises
    ------
    NoIntersection
        If ``L`` misses the open ball ``reach * B``.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    R = reach * B.radius
    foot = L.project(B.center)[0]
    h = float(np.linalg.norm(B.center - foot))
    if h >= R:
        raise NoIntersection("NoIntersection: plane misses the ball")
    anchor = foot if anchor is None else np.asarray(anchor, dtype=float)
    rho = np.sqrt(R * R - h * h)
    # in-plane position of the foot relative to the anchor
    f = L.frame @ (foot - anchor)
    rngs = [np.arange(int(np.floor((fi - rho) / spacing - 1)), int(np.ceil((fi + rho) / spacing)) + 1)
            for fi in f]
    grid = np.stack(np.meshgrid(*rngs, indexing="ij"), axis=-1).reshape(-1, L.n)
    coords = (grid + 0.5) * spacing
    pts = anchor + coords @ L.frame
    keep = np.linalg.norm(pts - B.center, axis=1) < R
    pts = pts[keep]
    return DiscreteMeasure(pts, np.full(pts.shape[0], spacing ** L.n), L.d)


# ---------------------------------------------------------------------------
# bumps
# ---------------------------------------------------------------------------

def _bump_profile(t: np.ndarray) -> np.ndarray:
    return np.where(t <= 2.0, 1.0, np.where(t < 3.0, (3.0 - t) ** 2, 0.0))


@dataclass(frozen=True, eq=False)
class BumpFunction:
    """Radial bump: 1 on ``2B``, ``(3 - |z|)**2`` on the annulus, 0 off ``3B``."""

    ball: Ball
    c2: float = 1.0

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        t = np.linalg.norm(np.atleast_2d(x) - self.ball.center, axis=1) / self.ball.radius
        out = _bump_profile(t)
        return out[0] if single else out

    @property
    def lipschitz_bound(self) -> float:
        return 2.0 / self.ball.radius

    def as_field(self) -> ScalarField:
        return ScalarField(self.__call__, self.lipschitz_bound, "bump")


def standard_bump(B: Ball) -> BumpFunction:
    return BumpFunction(B, 1.0)


def cube_bump(R) -> ScalarField:
    """``min(rho, dist(x, boundary R))**2 / rho**2`` with ``rho = side/4``."""
    if isinstance(R, DyadicCube):
        corner, side = R.corner_point, R.side
    else:
        corner, side = np.atleast_1d(np.asarray(R[0], dtype=float)), float(R[1])
    rho = side / 4.0

    def ev(x):
        dd = dist_to_cube_boundary(x, corner, side)
        return np.minimum(dd, rho) ** 2 / rho ** 2

    return ScalarField(ev, 2.0 / rho, "cube_bump")
