"""Finite weighted point sets and the elementary operations on them."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NegativeWeight

# weights below this fraction of the total are dropped after reweighting
DROP_FRACTION = 1e-15


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """A finite measure ``sum_i w_i delta_{x_i}`` on R^d.

    Parameters
    ----------
    points : (k, d) array_like
        Atom locations. Stored in insertion order, never deduplicated.
    weights : (k,) array_like
        Nonnegative masses.
    dim : int, optional
        Ambient dimension; inferred from ``points`` when omitted. Required
        for an empty measure given as a flat list.
    """

    points: np.ndarray
    weights: np.ndarray
    dim: int = -1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        d = self.dim
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            if d < 0:
                d = 1 if pts.size == w.size else (0 if pts.size == 0 else pts.size)
            pts = pts.reshape(-1, max(d, 1)) if pts.size else np.zeros((0, max(d, 1)))
        if d < 0:
            d = pts.shape[1]
        if pts.shape[1] != d:
            raise ValueError(f"points have dimension {pts.shape[1]}, expected {d}")
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights differ in length")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("non-finite coordinate or weight")
        if np.any(w < 0):
            raise NegativeWeight("negative weight in measure")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "dim", int(d))

    def __len__(self):
        return self.weights.shape[0]

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    @classmethod
    def empty(cls, dim: int) -> "DiscreteMeasure":
        return cls(np.zeros((0, dim)), np.zeros(0), dim)

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, self.weights * factor, self.dim)

    def normalized(self) -> "DiscreteMeasure":
        return self.scaled(1.0 / total_mass(self))

    def subset(self, idx) -> "DiscreteMeasure":
        idx = np.asarray(idx)
        return DiscreteMeasure(self.points[idx], self.weights[idx], self.dim)

    # -- serialization -------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow([f"x{i}" for i in range(self.dim)] + ["w"])
        for x, w in zip(self.points, self.weights):
            wr.writerow([repr(float(t)) for t in x] + [repr(float(w))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteMeasure":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty CSV")
        header = [h.strip() for h in rows[0]]
        d = len(header) - 1
        if header != [f"x{i}" for i in range(d)] + ["w"]:
            raise ValueError(f"bad CSV header {rows[0]!r}")
        body = [r for r in rows[1:] if r]
        arr = np.array([[float(t) for t in r] for r in body], dtype=float).reshape(-1, d + 1)
        return cls(arr[:, :d], arr[:, d], d)

    def to_json(self) -> str:
        return json.dumps({"dim": self.dim, "points": self.points.tolist(),
                           "weights": self.weights.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        obj = json.loads(text)
        d = int(obj["dim"])
        pts = np.asarray(obj["points"], dtype=float).reshape(-1, d)
        return cls(pts, obj["weights"], d)


def load_measure(path: str) -> DiscreteMeasure:
    """Read a measure from a ``.csv`` or ``.json`` file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.lower().endswith(".json"):
        return DiscreteMeasure.from_json(text)
    return DiscreteMeasure.from_csv(text)


def save_measure(m: DiscreteMeasure, path: str) -> None:
    text = m.to_json() if path.lower().endswith(".json") else m.to_csv()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


@dataclass(frozen=True)
class ScalarField:
    """A real function on R^d, evaluated row-wise on ``(k, d)`` arrays.

    ``evaluator`` must accept an array of points and return one value per
    row.  ``lipschitz_bound`` is advisory metadata.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    lipschitz_bound: Optional[float] = None
    name: str = field(default="", compare=False)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        out = np.asarray(self.evaluator(np.atleast_2d(x)), dtype=float).reshape(-1)
        return out[0] if single else out

    @classmethod
    def constant(cls, c: float) -> "ScalarField":
        return cls(lambda x: np.full(x.shape[0], float(c)), 0.0, f"const({c})")


def total_mass(m: DiscreteMeasure) -> float:
    return float(m.weights.sum())


def reweight(m: DiscreteMeasure, f) -> DiscreteMeasure:
    """Multiply each atom's weight by ``f`` at its location.

    Atoms whose new weight falls below ``DROP_FRACTION`` times the new total
    are dropped.

    Raises
    ------
    NegativeWeight
        If ``f`` is negative at a support point.
    """
    if m.is_empty:
        return m
    vals = np.asarray(f(m.points), dtype=float).reshape(-1)
    if np.any(vals < 0):
        raise NegativeWeight("reweighting function is negative on the support")
    w = m.weights * vals
    tot = w.sum()
    keep = w > DROP_FRACTION * tot if tot > 0 else np.zeros(w.shape, bool)
    return DiscreteMeasure(m.points[keep], w[keep], m.dim)


def restrict(m: DiscreteMeasure, region: Callable[[np.ndarray], np.ndarray]) -> DiscreteMeasure:
    """Keep the atoms where the vectorised predicate ``region`` is true."""
    if m.is_empty:
        return m
    mask = np.asarray(region(m.points), dtype=bool).reshape(-1)
    return DiscreteMeasure(m.points[mask], m.weights[mask], m.dim)


def push_forward(m: DiscreteMeasure, T, merge: bool = False) -> DiscreteMeasure:
    """Image measure under ``T`` (vectorised over rows).

    With ``merge=True`` atoms landing on identical coordinates are combined
    and the result is sorted lexicographically.
    """
    if m.is_empty:
        return m
    y = np.asarray(T(m.points), dtype=float).reshape(len(m), -1)
    if not merge:
        return DiscreteMeasure(y, m.weights.copy(), y.shape[1])
    uniq, inv = np.unique(y, axis=0, return_inverse=True)
    w = np.bincount(inv.reshape(-1), weights=m.weights, minlength=uniq.shape[0])
    return DiscreteMeasure(uniq, w, y.shape[1])


def in_cube(points: np.ndarray, corner, side: float) -> np.ndarray:
    """Half-open membership ``corner <= x < corner + side`` per coordinate."""
    corner = np.asarray(corner, dtype=float)
    return np.all((points >= corner) & (points < corner + side), axis=1)


def mean_over_cube(m: DiscreteMeasure, Q) -> float:
    """``m(Q) / vol(Q)`` for a half-open cube ``Q``.

    ``Q`` is anything with ``corner_point`` and ``side`` attributes (such as
    :class:`otflat.geometry.DyadicCube`) or a ``(corner, side)`` pair.
    """
    corner, side = _cube_parts(Q)
    vol = side ** len(corner)
    if m.is_empty:
        return 0.0
    return float(m.weights[in_cube(m.points, corner, side)].sum()) / vol


def _cube_parts(Q):
    if hasattr(Q, "corner_point"):
        return np.asarray(Q.corner_point, dtype=float), float(Q.side)
    corner, side = Q
    return np.atleast_1d(np.asarray(corner, dtype=float)), float(side)
