"""Synthetic measures with known flatness behaviour."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import LipschitzViolated, TooDeep
from .measures import DiscreteMeasure, _cube_parts

CANTOR_MAX_GENERATION = 8


@dataclass(frozen=True)
class GraphSpec:
    """Graph ``{(x, A(x))}`` of a Lipschitz map over a cube in R^n.

    ``profile`` maps an ``(k, n)`` array to ``(k, d - n)``; ``density`` maps
    ``(k, n)`` parameter points to positive values.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    lipschitz_constant: float
    n: int = 1
    d: int = 2
    domain: tuple = ((0.0,), 1.0)
    resolution: int = 256
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    density_bounds: tuple = (1.0, 1.0)


def _grid(corner, side, res, n):
    h = side / res
    axes = [corner[i] + (np.arange(res) + 0.5) * h for i in range(n)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n), h


def gen_graph(spec: GraphSpec, check_seed: int = 0, return_c0: bool = False):
    """Discretised ``g * (area measure)`` on a Lipschitz graph.

    Atoms sit over the cell centres of a regular grid.  The area factor is
    ``sqrt(det(I + D^T D))`` where each column of ``D`` averages the two
    secant slopes to the neighbouring nodes along that axis.

    Raises
    ------
    LipschitzViolated
        If a pair of adjacent grid nodes breaks the declared constant, or the
        density leaves its declared bounds.
    """
    n, d, res = spec.n, spec.d, spec.resolution
    corner, side = _cube_parts(spec.domain)
    if corner.size == 1 and n > 1:
        corner = np.full(n, corner[0])
    X, h = _grid(corner, side, res, n)
    A = np.asarray(spec.profile(X), dtype=float).reshape(X.shape[0], d - n)
    Ag = A.reshape((res,) * n + (d - n,))
    D = np.zeros((res,) * n + (d - n, n))
    for ax in range(n):
        diff = np.diff(Ag, axis=ax) / h
        norms = np.linalg.norm(diff, axis=-1)
        if np.any(norms > spec.lipschitz_constant * (1 + 1e-9) + 1e-12):
            raise LipschitzViolated(
                f"LipschitzViolated: secant slope {norms.max():.6g} exceeds {spec.lipschitz_constant}")
        # average of left and right secants (one-sided at the ends)
        pad_lo = np.concatenate([np.take(diff, [0], axis=ax), diff], axis=ax)
        pad_hi = np.concatenate([diff, np.take(diff, [-1], axis=ax)], axis=ax)
        D[..., ax] = 0.5 * (pad_lo + pad_hi)
    D = D.reshape(-1, d - n, n)
    G = np.eye(n)[None] + np.einsum("kji,kjl->kil", D, D)
    area = np.sqrt(np.linalg.det(G))
    if spec.density is None:
        g = np.ones(X.shape[0])
    else:
        g = np.asarray(spec.density(X), dtype=float).reshape(-1)
        lo, hi = spec.density_bounds
        if np.any(g < lo * (1 - 1e-12)) or np.any(g > hi * (1 + 1e-12)):
            raise LipschitzViolated("LipschitzViolated: density outside its declared bounds")
    mu = DiscreteMeasure(np.hstack([X, A]), g * h ** n * area, d)
    if return_c0:
        return mu, ad_regularity_constant(mu, n, side, h, seed=check_seed)
    return mu


def ad_regularity_constant(mu: DiscreteMeasure, n: int, scale: float, cell: float,
                           trials: int = 50, seed: int = 0) -> float:
    """Spot check of ``mu(B(x, r)) / r**n`` on random balls centred on the
    support with ``4 cell <= r <= scale / 4``; returns the smallest ``c0``
    with every ratio in ``[1/c0, c0]``."""
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(mu), trials)
    lo, hi = 4.0 * cell, max(scale / 4.0, 4.0 * cell)
    radii = np.exp(rng.uniform(np.log(lo), np.log(hi), trials))
    c0 = 1.0
    for i, r in zip(idx, radii):
        m = mu.weights[np.linalg.norm(mu.points - mu.points[i], axis=1) <= r].sum()
        q = m / r ** n
        c0 = max(c0, q, 1.0 / q)
    return float(c0)


def kink_profile(slope: float, at: float = 0.5):
    """``x -> slope * |x - at|`` on the first parameter coordinate."""
    return lambda X: slope * np.abs(X[:, :1] - at)


def gen_flat(resolution: int = 256, n: int = 1, d: int = 2, domain=((0.0,), 1.0)) -> DiscreteMeasure:
    """Uniform lattice measure on a coordinate n-plane."""
    spec = GraphSpec(lambda X: np.zeros((X.shape[0], d - n)), 0.0, n, d, domain, resolution)
    return gen_graph(spec)


def gen_cantor(generation: int) -> DiscreteMeasure:
    """Four-corner Cantor measure in the unit square at a given generation.

    Each square is replaced by its four corner squares of a quarter of the
    side; atoms are the centres of the final squares, weight ``4**-k``.
    Coordinates are built as integers and scaled once.

    Raises
    ------
    TooDeep
        For generations above eight.
    """
    if generation < 0 or generation > CANTOR_MAX_GENERATION:
        raise TooDeep(f"TooDeep: generation {generation} outside 0..{CANTOR_MAX_GENERATION}")
    idx = np.zeros((1, 2), dtype=np.int64)
    for _ in range(generation):
        offs = np.array([[0, 0], [0, 3], [3, 0], [3, 3]], dtype=np.int64)
        idx = (4 * idx[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    denom = 2.0 * 4 ** generation
    pts = (2 * idx + 1) / denom
    return DiscreteMeasure(pts, np.full(idx.shape[0], 4.0 ** -generation), 2)


def gen_density_cube(R, bounds, resolution: int, seed: int) -> DiscreteMeasure:
    """Cell-centre grid on ``R`` with i.i.d. uniform densities in ``bounds``."""
    low, high = float(bounds[0]), float(bounds[1])
    if not 0 < low <= high:
        raise ValueError("need 0 < low <= high")
    corner, side = _cube_parts(R)
    X, h = _grid(corner, side, resolution, corner.size)
    rng = np.random.default_rng(seed)
    dens = rng.uniform(low, high, X.shape[0]) if high > low else np.full(X.shape[0], low)
    return DiscreteMeasure(X, dens * h ** corner.size, corner.size)
