"""Bellman Hamiltonian ``H(A) = sup_{B in S1} (-B:A + f sqrt(det B))``.

``S1`` is the set of symmetric positive semidefinite matrices with unit trace.
In two dimensions the supremum has the closed form

    H(A) = -(l1 + l2)/2 + sqrt((l1 - l2)**2 + f**2)/2,

with ``l1, l2`` the eigenvalues of ``A``. Its zero set on positive
semidefinite ``A`` is ``det A = f**2 / 4``. The ``monge-ampere``
normalization rescales the source by ``sqrt(2)`` so that the zero set becomes
``det A = f**2 / 2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .exceptions import NegativeSource, UnsupportedDimension

NORMALIZATIONS = ("hjb", "monge-ampere")


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric matrix stored by its upper triangle, row by row."""

    dim: int
    entries: tuple[float, ...]

    def __post_init__(self):
        if len(self.entries) != self.dim * (self.dim + 1) // 2:
            raise ValueError(f"{self.dim}x{self.dim} symmetric matrix needs "
                             f"{self.dim * (self.dim + 1) // 2} entries")
        object.__setattr__(self, "entries", tuple(float(e) for e in self.entries))

    @classmethod
    def from_array(cls, a) -> SymMatrix:
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        sym = 0.5 * (a + a.T)
        d = a.shape[0]
        return cls(d, tuple(sym[i, j] for i in range(d) for j in range(i, d)))

    @classmethod
    def diag(cls, *values: float) -> SymMatrix:
        return cls.from_array(np.diag(values))

    def to_array(self) -> np.ndarray:
        out = np.empty((self.dim, self.dim))
        it = iter(self.entries)
        for i in range(self.dim):
            for j in range(i, self.dim):
                out[i, j] = out[j, i] = next(it)
        return out

    def __matmul__(self, other):
        return self.to_array() @ other


MatrixLike = Union[SymMatrix, np.ndarray, list]


def _as_array(a: MatrixLike) -> np.ndarray:
    return a.to_array() if isinstance(a, SymMatrix) else np.asarray(a, dtype=float)


def _check_source(f) -> None:
    if np.any(np.asarray(f) < 0):
        raise NegativeSource(f"source must be nonnegative, got min {np.min(f)}")


def hamiltonian_2d(a11, a12, a22, f):
    """Vectorized closed form from the entries of ``A`` (no eigensolve)."""
    a11, a12, a22, f = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a11, a12, a22, f)))
    return -0.5 * (a11 + a22) + 0.5 * np.hypot(np.hypot(a11 - a22, 2.0 * a12), f)


def hamiltonian_exact_2d(A: MatrixLike, f: float) -> float:
    """Exact ``H(A)`` for a symmetric 2x2 ``A`` and a scalar source ``f >= 0``."""
    _check_source(f)
    a = _as_array(A)
    if a.shape != (2, 2):
        raise UnsupportedDimension(f"closed form is for d=2, got shape {a.shape}")
    return float(hamiltonian_2d(a[0, 0], 0.5 * (a[0, 1] + a[1, 0]), a[1, 1], f))


def directional_value(a1, a2, f):
    """Inner maximum over ``b`` of ``-(b a1 + (1-b) a2) + f sqrt(b (1-b))``.

    ``a1``, ``a2`` are second differences along an orthogonal direction pair;
    ``b`` weights ``a1``. Returns ``(value, b_star)``. For ``f == 0`` the
    maximizer is the vertex selecting the smaller of ``a1, a2``; ties give
    ``b_star = 0``. Works elementwise on arrays.
    """
    a1, a2, f = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a1, a2, f)))
    diff = a2 - a1
    root = np.hypot(diff, f)
    value = -0.5 * (a1 + a2) + 0.5 * root
    with np.errstate(invalid="ignore", divide="ignore"):
        b = 0.5 * (1.0 + diff / root)
    b = np.where(f > 0, b, np.where(a1 < a2, 1.0, 0.0))
    b = np.clip(b, 0.0, 1.0)
    if value.ndim == 0:
        return float(value), float(b)
    return value, b


def effective_source(f, normalization: str = "hjb"):
    """Source entering ``H`` under the chosen normalization."""
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}")
    f = np.asarray(f, dtype=float)
    _check_source(f)
    return f * math.sqrt(2.0) if normalization == "monge-ampere" else f


class SourceField:
    """Nonnegative source sampled pointwise at grid nodes.

    Args:
        f: constant, or callable ``f(x1, x2)`` evaluated on coordinate arrays.
        normalization: ``"hjb"`` uses ``f`` as the coefficient of
            ``sqrt(det B)``; ``"monge-ampere"`` makes ``H = 0`` equivalent to
            ``det A = f**2 / 2`` for positive semidefinite ``A``.
    """

    def __init__(self, f: float | Callable = 0.0, normalization: str = "hjb"):
        if normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if not callable(f):
            _check_source(f)
        self.f = f
        self.normalization = normalization

    def raw(self, coords: np.ndarray) -> np.ndarray:
        if callable(self.f):
            vals = np.asarray(self.f(coords[:, 0], coords[:, 1]), dtype=float)
            vals = np.broadcast_to(vals, (len(coords),)).astype(float)
        else:
            vals = np.full(len(coords), float(self.f))
        return vals

    def values(self, grid_or_coords) -> np.ndarray:
        """Effective source (after normalization) at every node."""
        coords = getattr(grid_or_coords, "coords", grid_or_coords)
        return effective_source(self.raw(np.asarray(coords, dtype=float)), self.normalization)

    def __repr__(self):
        return f"SourceField(f={self.f!r}, normalization={self.normalization!r})"


# -- brute-force oracle ------------------------------------------------------


def _frames_2d(resolution: int) -> np.ndarray:
    theta = np.arange(resolution) * (math.pi / resolution)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], axis=1)  # (n, 2, 2) rows = axes


def _frames_3d(resolution: int) -> np.ndarray:
    ang = np.arange(resolution) * (math.pi / resolution)
    frames = []
    for a, b, g in itertools.product(ang, np.arange(resolution + 1) * (math.pi / resolution), ang):
        ca, sa, cb, sb, cg, sg = math.cos(a), math.sin(a), math.cos(b), math.sin(b), math.cos(g), math.sin(g)
        rz1 = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
        ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
        rz2 = np.array([[cg, -sg, 0], [sg, cg, 0], [0, 0, 1]])
        frames.append((rz1 @ ry @ rz2).T)
    return np.asarray(frames)


def _simplex(d: int, resolution: int) -> np.ndarray:
    """Squared barycentric lattice on the ``d``-simplex.

    Lattice points ``k / resolution`` are mapped to ``k**2 / sum(k**2)``; the
    map clusters samples near the vertices where ``sqrt(det B)`` has infinite
    slope, and lattices at doubled resolution still contain the coarser one.
    """
    pts = [c for c in itertools.product(range(resolution + 1), repeat=d - 1) if sum(c) <= resolution]
    k = np.array([list(c) + [resolution - sum(c)] for c in pts], dtype=float)
    sq = k**2
    return sq / sq.sum(axis=1, keepdims=True)


def hamiltonian_oracle(A: MatrixLike, f: float, resolution: int = 64) -> float:
    """Lower bound of ``H(A)`` by maximizing over a finite subset of ``S1``.

    Candidates are ``B = R diag(w) R^T`` with eigen-frames ``R`` on a uniform
    angle lattice (``resolution`` angles per rotation parameter) and weights
    ``w`` from a (squared) barycentric lattice with ``resolution`` steps per
    coordinate. Doubling the resolution refines both lattices, so the bound
    never decreases.
    """
    _check_source(f)
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    a = _as_array(A)
    d = a.shape[0]
    if d not in (2, 3) or a.shape != (d, d):
        raise UnsupportedDimension(f"oracle supports d in {{2, 3}}, got shape {a.shape}")
    a = 0.5 * (a + a.T)
    frames = _frames_2d(resolution) if d == 2 else _frames_3d(resolution)
    # curvature of A along each frame axis: (n_frames, d)
    curv = np.einsum("nki,ij,nkj->nk", frames, a, frames)
    w = _simplex(d, resolution)
    sqrt_det = np.sqrt(np.prod(w, axis=1))
    best = -np.inf
    chunk = max(1, 2_000_000 // max(1, len(w)))
    for start in range(0, len(curv), chunk):
        vals = -(curv[start:start + chunk] @ w.T) + f * sqrt_det[None, :]
        best = max(best, float(vals.max()))
    return best

