"""Structured grids over unions of axis-aligned rectangles.

Nodes are identified by integer lattice indices relative to the lower-left
corner of the domain's bounding box; floating-point coordinates are derived
data and never used for membership or classification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import ndimage

from .exceptions import DisconnectedDomain, NonDivisibleSpacing

_MAX_DENOMINATOR = 10**6


def as_fraction(x: float | Fraction | str) -> Fraction:
    """Exact rational for a user-supplied length (0.3 -> 3/10, 1/3 -> 1/3)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x).limit_denominator(_MAX_DENOMINATOR)
    return Fraction(x).limit_denominator(_MAX_DENOMINATOR)


class NodeClass(IntEnum):
    INTERIOR = 0
    DIRICHLET = 1
    NEUMANN = 2
    CORNER = 3
    ARTIFICIAL = 4


@dataclass(frozen=True)
class Domain:
    """Union of closed axis-aligned rectangles ``(xmin, xmax, ymin, ymax)``.

    ``artificial_faces`` lists lines ``(axis, value)`` (axis 0 means the line
    ``x1 = value``) whose boundary nodes are truncation artefacts rather than
    part of the physical boundary.
    """

    rectangles: tuple[tuple[float, float, float, float], ...]
    name: str = "domain"
    artificial_faces: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        rects = tuple(tuple(float(v) for v in r) for r in self.rectangles)
        if not rects:
            raise ValueError("a domain needs at least one rectangle")
        for r in rects:
            if len(r) != 4:
                raise ValueError(f"rectangle {r} must be (xmin, xmax, ymin, ymax)")
            if not (r[1] > r[0] and r[3] > r[2]):
                raise ValueError(f"rectangle {r} has non-positive area")
        object.__setattr__(self, "rectangles", rects)
        object.__setattr__(
            self, "artificial_faces", tuple((int(a), float(v)) for a, v in self.artificial_faces)
        )

    @classmethod
    def unit_square(cls) -> Domain:
        return cls(((0.0, 1.0, 0.0, 1.0),), name="unit_square")

    @classmethod
    def lshape(cls) -> Domain:
        """``[(0,1) x (-1,1)] U [(-1,1) x (0,1)]``, re-entrant corner at the origin."""
        return cls(((0.0, 1.0, -1.0, 1.0), (-1.0, 1.0, 0.0, 1.0)), name="lshape")

    @classmethod
    def slab(cls, length: float = 1.0) -> Domain:
        """Truncated half-space ``(0, L) x (0, 1)``; only ``x1 = 0`` is physical."""
        return cls(
            ((0.0, float(length), 0.0, 1.0),),
            name="slab",
            artificial_faces=((0, float(length)), (1, 0.0), (1, 1.0)),
        )

    @classmethod
    def from_name(cls, name: str, **kwargs) -> Domain:
        builders = {"unit_square": cls.unit_square, "lshape": cls.lshape, "slab": cls.slab}
        try:
            return builders[name](**kwargs)
        except KeyError:
            raise ValueError(f"unknown domain {name!r}; expected one of {sorted(builders)}") from None


@dataclass(frozen=True)
class MixedSplit:
    """Dirichlet/Neumann partition of a rectangular boundary.

    Boundary nodes on a Neumann line only are ``NEUMANN``, nodes on both a
    Neumann and a Dirichlet line are ``CORNER``, everything else is Dirichlet.
    The default is the split of the unit square with Dirichlet data on the
    left/right faces and homogeneous Neumann data on the top/bottom faces.
    """

    dirichlet_faces: tuple[tuple[int, float], ...] = ((0, 0.0), (0, 1.0))
    neumann_faces: tuple[tuple[int, float], ...] = ((1, 0.0), (1, 1.0))


@dataclass(frozen=True)
class StencilDirection:
    offset: tuple[int, int]

    def __post_init__(self):
        p, q = (int(v) for v in self.offset)
        if (p, q) == (0, 0) or math.gcd(abs(p), abs(q)) != 1:
            raise ValueError(f"stencil offset {self.offset} must be a primitive lattice vector")
        object.__setattr__(self, "offset", (p, q))

    @property
    def orthogonal(self) -> StencilDirection:
        p, q = self.offset
        return StencilDirection((-q, p))

    @property
    def norm(self) -> float:
        return math.hypot(*self.offset)

    def __neg__(self) -> StencilDirection:
        return StencilDirection((-self.offset[0], -self.offset[1]))


def stencil_directions(width: int = 3) -> list[StencilDirection]:
    """All primitive offsets with max-norm <= width, one per +/- pair.

    Representatives are taken in the half-plane ``q > 0`` or ``q == 0, p > 0``
    and ordered by max-norm, so the axis directions come first.
    """
    if width < 1:
        raise ValueError("stencil width must be >= 1")
    out = []
    for p in range(-width, width + 1):
        for q in range(0, width + 1):
            if (q == 0 and p <= 0) or math.gcd(abs(p), q) != 1:
                continue
            out.append((p, q))
    out.sort(key=lambda o: (max(abs(o[0]), abs(o[1])), abs(o[0]) + abs(o[1]), -o[0] if o[1] else 0, o))
    return [StencilDirection(o) for o in out]


def stencil_pairs(width: int = 3) -> list[tuple[StencilDirection, StencilDirection]]:
    """Orthogonal direction pairs ``(theta, theta_perp)``, axis pair first."""
    pairs = []
    for d in stencil_directions(width):
        p, q = d.offset
        if p > 0 and q >= 0:
            pairs.append((d, d.orthogonal))
    pairs.sort(key=lambda pr: (max(pr[0].offset), pr[0].offset[0] + pr[0].offset[1], -pr[0].offset[0]))
    return pairs


@dataclass(frozen=True, eq=False)
class Grid:
    """Lattice discretization of a :class:`Domain` with spacing ``h``.

    Attributes:
        ij: ``(n, 2)`` integer lattice indices of the nodes.
        coords: ``(n, 2)`` float coordinates.
        classes: ``(n,)`` :class:`NodeClass` codes.
        normals: ``(n, 2)`` integer outward normals of the Neumann part of the
            boundary (zero away from NEUMANN and CORNER nodes).
    """

    domain: Domain
    h_exact: Fraction
    origin: tuple[Fraction, Fraction]
    covered: np.ndarray
    index: np.ndarray
    ij: np.ndarray
    classes: np.ndarray
    normals: np.ndarray
    split: MixedSplit | None = None
    _reach_cache: dict = field(default_factory=dict, repr=False)

    @property
    def h(self) -> float:
        return float(self.h_exact)

    @property
    def n_nodes(self) -> int:
        return len(self.ij)

    def __len__(self) -> int:
        return self.n_nodes

    @cached_property
    def coords(self) -> np.ndarray:
        x0, y0 = float(self.origin[0]), float(self.origin[1])
        out = np.empty(self.ij.shape, dtype=float)
        out[:, 0] = x0 + self.ij[:, 0] * self.h
        out[:, 1] = y0 + self.ij[:, 1] * self.h
        # snap exact lattice values so printed coordinates are clean
        return np.round(out, 15) + 0.0

    def mask(self, *kinds: NodeClass) -> np.ndarray:
        return np.isin(self.classes, [int(k) for k in kinds])

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.classes == NodeClass.INTERIOR)

    def node_at(self, x1: float, x2: float) -> int:
        """Node index at a coordinate; raises ``KeyError`` if it is not a node."""
        i = (as_fraction(x1) - self.origin[0]) / self.h_exact
        j = (as_fraction(x2) - self.origin[1]) / self.h_exact
        if i.denominator != 1 or j.denominator != 1:
            raise KeyError(f"({x1}, {x2}) is not a lattice point")
        k = self.lookup(int(i), int(j))
        if k < 0:
            raise KeyError(f"({x1}, {x2}) is outside the domain")
        return k

    def lookup(self, i, j):
        """Vectorized lattice-index lookup; -1 where there is no node."""
        i = np.asarray(i)
        j = np.asarray(j)
        nx, ny = self.index.shape
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.full(np.broadcast(i, j).shape, -1, dtype=np.int64)
        out[ok] = self.index[np.broadcast_to(i, out.shape)[ok], np.broadcast_to(j, out.shape)[ok]]
        return out if out.ndim else int(out)

    def _in_closed(self, X: np.ndarray, Y: np.ndarray, D: int) -> np.ndarray:
        """Membership of points ``(X/D, Y/D)`` (lattice units) in the closed domain."""
        cov = np.pad(self.covered, 1)
        lim_x, lim_y = cov.shape[0] - 1, cov.shape[1] - 1
        fx, rx = np.divmod(X, D)
        fy, ry = np.divmod(Y, D)
        out = np.zeros(X.shape, dtype=bool)
        for dx, mx in ((0, None), (1, rx == 0)):
            for dy, my in ((0, None), (1, ry == 0)):
                cx = np.clip(fx - dx + 1, 0, lim_x)
                cy = np.clip(fy - dy + 1, 0, lim_y)
                hit = cov[cx, cy]
                if mx is not None:
                    hit = hit & mx
                if my is not None:
                    hit = hit & my
                out |= hit
        return out

    def _step_inside(self, start: np.ndarray, offset: tuple[int, int]) -> np.ndarray:
        """Whether the closed segment ``start -> start + offset`` lies in the domain."""
        p, q = offset
        D = 2 * max(1, abs(p)) * max(1, abs(q))
        ok = self.lookup(start[:, 0] + p, start[:, 1] + q) >= 0
        for j in range(D // 2):
            X = D * start[:, 0] + (2 * j + 1) * p
            Y = D * start[:, 1] + (2 * j + 1) * q
            ok &= self._in_closed(X, Y, D)
        return ok

    def reach(self, offset: tuple[int, int], k_max: int = 2) -> np.ndarray:
        """Forward reach of every node along ``offset`` (cached)."""
        key = (tuple(offset), int(k_max))
        if key not in self._reach_cache:
            k = np.zeros(self.n_nodes, dtype=np.int64)
            alive = np.ones(self.n_nodes, dtype=bool)
            off = np.asarray(offset, dtype=np.int64)
            for m in range(1, k_max + 1):
                start = self.ij + (m - 1) * off
                alive &= self._step_inside(start, tuple(offset))
                k[alive] = m
            k.setflags(write=False)
            self._reach_cache[key] = k
        return self._reach_cache[key]

    def neighbors(self, node: int, direction, k_max: int = 2) -> tuple[int, int]:
        return neighbors(self, node, direction, k_max)

    @cached_property
    def physical_boundary(self) -> np.ndarray:
        """Boundary nodes touching at least one boundary edge off the artificial faces."""
        boundary = self.classes != NodeClass.INTERIOR
        if not self.domain.artificial_faces:
            return boundary
        on_art = {}
        for axis, value in self.domain.artificial_faces:
            idx = (as_fraction(value) - self.origin[axis]) / self.h_exact
            if idx.denominator == 1:
                on_art.setdefault(axis, set()).add(int(idx))
        cov = np.pad(self.covered, 1)
        out = np.zeros(self.n_nodes, dtype=bool)
        for node in np.flatnonzero(boundary):
            i, j = (int(v) for v in self.ij[node])
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                if self.lookup(i + di, j + dj) < 0:
                    continue
                # cells on either side of the edge, in padded coordinates
                if di:
                    ci = min(i, i + di) + 1
                    sides = int(cov[ci, j]) + int(cov[ci, j + 1])
                    line_axis, line_idx = 1, j
                else:
                    cj = min(j, j + dj) + 1
                    sides = int(cov[i, cj]) + int(cov[i + 1, cj])
                    line_axis, line_idx = 0, i
                if sides != 1:
                    continue  # interior edge
                if line_idx not in on_art.get(line_axis, ()):
                    out[node] = True
        return out


def _face_hits(grid_ij, origin, h, faces) -> np.ndarray:
    """Boolean mask of nodes lying on any of the lines ``(axis, value)``."""
    hit = np.zeros(len(grid_ij), dtype=bool)
    for axis, value in faces:
        idx = (as_fraction(value) - origin[axis]) / h
        if idx.denominator == 1:
            hit |= grid_ij[:, axis] == int(idx)
    return hit


def present_at(present: np.ndarray, ij: np.ndarray) -> np.ndarray:
    nx, ny = present.shape
    ok = (ij[:, 0] >= 0) & (ij[:, 0] < nx) & (ij[:, 1] >= 0) & (ij[:, 1] < ny)
    out = np.zeros(len(ij), dtype=bool)
    out[ok] = present[ij[ok, 0], ij[ok, 1]]
    return out


def build_grid(domain: Domain, h: float, bc_split: MixedSplit | None = None) -> Grid:
    """Discretize ``domain`` with spacing ``h``.

    Raises:
        NonDivisibleSpacing: if ``h`` does not tile every rectangle.
        DisconnectedDomain: if the rectangles do not form one connected region.
    """
    hf = as_fraction(h)
    if hf <= 0:
        raise NonDivisibleSpacing(f"spacing must be positive, got {h}")
    rects = [tuple(as_fraction(v) for v in r) for r in domain.rectangles]
    x0 = min(r[0] for r in rects)
    y0 = min(r[2] for r in rects)
    cells = []
    for r in rects:
        idx = [(r[0] - x0) / hf, (r[1] - x0) / hf, (r[2] - y0) / hf, (r[3] - y0) / hf]
        if any(v.denominator != 1 for v in idx):
            raise NonDivisibleSpacing(f"h={h} does not tile rectangle {tuple(map(float, r))}")
        cells.append([int(v) for v in idx])
    nx = max(c[1] for c in cells)
    ny = max(c[3] for c in cells)
    covered = np.zeros((nx, ny), dtype=bool)
    for a, b, c, d in cells:
        covered[a:b, c:d] = True
    _, n_comp = ndimage.label(covered)
    if n_comp != 1:
        raise DisconnectedDomain(f"domain {domain.name!r} has {n_comp} connected components")

    # node (i, j) is in the closed domain iff one of its four cells is covered
    cov = np.pad(covered, 1)
    around = np.stack(
        [cov[:-1, :-1], cov[1:, :-1], cov[:-1, 1:], cov[1:, 1:]], axis=0
    )  # cells (i-1,j-1), (i,j-1), (i-1,j), (i,j) for node (i,j)
    present = around.any(axis=0)
    interior = around.all(axis=0)
    ii, jj = np.nonzero(present)
    ij = np.stack([ii, jj], axis=1).astype(np.int64)
    index = np.full(present.shape, -1, dtype=np.int64)
    index[ii, jj] = np.arange(len(ij))

    classes = np.where(interior[ii, jj], NodeClass.INTERIOR, NodeClass.DIRICHLET).astype(np.int8)
    boundary = classes != NodeClass.INTERIOR
    normals = np.zeros_like(ij)
    origin = (x0, y0)
    if bc_split is not None:
        on_n = _face_hits(ij, origin, hf, bc_split.neumann_faces) & boundary
        on_d = _face_hits(ij, origin, hf, bc_split.dirichlet_faces) & boundary
        classes[on_n & ~on_d] = NodeClass.NEUMANN
        classes[on_n & on_d] = NodeClass.CORNER
        for axis, value in bc_split.neumann_faces:
            line = _face_hits(ij, origin, hf, [(axis, value)]) & on_n
            step = np.zeros(2, dtype=np.int64)
            step[axis] = 1
            ahead = ij[line] + step
            inside = present_at(present, ahead)
            normals[line, axis] = np.where(inside, -1, 1)
    if domain.artificial_faces:
        art = _face_hits(ij, origin, hf, domain.artificial_faces) & boundary
        classes[art] = NodeClass.ARTIFICIAL
    for arr in (ij, index, classes, normals, covered):
        arr.setflags(write=False)
    return Grid(
        domain=domain,
        h_exact=hf,
        origin=origin,
        covered=covered,
        index=index,
        ij=ij,
        classes=classes,
        normals=normals,
        split=bc_split,
    )


def neighbors(grid: Grid, node: int, direction, k_max: int = 2) -> tuple[int, int]:
    """Forward and backward reach ``(k_plus, k_minus)`` of ``node`` along ``direction``.

    ``k_plus`` is the largest ``m <= k_max`` such that the segment from the node
    to ``node + m * offset`` stays in the closed domain; 0 if the first step
    already leaves it.
    """
    offset = direction.offset if isinstance(direction, StencilDirection) else tuple(direction)
    fwd = grid.reach(offset, k_max)[node]
    bwd = grid.reach((-offset[0], -offset[1]), k_max)[node]
    return int(fwd), int(bwd)


def symmetric_reach(grid: Grid, direction, k_max: int = 2) -> np.ndarray:
    offset = direction.offset if isinstance(direction, StencilDirection) else tuple(direction)
    return np.minimum(grid.reach(offset, k_max), grid.reach((-offset[0], -offset[1]), k_max))


def diagonal_nodes(grid: Grid) -> np.ndarray:
    """Nodes on the line ``x1 = x2`` sorted by ``x1``."""
    c = grid.coords
    on = np.flatnonzero(np.isclose(c[:, 0], c[:, 1], rtol=0, atol=1e-12))
    return on[np.argsort(c[on, 0], kind="stable")]


__all__: Sequence[str] = [
    "Domain",
    "Grid",
    "MixedSplit",
    "NodeClass",
    "StencilDirection",
    "build_grid",
    "diagonal_nodes",
    "neighbors",
    "stencil_directions",
    "stencil_pairs",
    "symmetric_reach",
]
