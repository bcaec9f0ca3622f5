"""Monotone wide-stencil discretization of ``H(D^2 u) = 0``.

At an interior node the Hessian is probed with centered second differences
along orthogonal lattice direction pairs; the discrete Hamiltonian is the
maximum over pairs of :func:`directional_value`. Boundary nodes carry the
boundary rule of their class. Every residual row is non-increasing in the
values at other nodes, which is what makes Howard's iteration well posed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .exceptions import InsufficientReach, NoAdmissibleDirection
from .grid import Grid, NodeClass, StencilDirection, stencil_pairs, symmetric_reach
from .hamiltonian import SourceField, directional_value

REACH_MODES = ("nearest", "widest")


@dataclass
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(f"expected {self.grid.n_nodes} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable) -> GridFunction:
        c = grid.coords
        vals = np.broadcast_to(np.asarray(fn(c[:, 0], c[:, 1]), dtype=float), (grid.n_nodes,))
        return cls(grid, vals.copy())

    def __getitem__(self, node):
        return self.values[node]

    def __len__(self):
        return len(self.values)


def _as_values(u) -> np.ndarray:
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


def _evaluate(data, coords: np.ndarray) -> np.ndarray:
    if callable(data):
        return np.broadcast_to(np.asarray(data(coords[:, 0], coords[:, 1]), dtype=float), (len(coords),))
    return np.full(len(coords), float(data))


@dataclass(frozen=True)
class BCSpec:
    """Boundary rules per node class.

    Dirichlet and corner nodes take ``g``; Neumann nodes take a homogeneous
    one-sided normal difference; artificial nodes are pinned to
    ``artificial`` (``g`` when unset). Data may be constants or callables
    ``(x1, x2) -> value``.
    """

    g: float | Callable = 0.0
    artificial: float | Callable | None = None

    def dirichlet_data(self, grid: Grid) -> np.ndarray:
        return _evaluate(self.g, grid.coords)

    def pinned_data(self, grid: Grid) -> np.ndarray:
        """Prescribed value at every node (NaN where no value is prescribed)."""
        out = np.full(grid.n_nodes, np.nan)
        c = grid.coords
        dmask = grid.mask(NodeClass.DIRICHLET, NodeClass.CORNER)
        out[dmask] = _evaluate(self.g, c[dmask])
        amask = grid.mask(NodeClass.ARTIFICIAL)
        art = self.g if self.artificial is None else self.artificial
        out[amask] = _evaluate(art, c[amask])
        return out


@dataclass(frozen=True)
class Stencil:
    """Direction set and reach policy.

    Args:
        width: max-norm bound on the primitive offsets (3 gives 16 directions,
            8 orthogonal pairs).
        k_max: cap on the number of lattice steps along a direction.
        reach_mode: ``"nearest"`` differences over one lattice step when
            possible; ``"widest"`` uses the largest symmetric reach.
    """

    width: int = 3
    k_max: int = 2
    reach_mode: str = "widest"

    def __post_init__(self):
        if self.reach_mode not in REACH_MODES:
            raise ValueError(f"reach_mode must be one of {REACH_MODES}")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")

    @property
    def pairs(self) -> list[tuple[StencilDirection, StencilDirection]]:
        return stencil_pairs(self.width)


@dataclass
class Policy:
    """Frozen control at the interior nodes.

    ``pair`` indexes :attr:`Stencil.pairs`; ``b`` weights the first member of
    the pair; ``reach`` holds the symmetric step counts used for both members.
    """

    nodes: np.ndarray
    pair: np.ndarray
    b: np.ndarray
    reach: np.ndarray

    def __post_init__(self):
        if np.any((self.b < 0) | (self.b > 1)):
            raise ValueError("policy weights must lie in [0, 1]")
        if np.any(self.reach < 1):
            raise InsufficientReach("policy uses a direction with zero reach")


def second_difference(u, node: int, direction, k: int, grid: Grid | None = None, k_max: int | None = None) -> float:
    """Centered second difference of ``u`` at ``node`` over ``k`` lattice steps.

    Returns ``(u(x + d) - 2 u(x) + u(x - d)) / |d|**2`` with
    ``d = k * h * offset``.

    Raises:
        InsufficientReach: if ``x +/- d`` is not reachable inside the domain.
    """
    grid = grid if grid is not None else u.grid
    offset = direction.offset if isinstance(direction, StencilDirection) else tuple(direction)
    vals = _as_values(u)
    k_cap = max(k, k_max or 0)
    reach = symmetric_reach(grid, offset, k_cap)[node]
    if k < 1 or reach < k:
        raise InsufficientReach(f"node {node} has symmetric reach {reach} < {k} along {offset}")
    i, j = grid.ij[node]
    fwd = grid.lookup(i + k * offset[0], j + k * offset[1])
    bwd = grid.lookup(i - k * offset[0], j - k * offset[1])
    delta2 = (k * grid.h) ** 2 * (offset[0] ** 2 + offset[1] ** 2)
    return float((vals[fwd] - 2.0 * vals[node] + vals[bwd]) / delta2)


class WideStencilScheme:
    """Vectorized residual, policy improvement and frozen-policy assembly.

    All arrays over interior nodes follow the order of ``grid.interior``.
    """

    def __init__(self, grid: Grid, bc: BCSpec | None = None, source: SourceField | None = None,
                 stencil: Stencil | None = None):
        self.grid = grid
        self.bc = bc if bc is not None else BCSpec()
        self.source = source if source is not None else SourceField(0.0)
        self.stencil = stencil if stencil is not None else Stencil()
        self.pairs = self.stencil.pairs
        self.interior = grid.interior
        self.f = self.source.values(grid)[self.interior]
        self.pinned = self.bc.pinned_data(grid)
        self.neumann = np.flatnonzero(grid.classes == NodeClass.NEUMANN)
        if len(self.neumann):
            inward = grid.ij[self.neumann] - grid.normals[self.neumann]
            self.neumann_inner = grid.lookup(inward[:, 0], inward[:, 1])
            if np.any(self.neumann_inner < 0):
                raise InsufficientReach("Neumann node without an inward neighbour")
        else:
            self.neumann_inner = np.zeros(0, dtype=np.int64)
        self._build_stencil_tables()

    def _build_stencil_tables(self):
        grid, st, idx = self.grid, self.stencil, self.interior
        n_int, n_pairs = len(idx), len(self.pairs)
        self.fwd = np.full((n_pairs, 2, n_int), -1, dtype=np.int64)
        self.bwd = np.full((n_pairs, 2, n_int), -1, dtype=np.int64)
        self.reach = np.zeros((n_pairs, 2, n_int), dtype=np.int64)
        self.inv_delta2 = np.zeros((n_pairs, 2, n_int))
        for p, pair in enumerate(self.pairs):
            for m, d in enumerate(pair):
                k = symmetric_reach(grid, d, st.k_max)[idx]
                if st.reach_mode == "nearest":
                    k = np.minimum(k, 1)
                off = np.asarray(d.offset)
                ij = grid.ij[idx]
                ok = k > 0
                self.reach[p, m] = k
                self.fwd[p, m, ok] = grid.lookup(ij[ok, 0] + k[ok] * off[0], ij[ok, 1] + k[ok] * off[1])
                self.bwd[p, m, ok] = grid.lookup(ij[ok, 0] - k[ok] * off[0], ij[ok, 1] - k[ok] * off[1])
                with np.errstate(divide="ignore"):
                    self.inv_delta2[p, m] = np.where(ok, 1.0 / ((k * grid.h) ** 2 * float(off @ off)), 0.0)
        self.valid = (self.reach > 0).all(axis=1)  # (n_pairs, n_int)
        if n_int and not self.valid.any(axis=0).all():
            bad = self.interior[~self.valid.any(axis=0)][0]
            raise NoAdmissibleDirection(f"interior node {bad} has no admissible direction pair")

    # -- evaluation ----------------------------------------------------------

    def second_differences(self, u) -> np.ndarray:
        """``(n_pairs, 2, n_interior)`` second differences (0 where inadmissible)."""
        v = _as_values(u)
        centre = v[self.interior]
        fwd = np.where(self.fwd >= 0, v[np.maximum(self.fwd, 0)], 0.0)
        bwd = np.where(self.bwd >= 0, v[np.maximum(self.bwd, 0)], 0.0)
        return (fwd + bwd - 2.0 * centre) * self.inv_delta2

    def pair_values(self, u) -> tuple[np.ndarray, np.ndarray]:
        """Per-pair inner maximum and maximizing weight; ``-inf`` where inadmissible."""
        dd = self.second_differences(u)
        val, b = directional_value(dd[:, 0], dd[:, 1], self.f[None, :])
        val = np.where(self.valid, val, -np.inf)
        return val, b

    def interior_residual(self, u) -> np.ndarray:
        val, _ = self.pair_values(u)
        return val.max(axis=0) if len(self.interior) else np.zeros(0)

    def residual(self, u) -> np.ndarray:
        """Residual at every node."""
        v = _as_values(u)
        out = v - self.pinned  # Dirichlet, corner and artificial rows
        out[self.interior] = self.interior_residual(v)
        if len(self.neumann):
            out[self.neumann] = (v[self.neumann] - v[self.neumann_inner]) / self.grid.h
        return out

    def improve(self, u) -> Policy:
        """Pointwise argmax; ties go to the lowest pair index, then the smallest ``b``."""
        val, b = self.pair_values(u)
        best = np.argmax(val, axis=0)  # first maximum wins
        cols = np.arange(len(self.interior))
        return Policy(nodes=self.interior, pair=best, b=b[best, cols], reach=self.reach[best, :, cols])

    def initial_policy(self) -> Policy:
        """Axis pair with ``b = 1/2`` everywhere."""
        n = len(self.interior)
        return Policy(nodes=self.interior, pair=np.zeros(n, dtype=np.int64), b=np.full(n, 0.5),
                      reach=self.reach[0].T.copy())

    def assemble(self, policy: Policy) -> tuple[sp.csr_matrix, np.ndarray]:
        """Linear system ``L u = rhs`` of the frozen policy.

        Interior rows hold ``-(b D_theta + (1-b) D_perp) u`` with right-hand
        side ``-f sqrt(b (1-b))``; Dirichlet-type rows are identity rows,
        Neumann rows the one-sided normal difference.
        """
        grid = self.grid
        n = grid.n_nodes
        cols = np.arange(len(self.interior))
        if np.any(~self.valid[policy.pair, cols]):
            raise InsufficientReach("policy selects an inadmissible direction pair")
        rows, cidx, data = [], [], []
        diag = np.zeros(len(self.interior))
        for m, w in ((0, policy.b), (1, 1.0 - policy.b)):
            coef = w * self.inv_delta2[policy.pair, m, cols]
            diag += 2.0 * coef
            for tab in (self.fwd, self.bwd):
                rows.append(self.interior)
                cidx.append(tab[policy.pair, m, cols])
                data.append(-coef)
        rows.append(self.interior)
        cidx.append(self.interior)
        data.append(diag)
        rhs = np.zeros(n)
        rhs[self.interior] = -self.f * np.sqrt(policy.b * (1.0 - policy.b))

        pinned = np.flatnonzero(~np.isnan(self.pinned))
        rows.append(pinned)
        cidx.append(pinned)
        data.append(np.ones(len(pinned)))
        rhs[pinned] = self.pinned[pinned]
        if len(self.neumann):
            inv_h = 1.0 / grid.h
            rows += [self.neumann, self.neumann]
            cidx += [self.neumann, self.neumann_inner]
            data += [np.full(len(self.neumann), inv_h), np.full(len(self.neumann), -inv_h)]
        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cidx))), shape=(n, n)
        ).tocsr()
        mat.eliminate_zeros()
        return mat, rhs


def residual(u, node: int, bc: BCSpec | None = None, source: SourceField | None = None,
             stencil: Stencil | None = None) -> float:
    """Residual of the scheme at a single node."""
    scheme = WideStencilScheme(u.grid, bc, source, stencil)
    return float(scheme.residual(u)[node])


def assemble_linear_system(policy: Policy, grid: Grid, bc: BCSpec | None = None,
                           source: SourceField | None = None, stencil: Stencil | None = None):
    return WideStencilScheme(grid, bc, source, stencil).assemble(policy)
