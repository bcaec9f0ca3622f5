"""Refinement studies, cross-sections and verification sweeps.

Everything here composes the library modules; the CLI and the acceptance
suite are thin wrappers around these functions.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import DiagonalMisaligned
from .grid import Domain, MixedSplit, NodeClass, build_grid, diagonal_nodes
from .hamiltonian import SourceField, directional_value, hamiltonian_2d, hamiltonian_oracle
from .scheme import BCSpec, GridFunction, Stencil
from .solver import SolveReport, howard_solve


@dataclass
class Problem:
    domain: Domain
    source: SourceField = field(default_factory=SourceField)
    bc: BCSpec = field(default_factory=BCSpec)
    stencil: Stencil = field(default_factory=Stencil)
    split: MixedSplit | None = None
    tol: float = 1e-8
    max_iters: int = 200


@dataclass
class LevelResult:
    level: int
    h: float
    solution: GridFunction
    report: SolveReport

    @property
    def dof(self) -> int:
        return self.report.dof_count


def solve_level(problem: Problem, h: float) -> tuple[GridFunction, SolveReport]:
    grid = build_grid(problem.domain, h, problem.split)
    return howard_solve(grid, problem.bc, problem.source, problem.stencil, problem.tol, problem.max_iters)


def refinement_study(problem: Problem, hs: Sequence[float]) -> list[LevelResult]:
    out = []
    for k, h in enumerate(hs, start=1):
        u, rep = solve_level(problem, h)
        out.append(LevelResult(k, float(h), u, rep))
    return out


# -- diagonal sections -------------------------------------------------------


def cross_section(u: GridFunction) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values of ``u`` along ``x1 = x2`` starting at the origin.

    Returns ``(nodes, s, values)`` with ``s`` the arc length from ``(0, 0)``.
    """
    grid = u.grid
    try:
        grid.node_at(0.0, 0.0)
    except KeyError:
        raise DiagonalMisaligned("the origin is not a grid node, so x1 = x2 misses the lattice") from None
    nodes = diagonal_nodes(grid)
    c = grid.coords[nodes]
    nodes = nodes[c[:, 0] >= 0.0]
    s = math.sqrt(2.0) * grid.coords[nodes, 0]
    return nodes, s, u.values[nodes]


def probe_diagonal(u: GridFunction, distance: float = 0.05) -> tuple[int, float, float]:
    """Interior diagonal node whose distance from the origin is closest to ``distance``.

    Boundary nodes carry the prescribed datum rather than a computed value,
    so they are skipped. Ties go to the node nearer the origin. Returns
    ``(node, s, value)``.
    """
    nodes, s, vals = cross_section(u)
    keep = u.grid.classes[nodes] == NodeClass.INTERIOR
    if not keep.any():
        raise DiagonalMisaligned("no interior node on the diagonal")
    nodes, s, vals = nodes[keep], s[keep], vals[keep]
    k = int(np.argmin(np.abs(s - distance)))
    return int(nodes[k]), float(s[k]), float(vals[k])


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_solution(path: str | Path, u: GridFunction) -> Path:
    c = u.grid.coords
    return write_csv(path, ("x1", "x2", "u"), zip(c[:, 0], c[:, 1], u.values))


def write_sections(out_dir: str | Path, levels: Sequence[LevelResult]) -> list[Path]:
    """One CSV per level named ``section_mesh<k>.csv``; a summary lists DoFs."""
    out_dir = Path(out_dir)
    paths = []
    summary = []
    for lvl in levels:
        _, s, vals = cross_section(lvl.solution)
        p = write_csv(out_dir / f"section_mesh{lvl.level}.csv", ("s", "u"), zip(s, vals))
        paths.append(p)
        summary.append((f"mesh {lvl.level}", lvl.h, lvl.dof, p.name))
    write_csv(out_dir / "sections.csv", ("mesh", "h", "dof", "file"), summary)
    return paths


# -- convergence -------------------------------------------------------------


def convergence_table(problem: Problem, hs: Sequence[float],
                      exact: Callable) -> list[dict]:
    """Sup-norm error against ``exact(x1, x2)`` per level, with successive ratios."""
    rows = []
    for lvl in refinement_study(problem, hs):
        ref = GridFunction.from_callable(lvl.solution.grid, exact)
        err = float(np.max(np.abs(lvl.solution.values - ref.values)))
        prev = rows[-1]["sup_error"] if rows else None
        ratio = prev / err if prev is not None and err > 0 else float("nan")
        rows.append({"level": lvl.level, "h": lvl.h, "dof": lvl.dof, "sup_error": err, "ratio": ratio,
                     "iterations": lvl.report.iterations, "converged": lvl.report.converged})
    return rows


# -- boundary layer ----------------------------------------------------------


@dataclass
class LayerProbe:
    domain: str
    h: list[float]
    dof: list[int]
    s: list[float]
    value: list[float]

    def persistent(self, spread: float = 0.3) -> bool:
        """Probe stays below ``-(1 - spread) |u_1|`` and varies by less than ``spread``."""
        v = np.asarray(self.value)
        ref = abs(v[0])
        if ref == 0:
            return False
        delta = (1.0 - spread) * ref
        return bool(np.all(v <= -delta) and (v.max() - v.min()) / ref < spread)

    def vanishing(self) -> bool:
        """``|u|`` at the probe strictly decreases under refinement."""
        a = np.abs(self.value)
        return bool(np.all(np.diff(a) < 0))


def layer_probe(problem: Problem, hs: Sequence[float], distance: float = 0.05) -> LayerProbe:
    out = LayerProbe(problem.domain.name, [], [], [], [])
    for lvl in refinement_study(problem, hs):
        _, s, v = probe_diagonal(lvl.solution, distance)
        out.h.append(lvl.h)
        out.dof.append(lvl.dof)
        out.s.append(s)
        out.value.append(v)
    return out


# -- Hamiltonian sweeps ------------------------------------------------------


@dataclass
class OracleSweep:
    n: int
    resolutions: tuple[int, ...]
    worst_gap: dict[int, float]
    max_excess: float
    monotone: bool
    seconds: float

    def ok(self, gap_tol: float = 5e-3, excess_tol: float = 1e-12) -> bool:
        final = self.resolutions[-1]
        return self.worst_gap[final] <= gap_tol and self.max_excess <= excess_tol and self.monotone


def oracle_sweep(n: int = 1000, seed: int = 0, resolutions: Sequence[int] = (128, 256, 512),
                 entry_range: float = 5.0, f_max: float = 4.0) -> OracleSweep:
    """Compare the brute-force oracle with the closed form on random inputs.

    ``monotone`` requires the gap ``exact - oracle`` to be non-increasing
    along the resolution sequence for every sample.
    """
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    ent = rng.uniform(-entry_range, entry_range, size=(n, 3))
    fs = rng.uniform(0.0, f_max, size=n)
    exact = hamiltonian_2d(ent[:, 0], ent[:, 1], ent[:, 2], fs)
    gaps = np.empty((len(resolutions), n))
    for k, res in enumerate(resolutions):
        for i in range(n):
            A = np.array([[ent[i, 0], ent[i, 1]], [ent[i, 1], ent[i, 2]]])
            gaps[k, i] = exact[i] - hamiltonian_oracle(A, fs[i], res)
    monotone = bool(np.all(np.diff(gaps, axis=0) <= 1e-13))
    return OracleSweep(n, tuple(resolutions), {r: float(gaps[k].max()) for k, r in enumerate(resolutions)},
                       float(max(0.0, -gaps.min())), monotone, time.perf_counter() - t0)


def scan_directional(a1: np.ndarray, a2: np.ndarray, f: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Maximum of ``-(b a1 + (1-b) a2) + f sqrt(b(1-b))`` over ``b`` in ``step * Z ∩ [0, 1]``.

    The objective is concave in ``b``, so the lattice maximum lies within
    one coarse step of the coarse-lattice maximizer; scanning the fine
    lattice there gives exactly the full fine-lattice maximum.
    """
    a1, a2, f = (np.asarray(v, dtype=float)[:, None] for v in (a1, a2, f))
    n_fine = int(round(1.0 / step))
    ratio = 1000 if n_fine % 1000 == 0 else 1
    n_coarse = n_fine // ratio

    def obj(k):
        b = k / n_fine
        return -(b * a1 + (1.0 - b) * a2) + f * np.sqrt(b * (1.0 - b))

    coarse = np.arange(n_coarse + 1)[None, :] * ratio
    kbest = np.take_along_axis(coarse.repeat(len(a1), 0), np.argmax(obj(coarse), axis=1)[:, None], 1)
    window = kbest + np.arange(-ratio, ratio + 1)[None, :]
    window = np.clip(window, 0, n_fine)
    return obj(window).max(axis=1)


def directional_sweep(n: int = 10_000, seed: int = 0, step: float = 1e-6, a_range: float = 5.0,
                      f_max: float = 4.0) -> dict:
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    a1, a2 = rng.uniform(-a_range, a_range, size=(2, n))
    f = rng.uniform(0.0, f_max, size=n)
    val, _ = directional_value(a1, a2, f)
    scan = np.concatenate([scan_directional(a1[i:i + 500], a2[i:i + 500], f[i:i + 500], step)
                           for i in range(0, n, 500)])
    return {"n": n, "max_abs_diff": float(np.max(np.abs(val - scan))),
            "seconds": time.perf_counter() - t0}
