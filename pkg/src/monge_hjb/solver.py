"""Howard policy iteration for the discrete Bellman system."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .exceptions import NoAdmissibleDirection, SingularSystem
from .grid import Grid
from .hamiltonian import SourceField
from .scheme import BCSpec, GridFunction, Policy, Stencil, WideStencilScheme

logger = logging.getLogger(__name__)


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    final_residual: float = float("inf")
    wall_time: float = 0.0
    dof_count: int = 0
    converged: bool = False
    tol: float = 1e-8

    def to_dict(self) -> dict:
        return asdict(self)


def policy_improve(u, grid: Grid | None = None, source: SourceField | None = None,
                   stencil: Stencil | None = None, bc: BCSpec | None = None) -> Policy:
    """Pointwise maximizing policy at ``u``."""
    grid = grid if grid is not None else u.grid
    if len(grid.interior) == 0:
        raise NoAdmissibleDirection("grid has no interior node")
    return WideStencilScheme(grid, bc, source, stencil).improve(u)


def _solve_linear(mat, rhs) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(mat.tocsc(), rhs)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("direct solve produced non-finite values")
    return x


def howard_solve(grid: Grid, bc: BCSpec | None = None, source: SourceField | None = None,
                 stencil: Stencil | None = None, tol: float = 1e-8,
                 max_iters: int = 200) -> tuple[GridFunction, SolveReport]:
    """Solve the discrete HJB system by policy iteration.

    The first iterate solves the frozen system of the axis pair with
    ``b = 1/2``. Each further iteration improves the policy at the current
    iterate and solves the new frozen system with a sparse direct solver.
    Iteration stops once the sup-norm of the full residual is ``<= tol`` or
    after ``max_iters`` linear solves; ``report.converged`` tells which.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if len(grid.interior) == 0:
        raise NoAdmissibleDirection("grid has no interior node")
    t0 = time.perf_counter()
    scheme = WideStencilScheme(grid, bc, source, stencil)
    report = SolveReport(dof_count=grid.n_nodes, tol=tol)

    policy = scheme.initial_policy()
    u = _solve_linear(*scheme.assemble(policy))
    report.iterations = 1
    while True:
        res = float(np.max(np.abs(scheme.residual(u))))
        report.residual_history.append(res)
        logger.debug("howard iteration %d: residual %.3e", report.iterations, res)
        if res <= tol or report.iterations >= max_iters:
            break
        policy = scheme.improve(u)
        u = _solve_linear(*scheme.assemble(policy))
        report.iterations += 1

    report.final_residual = report.residual_history[-1]
    report.converged = report.final_residual <= tol
    report.wall_time = time.perf_counter() - t0
    if not report.converged:
        logger.warning("Howard iteration stopped after %d solves with residual %.3e",
                       report.iterations, report.final_residual)
    return GridFunction(grid, u), report
