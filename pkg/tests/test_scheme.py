from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monge_hjb.exceptions import InsufficientReach
from monge_hjb.grid import Domain, MixedSplit, NodeClass, build_grid
from monge_hjb.hamiltonian import SourceField, hamiltonian_exact_2d
from monge_hjb.scheme import BCSpec, GridFunction, Stencil, WideStencilScheme, second_difference


@pytest.fixture(scope="module")
def square16():
    return build_grid(Domain.unit_square(), 1 / 16)


def test_second_difference_quartic():
    g = build_grid(Domain.unit_square(), 0.25)
    u = GridFunction.from_callable(g, lambda x1, x2: x1**4)
    # (0.75^4 - 2 * 0.5^4 + 0.25^4) / 0.25^2
    assert second_difference(u, g.node_at(0.5, 0.5), (1, 0), 1) == pytest.approx(3.125, abs=1e-13)


def test_second_difference_insufficient_reach():
    g = build_grid(Domain.unit_square(), 0.25)
    u = GridFunction(g, np.zeros(g.n_nodes))
    with pytest.raises(InsufficientReach):
        second_difference(u, g.node_at(0.25, 0.5), (1, 0), 2)


@pytest.mark.parametrize("mode", ["widest", "nearest"])
def test_quadratic_exactness(square16, mode):
    u = GridFunction.from_callable(square16, lambda x1, x2: 0.5 * (x1**2 + x2**2))
    bc = BCSpec(lambda x1, x2: 0.5 * (x1**2 + x2**2))
    scheme = WideStencilScheme(square16, bc, SourceField(2.0), Stencil(reach_mode=mode))
    assert np.max(np.abs(scheme.residual(u))) < 1e-11


def test_interior_residual_matches_closed_form_for_quadratics(square16):
    # for a quadratic with Hessian M the scheme reproduces the maximum over
    # the stencil directions, which bounds H(M) from below
    M = np.array([[1.5, 0.4], [0.4, -0.7]])
    u = GridFunction.from_callable(square16, lambda x1, x2: 0.5 * (M[0, 0] * x1**2 + 2 * M[0, 1] * x1 * x2
                                                                    + M[1, 1] * x2**2))
    res = WideStencilScheme(square16, BCSpec(), SourceField(1.0)).interior_residual(u)
    assert np.all(res <= hamiltonian_exact_2d(M, 1.0) + 1e-10)
    assert np.max(res) > hamiltonian_exact_2d(M, 1.0) - 0.1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone_in_neighbour_values(seed):
    g = build_grid(Domain.lshape(), 1 / 8)
    scheme = WideStencilScheme(g, BCSpec(), SourceField(1.0))
    rng = np.random.default_rng(seed)
    u = rng.normal(size=g.n_nodes)
    node = int(rng.integers(g.n_nodes))
    bumped = u.copy()
    bumped[node] += rng.uniform(0.01, 1.0)
    d = scheme.residual(bumped) - scheme.residual(u)
    d[node] = 0.0
    assert np.all(d <= 1e-12)


def _check_m_matrix(mat, grid):
    mat = mat.tocsr()
    diag = mat.diagonal()
    assert np.all(diag > 0)
    off = mat - np.diag(diag)
    assert np.all(np.asarray(off[off.nonzero()]) <= 0)
    assert np.all(np.asarray(mat.sum(axis=1)).ravel() >= -1e-12)


def test_assembled_matrix_is_m_matrix(square16):
    scheme = WideStencilScheme(square16, BCSpec(), SourceField(1.0))
    rng = np.random.default_rng(0)
    policy = scheme.improve(rng.normal(size=square16.n_nodes))
    mat, rhs = scheme.assemble(policy)
    _check_m_matrix(mat, square16)
    assert np.all(rhs[square16.interior] <= 0)


def test_assembled_matrix_mixed(square16):
    g = build_grid(Domain.unit_square(), 1 / 8, MixedSplit())
    scheme = WideStencilScheme(g, BCSpec(), SourceField(1.0))
    mat, _ = scheme.assemble(scheme.initial_policy())
    _check_m_matrix(mat, g)
    neu = np.flatnonzero(g.classes == NodeClass.NEUMANN)
    assert np.all(mat[neu].getnnz(axis=1) == 2)


def test_frozen_policy_residual_vanishes_at_its_solution(square16):
    from scipy.sparse.linalg import spsolve

    scheme = WideStencilScheme(square16, BCSpec(), SourceField(1.0))
    policy = scheme.initial_policy()
    u = spsolve(*scheme.assemble(policy))
    # the frozen operator is one member of the maximum, so the residual is >= 0
    assert np.all(scheme.interior_residual(u) >= -1e-10)


def test_grid_function_validation(square16):
    with pytest.raises(ValueError):
        GridFunction(square16, np.zeros(3))
    with pytest.raises(ValueError):
        GridFunction(square16, np.full(square16.n_nodes, np.nan))


def test_stencil_validation():
    with pytest.raises(ValueError):
        Stencil(reach_mode="far")
    assert len(Stencil().pairs) == 8
