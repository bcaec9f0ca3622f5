from __future__ import annotations

import numpy as np
import pytest

from monge_hjb.exceptions import MissingCertificates, NonNestedGrids, SemanticsMismatch
from monge_hjb.grid import Domain, MixedSplit, NodeClass, build_grid
from monge_hjb.hamiltonian import SourceField, hamiltonian_exact_2d
from monge_hjb.scheme import GridFunction
from monge_hjb.viscosity import (
    CertificateKind,
    PropOneFamily,
    PropTwoFamily,
    SampledCandidate,
    SampleSpec,
    Semantics,
    TestQuadratic,
    Zero,
    certificate_prop1,
    certificate_prop2,
    check_subsolution,
    check_supersolution,
    comparison_witness,
    discrete_envelopes,
    liminf_envelope_across_levels,
    operator_values,
    touching_quadratics,
)

# a lighter lattice keeps the module tests fast; the acceptance suite uses the defaults
LIGHT = SampleSpec(p_max=2.0, p_step=0.5, m_max=4.0, m_step=1.0, n_angles=4, r_check=3)


@pytest.fixture(scope="module")
def slab():
    return build_grid(Domain.slab(), 1 / 16)


@pytest.fixture(scope="module")
def mixed():
    return build_grid(Domain.unit_square(), 1 / 16, MixedSplit())


def _face_node(grid):
    return grid.node_at(0.0, 0.5)


# -- envelopes ---------------------------------------------------------------


@pytest.mark.parametrize("c", [1e-3, 1.0, 1e3])
def test_prop1_envelopes(slab, c):
    env = discrete_envelopes(PropOneFamily(c), slab)
    assert env.exact
    assert np.all(env.upper.values == 0.0)
    np.testing.assert_array_equal(env.lower.values, PropOneFamily(c).values(slab))


def test_prop2_envelopes(mixed):
    v = PropTwoFamily(2.0)
    env = discrete_envelopes(v, mixed)
    assert np.all(env.upper.values == 0.0)
    lower = env.lower.values
    on_d = mixed.mask(NodeClass.DIRICHLET, NodeClass.CORNER)
    assert np.all(lower[on_d] == -2.0) and np.all(lower[~on_d] == 0.0)


def test_zero_envelopes_and_ordering(slab):
    env = discrete_envelopes(Zero(), slab)
    assert np.all(env.upper.values == 0) and np.all(env.lower.values == 0)
    for v in (PropOneFamily(1.0), PropOneFamily(-1.0)):
        vals = v.values(slab)
        assert np.all(v.lower(slab) <= vals) and np.all(vals <= v.upper(slab))
        # envelopes are idempotent
        up = v.upper_candidate()
        np.testing.assert_array_equal(up.upper(slab), up.values(slab))
        lo = v.lower_candidate()
        np.testing.assert_array_equal(lo.lower(slab), lo.values(slab))


def test_grid_function_envelopes_are_flagged(slab):
    u = GridFunction(slab, np.zeros(slab.n_nodes))
    assert not discrete_envelopes(u).exact


# -- touching ----------------------------------------------------------------


def _includes(stream, p, M):
    return any(q.p == p and q.M == M for q in stream)


def test_touching_zero_interior(slab):
    u = GridFunction(slab, np.zeros(slab.n_nodes))
    node = slab.node_at(0.5, 0.5)
    qs = list(touching_quadratics(u, node, "from-below", LIGHT))
    assert _includes(qs, (0.0, 0.0), (-1.0, 0.0, -1.0))
    assert not _includes(qs, (0.0, 0.0), (1.0, 0.0, 1.0))


def test_touching_prop1_face(slab):
    lower = GridFunction(slab, PropOneFamily(1.0).lower(slab))
    qs = list(touching_quadratics(lower, _face_node(slab), "from-below", LIGHT))
    assert _includes(qs, (1.0, 0.0), (0.0, 0.0, 0.0))


def test_touching_sense_validation(slab):
    u = GridFunction(slab, np.zeros(slab.n_nodes))
    with pytest.raises(ValueError):
        list(touching_quadratics(u, 0, "sideways"))


def test_touching_is_decided_on_nodes(slab):
    lower = PropOneFamily(1.0).lower(slab)
    node = _face_node(slab)
    for q in touching_quadratics(GridFunction(slab, lower), node, "from-below", LIGHT):
        c = slab.coords
        d = np.hypot(c[:, 0] - q.x0[0], c[:, 1] - q.x0[1])
        near = d <= LIGHT.r_check * slab.h + 1e-12
        gap = lower[near] - q(c[near, 0], c[near, 1])
        assert np.all(gap >= lower[node] - 1e-12)


def test_hessian_lattice_is_deduplicated():
    ent = SampleSpec().hessians()
    assert len(np.unique(np.round(ent, 10), axis=0)) == len(ent)
    assert any(np.allclose(e, 0) for e in ent)


# -- sub/supersolution checks -----------------------------------------------


def test_zero_is_a_solution_on_the_slab(slab):
    for check in (check_subsolution, check_supersolution):
        cert = check(Zero(), Semantics.BS_DIRICHLET, slab, SourceField(0.0), LIGHT)
        assert cert.kind == CertificateKind.NO_VIOLATION_FOUND
        assert cert.samples_checked > 0


def test_ug_semicontinuity_pretest(slab):
    cert = check_subsolution(PropOneFamily(1.0), "ug-semicontinuous", slab, sample_spec=LIGHT)
    assert cert.kind == CertificateKind.FALSIFIED
    assert slab.physical_boundary[cert.witness.node]
    assert "semicontinuous" in cert.witness.reason


def test_prop1_subsolution_under_bs(slab):
    cert = check_subsolution(PropOneFamily(1.0), "bs-dirichlet", slab, sample_spec=LIGHT)
    assert cert.kind == CertificateKind.NO_VIOLATION_FOUND


def test_positive_perturbation_is_falsified(slab):
    cert = check_subsolution(PropOneFamily(-1.0), "bs-dirichlet", slab, sample_spec=LIGHT)
    assert cert.kind == CertificateKind.FALSIFIED
    w = cert.witness
    assert w.p is not None and w.M is not None


def _reproduce(cert, cand, grid, spec, role):
    """Independent re-evaluation of a falsifying witness."""
    w = cert.witness
    q = TestQuadratic(w.node, w.x0, w.p, w.M)
    env = cand.upper(grid) if role == "sub" else cand.lower(grid)
    c = grid.coords
    i, j = grid.ij[w.node]
    near = ((grid.ij[:, 0] - i) ** 2 + (grid.ij[:, 1] - j) ** 2 <= spec.r_check**2)
    diff = env[near] - q(c[near, 0], c[near, 1])
    ref = env[w.node]
    if role == "sub":
        assert np.all(diff <= ref + spec.tau_touch)
    else:
        assert np.all(diff >= ref - spec.tau_touch)
    H = hamiltonian_exact_2d(q.hessian, 0.0)
    F = operator_values(Semantics.BS_DIRICHLET, role, int(grid.classes[w.node]), np.array(H),
                        ref - 0.0, float(np.dot(w.p, grid.normals[w.node])))
    assert F == pytest.approx(w.value, abs=1e-12)
    assert (F > spec.tau_residual) if role == "sub" else (F < -spec.tau_residual)


def test_falsifier_soundness(slab):
    cand = PropOneFamily(-1.0)
    cert = check_subsolution(cand, "bs-dirichlet", slab, sample_spec=LIGHT)
    _reproduce(cert, cand, slab, LIGHT, "sub")


def test_strictly_convex_bowl_is_not_a_supersolution(slab):
    # D^2 = 2I gives H = -2 < 0 for f = 0 at every interior node
    cand = SampledCandidate("bowl", lambda x1, x2: (x1 - 0.5) ** 2 + (x2 - 0.5) ** 2)
    cert = check_supersolution(cand, "bs-dirichlet", slab, sample_spec=LIGHT)
    assert cert.kind == CertificateKind.FALSIFIED
    assert cert.notes


def test_classical_semantics_boundary_mismatch(slab):
    sup = check_supersolution(PropOneFamily(1.0), "classical", slab, sample_spec=LIGHT)
    assert sup.kind == CertificateKind.FALSIFIED
    assert "boundary data" in sup.witness.reason
    sub = check_subsolution(PropOneFamily(1.0), "classical", slab, sample_spec=LIGHT)
    assert sub.kind == CertificateKind.NO_VIOLATION_FOUND


def test_semantics_mismatch(slab, mixed):
    with pytest.raises(SemanticsMismatch):
        check_subsolution(Zero(), "bs-mixed", slab)
    with pytest.raises(SemanticsMismatch):
        check_subsolution(Zero(), "bs-dirichlet", mixed)
    with pytest.raises(SemanticsMismatch):
        PropTwoFamily(1.0).values(slab)


def test_prop2_checks_under_mixed(mixed):
    v = PropTwoFamily(1.0)
    assert check_subsolution(v, "bs-mixed", mixed, sample_spec=LIGHT).ok
    assert check_supersolution(v, "bs-mixed", mixed, sample_spec=LIGHT).ok


# -- certificates ------------------------------------------------------------


@pytest.mark.parametrize("c", [1e-3, 1.0, 1e3])
def test_certificate_prop1(slab, c):
    cert = certificate_prop1(slab, c, LIGHT, n_random=10_000)
    assert cert.kind == CertificateKind.PASS
    assert cert.samples_checked >= 10_000


@pytest.mark.parametrize("c", [1e-3, 1.0, 1e3])
def test_certificate_prop2(mixed, c):
    assert certificate_prop2(mixed, c, LIGHT, n_random=2_000).kind == CertificateKind.PASS


def test_certificate_rank_one_examples():
    for M in (np.diag([5.0, -1.0]), np.zeros((2, 2))):
        assert hamiltonian_exact_2d(M, 0.0) >= -M[1, 1] >= 0


def test_certificate_errors(slab):
    with pytest.raises(ValueError):
        certificate_prop1(slab, 0.0)
    with pytest.raises(SemanticsMismatch):
        certificate_prop2(slab, 1.0)


def test_corner_operator_examples():
    # corner (0, 0) with n = (0, -1) and p = (3, -2): p.n = 2
    assert operator_values(Semantics.BS_MIXED, "super", NodeClass.CORNER, np.array(-5.0), -1.0, 2.0) == 2.0
    # corner (1, 1) with n = (0, 1) and p = 0
    assert operator_values(Semantics.BS_MIXED, "super", NodeClass.CORNER, np.array(-5.0), -1.0, 0.0) == 0.0


# -- comparison --------------------------------------------------------------


def test_comparison_prop1(slab):
    sub = check_subsolution(Zero(), "bs-dirichlet", slab, sample_spec=LIGHT)
    sup = certificate_prop1(slab, 1.0, LIGHT, 100)
    w = comparison_witness(Zero(), PropOneFamily(1.0), "bs-dirichlet", slab, sub, sup)
    assert w.gap == 1.0 and w.x[0] == 0.0
    sup_zero = check_supersolution(Zero(), "bs-dirichlet", slab, sample_spec=LIGHT)
    assert comparison_witness(Zero(), Zero(), "bs-dirichlet", slab, sub, sup_zero) is None


def test_comparison_prop2(mixed):
    sub = check_subsolution(Zero(), "bs-mixed", mixed, sample_spec=LIGHT)
    sup = certificate_prop2(mixed, 0.5, LIGHT, 100)
    w = comparison_witness(Zero(), PropTwoFamily(0.5), "bs-mixed", mixed, sub, sup)
    assert w.gap == 0.5
    assert mixed.classes[w.node] in (NodeClass.DIRICHLET, NodeClass.CORNER)


def test_comparison_requires_certificates(slab):
    with pytest.raises(MissingCertificates):
        comparison_witness(Zero(), Zero(), "bs-dirichlet", slab)
    bad = check_subsolution(PropOneFamily(1.0), "ug-semicontinuous", slab, sample_spec=LIGHT)
    ok = check_supersolution(Zero(), "bs-dirichlet", slab, sample_spec=LIGHT)
    with pytest.raises(MissingCertificates):
        comparison_witness(PropOneFamily(1.0), Zero(), "bs-dirichlet", slab, bad, ok)


# -- limit envelope ----------------------------------------------------------


def _levels(domain, hs, fn):
    out = []
    for h in hs:
        g = build_grid(domain, h)
        out.append((h, GridFunction.from_callable(g, lambda x1, x2: fn(h) + 0 * x1)))
    return out


def test_liminf_of_zero_levels():
    env = liminf_envelope_across_levels(_levels(Domain.unit_square(), [1 / 4, 1 / 8], lambda h: 0.0))
    assert np.all(env.values == 0.0)
    assert env.grid.h == 1 / 8


def test_liminf_of_constants():
    env = liminf_envelope_across_levels(_levels(Domain.unit_square(), [1 / 4, 1 / 8, 1 / 16], lambda h: -h))
    np.testing.assert_allclose(env.values, -0.25)


def test_liminf_errors():
    one = _levels(Domain.unit_square(), [1 / 4], lambda h: 0.0)
    with pytest.raises(NonNestedGrids):
        liminf_envelope_across_levels(one)
    a = _levels(Domain.unit_square(), [1 / 4], lambda h: 0.0)
    b = _levels(Domain.unit_square(), [1 / 6], lambda h: 0.0)
    with pytest.raises(NonNestedGrids):
        liminf_envelope_across_levels(a + b)


def test_liminf_layer_near_reentrant_corner():
    from monge_hjb.solver import howard_solve

    levels = []
    for h in (1 / 8, 1 / 16):
        u, _ = howard_solve(build_grid(Domain.lshape(), h), source=SourceField(1.0))
        levels.append((h, u))
    env = liminf_envelope_across_levels(levels)
    node = env.grid.node_at(1 / 16, 1 / 16)
    assert env.values[node] < -0.1  # boundary datum at the corner is 0
