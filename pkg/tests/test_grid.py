from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monge_hjb.exceptions import DisconnectedDomain, NonDivisibleSpacing
from monge_hjb.grid import (
    Domain,
    MixedSplit,
    NodeClass,
    build_grid,
    diagonal_nodes,
    neighbors,
    stencil_directions,
    stencil_pairs,
    symmetric_reach,
)


def count_lattice_points(domain: Domain, h: Fraction) -> int:
    """Brute force: lattice points lying in at least one closed rectangle."""
    pts = set()
    for x0, x1, y0, y1 in domain.rectangles:
        fx0, fx1, fy0, fy1 = (Fraction(v).limit_denominator(10**6) for v in (x0, x1, y0, y1))
        for i in range(int(fx0 / h), int(fx1 / h) + 1):
            for j in range(int(fy0 / h), int(fy1 / h) + 1):
                pts.add((i, j))
    return len(pts)


@pytest.mark.parametrize("domain", [Domain.unit_square(), Domain.lshape(), Domain.slab()])
@pytest.mark.parametrize("h", [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)])
def test_node_count_matches_brute_force(domain, h):
    assert build_grid(domain, float(h)).n_nodes == count_lattice_points(domain, h)


def test_lshape_coarse_counts():
    g = build_grid(Domain.lshape(), 0.5)
    assert g.n_nodes == 21
    assert len(g.interior) == 5
    assert int(g.physical_boundary.sum()) == 16


def test_nondivisible_spacing():
    with pytest.raises(NonDivisibleSpacing):
        build_grid(Domain.unit_square(), 0.3)


def test_disconnected_domain():
    dom = Domain(((0, 1, 0, 1), (2, 3, 0, 1)))
    with pytest.raises(DisconnectedDomain):
        build_grid(dom, 0.5)


def test_corner_touching_rectangles_are_disconnected():
    dom = Domain(((0, 1, 0, 1), (1, 2, 1, 2)))
    with pytest.raises(DisconnectedDomain):
        build_grid(dom, 0.5)


def test_stencil_directions_width3():
    dirs = stencil_directions(3)
    assert len(dirs) == 16
    offs = {d.offset for d in dirs}
    assert all(np.gcd(*o) == 1 for o in offs)
    assert all((-o[0], -o[1]) not in offs for o in offs)


def test_stencil_pairs_orthogonal():
    pairs = stencil_pairs(3)
    assert len(pairs) == 8
    assert pairs[0][0].offset == (1, 0) and pairs[0][1].offset == (0, 1)
    for a, b in pairs:
        assert a.offset[0] * b.offset[0] + a.offset[1] * b.offset[1] == 0


def test_neighbors_unit_square():
    g = build_grid(Domain.unit_square(), 0.25)
    assert neighbors(g, g.node_at(0.5, 0.5), (1, 0)) == (2, 2)
    assert neighbors(g, g.node_at(0.25, 0.5), (1, 1)) == (2, 1)


def test_neighbors_reentrant_corner():
    g = build_grid(Domain.lshape(), 0.25)
    node = g.node_at(0.25, 0.25)
    kp, km = neighbors(g, node, (1, 1))
    assert km == 1  # (0, 0) is reachable, (-0.25, -0.25) is not
    assert kp == 2


def test_segment_must_stay_in_domain():
    g = build_grid(Domain.lshape(), 0.25)
    node = g.node_at(0.25, -0.25)
    # (-0.25, 0) is a node, but the segment to it crosses the missing quadrant
    assert g.node_at(-0.25, 0.0) >= 0
    assert g.reach((-2, 1), 2)[node] == 0
    # through the corner point itself the segment stays in the closed domain
    assert g.reach((-1, 1), 2)[node] == 2


def test_mixed_split_classes():
    g = build_grid(Domain.unit_square(), 0.25, MixedSplit())
    assert g.classes[g.node_at(0, 0.5)] == NodeClass.DIRICHLET
    assert g.classes[g.node_at(0.5, 0)] == NodeClass.NEUMANN
    for x in itertools.product((0.0, 1.0), repeat=2):
        assert g.classes[g.node_at(*x)] == NodeClass.CORNER
    assert tuple(g.normals[g.node_at(0.5, 0)]) == (0, -1)
    assert tuple(g.normals[g.node_at(0.5, 1)]) == (0, 1)


def test_slab_physical_boundary():
    g = build_grid(Domain.slab(), 0.25)
    phys = g.coords[g.physical_boundary]
    assert np.all(phys[:, 0] == 0.0)
    assert len(phys) == 5
    assert g.classes[g.node_at(1.0, 0.5)] == NodeClass.ARTIFICIAL


def test_diagonal_nodes_sorted():
    g = build_grid(Domain.lshape(), 0.25)
    c = g.coords[diagonal_nodes(g)]
    assert np.all(c[:, 0] == c[:, 1])
    assert np.all(np.diff(c[:, 0]) > 0)
    assert c[0, 0] == -0.0 or c[0, 0] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 4, 8]), st.integers(0, 10**6))
def test_symmetric_reach_is_symmetric(n, seed):
    g = build_grid(Domain.lshape(), 1.0 / n)
    rng = np.random.default_rng(seed)
    d = stencil_directions(3)[rng.integers(16)]
    r = symmetric_reach(g, d, 2)
    np.testing.assert_array_equal(r, symmetric_reach(g, -d, 2))
    interior = g.interior
    assert np.all(r[interior] >= 0)
