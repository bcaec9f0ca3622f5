"""Monotone wide-stencil HJB solver for the Monge-Ampere equation, with
machine checks of viscosity sub/supersolution properties."""

from __future__ import annotations

from .exceptions import MongeHJBError
from .grid import Domain, Grid, MixedSplit, NodeClass, build_grid, diagonal_nodes, neighbors
from .hamiltonian import SourceField, SymMatrix, directional_value, hamiltonian_exact_2d, hamiltonian_oracle
from .scheme import BCSpec, GridFunction, Policy, Stencil, WideStencilScheme, assemble_linear_system, residual
from .solver import SolveReport, howard_solve, policy_improve
from .viscosity import (
    Certificate,
    CertificateKind,
    PropOneFamily,
    PropTwoFamily,
    SampleSpec,
    Semantics,
    Zero,
    certificate_prop1,
    certificate_prop2,
    check_subsolution,
    check_supersolution,
    comparison_witness,
    discrete_envelopes,
    liminf_envelope_across_levels,
    touching_quadratics,
)

__version__ = "0.1.0"

__all__ = [
    "BCSpec",
    "Certificate",
    "CertificateKind",
    "Domain",
    "Grid",
    "GridFunction",
    "MixedSplit",
    "MongeHJBError",
    "NodeClass",
    "Policy",
    "PropOneFamily",
    "PropTwoFamily",
    "SampleSpec",
    "Semantics",
    "SolveReport",
    "SourceField",
    "Stencil",
    "SymMatrix",
    "WideStencilScheme",
    "Zero",
    "assemble_linear_system",
    "build_grid",
    "certificate_prop1",
    "certificate_prop2",
    "check_subsolution",
    "check_supersolution",
    "comparison_witness",
    "diagonal_nodes",
    "directional_value",
    "discrete_envelopes",
    "hamiltonian_exact_2d",
    "hamiltonian_oracle",
    "howard_solve",
    "liminf_envelope_across_levels",
    "neighbors",
    "policy_improve",
    "residual",
    "touching_quadratics",
]
