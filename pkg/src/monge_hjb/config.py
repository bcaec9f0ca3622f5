"""Run configuration: a YAML file validated by a strict pydantic schema."""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Literal, Optional, Union

import numpy as np
import sympy
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .grid import Domain, MixedSplit
from .hamiltonian import NORMALIZATIONS, SourceField
from .scheme import REACH_MODES, BCSpec, Stencil
from .viscosity import SampleSpec, Semantics

_X1, _X2 = sympy.symbols("x1 x2")

Scalar = Union[float, str]


class ConfigError(ValueError):
    """Raised for unreadable or schema-violating configuration."""


def compile_expression(expr: Scalar) -> float | Callable:
    """Constant, or a vectorized ``f(x1, x2)`` from a sympy expression string."""
    if isinstance(expr, (int, float)):
        return float(expr)
    try:
        parsed = sympy.parse_expr(expr, local_dict={"x1": _X1, "x2": _X2}, evaluate=True)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"cannot parse expression {expr!r}: {exc}") from exc
    extra = parsed.free_symbols - {_X1, _X2}
    if extra:
        raise ConfigError(f"expression {expr!r} uses unknown symbols {sorted(map(str, extra))}")
    if not parsed.free_symbols:
        return float(parsed)
    fn = sympy.lambdify((_X1, _X2), parsed, "numpy")
    return lambda x1, x2: np.broadcast_to(np.asarray(fn(x1, x2), dtype=float), np.shape(x1))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainConfig(_Strict):
    name: Literal["unit_square", "lshape", "slab"] = "lshape"
    length: float = Field(1.0, gt=0, description="slab length L (slab only)")

    def build(self) -> Domain:
        if self.name == "slab":
            return Domain.slab(self.length)
        return Domain.from_name(self.name)


class BoundaryConfig(_Strict):
    g: Scalar = 0.0
    artificial: Optional[Scalar] = None
    mixed_split: bool = Field(False, description="Dirichlet on x1 = 0, 1; Neumann on x2 = 0, 1")

    def build(self) -> BCSpec:
        art = None if self.artificial is None else compile_expression(self.artificial)
        return BCSpec(compile_expression(self.g), art)

    def split(self) -> MixedSplit | None:
        return MixedSplit() if self.mixed_split else None


class SourceConfig(_Strict):
    f: Scalar = 1.0
    normalization: str = "hjb"

    @field_validator("normalization")
    @classmethod
    def _norm(cls, v):
        if v not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        return v

    def build(self) -> SourceField:
        return SourceField(compile_expression(self.f), self.normalization)


class SolverConfig(_Strict):
    tol: float = Field(1e-8, gt=0)
    max_iters: int = Field(200, ge=1)


class StencilConfig(_Strict):
    width: int = Field(3, ge=1)
    k_max: int = Field(2, ge=1)
    reach_mode: str = "widest"

    @field_validator("reach_mode")
    @classmethod
    def _mode(cls, v):
        if v not in REACH_MODES:
            raise ValueError(f"reach_mode must be one of {REACH_MODES}")
        return v

    def build(self) -> Stencil:
        return Stencil(self.width, self.k_max, self.reach_mode)


class SampleConfig(_Strict):
    p_max: float = 4.0
    p_step: float = 0.5
    m_max: float = 8.0
    m_step: float = 1.0
    n_angles: int = 8
    r_check: int = 5
    tau_touch: float = 1e-12
    tau_residual: float = 1e-10

    def build(self) -> SampleSpec:
        return SampleSpec(**self.model_dump())


class VerifyConfig(_Strict):
    candidate: str = Field("prop1", description="zero, prop1, prop2, or an expression in x1, x2")
    c: float = 1.0
    semantics: Literal["bs-dirichlet", "ug-semicontinuous", "classical", "bs-mixed"] = "bs-dirichlet"
    role: Literal["sub", "super", "both"] = "both"
    n_random: int = Field(10_000, ge=0, description="random Hessians in the implication certificates")


class HamiltonianCheckConfig(_Strict):
    n_oracle: int = Field(1000, ge=1)
    resolutions: list[int] = [128, 256, 512]
    n_directional: int = Field(10_000, ge=1)
    scan_step: float = 1e-6


class RunConfig(_Strict):
    """Every knob of every subcommand; unknown keys are rejected."""

    domain: DomainConfig = DomainConfig()
    h: Optional[float] = Field(0.0625, gt=0)
    levels: list[float] = [0.125, 0.0625, 0.03125, 0.015625]
    source: SourceConfig = SourceConfig()
    boundary: BoundaryConfig = BoundaryConfig()
    solver: SolverConfig = SolverConfig()
    stencil: StencilConfig = StencilConfig()
    sample_spec: SampleConfig = SampleConfig()
    verify: VerifyConfig = VerifyConfig()
    hamiltonian_check: HamiltonianCheckConfig = HamiltonianCheckConfig()
    exact: Optional[str] = Field(None, description="exact solution in x1, x2 (convergence)")
    probe_distance: float = 0.05
    output_dir: str = "out"
    seed: int = 0

    @model_validator(mode="after")
    def _levels(self):
        if any(h <= 0 for h in self.levels):
            raise ValueError("levels must be positive mesh sizes")
        if self.boundary.mixed_split and self.domain.name != "unit_square":
            raise ValueError("mixed_split is defined for the unit square only")
        Semantics(self.verify.semantics)
        return self

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping at top level")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
