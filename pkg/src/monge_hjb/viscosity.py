"""Machine checks of viscosity sub/supersolution properties on a grid.

Candidates are tested against quadratic test functions

    phi(x) = p . (x - x0) + 1/2 (x - x0)^T M (x - x0)

sampled on a lattice of gradients and Hessians. A quadratic "touches" a grid
function ``v`` from below at ``x0`` when ``v - phi`` has a local minimum at
``x0`` over the nodes within ``r_check`` lattice steps, decided by direct
comparison of node values. Sampling can only ever report
``NO-VIOLATION-FOUND``; ``PASS`` is reserved for the implication
certificates :func:`certificate_prop1` and :func:`certificate_prop2`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Iterator, Sequence

import numpy as np

from .exceptions import MissingCertificates, NonNestedGrids, SemanticsMismatch
from .grid import Grid, NodeClass
from .hamiltonian import SourceField, hamiltonian_2d
from .scheme import BCSpec, GridFunction

logger = logging.getLogger(__name__)


class Semantics(str, Enum):
    BS_DIRICHLET = "bs-dirichlet"
    UG_SEMICONTINUOUS = "ug-semicontinuous"
    CLASSICAL = "classical"
    BS_MIXED = "bs-mixed"


class CertificateKind(str, Enum):
    PASS = "PASS"
    FALSIFIED = "FALSIFIED"
    NO_VIOLATION_FOUND = "NO-VIOLATION-FOUND"


@dataclass(frozen=True)
class SampleSpec:
    """Lattice of test quadratics and the tolerances of the checks."""

    p_max: float = 4.0
    p_step: float = 0.5
    m_max: float = 8.0
    m_step: float = 1.0
    n_angles: int = 8
    r_check: int = 5
    tau_touch: float = 1e-12
    tau_residual: float = 1e-10

    def gradients(self) -> np.ndarray:
        n = int(round(self.p_max / self.p_step))
        axis = np.arange(-n, n + 1) * self.p_step
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def hessians(self) -> np.ndarray:
        """Distinct ``(m11, m12, m22)`` of ``R^T diag(mu1, mu2) R``."""
        n = int(round(self.m_max / self.m_step))
        mu = np.arange(-n, n + 1) * self.m_step
        mu1, mu2 = (a.ravel() for a in np.meshgrid(mu, mu, indexing="ij"))
        out = []
        for k in range(self.n_angles):
            t = k * math.pi / self.n_angles
            c, s = math.cos(t), math.sin(t)
            # columns of R are the eigenvectors (c, s) and (-s, c)
            out.append(np.stack([mu1 * c * c + mu2 * s * s, (mu1 - mu2) * c * s,
                                 mu1 * s * s + mu2 * c * c], axis=1))
        ent = np.concatenate(out)
        ent[np.abs(ent) < 1e-13] = 0.0
        _, first = np.unique(np.round(ent, 10), axis=0, return_index=True)
        return ent[np.sort(first)]


@dataclass(frozen=True)
class TestQuadratic:
    node: int
    x0: tuple[float, float]
    p: tuple[float, float]
    M: tuple[float, float, float]  # (m11, m12, m22)

    __test__ = False  # not a pytest class

    def __call__(self, x1, x2):
        d1 = np.asarray(x1) - self.x0[0]
        d2 = np.asarray(x2) - self.x0[1]
        m11, m12, m22 = self.M
        return self.p[0] * d1 + self.p[1] * d2 + 0.5 * (m11 * d1 * d1 + 2 * m12 * d1 * d2 + m22 * d2 * d2)

    @property
    def hessian(self) -> np.ndarray:
        m11, m12, m22 = self.M
        return np.array([[m11, m12], [m12, m22]])


@dataclass
class Witness:
    node: int
    x0: tuple[float, float]
    value: float
    reason: str
    p: tuple[float, float] | None = None
    M: tuple[float, float, float] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Certificate:
    kind: CertificateKind
    role: str
    semantics: str
    candidate: str
    samples_checked: int = 0
    witness: Witness | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.kind == CertificateKind.FALSIFIED and self.witness is None:
            raise ValueError("a FALSIFIED certificate needs a witness")

    @property
    def ok(self) -> bool:
        return self.kind != CertificateKind.FALSIFIED

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kind"] = self.kind.value
        return out

    def summary(self) -> str:
        line = (f"{self.candidate} as {self.role} [{self.semantics}]: {self.kind.value} "
                f"({self.samples_checked} samples)")
        if self.witness is not None:
            w = self.witness
            line += f"\n  witness at node {w.node} x0={w.x0}: {w.reason}, value={w.value:.6g}"
            if w.p is not None:
                line += f", p={w.p}, M=(m11, m12, m22)={w.M}"
        return line


# -- candidates --------------------------------------------------------------


class CandidateFunction:
    """Function defined in closed form on grid nodes, with its envelopes."""

    name = "candidate"
    exact_envelopes = True

    def values(self, grid: Grid) -> np.ndarray:
        raise NotImplementedError

    def upper(self, grid: Grid) -> np.ndarray:
        raise NotImplementedError

    def lower(self, grid: Grid) -> np.ndarray:
        raise NotImplementedError

    def sample(self, grid: Grid) -> GridFunction:
        return GridFunction(grid, self.values(grid))


class PiecewiseCandidate(CandidateFunction):
    """``region_value`` on a nowhere-dense boundary set, ``base_value`` elsewhere.

    Every point of the region is a limit of points off the region, so the
    upper envelope there is ``max(region_value, base_value)`` and the lower
    envelope ``min(region_value, base_value)``; off the region both envelopes
    equal ``base_value``.
    """

    def __init__(self, name: str, region: Callable[[Grid], np.ndarray], region_value: float,
                 base_value: float = 0.0):
        self.name = name
        self.region = region
        self.region_value = float(region_value)
        self.base_value = float(base_value)

    def _fill(self, grid: Grid, on_region: float) -> np.ndarray:
        out = np.full(grid.n_nodes, self.base_value)
        out[self.region(grid)] = on_region
        return out

    def values(self, grid):
        return self._fill(grid, self.region_value)

    def upper(self, grid):
        return self._fill(grid, max(self.region_value, self.base_value))

    def lower(self, grid):
        return self._fill(grid, min(self.region_value, self.base_value))

    def upper_candidate(self) -> PiecewiseCandidate:
        return PiecewiseCandidate(f"({self.name})^*", self.region,
                                  max(self.region_value, self.base_value), self.base_value)

    def lower_candidate(self) -> PiecewiseCandidate:
        return PiecewiseCandidate(f"({self.name})_*", self.region,
                                  min(self.region_value, self.base_value), self.base_value)

    def __repr__(self):
        return f"PiecewiseCandidate({self.name!r}, region_value={self.region_value}, base={self.base_value})"


class SampledCandidate(CandidateFunction):
    """Arbitrary node values; a single grid cannot resolve its envelopes."""

    exact_envelopes = False

    def __init__(self, name: str, fn: Callable | np.ndarray):
        self.name = name
        self.fn = fn

    def values(self, grid):
        if callable(self.fn):
            c = grid.coords
            return np.broadcast_to(np.asarray(self.fn(c[:, 0], c[:, 1]), dtype=float), (grid.n_nodes,)).copy()
        return np.asarray(self.fn, dtype=float)

    upper = values
    lower = values


def _no_region(grid: Grid) -> np.ndarray:
    return np.zeros(grid.n_nodes, dtype=bool)


def _gamma_d_closure(grid: Grid) -> np.ndarray:
    if grid.split is None:
        raise SemanticsMismatch("PropTwoFamily needs a grid with a Dirichlet/Neumann split")
    return grid.mask(NodeClass.DIRICHLET, NodeClass.CORNER)


def Zero() -> PiecewiseCandidate:
    return PiecewiseCandidate("zero", _no_region, 0.0)


def PropOneFamily(c: float) -> PiecewiseCandidate:
    """``v_c = 0`` in the domain and ``-c`` on its physical boundary."""
    return PiecewiseCandidate(f"v_c[prop1, c={c:g}]", lambda g: g.physical_boundary, -float(c))


def PropTwoFamily(c: float) -> PiecewiseCandidate:
    """``v_c = 0`` on the domain and the Neumann faces, ``-c`` on the closed Dirichlet faces."""
    return PiecewiseCandidate(f"v_c[prop2, c={c:g}]", _gamma_d_closure, -float(c))


BUILTIN_CANDIDATES = {"zero": lambda c=1.0: Zero(), "prop1": PropOneFamily, "prop2": PropTwoFamily}


@dataclass
class Envelopes:
    upper: GridFunction
    lower: GridFunction
    exact: bool


def discrete_envelopes(v: CandidateFunction | GridFunction, grid: Grid | None = None) -> Envelopes:
    """Semicontinuous envelopes at the nodes.

    Built-in piecewise candidates get their envelopes from the region
    structure. For a bare grid function the sampling itself is returned with
    ``exact=False``: one grid cannot resolve limsup/liminf.
    """
    if isinstance(v, GridFunction):
        logger.warning("envelopes of a sampled grid function are not resolvable; returning the sampling")
        return Envelopes(v, GridFunction(v.grid, v.values.copy()), exact=False)
    if grid is None:
        raise ValueError("a grid is required to sample a candidate")
    if not v.exact_envelopes:
        logger.warning("candidate %s has no closed-form envelopes; returning the sampling", v.name)
    return Envelopes(GridFunction(grid, v.upper(grid)), GridFunction(grid, v.lower(grid)), v.exact_envelopes)


# -- touching quadratics -----------------------------------------------------


def _disk_offsets(r: int) -> np.ndarray:
    rng = np.arange(-r, r + 1)
    di, dj = (a.ravel() for a in np.meshgrid(rng, rng, indexing="ij"))
    keep = (di * di + dj * dj <= r * r) & ((di != 0) | (dj != 0))
    off = np.stack([di[keep], dj[keep]], axis=1)
    order = np.lexsort((off[:, 1], off[:, 0], (off**2).sum(axis=1)))  # nearest first
    return off[order]


class _TouchingEngine:
    """Vectorized enumeration of the sampled quadratics touching at a node."""

    def __init__(self, grid: Grid, spec: SampleSpec):
        self.grid = grid
        self.spec = spec
        self.P = spec.gradients()
        self.M = spec.hessians()
        self.offsets = _disk_offsets(spec.r_check)
        d = self.offsets * grid.h
        self.S = self.P @ d.T  # (n_p, n_off) linear parts
        m11, m12, m22 = self.M.T
        self.Q = 0.5 * (np.outer(m11, d[:, 0] ** 2) + np.outer(2 * m12, d[:, 0] * d[:, 1])
                        + np.outer(m22, d[:, 1] ** 2))  # (n_m, n_off)

    @property
    def per_node(self) -> int:
        return len(self.P) * len(self.M)

    def neighbourhood(self, node: int, allowed: np.ndarray | None = None):
        i, j = self.grid.ij[node]
        nb = self.grid.lookup(i + self.offsets[:, 0], j + self.offsets[:, 1])
        ok = nb >= 0
        if allowed is not None:
            ok &= allowed[np.maximum(nb, 0)]
        return np.flatnonzero(ok), nb[ok]

    def touching(self, values: np.ndarray, node: int, sense: str, ip=None, im=None,
                 allowed: np.ndarray | None = None):
        """Indices ``(ip, im)`` of the quadratics touching ``values`` at ``node``.

        ``sense='below'``: ``values - phi`` has a local min (supersolution tests);
        ``sense='above'``: a local max (subsolution tests).
        """
        cols, nb = self.neighbourhood(node, allowed)
        if ip is None:
            ip = np.repeat(np.arange(len(self.P)), len(self.M))
            im = np.tile(np.arange(len(self.M)), len(self.P))
        dv = values[nb] - values[node]
        tau = self.spec.tau_touch
        for col, dvk in zip(cols, dv):
            if not len(ip):
                break
            phi = self.S[ip, col] + self.Q[im, col]
            keep = phi <= dvk + tau if sense == "below" else phi >= dvk - tau
            ip, im = ip[keep], im[keep]
        return ip, im

    def quadratic(self, node: int, ip: int, im: int) -> TestQuadratic:
        x0 = tuple(float(v) for v in self.grid.coords[node])
        return TestQuadratic(node, x0, tuple(float(v) for v in self.P[ip]), tuple(float(v) for v in self.M[im]))


def touching_quadratics(v_env, x0: int, sense: str, sample_spec: SampleSpec | None = None,
                        grid: Grid | None = None) -> Iterator[TestQuadratic]:
    """Stream the sampled quadratics touching ``v_env`` at node ``x0``.

    Args:
        v_env: envelope values as a :class:`GridFunction` (or array with ``grid``).
        sense: ``"from-below"`` (local minimum of ``v - phi``) or ``"from-above"``.
    """
    if sense not in ("from-below", "from-above"):
        raise ValueError("sense must be 'from-below' or 'from-above'")
    grid = grid if grid is not None else v_env.grid
    values = v_env.values if isinstance(v_env, GridFunction) else np.asarray(v_env, dtype=float)
    engine = _TouchingEngine(grid, sample_spec or SampleSpec())
    ip, im = engine.touching(values, x0, sense.split("-")[1])
    for a, b in zip(ip, im):
        yield engine.quadratic(x0, int(a), int(b))


# -- boundary operators ------------------------------------------------------


def _check_semantics(grid: Grid, sem: Semantics) -> None:
    split = grid.split is not None
    if sem == Semantics.BS_MIXED and not split:
        raise SemanticsMismatch("bs-mixed semantics need a grid built with a Dirichlet/Neumann split")
    if sem != Semantics.BS_MIXED and split:
        raise SemanticsMismatch(f"{sem.value} semantics apply to pure Dirichlet grids; got a split grid")


def operator_values(sem: Semantics, role: str, node_class: int, H: np.ndarray, w: float,
                    p_dot_n: np.ndarray | float) -> np.ndarray:
    """``F_*`` (role ``sub``) or ``F^*`` (role ``super``) at one node.

    ``w`` is the envelope value minus the boundary datum; ``p_dot_n`` the
    gradient component along the outward Neumann normal.
    """
    comb = np.minimum if role == "sub" else np.maximum
    if node_class == NodeClass.INTERIOR or sem == Semantics.CLASSICAL:
        return H
    if node_class == NodeClass.DIRICHLET:
        return comb(H, w)
    if node_class == NodeClass.NEUMANN:
        return comb(H, p_dot_n)
    if node_class == NodeClass.CORNER:
        return comb(H, comb(w, p_dot_n))
    raise ValueError(f"no operator for node class {node_class}")


def _violates(role: str, F, tau: float):
    return F > tau if role == "sub" else F < -tau


def _check(v: CandidateFunction, sem: Semantics, role: str, grid: Grid, source: SourceField | None,
           spec: SampleSpec | None, bc: BCSpec | None) -> Certificate:
    sem = Semantics(sem)
    spec = spec or SampleSpec()
    source = source or SourceField(0.0)
    bc = bc or BCSpec()
    _check_semantics(grid, sem)
    cert = Certificate(CertificateKind.NO_VIOLATION_FOUND, role, sem.value, v.name)
    vals = v.values(grid)
    env = v.upper(grid) if role == "sub" else v.lower(grid)
    if not v.exact_envelopes:
        cert.notes.append("envelopes not resolvable on one grid; the sampling was used")
    g = bc.dirichlet_data(grid)
    tau = spec.tau_residual

    if sem == Semantics.UG_SEMICONTINUOUS:
        # sub/supersolutions must be upper/lower semicontinuous from the outset
        bad = np.flatnonzero((np.abs(vals - env) > tau) & (grid.classes != NodeClass.ARTIFICIAL))
        if len(bad):
            n = int(bad[0])
            kind = "upper" if role == "sub" else "lower"
            cert.kind = CertificateKind.FALSIFIED
            cert.witness = Witness(n, tuple(map(float, grid.coords[n])), float(vals[n] - env[n]),
                                   f"not {kind} semicontinuous: v={vals[n]:g} but envelope={env[n]:g}")
            return cert
        env = vals

    if sem == Semantics.CLASSICAL:
        bnodes = np.flatnonzero(grid.physical_boundary)
        gap = vals[bnodes] - g[bnodes] if role == "sub" else g[bnodes] - vals[bnodes]
        bad = bnodes[gap > tau]
        cert.samples_checked += len(bnodes)
        if len(bad):
            n = int(bad[0])
            rel = "<=" if role == "sub" else ">="
            cert.kind = CertificateKind.FALSIFIED
            cert.witness = Witness(n, tuple(map(float, grid.coords[n])), float(vals[n] - g[n]),
                                   f"boundary data: need v {rel} g pointwise, v={vals[n]:g}, g={g[n]:g}")
            return cert
    engine = _TouchingEngine(grid, spec)
    if sem == Semantics.CLASSICAL:
        # a classical local extremum lives on a ball inside the open domain
        allowed = grid.classes == NodeClass.INTERIOR
        base = [n for n in grid.interior
                if len(engine.neighbourhood(int(n), allowed)[0]) == len(engine.offsets)]
    else:
        base = np.flatnonzero(grid.classes != NodeClass.ARTIFICIAL)
        allowed = None

    f = source.values(grid)
    m11, m12, m22 = engine.M.T
    sense = "above" if role == "sub" else "below"
    for node in base:
        node = int(node)
        cls = int(grid.classes[node])
        H = hamiltonian_2d(m11, m12, m22, f[node])  # (n_m,)
        pn = engine.P @ grid.normals[node].astype(float)  # (n_p,)
        F = operator_values(sem, role, cls, H[None, :], env[node] - g[node], pn[:, None])
        F = np.broadcast_to(F, (len(engine.P), len(engine.M)))
        cert.samples_checked += engine.per_node
        ip, im = np.nonzero(_violates(role, F, tau))
        if not len(ip):
            continue
        ip, im = engine.touching(env, node, sense, ip, im, allowed)
        if len(ip):
            worst = np.argmax(np.abs(F[ip, im]))
            q = engine.quadratic(node, int(ip[worst]), int(im[worst]))
            op = "F_*" if role == "sub" else "F^*"
            cert.kind = CertificateKind.FALSIFIED
            cert.witness = Witness(node, q.x0, float(F[ip[worst], im[worst]]),
                                   f"touching quadratic with {op} {'>' if role == 'sub' else '<'} 0",
                                   q.p, q.M)
            return cert
    return cert


def check_subsolution(v: CandidateFunction, sem: Semantics | str, grid: Grid,
                      source: SourceField | None = None, sample_spec: SampleSpec | None = None,
                      bc: BCSpec | None = None) -> Certificate:
    """Search for a sampled quadratic touching ``v^*`` from above with ``F_* > 0``.

    Under ug-semicontinuous semantics ``v`` must first equal its upper
    envelope. Under classical semantics only interior nodes are tested and
    ``v <= g`` is checked pointwise on the physical boundary.
    """
    return _check(v, sem, "sub", grid, source, sample_spec, bc)


def check_supersolution(v: CandidateFunction, sem: Semantics | str, grid: Grid,
                        source: SourceField | None = None, sample_spec: SampleSpec | None = None,
                        bc: BCSpec | None = None) -> Certificate:
    """Mirror image of :func:`check_subsolution` (``v_*``, from below, ``F^* < 0``)."""
    return _check(v, sem, "super", grid, source, sample_spec, bc)


# -- implication certificates ------------------------------------------------


def _random_hessians(n: int, m_max: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    ent = rng.uniform(-m_max, m_max, size=(n, 3))
    return ent


def _tangential_certificate(cert: Certificate, grid: Grid, cand: PiecewiseCandidate, nodes: np.ndarray,
                            tangent: tuple[int, int], spec: SampleSpec, n_random: int, seed: int) -> bool:
    """Rank-one chain ``y^T M y <= 0  =>  H(M, 0) >= -y^T M y >= 0`` along a face.

    Part (a) sweeps random and lattice Hessians with non-positive tangential
    curvature. Part (b) takes every sampled quadratic touching the lower
    envelope from below at a face node and checks that its tangential divided
    differences are non-positive and that ``F^* >= 0``.
    """
    tol = spec.tau_residual
    y = np.asarray(tangent, dtype=float) / math.hypot(*tangent)
    ent = np.concatenate([_random_hessians(n_random, spec.m_max, seed), SampleSpec.hessians(spec)])
    curv = ent[:, 0] * y[0] ** 2 + 2 * ent[:, 1] * y[0] * y[1] + ent[:, 2] * y[1] ** 2
    keep = curv <= 0
    ent, curv = ent[keep], curv[keep]
    H = hamiltonian_2d(ent[:, 0], ent[:, 1], ent[:, 2], 0.0)
    cert.samples_checked += len(ent)
    bad = np.flatnonzero(~((H >= -curv - tol) & (-curv >= 0)))
    if len(bad):
        k = int(bad[0])
        n = int(nodes[0])
        cert.kind = CertificateKind.FALSIFIED
        cert.witness = Witness(n, tuple(map(float, grid.coords[n])), float(H[k] + curv[k]),
                               "rank-one bound H(M,0) >= -y^T M y failed", None, tuple(map(float, ent[k])))
        return False

    engine = _TouchingEngine(grid, spec)
    lower = cand.lower(grid)
    t = np.asarray(tangent)
    for node in nodes:
        node = int(node)
        ip, im = engine.touching(lower, node, "below")
        cert.samples_checked += engine.per_node
        if not len(ip):
            continue
        i, j = grid.ij[node]
        for k in range(1, spec.r_check + 1):
            fw = grid.lookup(i + k * t[0], j + k * t[1])
            bw = grid.lookup(i - k * t[0], j - k * t[1])
            if fw < 0 or bw < 0 or not (np.isclose(lower[fw], lower[node]) and np.isclose(lower[bw], lower[node])):
                break
            eps = k * grid.h * math.hypot(*tangent)
            dvec = k * grid.h * t
            m11, m12, m22 = engine.M[im].T
            P = engine.P[ip]
            phi_f = P @ dvec + 0.5 * (m11 * dvec[0] ** 2 + 2 * m12 * dvec[0] * dvec[1] + m22 * dvec[1] ** 2)
            phi_b = -P @ dvec + 0.5 * (m11 * dvec[0] ** 2 + 2 * m12 * dvec[0] * dvec[1] + m22 * dvec[1] ** 2)
            dd = (phi_f + phi_b) / eps**2
            H = hamiltonian_2d(m11, m12, m22, 0.0)
            F = np.maximum(H, lower[node])
            bad = np.flatnonzero((dd > 2 * spec.tau_touch / eps**2 + tol) | (H < -dd - tol) | (F < -tol))
            if len(bad):
                b = int(bad[0])
                q = engine.quadratic(node, int(ip[b]), int(im[b]))
                cert.kind = CertificateKind.FALSIFIED
                cert.witness = Witness(node, q.x0, float(dd[b]),
                                       f"tangential chain failed at eps={eps:g}", q.p, q.M)
                return False
    return True


def certificate_prop1(grid: Grid, c: float = 1.0, sample_spec: SampleSpec | None = None,
                      n_random: int = 10_000, seed: int = 0) -> Certificate:
    """Supersolution certificate for ``v_c`` on the slab's ``x1 = 0`` face."""
    if c <= 0:
        raise ValueError("c must be positive")
    spec = sample_spec or SampleSpec()
    cand = PropOneFamily(c)
    cert = Certificate(CertificateKind.PASS, "super", Semantics.BS_DIRICHLET.value, cand.name)
    face = np.flatnonzero(grid.physical_boundary & (grid.classes == NodeClass.DIRICHLET))
    if not len(face):
        raise SemanticsMismatch("grid has no physical Dirichlet face")
    _tangential_certificate(cert, grid, cand, face, (0, 1), spec, n_random, seed)
    return cert


def certificate_prop2(grid: Grid, c: float = 1.0, sample_spec: SampleSpec | None = None,
                      n_random: int = 10_000, seed: int = 0) -> Certificate:
    """Supersolution certificate for the mixed-boundary ``v_c`` on the unit square.

    (i) the tangential chain at the open Dirichlet faces, (ii) at the corners
    ``max(p.n, -c) >= 0`` for every sampled ``p`` with ``p.n >= 0``, and the
    one-sided difference ``(phi(x) - phi(x - eps n)) / eps >= 0`` together
    with ``F^* >= 0`` for every sampled quadratic touching ``(v_c)_*`` from
    below at the corner.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if grid.split is None:
        raise SemanticsMismatch("certificate_prop2 needs a split grid")
    spec = sample_spec or SampleSpec()
    cand = PropTwoFamily(c)
    cert = Certificate(CertificateKind.PASS, "super", Semantics.BS_MIXED.value, cand.name)
    gamma_d = np.flatnonzero(grid.classes == NodeClass.DIRICHLET)
    if not _tangential_certificate(cert, grid, cand, gamma_d, (0, 1), spec, n_random, seed):
        return cert

    tol = spec.tau_residual
    engine = _TouchingEngine(grid, spec)
    lower = cand.lower(grid)
    for node in np.flatnonzero(grid.classes == NodeClass.CORNER):
        node = int(node)
        n = grid.normals[node]
        pn = engine.P @ n.astype(float)
        sel = pn >= 0
        cert.samples_checked += int(sel.sum())
        bstar = np.maximum(pn[sel], -c)
        if np.any(bstar < 0):
            k = int(np.flatnonzero(sel)[np.argmin(bstar)])
            cert.kind = CertificateKind.FALSIFIED
            cert.witness = Witness(node, tuple(map(float, grid.coords[node])), float(bstar.min()),
                                   "corner: max(p.n, -c) < 0 with p.n >= 0", tuple(map(float, engine.P[k])))
            return cert
        ip, im = engine.touching(lower, node, "below")
        cert.samples_checked += engine.per_node
        if not len(ip):
            continue
        m11, m12, m22 = engine.M[im].T
        H = hamiltonian_2d(m11, m12, m22, 0.0)
        pdn = engine.P[ip] @ n.astype(float)
        F = np.maximum(H, np.maximum(lower[node], pdn))
        i, j = grid.ij[node]
        bad = F < -tol
        for k in range(1, spec.r_check + 1):
            inner = grid.lookup(i - k * n[0], j - k * n[1])
            if inner < 0 or not np.isclose(lower[inner], lower[node]):
                break
            d = -k * grid.h * n.astype(float)
            phi = engine.P[ip] @ d + 0.5 * (m11 * d[0] ** 2 + 2 * m12 * d[0] * d[1] + m22 * d[1] ** 2)
            eps = k * grid.h
            one_sided = (0.0 - phi) / eps
            bad |= one_sided < -(spec.tau_touch / eps + tol)
        if np.any(bad):
            b = int(np.flatnonzero(bad)[0])
            q = engine.quadratic(node, int(ip[b]), int(im[b]))
            cert.kind = CertificateKind.FALSIFIED
            cert.witness = Witness(node, q.x0, float(F[b]), "corner one-sided difference chain failed", q.p, q.M)
            return cert
    return cert


# -- comparison and limit envelopes -----------------------------------------


@dataclass
class ComparisonWitness:
    node: int
    x: tuple[float, float]
    gap: float


def comparison_witness(sub: CandidateFunction, sup: CandidateFunction, sem: Semantics | str, grid: Grid,
                       sub_certificate: Certificate | None = None,
                       super_certificate: Certificate | None = None) -> ComparisonWitness | None:
    """Node maximizing ``sub^* - super_*``; a positive gap violates comparison.

    Both candidates must carry non-falsified certificates in their roles.
    """
    sem = Semantics(sem)
    for cert, role in ((sub_certificate, "sub"), (super_certificate, "super")):
        if cert is None or not cert.ok or cert.role != role:
            raise MissingCertificates(f"need a non-falsified {role}solution certificate")
        if cert.semantics != sem.value and not (cert.kind == CertificateKind.PASS):
            raise MissingCertificates(f"{role} certificate is for {cert.semantics}, not {sem.value}")
    keep = np.flatnonzero(grid.classes != NodeClass.ARTIFICIAL)
    gap = sub.upper(grid)[keep] - sup.lower(grid)[keep]
    k = int(np.argmax(gap))
    if gap[k] <= 0:
        return None
    node = int(keep[k])
    return ComparisonWitness(node, tuple(map(float, grid.coords[node])), float(gap[k]))


def liminf_envelope_across_levels(solutions: Sequence[tuple[float, GridFunction]],
                                  radius: float = 2.0) -> GridFunction:
    """Lower limit envelope of a refinement sequence, sampled on the finest grid.

    At a finest-grid node ``x`` the value is the minimum over levels of the
    minimum of ``u_h`` over that level's nodes within ``radius * h`` of ``x``.
    """
    if len(solutions) < 2:
        raise NonNestedGrids("need at least two refinement levels")
    levels = sorted(solutions, key=lambda s: s[1].grid.h_exact)
    fine = levels[0][1].grid
    for _, u in levels[1:]:
        g = u.grid
        ratio = g.h_exact / fine.h_exact
        if (ratio.denominator != 1 or g.origin != fine.origin
                or g.domain.rectangles != fine.domain.rectangles):
            raise NonNestedGrids("grids are not nested refinements of one domain")
    out = np.full(fine.n_nodes, np.inf)
    for _, u in levels:
        g = u.grid
        m = int(g.h_exact / fine.h_exact)
        r = int(math.floor(radius))
        base = np.floor_divide(fine.ij, m)
        rr = (radius * m) ** 2
        for a in range(-r, r + 2):
            for b in range(-r, r + 2):
                ci, cj = base[:, 0] + a, base[:, 1] + b
                dist2 = (ci * m - fine.ij[:, 0]) ** 2 + (cj * m - fine.ij[:, 1]) ** 2
                nb = g.lookup(ci, cj)
                ok = (nb >= 0) & (dist2 <= rr + 1e-9)
                out[ok] = np.minimum(out[ok], u.values[nb[ok]])
    return GridFunction(fine, out)
