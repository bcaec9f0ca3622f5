"""Command-line front end.

Exit codes: 0 ok, 1 usage or configuration error, 2 solver did not
converge, 3 a check was falsified.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, RunConfig, compile_expression, load_config
from .exceptions import MongeHJBError
from .grid import build_grid
from .viscosity import (
    BUILTIN_CANDIDATES,
    CertificateKind,
    SampledCandidate,
    Zero,
    certificate_prop1,
    certificate_prop2,
    check_subsolution,
    check_supersolution,
    comparison_witness,
)

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_FALSIFIED = 0, 1, 2, 3

log = logging.getLogger("monge_hjb")


def _problem(cfg: RunConfig) -> ex.Problem:
    return ex.Problem(cfg.domain.build(), cfg.source.build(), cfg.boundary.build(), cfg.stencil.build(),
                      cfg.boundary.split(), cfg.solver.tol, cfg.solver.max_iters)


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    u, rep = ex.solve_level(_problem(cfg), cfg.h)
    ex.write_solution(out / "solution.csv", u)
    _write_json(out / "report.json", rep.to_dict())
    print(f"dof={rep.dof_count} iterations={rep.iterations} residual={rep.final_residual:.3e} "
          f"min(u)={u.values.min():.6g} converged={rep.converged}")
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_cross_section(cfg: RunConfig, out: Path) -> int:
    levels = ex.refinement_study(_problem(cfg), cfg.levels)
    ex.write_sections(out, levels)
    for lvl in levels:
        _, s, v = ex.probe_diagonal(lvl.solution, cfg.probe_distance)
        print(f"mesh {lvl.level}: h={lvl.h:g} dof={lvl.dof} iterations={lvl.report.iterations} "
              f"u(s={s:.4f})={v:.6g}")
    return EXIT_OK if all(lvl.report.converged for lvl in levels) else EXIT_NOT_CONVERGED


def cmd_convergence(cfg: RunConfig, out: Path) -> int:
    if cfg.exact is None:
        raise ConfigError("convergence needs an 'exact' solution expression")
    exact = compile_expression(cfg.exact)
    fn = exact if callable(exact) else (lambda x1, x2, c=exact: 0.0 * x1 + c)
    rows = ex.convergence_table(_problem(cfg), cfg.levels, fn)
    cols = ("level", "h", "dof", "sup_error", "ratio")
    ex.write_csv(out / "convergence.csv", cols, ([r[c] for c in cols] for r in rows))
    for r in rows:
        print(f"level {r['level']}: h={r['h']:g} dof={r['dof']} sup_error={r['sup_error']:.3e} "
              f"ratio={r['ratio']:.3g} iterations={r['iterations']}")
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NOT_CONVERGED


def _candidate(cfg: RunConfig):
    name = cfg.verify.candidate
    if name in BUILTIN_CANDIDATES:
        return BUILTIN_CANDIDATES[name](cfg.verify.c)
    return SampledCandidate(name, compile_expression(name))


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    v = cfg.verify
    grid = build_grid(cfg.domain.build(), cfg.h, cfg.boundary.split())
    cand = _candidate(cfg)
    source, bc, spec = cfg.source.build(), cfg.boundary.build(), cfg.sample_spec.build()
    certs = {}
    if v.role in ("sub", "both"):
        certs["sub"] = check_subsolution(cand, v.semantics, grid, source, spec, bc)
    if v.role in ("super", "both"):
        certs["super"] = check_supersolution(cand, v.semantics, grid, source, spec, bc)
        if v.candidate == "prop1" and v.semantics == "bs-dirichlet" and cfg.domain.name == "slab":
            certs["certificate"] = certificate_prop1(grid, v.c, spec, v.n_random, cfg.seed)
        elif v.candidate == "prop2" and v.semantics == "bs-mixed":
            certs["certificate"] = certificate_prop2(grid, v.c, spec, v.n_random, cfg.seed)
    for cert in certs.values():
        print(cert.summary())
    report = {k: c.to_dict() for k, c in certs.items()}

    zero = Zero()
    zero_sub = check_subsolution(zero, v.semantics, grid, source, spec, bc)
    sup_cert = certs.get("certificate", certs.get("super"))
    if zero_sub.ok and sup_cert is not None and sup_cert.ok:
        w = comparison_witness(zero, cand, v.semantics, grid, zero_sub, sup_cert)
        if w is None:
            print("comparison(zero, candidate): no violation")
        else:
            print(f"comparison(zero, candidate): gap={w.gap:.6g} at node {w.node} x={w.x}")
        report["comparison"] = None if w is None else {"node": w.node, "x": list(w.x), "gap": w.gap}
    _write_json(out / "certificates.json", report)
    falsified = any(c.kind == CertificateKind.FALSIFIED for c in certs.values())
    return EXIT_FALSIFIED if falsified else EXIT_OK


def cmd_hamiltonian_check(cfg: RunConfig, out: Path) -> int:
    hc = cfg.hamiltonian_check
    sweep = ex.oracle_sweep(hc.n_oracle, cfg.seed, hc.resolutions)
    direc = ex.directional_sweep(hc.n_directional, cfg.seed, hc.scan_step)
    report = {"oracle": {"n": sweep.n, "worst_gap": {str(k): g for k, g in sweep.worst_gap.items()},
                         "max_excess": sweep.max_excess, "monotone": sweep.monotone, "ok": sweep.ok()},
              "directional": {**direc, "ok": direc["max_abs_diff"] <= 1e-6}}
    _write_json(out / "hamiltonian_check.json", report)
    print(f"oracle: worst gap {sweep.worst_gap} excess {sweep.max_excess:.2e} monotone {sweep.monotone} "
          f"({sweep.seconds:.1f}s)")
    print(f"directional: max |closed form - scan| {direc['max_abs_diff']:.2e} ({direc['seconds']:.1f}s)")
    ok = report["oracle"]["ok"] and report["directional"]["ok"]
    return EXIT_OK if ok else EXIT_FALSIFIED


COMMANDS = {
    "solve": cmd_solve,
    "cross-section": cmd_cross_section,
    "verify": cmd_verify,
    "convergence": cmd_convergence,
    "hamiltonian-check": cmd_hamiltonian_check,
}


def build_parser() -> argparse.ArgumentParser:
    defaults = RunConfig()
    parser = argparse.ArgumentParser(
        prog="monge-hjb",
        description="Wide-stencil HJB solver for the Monge-Ampere equation and viscosity-solution checks.",
        epilog="Config defaults (YAML):\n" + defaults.to_yaml(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="YAML run configuration")
    parser.add_argument("--out", type=Path, help=f"output directory (default {defaults.output_dir!r})")
    parser.add_argument("--seed", type=int, help=f"seed for randomized sweeps (default {defaults.seed})")
    parser.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, {"seed": args.seed,
                                         "output_dir": None if args.out is None else str(args.out)})
        if args.print_config:
            sys.stdout.write(cfg.to_yaml())
            return EXIT_OK
        return COMMANDS[args.command](cfg, Path(cfg.output_dir))
    except (ConfigError, MongeHJBError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
