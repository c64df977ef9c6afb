"""Command-line entry point: ``perisolve certify|solve|reproduce``.

Exit codes: 0 PASS, 1 FAIL or Newton failure, 2 INCONCLUSIVE, 3 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from .cases import CASES, compare_shifts, shift_discrepancy_note
from .certify import FAIL, INCONCLUSIVE, PASS, certify_all, certify_nagumo
from .config import ConfigError, RunConfig, builtin_config, load_config
from .solver import continuation_solve

log = logging.getLogger("perisolve")

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_CONFIG = 0, 1, 2, 3
_EXIT = {PASS: EXIT_PASS, FAIL: EXIT_FAIL, INCONCLUSIVE: EXIT_INCONCLUSIVE}
REPRODUCIBLE = ("example", "vdp")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _metadata() -> dict:
    def ver(pkg):
        try:
            return metadata.version(pkg)
        except metadata.PackageNotFoundError:
            return None

    return {"artifact": ver("artifact"), "numpy": np.__version__, "scipy": ver("scipy")}


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _resolve(args) -> RunConfig:
    if args.config and args.builtin:
        raise ConfigError("use either --config or --builtin, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.builtin:
        cfg = builtin_config(args.builtin)
    else:
        raise ConfigError("one of --config or --builtin is required")
    return cfg.with_overrides(grid=args.grid, steps=getattr(args, "steps", None),
                              tol=getattr(args, "tol", None), method=getattr(args, "method", None))


def run_certification(cfg: RunConfig):
    report = certify_all(cfg.system, cfg.bounds, cfg.env_f, cfg.env_g, cfg.certification)
    case = cfg.case
    if case is not None and case.published_shifts:
        report.bounds_note = shift_discrepancy_note(compare_shifts(cfg.bounds, case.published_shifts))
    if case is not None:
        report.notes.extend(case.notes)
    return report


def _print_certification(report, out=None):
    out = out or sys.stdout
    for c in report.conditions:
        print(c.line(), file=out)
    print(f"overall          {report.overall}", file=out)
    if report.bounds_note:
        print(f"note: {report.bounds_note}", file=out)


def cmd_certify(args) -> int:
    cfg = _resolve(args)
    report = run_certification(cfg)
    write_json(args.report or "certification.json", {**report.to_dict(), "metadata": _metadata()})
    _print_certification(report)
    return _EXIT[report.overall]


def _oracle_fit(traj) -> dict:
    """Least-squares (A, B) of z against cos 2πt, sin 2πt, compared with the closed form."""
    from .system import manufactured_coefficients

    t = traj.t
    basis = np.column_stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)])
    A, B = manufactured_coefficients()
    out = {"A_closed_form": A, "B_closed_form": B}
    for key, col in (("z", traj.z), ("w", traj.w)):
        (a, b), *_ = np.linalg.lstsq(basis, col, rcond=None)
        out[f"{key}_fit"] = [float(a), float(b)]
        out[f"{key}_error"] = float(max(abs(a - A), abs(b - B)))
    return out


def solve_pipeline(cfg: RunConfig, skip_certify: bool = False):
    """Certification (unless skipped) followed by continuation; returns (exit, traj, report dict, cert)."""
    cert = None
    skip = skip_certify or not cfg.certify_by_default
    if not skip:
        cert = run_certification(cfg)
        if cert.overall != PASS:
            _print_certification(cert, sys.stderr)
            msg = f"certification {cert.overall}; rerun with --skip-certify to solve anyway"
            return _EXIT[cert.overall], None, {"converged": False, "message": msg,
                                                "certification": cert.overall}, cert
    traj, rep = continuation_solve(cfg.system, cfg.bounds, cfg.solver.schedule(),
                                   cfg.solver.solver_config(), (cfg.env_f, cfg.env_g))
    d = rep.to_dict()
    d["certification"] = cert.overall if cert else "SKIPPED"
    if cfg.case is not None and cfg.case.name == "manufactured_linear" and rep.converged:
        d["oracle"] = _oracle_fit(traj)
    if traj is not None and rep.converged:
        d["z_std"] = float(np.std(traj.z, ddof=1))
        d["w_std"] = float(np.std(traj.w, ddof=1))
        d["n_samples"] = len(traj.t)
    if not rep.converged:
        code = EXIT_FAIL
    elif rep.status == PASS:
        code = EXIT_PASS
    else:
        code = EXIT_INCONCLUSIVE
    return code, traj, d, cert


def cmd_solve(args) -> int:
    cfg = _resolve(args)
    code, traj, d, _ = solve_pipeline(cfg, args.skip_certify)
    if traj is not None and d.get("converged"):
        traj.write_csv(args.out or "traj.csv")
    write_json(args.report or "solve.json", {**d, "metadata": _metadata()})
    status = d.get("status", "FAILED") if d.get("converged") else "FAILED"
    print(f"solve {status}: residual={d.get('residual')} path_steps={len(d.get('lambda_mu_path', []))}")
    if d.get("localization"):
        print(f"localization {d['localization']['verdict']}")
    if d.get("message"):
        print(d["message"], file=sys.stderr)
    return code


def write_shifted_bounds(path, q, n: int = 1001) -> None:
    t = np.linspace(0.0, q.T, n)
    cols = [np.asarray(q.alpha1_0(t), float), np.asarray(q.beta1_0(t), float),
            np.asarray(q.alpha2_0(t), float), np.asarray(q.beta2_0(t), float)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "alpha1_0", "beta1_0", "alpha2_0", "beta2_0"])
        for i in range(n):
            w.writerow([repr(float(t[i]))] + [repr(float(c[i])) for c in cols])


def _summary(case, comparison, cert, published_cert, solve: dict) -> str:
    lines = [f"case: {case.name}", "", "shifted bounds (computed vs published):"]
    for key, c in comparison.items():
        tag = "match" if c["match"] else f"DIFFERS (constant term off by {c['constant_difference']})"
        lines.append(f"  {key}: computed {c['computed']} | published {c['published']} | {tag}")
    note = shift_discrepancy_note(comparison)
    lines += ["", f"discrepancy: {note}" if note else "all shifted bounds match the published expressions"]
    lines += ["", f"certification (default envelopes): {cert.overall}"]
    for c in cert.conditions:
        lines.append(f"  {c.line()}")
    if published_cert is not None:
        cond = published_cert.conditions[0]
        lines += ["", f"nagumo check with the published envelopes: {cond.verdict} "
                      f"(worst margin {cond.worst_margin:.6g})"]
        for name, part in cond.parts.items():
            lines.append(f"  {name}: {part.get('verdict')} worst_margin={part.get('worst_margin')}")
    for n in case.notes:
        lines.append(f"note: {n}")
    lines += ["", f"solve: converged={solve.get('converged')} status={solve.get('status')} "
                  f"residual={solve.get('residual')}"]
    if solve.get("localization"):
        lines.append(f"localization: {solve['localization']['verdict']}")
    if "z_std" in solve:
        lines.append(f"sample std of z: {solve['z_std']:.6g}")
    return "\n".join(lines) + "\n"


def cmd_reproduce(args) -> int:
    name = args.case or args.builtin
    if name is None:
        raise ConfigError("reproduce needs a case name")
    if name not in REPRODUCIBLE:
        raise ConfigError(f"unknown case {name!r}; expected one of {REPRODUCIBLE}")
    cfg = builtin_config(name).with_overrides(grid=args.grid, steps=args.steps, tol=args.tol,
                                              method=args.method)
    case = cfg.case
    out = Path(args.out or f"reproduce_{name}")
    out.mkdir(parents=True, exist_ok=True)

    comparison = compare_shifts(cfg.bounds, case.published_shifts)
    cert = run_certification(cfg)
    published_cert = None
    pub = case.published_envelopes
    if pub and (pub["f"] != case.env_f or pub["g"] != case.env_g):
        published_cert = certify_nagumo(cfg.system, cfg.bounds, pub["f"], pub["g"],
                                        cfg.certification.resolved(
                                            tuple(cert.derivative_bounds[k] for k in ("N1", "N2"))))
    write_json(out / "certification.json", {**cert.to_dict(), "shift_comparison": comparison,
                                            "published_envelope_nagumo":
                                                published_cert.to_dict() if published_cert else None,
                                            "metadata": _metadata()})
    write_shifted_bounds(out / "shifted_bounds.csv", cfg.bounds)
    code, traj, d, _ = solve_pipeline(cfg, skip_certify=True)
    d["certification"] = cert.overall
    if traj is not None and d.get("converged"):
        traj.write_csv(out / "trajectory.csv")
    write_json(out / "solve.json", {**d, "metadata": _metadata()})
    (out / "summary.txt").write_text(_summary(case, comparison, cert, published_cert, d))
    print((out / "summary.txt").read_text(), end="")
    if cert.overall != PASS:
        return _EXIT[cert.overall]
    return code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--builtin", metavar="NAME", help=f"built-in case: {', '.join(CASES)}")
    common.add_argument("--out", metavar="PATH", help="trajectory CSV (solve) or bundle directory (reproduce)")
    common.add_argument("--report", metavar="PATH", help="JSON report path")
    common.add_argument("--grid", type=int, metavar="N", help="certification grid points in t")
    common.add_argument("--steps", type=int, metavar="N", help="continuation steps along the diagonal")
    common.add_argument("--tol", type=float, metavar="X", help="Newton residual tolerance")
    common.add_argument("--method", choices=("rk45", "rk4_fixed"), help="continuation integrator")
    common.add_argument("--skip-certify", action="store_true", help="solve without certifying first")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="perisolve", description="Certify and solve coupled periodic second-order systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("certify", parents=[common], help="check the existence hypotheses").set_defaults(
        func=cmd_certify)
    sub.add_parser("solve", parents=[common], help="certify, then compute a periodic solution").set_defaults(
        func=cmd_solve)
    r = sub.add_parser("reproduce", parents=[common], help="rebuild a published case study bundle")
    r.add_argument("case", nargs="?", help=f"one of {', '.join(REPRODUCIBLE)}")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"perisolve: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if "PERISOLVE_THREADS" in os.environ:
        log.debug("thread cap %s", os.environ["PERISOLVE_THREADS"])
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"perisolve: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"perisolve: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"perisolve: failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
