"""``sl-krein`` command-line frontend.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 a checked
property failed.  Results go to stdout (or ``-o``); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import bdm as B
from . import boundary as bd
from . import shift as H
from . import spectra as S
from . import verify as VF
from . import vonneumann as V
from .errors import (
    BadDocument,
    InputError,
    NumericError,
    PropertyViolation,
    SlKreinError,
)
from .problem import PRESETS, Problem, preset
from .propagate import DEFAULT_TOL

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_PROPERTY = 0, 2, 3, 4


class UsageError(Exception):
    """Bad command-line usage that argparse cannot see."""


# ---------------------------------------------------------------------------
# serialization


def _plain(x: Any) -> Any:
    """Convert numpy and complex values into JSON-ready Python objects."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _dump(x: Any) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    if isinstance(x, dict):
        items = sorted(x.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {_dump(v)}" for k, v in items) + "}"
    if isinstance(x, list):
        return "[" + ", ".join(_dump(v) for v in x) + "]"
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            return json.dumps(str(x))
        return format(x, ".17g") if x != int(x) or abs(x) >= 1e17 else format(x, ".1f")
    return json.dumps(x)


def dumps(obj: Any) -> str:
    return _dump(_plain(obj)) + "\n"


def _csv(header: list[str], rows: list[list]) -> str:
    def cell(v):
        if isinstance(v, float):
            return format(v, ".17g")
        return str(v)

    lines = [",".join(header)] + [",".join(cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# argument parsing helpers


def _parse_complex(text: str) -> complex:
    t = text.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(t)
    except ValueError:
        raise UsageError(f"cannot read a complex number from {text!r}") from None


def load_problem(spec: str | None) -> Problem:
    """A preset name, a path to a problem document, or a path whose stem is a preset."""
    if spec is None:
        raise UsageError("this command needs -p/--problem")
    path = Path(spec)
    if path.is_file():
        with path.open(encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise BadDocument(f"{spec}: {exc}") from exc
        if isinstance(doc, dict) and set(doc) == {"preset"}:
            return preset(doc["preset"])
        return Problem.from_json(doc)
    if spec in PRESETS:
        return preset(spec)
    if path.suffix == ".json" and path.stem in PRESETS:
        return preset(path.stem)
    raise UsageError(f"no problem file or preset named {spec!r} (presets: {', '.join(PRESETS)})")


def load_bc(text: str, problem: Problem | None = None) -> bd.ABPair:
    """A named condition, an inline JSON document, or a path to one."""
    t = text.strip()
    if t.startswith("{"):
        try:
            doc = json.loads(t)
        except json.JSONDecodeError as exc:
            raise BadDocument(f"bad boundary-condition JSON: {exc}") from exc
    elif Path(t).is_file():
        with open(t, encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = {"kind": "named", "name": t.lower()}
    return bd.bc_from_json(doc, problem)


def _threads() -> int:
    raw = os.environ.get("SL_KREIN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map(fn: Callable, items: list) -> list:
    """Ordered map, threaded up to SL_KREIN_THREADS workers."""
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _emit(args, payload: Any, csv_text: str | None = None) -> None:
    if args.format == "csv":
        if csv_text is None:
            raise UsageError(f"{args.command} has no CSV output; use --format json")
        text = csv_text
    else:
        text = dumps(payload)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _short(c: complex) -> str:
    """Six decimals, dropping an imaginary part that would print as zero."""
    if abs(c.imag) < 5e-7:
        return f"{c.real + 0.0:.6f}"
    return f"{c.real:.6f}{c.imag:+.6f}i"


def _tol(args) -> float:
    return DEFAULT_TOL if args.tol is None else args.tol


def _mat(M) -> list:
    return bd.complex_matrix_json(np.asarray(M))


# ---------------------------------------------------------------------------
# commands


def cmd_eigs(args) -> int:
    P = load_problem(args.problem)
    bc = load_bc(args.bc, P)
    if args.window is None:
        raise UsageError("eigs needs --window LO HI")
    tol = _tol(args)
    spec = S.eigenvalues(P, bc, tuple(args.window), tol=args.eig_tol, int_tol=tol)
    _emit(args, spec.to_json(), spec.to_csv())
    return EXIT_OK


def cmd_bdm(args) -> int:
    P = load_problem(args.problem)
    frm, to = load_bc(args.from_bc, P), load_bc(args.to_bc, P)
    zs = [_parse_complex(z) for z in args.z]
    tol = _tol(args)
    if args.check is None:
        vals = _map(lambda z: B.bdm_eval(P, frm, to, z, tol), zs)
        payload = {"from": bd.bc_to_json(frm), "to": bd.bc_to_json(to), "values": [{"z": v.z, "M": _mat(v.M)} for v in vals]}
        _emit(args, payload, B.bdm_grid_csv(vals))
        return EXIT_OK
    rows = []
    if args.check == "herglotz":
        for z in zs:
            m = float(B.herglotz_probe(P, frm, to, z, tol)[0])
            rows.append(
                {
                    "z": z,
                    "min_eig_Im": m,
                    "reflection": B.reflection_residual(P, frm, to, z, tol),
                    "summary": f"min eig Im(Lambda S*) = {m:.6g}",
                }
            )
        ok = all(r["min_eig_Im"] > 0 for r in rows)
    elif args.check == "group":
        via = load_bc(args.via, P)
        for z in zs:
            L = B.bdm_matrix(P, frm, to, z, tol)
            back = B.bdm_matrix(P, to, frm, z, tol)
            rows.append(
                {
                    "z": z,
                    "identity": float(np.abs(B.bdm_matrix(P, frm, frm, z, tol) - np.eye(2)).max()),
                    "inverse": float(np.abs(back @ L - np.eye(2)).max()),
                    "composition": B.bdm_compose_check(P, frm, via, to, z, tol),
                }
            )
        ok = all(max(r["identity"], r["inverse"], r["composition"]) < args.limit for r in rows)
    else:
        for z in zs:
            frac = B.bdm_via_fractional(P, frm, to, z, tol).M
            rows.append({"z": z, "fractional": float(np.abs(frac - B.bdm_matrix(P, frm, to, z, tol)).max())})
        ok = all(r["fractional"] < args.limit for r in rows)
    _emit(args, {"check": args.check, "passed": ok, "rows": rows})
    if not ok:
        print(f"check {args.check} failed", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_green(args) -> int:
    P = load_problem(args.problem)
    bc = load_bc(args.bc, P)
    z = _parse_complex(args.z)
    tol = _tol(args)
    pts = [(float(x), float(y)) for x, y in args.points]
    vals = _map(lambda xy: (S.green_direct(P, bc, z, xy[0], xy[1], tol), S.green_general(P, bc, z, xy[0], xy[1], tol)), pts)
    rows = [{"x": x, "xp": y, "G": g, "G_general": h, "route_gap": abs(g - h)} for (x, y), (g, h) in zip(pts, vals)]
    csv_rows = [[x, y, g.real, g.imag] for (x, y), (g, _) in zip(pts, vals)]
    _emit(args, {"z": z, "bc": bd.bc_to_json(bc), "values": rows}, _csv(["x", "xp", "re_G", "im_G"], csv_rows))
    return EXIT_OK


def cmd_ssf(args) -> int:
    P = load_problem(args.problem)
    frm, to = load_bc(args.from_bc, P), load_bc(args.to_bc, P)
    tol = _tol(args)
    if args.lambdas:
        lams = [float(x) for x in args.lambdas]
        vals = H.ssf_boundary(P, frm, to, lams, args.epsilon, tol)
        rows = [{"lambda": x, "xi": v, "rounded": int(round(v))} for x, v in zip(lams, vals)]
        _emit(args, {"method": "boundary", "epsilon": args.epsilon, "values": rows},
              _csv(["lambda", "xi", "rounded"], [[x, v, int(round(v))] for x, v in zip(lams, vals)]))
        return EXIT_OK
    if args.lmax is None:
        raise UsageError("ssf needs --lmax or --lambdas")
    step = H.ssf_counting(P, frm, to, args.lmax, int_tol=tol)
    grid = np.linspace(min([0.0] + [j[0] for j in step.jumps]) - 1.0, args.lmax, 201)
    _emit(args, {"method": "counting", "lambda_max": args.lmax, "xi": step.to_json()}, step.to_csv(grid))
    return EXIT_OK


def cmd_trace(args) -> int:
    P = load_problem(args.problem)
    frm, to = load_bc(args.from_bc, P), load_bc(args.to_bc, P)
    z = _parse_complex(args.z)
    t = H.trace_formula_check(P, frm, to, z, args.n_eigs, tol=args.limit, int_tol=_tol(args))
    summary = f"lhs={_short(t.lhs)} rhs={_short(t.rhs)}"
    payload = {"z": z, "lhs": t.lhs, "rhs": t.rhs, "residual": t.residual, "tail": t.tail, "cutoff": t.cutoff, "summary": summary}
    _emit(args, payload)
    if t.residual > args.limit:
        print(f"trace residual {t.residual:.3e} exceeds {args.limit:g}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_krein(args) -> int:
    P = load_problem(args.problem)
    target, ref = load_bc(args.target, P), load_bc(args.ref, P)
    z = _parse_complex(args.z)
    tol = _tol(args)
    canon = bd.canonicalize(target) if bd.equivalent(ref, bd.DIRICHLET) else None
    if canon is not None:
        target = canon.to_ab()
    corr = S.krein_correction(P, target, ref, z, tol, canonical=canon)
    residual = S.krein_resolvent_check(P, target, ref, z, list(VF.TRIALS), tol)
    payload = {"z": z, "kind": corr.kind, "S": _mat(corr.S), "resolvent_residual": residual}
    if corr.P is not None:
        payload["P"] = _mat(corr.P)
    if corr.p is not None:
        payload["p"] = corr.p
    if corr.specialized is not None:
        sp = corr.specialized
        payload["specialized"] = {"name": sp.name, "value": _plain(np.asarray(sp.value, dtype=complex)), "residual": sp.residual}
    _emit(args, payload)
    if residual > args.limit:
        print(f"Krein residual {residual:.3e} exceeds {args.limit:g}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_convert(args) -> int:
    P = load_problem(args.problem) if args.problem else None
    ab = load_bc(args.bc, P)
    payload = {"converted": bd.bc_to_json(ab, args.to), "U": _mat(bd.to_unitary(ab))}
    _emit(args, payload)
    return EXIT_OK


def cmd_vn(args) -> int:
    P = load_problem(args.problem)
    bc = load_bc(args.bc, P)
    tol = _tol(args)
    if args.route == "general":
        v = V.vn_unitary_general(P, bc, load_bc(args.ref, P), tol)
    else:
        v = V.vn_unitary_specialized(P, bc, tol)
    payload = v.to_json()
    if v.ill_conditioned:
        print(f"warning: condition number {v.condition:.3e} is large", file=sys.stderr)
    _emit(args, payload)
    if payload["isometry_residual"] >= V.ISOMETRY_TOL:
        print(f"isometry residual {payload['isometry_residual']:.3e} exceeds {V.ISOMETRY_TOL:g}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_verify(args) -> int:
    tol = _tol(args)
    results = VF.run_suite(args.suite, tol, report=lambda r: print(r.line(), file=sys.stderr))
    failed = [r.number for r in results if not r.passed]
    _emit(args, {"suite": args.suite, "passed": not failed, "failed": failed, "criteria": [r.to_json() for r in results]})
    if failed:
        print(f"failed criteria: {', '.join(map(str, failed))}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-p", "--problem", help="problem JSON file or preset name")
    common.add_argument("--tol", type=float, default=None, help="integrator tolerance")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-o", "--output", help="write results here instead of stdout")

    parser = argparse.ArgumentParser(prog="sl-krein", description="Regular Sturm-Liouville extensions, boundary data maps and Krein formulas.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eigs", parents=[common], help="eigenvalues in a window")
    p.add_argument("--bc", required=True)
    p.add_argument("--window", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--eig-tol", type=float, default=S.EIG_TOL)
    p.set_defaults(func=cmd_eigs)

    p = sub.add_parser("bdm", parents=[common], help="boundary data map on a z grid")
    p.add_argument("--from", dest="from_bc", required=True)
    p.add_argument("--to", dest="to_bc", required=True)
    p.add_argument("--z", nargs="+", required=True)
    p.add_argument("--check", choices=("group", "herglotz", "fractional"))
    p.add_argument("--via", default="periodic", help="intermediate condition for --check group")
    p.add_argument("--limit", type=float, default=1e-8)
    p.set_defaults(func=cmd_bdm)

    p = sub.add_parser("green", parents=[common], help="Green function values")
    p.add_argument("--bc", required=True)
    p.add_argument("--z", required=True)
    p.add_argument("--points", nargs=2, action="append", required=True, metavar=("X", "XP"))
    p.set_defaults(func=cmd_green)

    p = sub.add_parser("ssf", parents=[common], help="spectral shift function")
    p.add_argument("--from", dest="from_bc", required=True)
    p.add_argument("--to", dest="to_bc", required=True)
    p.add_argument("--lmax", type=float)
    p.add_argument("--lambdas", nargs="+", type=float)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.set_defaults(func=cmd_ssf)

    p = sub.add_parser("trace", parents=[common], help="trace formula check")
    p.add_argument("--from", dest="from_bc", required=True)
    p.add_argument("--to", dest="to_bc", required=True)
    p.add_argument("--z", required=True)
    p.add_argument("--n-eigs", type=int, default=20)
    p.add_argument("--limit", type=float, default=1e-5)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("krein", parents=[common], help="Krein resolvent formula")
    p.add_argument("--target", required=True)
    p.add_argument("--ref", default="dirichlet")
    p.add_argument("--z", required=True)
    p.add_argument("--limit", type=float, default=1e-6)
    p.set_defaults(func=cmd_krein)

    p = sub.add_parser("convert", parents=[common], help="convert a boundary condition")
    p.add_argument("--bc", required=True)
    p.add_argument("--to", choices=("ab", "dn", "unitary", "canonical"), default="ab")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("vn", parents=[common], help="von Neumann unitary")
    p.add_argument("--bc", required=True)
    p.add_argument("--route", choices=("general", "specialized"), default="general")
    p.add_argument("--ref", default="dirichlet")
    p.set_defaults(func=cmd_vn)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--suite", choices=tuple(VF.SUITES), default="free")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sl-krein {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PropertyViolation as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except (InputError, ValueError, KeyError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, SlKreinError, np.linalg.LinAlgError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
