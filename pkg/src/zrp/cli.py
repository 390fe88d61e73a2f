"""``zrp`` command line: denominators, roots, scans, traces, census, laboratory units.

Every command writes its machine-readable result to ``--out`` (atomically)
and prints a one-line summary. Parameters may come from a JSON file given
with ``--config``; its keys mirror the flag names and flags win.

Exit status: 0 success, 1 numerical non-convergence, 2 invalid input.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile

from .denominator import QuadOptions, d_field, d_zero_field
from .errors import ConvergenceError, DomainError, ScanError, ZrpError
from .rootfind import (
    SolveOptions,
    evaluate_grid,
    grid_minima,
    newton_complex,
    solve_fixed_im,
    zero_field_roots,
)
from .trace import BranchPoint, census, trace_fixed_ebind, trace_fixed_im, trace_locus
from .units import MaterialParams, ScaledPoint, realize_scenario

LOGGER = logging.getLogger("zrp")

# reference n = 1 resonance, expressed in laboratory units by `table1`
LAB_POINT = ScaledPoint(complex(3.0703456182811, -1e-4), -2.2860459726451, 0.2647)
LAB_BINDINGS = "1,2,4,6"

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_INPUT = 2


class InputError(Exception):
    """Invalid flags or configuration."""


def fmt(value):
    """Shortest round-trip text for a number."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _json_number(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def atomic_write(path, text):
    """Write `text` to `path` through a temporary file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".zrp-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj):
    return json.dumps(obj, indent=2) + "\n"


def write_table(args, header, rows):
    """Write rows as CSV, or as a JSON list of records with ``--format json``."""
    if args.format == "json":
        records = [{k: _json_number(v) for k, v in zip(header, row)} for row in rows]
        atomic_write(args.out, json_text(records))
    else:
        atomic_write(args.out, csv_text(header, rows))


# ---------------------------------------------------------------- commands


def _quad(args):
    kw = {}
    if args.tol is not None:
        kw["rel_tol"] = args.tol
    if getattr(args, "depth", None) is not None:
        kw["depth"] = args.depth
    if getattr(args, "method", None) is not None:
        kw["method"] = args.method
    return QuadOptions(**kw)


def cmd_bound(args):
    roots = zero_field_roots(args.ebind, args.levels + 1)
    rows = [(args.ebind, n, e, abs(d_zero_field(e, args.ebind))) for n, e in enumerate(roots)]
    write_table(args, ["ebind", "level_n", "e_root", "residual"], rows)
    return f"{len(rows)} zero-field roots written to {args.out}"


def cmd_denom(args):
    e = complex(args.re, args.im)
    if args.field == 0:
        value = d_zero_field(e, args.ebind)
        err, evals = 4e-16 * max(1.0, abs(value)), 1
    else:
        res = d_field(e, args.ebind, args.field, _quad(args))
        value, err, evals = res.value, res.abs_err, res.evals
    out = {
        "re": args.re,
        "im": args.im,
        "value_re": value.real,
        "value_im": value.imag,
        "abs_err": err,
        "evals": evals,
    }
    atomic_write(args.out, json_text(out))
    return f"|D| = {abs(value):.6g} written to {args.out}"


def _cells(text):
    try:
        nx, ny = (int(v) for v in str(text).lower().split("x"))
    except ValueError:
        raise InputError(f"--cells must look like 64x64, got {text!r}") from None
    return nx, ny


def cmd_scan(args):
    grid = evaluate_grid(
        (args.re_min, args.re_max),
        (args.field_min, args.field_max),
        args.ebind,
        _cells(args.cells),
        im_e=args.im,
        quad=_quad(args),
        workers=args.threads,
    )
    rows = [
        (float(x), float(y), float(grid.magnitude[i, j]))
        for i, x in enumerate(grid.xs)
        for j, y in enumerate(grid.ys)
    ]
    header = ["re_e", "f_tilde", "abs_d"]
    write_table(args, header, rows)
    seeds = grid_minima(grid)
    stem, ext = os.path.splitext(args.out)
    seeds_path = f"{stem}_seeds{ext or '.csv'}"
    seed_rows = [(m.re_e, m.y, m.magnitude) for m in seeds]
    if args.format == "json":
        atomic_write(seeds_path, json_text([dict(zip(header, r)) for r in seed_rows]))
    else:
        atomic_write(seeds_path, csv_text(header, seed_rows))
    return f"{len(rows)} cells scanned, {len(seeds)} seeds written to {seeds_path}"


def cmd_roots(args):
    opts = SolveOptions(residual_tol=args.residual_tol)
    if args.mode == "fixed-im":
        _require(args, "im", "ebind", "seed_re", "seed_field")
        res = solve_fixed_im(args.im, args.ebind, args.seed_re, args.seed_field, opts, _quad(args))
        x, f = res.location
        out = {"re_e": x, "f_tilde": f, "residual": res.residual, "iterations": res.iterations}
        summary = f"root Re E = {x!r}, F = {f!r}"
    else:
        _require(args, "ebind", "field", "seed_re", "seed_im")
        quad = _quad(args)
        res = newton_complex(
            lambda z: d_field(z, args.ebind, args.field, quad).value,
            complex(args.seed_re, args.seed_im),
            opts,
        )
        z = res.location
        out = {"re_e": z.real, "im_e": z.imag, "residual": res.residual, "iterations": res.iterations}
        summary = f"root E = {z!r}"
    atomic_write(args.out, json_text(out))
    return f"{summary} written to {args.out}"


def cmd_trace(args):
    quad = _quad(args)
    if args.mode == "fixed-im":
        _require(args, "im", "ebind", "start_re", "start_field")
        start = solve_fixed_im(args.im, args.ebind, args.start_re, args.start_field, quad=quad)
        x, f = start.location
        point = BranchPoint(complex(x, args.im), args.ebind, f, start.residual)
        if args.direction == 0:
            branch = trace_locus(args.im, point, args.step, args.max_steps, quad=quad)
        else:
            branch = trace_fixed_im(args.im, point, args.step, args.max_steps, args.direction, quad=quad)
    else:
        _require(args, "ebind", "f_start", "f_end", "seed_re", "seed_im")
        branch = trace_fixed_ebind(
            args.ebind,
            args.f_start,
            args.f_end,
            complex(args.seed_re, args.seed_im),
            args.step,
            args.max_steps,
            quad=quad,
        )
    rows = []
    for p in branch.points:
        width = p.e_tilde.imag
        tau = math.inf if width >= 0 else 1.0 / abs(width)
        rows.append((p.arclength, p.e_tilde.real, width, p.eb_tilde, p.f_tilde, p.residual, tau))
    write_table(args, ["arclength", "re_e", "im_e", "ebind", "f_tilde", "residual", "tau_scaled"], rows)
    return f"{len(rows)} points traced ({branch.termination.value}) written to {args.out}"


def cmd_census(args):
    res = census(args.level, args.im, args.ebind, args.f_max, args.cells, quad=_quad(args), workers=args.threads)
    out = {
        "level": res.landau_n,
        "count": res.count,
        "roots": [{"re_e": x, "f_tilde": f} for x, f in res.roots],
    }
    atomic_write(args.out, json_text(out))
    return f"{res.count} roots found around level {res.landau_n}, written to {args.out}"


def cmd_table1(args):
    try:
        bindings = [float(v) for v in args.binding_list.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--binding-list must be comma-separated numbers, got {args.binding_list!r}") from None
    if not bindings:
        raise InputError("--binding-list is empty")
    mat = MaterialParams(args.mass_ratio)
    rows = []
    for eb in bindings:
        sc = realize_scenario(eb, mat, LAB_POINT)
        rows.append((eb, sc.magnetic_field, sc.electric_field / 1e3, sc.lifetime * 1e9))
    write_table(args, ["E_B_meV", "B_tesla", "E_kV_per_m", "tau_ns"], rows)
    return f"{len(rows)} rows written to {args.out}"


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise InputError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


# ------------------------------------------------------------------ parser

_REQUIRED = {
    "bound": ("ebind", "levels"),
    "denom": ("re", "im", "ebind", "field"),
    "scan": ("re_min", "re_max", "field_min", "field_max", "im", "ebind"),
    "roots": (),
    "trace": (),
    "census": ("level", "im", "ebind"),
    "table1": (),
}

_HANDLERS = {
    "bound": cmd_bound,
    "denom": cmd_denom,
    "scan": cmd_scan,
    "roots": cmd_roots,
    "trace": cmd_trace,
    "census": cmd_census,
    "table1": cmd_table1,
}

# defaults applied after the config file has been merged
_DEFAULTS = {
    "format": "csv",
    "threads": os.cpu_count() or 1,
    "tol": None,
    "depth": None,
    "method": None,
    "cells": None,
    "step": 0.01,
    "max_steps": 2000,
    "direction": 1,
    "f_max": 1.0,
    "residual_tol": 1e-10,
    "binding_list": LAB_BINDINGS,
    "mass_ratio": 0.067,
    "mode": None,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _negative(text):
    v = float(text)
    if not v < 0:
        raise argparse.ArgumentTypeError(f"expected a negative number, got {text}")
    return v


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _nonnegative(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def build_parser():
    S = argparse.SUPPRESS
    parser = _Parser(prog="zrp", description=__doc__.split("\n")[0], argument_default=S)
    parser.add_argument("--verbose", "-v", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, fmt_choice=True, threads=False, quad=False):
        p.add_argument("--config", help="JSON file with default values for the flags")
        p.add_argument("--out", help="output file (default: zrp_<command>.<format>)")
        if fmt_choice:
            p.add_argument("--format", choices=["csv", "json"])
        if threads:
            p.add_argument("--threads", type=int, help="worker threads (default: CPU count)")
        if quad:
            p.add_argument("--tol", type=_positive, help="relative quadrature tolerance")
            p.add_argument("--depth", type=_positive, help="contour depth below the real axis")
            p.add_argument("--method", choices=["auto", "contour", "landau"], help="evaluation route")

    p = sub.add_parser("bound", argument_default=S, help="zero-field bound and quasi-bound energies")
    common(p)
    p.add_argument("--ebind", type=_negative)
    p.add_argument("--levels", type=int, help="highest Landau level interval")

    p = sub.add_parser("denom", argument_default=S, help="evaluate the denominator once")
    common(p, fmt_choice=False, quad=True)
    p.add_argument("--re", type=float)
    p.add_argument("--im", type=float)
    p.add_argument("--ebind", type=_negative)
    p.add_argument("--field", type=_nonnegative)

    p = sub.add_parser("scan", argument_default=S, help="|D| map over (Re E, F) with seed minima")
    common(p, threads=True, quad=True)
    for name in ("re-min", "re-max", "field-min", "field-max", "im"):
        p.add_argument("--" + name, type=float)
    p.add_argument("--ebind", type=_negative)
    p.add_argument("--cells", help="grid size NxM (default 64x64)")

    p = sub.add_parser("roots", argument_default=S, help="polish one root")
    common(p, fmt_choice=False, quad=True)
    p.add_argument("--mode", choices=["fixed-im", "complex"])
    p.add_argument("--im", type=float)
    p.add_argument("--ebind", type=_negative)
    p.add_argument("--field", type=_positive)
    p.add_argument("--seed-re", type=float)
    p.add_argument("--seed-im", type=float)
    p.add_argument("--seed-field", type=_positive)
    p.add_argument("--residual-tol", type=_positive)

    p = sub.add_parser("trace", argument_default=S, help="continue a resonance branch")
    common(p, quad=True)
    p.add_argument("--mode", choices=["fixed-im", "fixed-ebind"])
    p.add_argument("--im", type=float)
    p.add_argument("--ebind", type=_negative)
    p.add_argument("--start-re", type=float)
    p.add_argument("--start-field", type=_positive)
    p.add_argument("--direction", type=int, choices=[1, -1, 0], help="0 traces both ways and joins the halves")
    p.add_argument("--f-start", type=_positive)
    p.add_argument("--f-end", type=_positive)
    p.add_argument("--seed-re", type=float)
    p.add_argument("--seed-im", type=float)
    p.add_argument("--step", type=_positive)
    p.add_argument("--max-steps", type=int)

    p = sub.add_parser("census", argument_default=S, help="count resonances around one Landau level")
    common(p, fmt_choice=False, threads=True, quad=True)
    p.add_argument("--level", type=int)
    p.add_argument("--im", type=float)
    p.add_argument("--ebind", type=_negative)
    p.add_argument("--f-max", type=_positive)
    p.add_argument("--cells", type=int, help="grid points per axis (default 64)")

    p = sub.add_parser("table1", argument_default=S, help="laboratory realization of the reference resonance")
    common(p)
    p.add_argument("--binding-list", help="comma-separated |E_B| values in meV")
    p.add_argument("--mass-ratio", type=_positive, help="effective mass ratio m*/m_e")
    return parser


def _load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("config file must hold a JSON object")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def _attach_negative_values(argv):
    # argparse mistakes values such as -1e-4 for options; glue them to their flag
    out = []
    for token in argv:
        if out and token.startswith("-") and out[-1].startswith("--") and "=" not in out[-1]:
            try:
                float(token)
            except ValueError:
                pass
            else:
                out[-1] = f"{out[-1]}={token}"
                continue
        out.append(token)
    return out


def resolve_args(argv):
    """Parse flags, merge the config file under them and apply defaults."""
    parser = build_parser()
    args = parser.parse_args(_attach_negative_values(list(argv)))
    given = vars(args)
    merged = {}
    if "config" in given:
        merged.update(_load_config(given["config"]))
        # re-parse config values through the same type checks
        sub_argv = [args.command]
        for key, value in merged.items():
            if key in given or key in ("command", "config"):
                continue
            sub_argv.append("--" + key.replace("_", "-") + "=" + str(value))
        config_args = vars(parser.parse_args(sub_argv))
        merged = {k: v for k, v in config_args.items() if k != "command"}
    merged.update(given)
    for key, value in _DEFAULTS.items():
        merged.setdefault(key, value)
    command = merged["command"]
    if command == "census" and merged["cells"] is None:
        merged["cells"] = 64
    if command == "scan" and merged["cells"] is None:
        merged["cells"] = "64x64"
    if command == "roots" and merged["mode"] is None:
        merged["mode"] = "fixed-im"
    if command == "trace" and merged["mode"] is None:
        raise InputError("trace needs --mode fixed-im or fixed-ebind")
    missing = [k for k in _REQUIRED[command] if merged.get(k) is None]
    if missing:
        raise InputError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    ext = "json" if command in ("denom", "roots", "census") else merged["format"]
    merged.setdefault("out", f"zrp_{command}.{ext}")
    return argparse.Namespace(**merged)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = resolve_args(argv)
    except InputError as exc:
        print(f"zrp: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        summary = _HANDLERS[args.command](args)
    except InputError as exc:
        print(f"zrp: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        residual = "unknown" if exc.residual is None else f"{exc.residual:.3g}"
        print(f"zrp {args.command}: no convergence: {exc} (best residual {residual})", file=sys.stderr)
        return EXIT_NUMERICAL
    except ScanError as exc:
        print(f"zrp {args.command}: scan failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, ValueError) as exc:
        print(f"zrp {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ZrpError as exc:
        print(f"zrp {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
