"""Command-line front end: analyze, verify, sweep, render, catalog.

Exit codes: 0 success, 1 input error, 2 identity violation, 3 admissibility
or degeneracy violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .catalog import BUILTINS, builtin
from .invariants import Disagreement, InvariantReport, analyze, verify_identities
from .planar import NotNormal
from .polynomial import INF, Polynomial, RationalMap, is_inf
from .projection import (
    AmbiguousRegion,
    BranchOnCircle,
    CurveThroughInfinity,
    EndOnCircle,
    InconclusiveAtTolerance,
    StraightLineComponent,
    TraceOptions,
)
from .svg import render_svg, report_geometry
from .transforms import (
    ClosedFormCatenoid,
    EpsilonFamily,
    RotationFamily,
    RotationSpec,
    rotated_analysis,
    rotated_catenoid_family,
    sweep,
)
from .weierstrass import (
    AEViolation,
    BranchRecord,
    DegenerateData,
    MetricDegenerate,
    PeriodViolation,
    WeierstrassData,
    point_label,
    validate_data,
)

FORMAT_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_IDENTITY, EXIT_DEGENERATE = 0, 1, 2, 3
DEGENERACY_ERRORS = (AEViolation, BranchOnCircle, EndOnCircle, CurveThroughInfinity, StraightLineComponent,
                     InconclusiveAtTolerance, AmbiguousRegion, DegenerateData, MetricDegenerate,
                     PeriodViolation, NotNormal)
FAULTS = ("beta",)


class InputError(ValueError):
    """Malformed surface specification; the message names the offending key."""


# ---------------------------------------------------------------------------
# input


def _complex_list(value, where: str) -> list[complex]:
    if not isinstance(value, list) or not value:
        raise InputError(f"{where}: expected a non-empty array of [re, im] pairs")
    out = []
    for k, item in enumerate(value):
        if isinstance(item, (int, float)):
            out.append(complex(item))
        elif isinstance(item, list) and len(item) == 2 and all(isinstance(x, (int, float)) for x in item):
            out.append(complex(item[0], item[1]))
        else:
            raise InputError(f"{where}[{k}]: expected a number or a [re, im] pair")
    return out


def _rational(table, where: str) -> RationalMap:
    if not isinstance(table, dict):
        raise InputError(f"{where}: expected a table with 'num' and 'den'")
    for key in ("num", "den"):
        if key not in table:
            raise InputError(f"{where}.{key}: missing")
    num = _complex_list(table["num"], f"{where}.num")
    den = _complex_list(table["den"], f"{where}.den")
    if not any(den):
        raise InputError(f"{where}.den: the denominator is the zero polynomial")
    if not any(num):
        raise InputError(f"{where}.num: the numerator is the zero polynomial")
    return RationalMap(Polynomial(num), Polynomial(den))


def parse_surface(doc: dict, source: str = "<input>") -> WeierstrassData:
    """Weierstrass data from a parsed surface document (coefficients in ascending order)."""
    name = doc.get("name", Path(source).stem)
    if not isinstance(name, str):
        raise InputError(f"{source}: name: expected a string")
    g = _rational(doc.get("gauss_map"), f"{source}: gauss_map")
    h = _rational(doc.get("height_differential"), f"{source}: height_differential")
    if "ends" not in doc or not isinstance(doc["ends"], list):
        raise InputError(f"{source}: ends: expected an array")
    ends = []
    for k, e in enumerate(doc["ends"]):
        if e == "inf":
            ends.append(INF)
        elif isinstance(e, list) and len(e) == 2 and all(isinstance(x, (int, float)) for x in e):
            ends.append(complex(e[0], e[1]))
        else:
            raise InputError(f"{source}: ends[{k}]: expected [re, im] or \"inf\"")
    if g.degree == 0:
        raise InputError(f"{source}: gauss_map: constant Gauss map")
    return WeierstrassData(g, h, tuple(ends), name)


def load_surface(path: str) -> WeierstrassData:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    return parse_surface(doc, path)


def surface_toml(data: WeierstrassData) -> str:
    def arr(coeffs):
        return "[" + ", ".join(f"[{float(c.real)!r}, {float(c.imag)!r}]" for c in np.asarray(coeffs, dtype=complex)) + "]"

    ends = ", ".join('"inf"' if is_inf(e) else f"[{float(e.real)!r}, {float(e.imag)!r}]" for e in data.ends)
    return "\n".join([
        f'name = "{data.name}"',
        f"ends = [{ends}]",
        "",
        "[gauss_map]",
        f"num = {arr(data.g.num.coeffs)}",
        f"den = {arr(data.g.den.coeffs)}",
        "",
        "[height_differential]",
        f"num = {arr(data.h.num.coeffs)}",
        f"den = {arr(data.h.den.coeffs)}",
        "",
    ])


def _surface_from_args(args) -> WeierstrassData:
    if getattr(args, "input", None):
        return load_surface(args.input)
    name = getattr(args, "builtin", None) or "catenoid"
    try:
        return builtin(name)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None


def _vector(text: str, where: str) -> np.ndarray:
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise InputError(f"{where}: expected three comma-separated numbers") from None
    if v.shape != (3,) or not np.all(np.isfinite(v)) or np.linalg.norm(v) == 0:
        raise InputError(f"{where}: expected a nonzero 3-vector")
    return v / np.linalg.norm(v)


def _options(args) -> TraceOptions:
    return TraceOptions(samples_per_turn=args.samples_per_turn, max_turn_deg=args.max_turn_deg,
                        delta1=args.delta1, max_halvings=args.max_halvings,
                        collision_tol=args.collision_tol, degeneracy_tol=args.degeneracy_tol)


def _jobs(args) -> int:
    if getattr(args, "jobs", None):
        return max(1, args.jobs)
    try:
        return max(1, int(os.environ.get("GAUSSMAP_JOBS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# output


def _plain(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, complex):
        return [_plain(x.real), _plain(x.imag)]
    return x


def dumps(doc: dict) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path: str, text: str) -> None:
    path = os.path.abspath(path)
    d = os.path.dirname(path)
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, path: str | None) -> None:
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


def inject_fault(report: InvariantReport, fault: str) -> None:
    """Test hook: corrupt one branch order and re-evaluate the identities."""
    if fault != "beta":
        raise InputError(f"unknown fault {fault!r}")
    if report.branches:
        b = report.branches[0]
        report.branches[0] = BranchRecord(b.location, b.order + 1)
    else:
        report.branches.append(BranchRecord(0j, 1))
    report.checks = verify_identities(report)


def report_document(data: WeierstrassData, direction, report: InvariantReport | None, validity,
                    error: str | None = None, geometry: bool = False, timing: float | None = None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "tool": {"name": "gaussmap", "version": __version__},
        "surface": data.name,
        "direction": [float(x) for x in direction],
        "validity": validity.to_dict(),
    }
    if report is None:
        doc["status"] = "degenerate"
        doc["error"] = error
        return doc
    doc["report"] = report.to_dict()
    doc["identities"] = {c.name: bool(c.passed) for c in report.checks}
    doc["status"] = "ok" if report.all_passed else "identity-failure"
    if geometry:
        doc["geometry"] = report_geometry(report)
    if timing is not None:
        doc["timing"] = {"seconds": round(timing, 3)}
    return doc


def _run(data: WeierstrassData, direction: np.ndarray, options: TraceOptions, eps: float = 0.0,
         fault: str | None = None):
    """Validate then analyze; returns ``(report | None, validity, error, exit code)``."""
    validity = validate_data(data, direction)
    if not validity.ok:
        return None, validity, "; ".join(validity.violations), EXIT_DEGENERATE
    try:
        report = analyze(data, direction, eps=eps, options=options)
    except DEGENERACY_ERRORS as exc:
        return None, validity, f"{type(exc).__name__}: {exc}", EXIT_DEGENERATE
    except Disagreement as exc:
        return None, validity, f"{type(exc).__name__}: {exc}", EXIT_IDENTITY
    if fault:
        inject_fault(report, fault)
    return report, validity, None, EXIT_OK if report.all_passed else EXIT_IDENTITY


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> int:
    data = _surface_from_args(args)
    direction = _vector(args.direction, "--direction")
    t0 = time.perf_counter()
    report, validity, error, code = _run(data, direction, _options(args), args.eps, args.inject_fault)
    elapsed = time.perf_counter() - t0
    doc = report_document(data, direction, report, validity, error, geometry=args.geometry,
                          timing=elapsed if args.timing else None)
    _emit(dumps(doc), args.output)
    if args.svg and report is not None:
        write_atomic(args.svg, render_svg(report_geometry(report), data.name))
    if error:
        print(f"error: {error}", file=sys.stderr)
    return code


def _family(name: str) -> str:
    return name.split("[", 1)[0]


def _selected(name: str, only: list[str] | None) -> bool:
    if not only:
        return True
    fam = _family(name)
    return any(fam == o or fam.startswith(o + ".") for o in only)


def _verify_one(payload):
    name, options, fault = payload
    data = builtin(name)
    report, validity, error, code = _run(data, np.array([0.0, 0.0, 1.0]), options, 0.0, fault)
    cells = {}
    if report is not None:
        for c in report.checks:
            fam = _family(c.name)
            cells[fam] = cells.get(fam, True) and bool(c.passed)
    return name, cells, error, code


def cmd_verify(args) -> int:
    names = sorted(BUILTINS) if args.all or not args.surface else args.surface
    for n in names:
        if n not in BUILTINS:
            raise InputError(f"unknown built-in surface {n!r}")
    payloads = [(n, _options(args), args.inject_fault) for n in names]
    jobs = _jobs(args)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_verify_one, payloads))
    else:
        results = [_verify_one(p) for p in payloads]
    rows: list[str] = []
    for _, cells, _, _ in results:
        for fam in cells:
            if fam not in rows and _selected(fam, args.only):
                rows.append(fam)
    width = max([len(r) for r in rows] + [8])
    header = "identity".ljust(width) + "".join(f"  {n:>9}" for n, *_ in results)
    lines = [header, "-" * len(header)]
    failed = False
    for fam in rows:
        line = fam.ljust(width)
        for _, cells, _, _ in results:
            if fam not in cells:
                cell = "-"
            else:
                cell = "pass" if cells[fam] else "FAIL"
                failed |= not cells[fam]
            line += f"  {cell:>9}"
        lines.append(line)
    code = EXIT_OK
    for n, _, error, c in results:
        if error:
            lines.append(f"{n}: {error}")
            code = max(code, c)
    if failed:
        code = max(code, EXIT_IDENTITY)
    text = "\n".join(lines) + "\n"
    if args.json:
        doc = {"format_version": FORMAT_VERSION,
               "matrix": {n: {f: v for f, v in cells.items() if _selected(f, args.only)} for n, cells, _, _ in results},
               "errors": {n: e for n, _, e, _ in results if e}}
        write_atomic(args.json, dumps(doc))
    sys.stdout.write(text)
    return code


def _grid(args) -> np.ndarray:
    if args.grid:
        try:
            return np.array([float(x) for x in args.grid.split(",")])
        except ValueError:
            raise InputError("--grid: expected comma-separated numbers") from None
    if args.step <= 0:
        raise InputError("--step: must be positive")
    k = int(math.floor((args.stop - args.start) / args.step + 1e-9))
    return np.round(args.start + args.step * np.arange(k + 1), 12)


def cmd_sweep(args) -> int:
    grid = _grid(args)
    if len(grid) > 1 and np.any(np.diff(grid) <= 0):
        raise InputError("sweep grid must be strictly increasing")
    if args.family == "closed-form":
        family = ClosedFormCatenoid()
    elif args.family == "rotated-catenoid":
        family = rotated_catenoid_family()
    elif args.family == "rotation":
        family = RotationFamily(_surface_from_args(args), tuple(_vector(args.axis, "--axis")))
    else:
        family = EpsilonFamily(_surface_from_args(args), RotationSpec.tilt(args.angle))
    result = sweep(family, grid, jobs=_jobs(args), refine=not args.no_refine)
    if args.csv:
        write_atomic(args.csv, result.to_csv())
    if args.json:
        write_atomic(args.json, dumps(result.to_dict()))
    if not args.csv and not args.json:
        sys.stdout.write(result.to_csv())
    for t in result.transitions:
        print(f"transition {t.c_lo} -> {t.c_hi} in [{t.lo:.10g}, {t.hi:.10g}]", file=sys.stderr)
    if args.svg_dir and args.family in ("rotated-catenoid", "rotation"):
        for s in result.samples:
            if s.analyzed:
                rep = rotated_analysis(family.data, family.rotation(s.parameter), validate=False)
                path = Path(args.svg_dir) / f"{args.family}_{s.parameter:+.6f}.svg"
                write_atomic(str(path), render_svg(report_geometry(rep), f"{family.name} {s.parameter:g}"))
    bad = any(f.startswith("identity:") for s in result.samples for f in s.flags)
    return EXIT_IDENTITY if bad else EXIT_OK


def cmd_render(args) -> int:
    if args.report:
        try:
            with open(args.report, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{args.report}: {exc}") from None
        if "geometry" not in doc:
            raise InputError(f"{args.report}: no geometry section (run analyze with --geometry)")
        write_atomic(args.output, render_svg(doc["geometry"], doc.get("surface", "")))
        return EXIT_OK
    data = _surface_from_args(args)
    direction = _vector(args.direction, "--direction")
    report, _, error, code = _run(data, direction, _options(args), args.eps)
    if report is None:
        print(f"error: {error}", file=sys.stderr)
        return code
    write_atomic(args.output, render_svg(report_geometry(report), data.name))
    return EXIT_OK


def cmd_catalog(args) -> int:
    if args.show:
        try:
            sys.stdout.write(surface_toml(builtin(args.show)))
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from None
        return EXIT_OK
    for name in sorted(BUILTINS):
        d = builtin(name)
        ends = ", ".join(point_label(e) for e in d.ends)
        print(f"{name:10s} deg g = {d.g.degree}   ends: {ends}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_surface(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--builtin", choices=sorted(BUILTINS), help="built-in surface (default catenoid)")
    src.add_argument("--input", help="TOML surface specification")


def _add_tolerances(p: argparse.ArgumentParser) -> None:
    d = TraceOptions()
    g = p.add_argument_group("tolerances")
    g.add_argument("--samples-per-turn", type=int, default=d.samples_per_turn)
    g.add_argument("--max-turn-deg", type=float, default=d.max_turn_deg)
    g.add_argument("--delta1", type=float, default=d.delta1, help="first regularization offset")
    g.add_argument("--max-halvings", type=int, default=d.max_halvings)
    g.add_argument("--collision-tol", type=float, default=d.collision_tol)
    g.add_argument("--degeneracy-tol", type=float, default=d.degeneracy_tol)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussmap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze one surface and emit a JSON report")
    _add_surface(p)
    p.add_argument("--direction", default="0,0,1", help="projection direction x,y,z")
    p.add_argument("--eps", type=float, default=0.0, help="analyze the parallel surface f + eps G")
    p.add_argument("--output", "-o", help="JSON report path (default stdout)")
    p.add_argument("--svg", help="also write an SVG rendering")
    p.add_argument("--geometry", action="store_true", help="include projected curve geometry")
    p.add_argument("--timing", action="store_true", help="include wall-clock timing (not deterministic)")
    p.add_argument("--inject-fault", choices=FAULTS, help=argparse.SUPPRESS)
    _add_tolerances(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="identity pass/fail matrix over the built-in surfaces")
    p.add_argument("surface", nargs="*", help="built-in names (default: all)")
    p.add_argument("--all", action="store_true")
    p.add_argument("--only", action="append", help="restrict to an identity family (repeatable)")
    p.add_argument("--json", help="also write the matrix as JSON")
    p.add_argument("--jobs", type=int, help="worker processes (default $GAUSSMAP_JOBS or 1)")
    p.add_argument("--inject-fault", choices=FAULTS,
                   help="test hook: add one to a branch order so the Riemann-Hurwitz rows fail")
    _add_tolerances(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="invariants along a one-parameter family")
    p.add_argument("--family", choices=("closed-form", "rotated-catenoid", "rotation", "epsilon"),
                   default="rotated-catenoid")
    _add_surface(p)
    p.add_argument("--axis", default="1,0,0", help="rotation axis for --family rotation")
    p.add_argument("--angle", type=float, default=math.pi / 4, help="rotation of the epsilon family")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--stop", type=float, default=1.55)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--grid", help="explicit comma-separated grid")
    p.add_argument("--no-refine", action="store_true", help="do not bisect cusp-count changes")
    p.add_argument("--csv", help="CSV output path")
    p.add_argument("--json", help="JSON output path")
    p.add_argument("--svg-dir", help="one SVG per analyzed sample (rotation families)")
    p.add_argument("--jobs", type=int, help="worker processes (default $GAUSSMAP_JOBS or 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", help="SVG of the projected singular curves")
    _add_surface(p)
    p.add_argument("--report", help="render the geometry section of an analyze report")
    p.add_argument("--direction", default="0,0,1")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--output", "-o", required=True)
    _add_tolerances(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("catalog", help="list built-in surfaces")
    p.add_argument("--show", metavar="NAME", help="print a built-in surface as TOML")
    p.set_defaults(func=cmd_catalog)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DEGENERACY_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
