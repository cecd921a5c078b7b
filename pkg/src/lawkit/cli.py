"""Command-line front end.

Subcommands map one-to-one onto the library: `enumerate` lists gentrees,
`discover` runs the fitting search, `audit` scores explicit formulas
against a dataset and an axiom system, and the small single-purpose
commands (`check-thermo`, `match-template`, `pareto`, `knee`,
`counterexample`) expose the corresponding audit operations.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
malformed input files), 3 numeric failure (axiom solve did not converge).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from .dataio import DataError, add_extra_point, load_dataset
from .expr import DomainError, ParseError, complexity, parse, serialize
from .fit import SearchConfig
from .gentrees import OperatorSet, enumerate_gentrees
from .reason import (
    AxiomError,
    NoConvergence,
    _box_of,
    counterexample_search,
    dependence_analysis,
    generalization_error,
    numerical_errors,
    parse_axiom_file,
    reference_values,
    template_match,
    thermo_check,
)
from .search import pareto_of_run, run_search
from .select import ParetoPoint, knee_point

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

SCHEMA_VERSION = 1

_CONFIG_KEYS = {
    "operators", "depth", "max_constants", "power_bound", "power_budget",
    "const_bound", "tolerance", "time_slice_s", "budget_s", "seed",
    "dimensional", "extra_point", "axioms", "box",
}
_SEARCH_KEYS = {
    "depth", "max_constants", "power_bound", "power_budget", "const_bound",
    "tolerance", "time_slice_s", "budget_s", "seed", "dimensional",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; we promise 1."""

    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# shared plumbing


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path}: expected a JSON object")
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"config {path}: unknown keys {sorted(unknown)}")
    return cfg


def _search_config(cfg):
    try:
        return SearchConfig(**{k: cfg[k] for k in _SEARCH_KEYS if k in cfg})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad search configuration: {exc}") from None


def _load_data(args, cfg):
    data = load_dataset(args.data, getattr(args, "units", None))
    extra = getattr(args, "extra_point", None)
    if extra is None:
        extra = cfg.get("extra_point")
    if extra is not None:
        data = add_extra_point(data, float(extra))
    return data


def _ops_text(ops):
    names = [o for o in "+-*/" if o in ops.binary]
    names += [o for o in ("sqrt", "exp", "log") if o in ops.unary]
    return ",".join(names)


def _parse_ops(text):
    try:
        return OperatorSet.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _box_override(cfg, args=None):
    box = getattr(args, "box", None) if args is not None else None
    if box is None:
        box = cfg.get("box")
    elif isinstance(box, str):
        try:
            box = json.loads(box)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad --box value: {exc}") from None
    return box


def _jsonable(obj):
    """JSON with NaN/inf mapped to null, numpy scalars unwrapped."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_report(report, path):
    if path is None:
        return
    text = json.dumps(_jsonable(report), indent=2)
    if path == "-":
        sys.stdout.write(text + "\n")
        return
    with open(path, "w") as fh:
        fh.write(text + "\n")


def _error_cells(e):
    return {"eps2_abs": e.eps2_abs, "epsinf_abs": e.epsinf_abs,
            "eps2_rel": e.eps2_rel, "epsinf_rel": e.epsinf_rel}


def _blank_candidate(text, cpx):
    return {
        "formula": text,
        "complexity": cpx,
        "sse": None,
        "status": None,
        "errors": None,
        "reasoning": None,
        "generalization": None,
        "dependence": None,
        "thermo": None,
        "templates": None,
    }


def _audit_row(row, formula, data, system, box):
    """Fill the axiom-dependent cells of a candidate row in place."""
    fb = reference_values(system, data)
    row["reasoning"] = _error_cells(numerical_errors(formula, data,
                                                     reference=fb))
    row["generalization"] = {
        "sup": generalization_error(formula, data, system, box=box),
        "box": [list(b) for b in _box_of(data, box)],
    }
    row["dependence"] = dependence_analysis(formula, data, system)


def _shape_row(row, formula):
    """Single-variable shape checks (isotherm-style models only)."""
    rep = thermo_check(formula)
    row["thermo"] = {"constraints": list(rep.constraints),
                     "passed": rep.passed}
    row["templates"] = {}
    for tpl in ("one-site", "two-site"):
        m = template_match(formula, tpl)
        row["templates"][tpl] = {"consistent": m.consistent,
                                 "params": dict(m.params),
                                 "residual": m.residual}


def _fmt(x, width=10):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return " " * (width - 1) + "-"
    return f"{x:>{width}.4g}"


def _print_candidate_table(rows):
    print(f"{'eps2r':>10} {'epsinfr':>10} {'beta2r':>10} {'betainfr':>10} "
          f"{'gen':>10} {'cpx':>4}  formula")
    for row in rows:
        e = row["errors"] or {}
        b = row["reasoning"] or {}
        g = (row["generalization"] or {}).get("sup")
        print(f"{_fmt(e.get('eps2_rel'))} {_fmt(e.get('epsinf_rel'))} "
              f"{_fmt(b.get('eps2_rel'))} {_fmt(b.get('epsinf_rel'))} "
              f"{_fmt(g)} {row['complexity']:>4}  {row['formula']}")


def _read_points(path):
    pts = []
    with open(path, newline="") as fh:
        for i, rec in enumerate(csv.reader(fh)):
            if not rec or not "".join(rec).strip():
                continue
            try:
                vals = [float(c) for c in rec[:2]]
            except ValueError:
                if i == 0:
                    continue  # header row
                raise DataError(f"{path}: non-numeric row {rec!r}") from None
            if len(vals) < 2:
                raise DataError(f"{path}: expected two columns, got {rec!r}")
            pts.append((vals[0], vals[1]))
    if not pts:
        raise DataError(f"{path}: no points")
    return pts


# ---------------------------------------------------------------------------
# subcommands


def cmd_enumerate(args):
    ops = _parse_ops(args.ops)
    trees = enumerate_gentrees(ops, args.depth)
    if args.count_only:
        print(len(trees))
    else:
        for t in trees:
            print(serialize(t))
    return EXIT_OK


def cmd_discover(args):
    cfg = _load_config(args.config)
    data = _load_data(args, cfg)
    scfg = _search_config(cfg)
    ops = _parse_ops(cfg.get("operators", "+,-,*,/,sqrt"))
    results = run_search(data, scfg, ops)

    front = pareto_of_run(results)
    knee = knee_point(front) if len(front) >= 2 else (0 if front else None)

    system = None
    axioms = cfg.get("axioms") or getattr(args, "axioms", None)
    if axioms:
        system = parse_axiom_file(axioms)
    box = _box_override(cfg)

    fitted = [r for r in results if r.formula is not None]
    keep = {id(r) for r in fitted[:args.top]}
    keep |= {id(p.payload) for p in front if p.payload is not None}
    rows = []
    for r in fitted:
        if id(r) not in keep and id(r.formula) not in keep:
            continue
        text = serialize(r.formula)
        row = _blank_candidate(text, complexity(r.formula))
        row["sse"] = r.sse
        row["status"] = r.status
        row["errors"] = _error_cells(numerical_errors(r.formula, data))
        rows.append((r, row))
    if system is not None:
        for r, row in rows[:args.audit_top]:
            _audit_row(row, r.formula, data, system, box)
    if data.n == 1:
        for r, row in rows:
            _shape_row(row, r.formula)
    rows = [row for _, row in rows]

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "discover",
        "config": {"operators": _ops_text(ops), **{k: getattr(scfg, k)
                   for k in _SEARCH_KEYS}},
        "seed": scfg.seed,
        "dataset": {"path": args.data, "variables": list(data.variables),
                    "target": data.target, "rows": data.m},
        "candidates": rows,
        "pareto": [{"complexity": p.complexity, "score": p.score,
                    "formula": serialize(p.payload)
                    if p.payload is not None else None} for p in front],
        "knee": knee,
    }
    print(f"search over {len(results)} trees "
          f"(depth <= {scfg.depth}, ops {_ops_text(ops)})")
    print(f"{'sse':>12} {'cpx':>4} {'status':<26} formula")
    for row in rows:
        print(f"{row['sse']:>12.6g} {row['complexity']:>4} "
              f"{row['status']:<26} {row['formula']}")
    if knee is not None and front:
        p = front[knee]
        print(f"pareto knee: index {knee} at "
              f"(complexity {p.complexity:g}, score {p.score:g})")
    _write_report(report, args.report)
    return EXIT_OK


def cmd_audit(args):
    cfg = _load_config(args.config)
    data = _load_data(args, cfg)
    system = parse_axiom_file(args.axioms) if args.axioms else None
    box = _box_override(cfg)

    rows = []
    for text in args.formula:
        formula = parse(text, data.variables)
        row = _blank_candidate(text, complexity(formula))
        row["errors"] = _error_cells(numerical_errors(formula, data))
        if system is not None:
            _audit_row(row, formula, data, system, box)
        if data.n == 1:
            _shape_row(row, formula)
        rows.append(row)

    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "audit",
        "config": {"axioms": args.axioms, "box": box},
        "dataset": {"path": args.data, "variables": list(data.variables),
                    "target": data.target, "rows": data.m},
        "candidates": rows,
        "pareto": None,
        "knee": None,
    }
    _print_candidate_table(rows)
    for row in rows:
        if row["dependence"]:
            flags = ", ".join(f"{k}={v}" for k, v in row["dependence"].items())
            print(f"dependence [{row['formula']}]: {flags}")
    _write_report(report, args.report)
    return EXIT_OK


def cmd_check_thermo(args):
    formula = parse(args.formula, (args.var,))
    rep = thermo_check(formula)
    marks = " ".join(f"C{i+1}={'pass' if c else 'FAIL'}"
                     for i, c in enumerate(rep.constraints))
    print(f"{rep.passed}/5  {marks}")
    _write_report({"schema_version": SCHEMA_VERSION, "command": "check-thermo",
                   "formula": args.formula,
                   "constraints": list(rep.constraints),
                   "passed": rep.passed}, args.report)
    return EXIT_OK


def cmd_match_template(args):
    formula = parse(args.formula, (args.var,))
    m = template_match(formula, args.template)
    verdict = "consistent" if m.consistent else "inconsistent"
    params = " ".join(f"{k}={v:.6g}" for k, v in m.params.items())
    print(f"{args.template}: {verdict} (sup residual {m.residual:.3g})"
          + (f"  {params}" if params else ""))
    _write_report({"schema_version": SCHEMA_VERSION,
                   "command": "match-template", "formula": args.formula,
                   "template": args.template, "consistent": m.consistent,
                   "params": dict(m.params), "residual": m.residual},
                  args.report)
    return EXIT_OK


def cmd_pareto(args):
    pts = _read_points(args.points)
    pts.sort()
    front = []
    best = math.inf
    for x, y in pts:
        if y < best:
            front.append((x, y))
            best = y
    for x, y in front:
        print(f"{x:g},{y:g}")
    _write_report({"schema_version": SCHEMA_VERSION, "command": "pareto",
                   "front": [list(p) for p in front]}, args.report)
    return EXIT_OK


def cmd_knee(args):
    pts = _read_points(args.points)
    front = [ParetoPoint(x, y) for x, y in pts]
    try:
        idx = knee_point(front, sensitivity=args.sensitivity)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    x, y = pts[idx]
    print(f"knee index {idx}: ({x:g}, {y:g})")
    _write_report({"schema_version": SCHEMA_VERSION, "command": "knee",
                   "index": idx, "point": [x, y]}, args.report)
    return EXIT_OK


def cmd_counterexample(args):
    cfg = _load_config(args.config)
    data = _load_data(args, cfg)
    system = parse_axiom_file(args.axioms)
    formula = parse(args.formula, data.variables)
    box = _box_override(cfg, args)
    witness = counterexample_search(formula, data, system, box=box,
                                    tol=args.tol,
                                    relative=not args.absolute)
    if witness is None:
        print("no counterexample found")
        payload = None
    else:
        at = ", ".join(f"{k}={v:.6g}" for k, v in witness.point.items())
        print(f"counterexample at {at} (deviation {witness.deviation:.6g})")
        payload = {"point": witness.point, "deviation": witness.deviation}
    _write_report({"schema_version": SCHEMA_VERSION,
                   "command": "counterexample", "formula": args.formula,
                   "tol": args.tol, "witness": payload}, args.report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = _Parser(prog="lawkit",
                     description="Discover and audit law-like formulas.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("enumerate", help="list gentrees up to a depth")
    p.add_argument("--ops", default="+,-,*,/,sqrt",
                   help='comma-separated operators, e.g. "+,-,*,/,sqrt"')
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--count-only", action="store_true")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("discover", help="search formulas against a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--units")
    p.add_argument("--config", help="JSON file of search settings")
    p.add_argument("--extra-point", nargs="?", const=1e-3, type=float,
                   help="append an all-equal data point (default 1e-3)")
    p.add_argument("--top", type=int, default=10,
                   help="candidates beyond the Pareto front to report")
    p.add_argument("--audit-top", type=int, default=3,
                   help="candidates given the full axiom audit")
    p.add_argument("--report", help="write the JSON report here ('-' stdout)")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("audit", help="score explicit formulas")
    p.add_argument("--data", required=True)
    p.add_argument("--units")
    p.add_argument("--axioms")
    p.add_argument("--config")
    p.add_argument("--extra-point", nargs="?", const=1e-3, type=float)
    p.add_argument("--formula", action="append", required=True,
                   help="repeatable; parsed over the dataset's variables")
    p.add_argument("--report")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("check-thermo", help="physical sanity constraints")
    p.add_argument("--formula", required=True)
    p.add_argument("--var", default="p")
    p.add_argument("--report")
    p.set_defaults(func=cmd_check_thermo)

    p = sub.add_parser("match-template", help="isotherm family membership")
    p.add_argument("--formula", required=True)
    p.add_argument("--template", choices=("one-site", "two-site"),
                   default="one-site")
    p.add_argument("--var", default="p")
    p.add_argument("--report")
    p.set_defaults(func=cmd_match_template)

    p = sub.add_parser("pareto", help="nondominated filter of (x, y) points")
    p.add_argument("--points", required=True, help="two-column CSV")
    p.add_argument("--report")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("knee", help="knee point of a Pareto front")
    p.add_argument("--points", required=True, help="two-column CSV")
    p.add_argument("--sensitivity", type=float, default=1.0)
    p.add_argument("--report")
    p.set_defaults(func=cmd_knee)

    p = sub.add_parser("counterexample", help="search for an axiom violation")
    p.add_argument("--data", required=True)
    p.add_argument("--units")
    p.add_argument("--axioms", required=True)
    p.add_argument("--formula", required=True)
    p.add_argument("--config")
    p.add_argument("--extra-point", nargs="?", const=1e-3, type=float)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--box", help="JSON box override, e.g. [[37,115]]")
    p.add_argument("--absolute", action="store_true",
                   help="absolute instead of relative deviation")
    p.add_argument("--report")
    p.set_defaults(func=cmd_counterexample)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"error: bad formula: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, AxiomError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NoConvergence, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
