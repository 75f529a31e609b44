"""Command-line front end: ``advecta <analyze|solve|certify|sweep> scenario.json``.

Exit codes: 0 success, 1 error, 2 no theorem/certificate holds (analyze,
certify), 3 Picard iteration did not converge (solve).
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import itertools
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from . import analysis, expr
from .errors import (
    AdvectaError, ExprSyntaxError, NegativeAdvance, NotConverged,
    NotDecaying, SchemaError,
)
from .fixedpoint import ode_defect, picard_solve, sup_distance, write_trajectory_csv
from .matrix_core import vec_inf_norm
from .system import AdvancedSystem, Horizon, Term, eval_advance, grid_points
from .transition import build_fundamental

EXIT_OK, EXIT_ERROR, EXIT_NO_VERDICT, EXIT_NOT_CONVERGED = 0, 1, 2, 3

_PLACEHOLDER = re.compile(r"\$([A-Za-z_][A-Za-z_0-9]*)")


def load_schema():
    return json.loads(resources.files("advecta").joinpath("scenario.schema.json").read_text())


@dataclass(frozen=True)
class Scenario:
    name: str
    n: int
    t0: float
    T: float
    dt: float
    terms: list
    x0: list
    lookahead_depth: int = 3
    extension: str = "hold"
    L: float = 1.0
    tol: float = 1e-8
    max_iter: int = 200
    phi_threshold: float = 1e-6
    sweep: dict = field(default_factory=dict)
    system: AdvancedSystem | None = field(default=None, compare=False, repr=False)

    @property
    def horizon(self) -> Horizon:
        return Horizon(self.T, self.dt, self.lookahead_depth, self.extension)

    def with_overrides(self, dt=None, horizon=None, lookahead=None, extension=None):
        changes = {k: v for k, v in
                   {"dt": dt, "T": horizon, "lookahead_depth": lookahead,
                    "extension": extension}.items() if v is not None}
        if not changes:
            return self
        updated = dataclasses.replace(self, **changes)
        _check_horizon(updated)
        return updated


def _check_horizon(sc):
    try:
        sc.horizon.window_steps(sc.t0)
    except ValueError as err:
        raise SchemaError(str(err), "/dt") from None
    ts = grid_points(sc.t0, sc.T, sc.dt)
    for j in range(sc.system.N):
        try:
            eval_advance(sc.system, j, ts)
        except NegativeAdvance as err:
            raise NegativeAdvance(f"terms[{j}].h: {err}", term=j, t=err.t) from None


def read_document(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as err:
        raise SchemaError(f"invalid JSON: {err}", "") from None


def substitute(doc, params):
    """Replace ``$name`` in every expression string of ``doc`` by ``params[name]``."""
    def sub(text):
        def repl(m):
            if m.group(1) not in params:
                raise SchemaError(f"no value for placeholder ${m.group(1)}", "/terms")
            return f"({float(params[m.group(1)])!r})"
        return _PLACEHOLDER.sub(repl, text)

    out = dict(doc)
    out["terms"] = [
        {"A": [[sub(v) if isinstance(v, str) else v for v in row] for row in term["A"]],
         "h": sub(term["h"]) if isinstance(term["h"], str) else term["h"]}
        for term in doc["terms"]
    ]
    return out


def _validate(doc):
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        pointer = "".join(f"/{p}" for p in err.absolute_path)
        raise SchemaError(err.message, pointer)


def scenario_from_document(doc, params=None) -> Scenario:
    _validate(doc)
    if params is not None:
        doc = substitute(doc, params)
    n = doc["n"]
    if len(doc["x0"]) != n:
        raise SchemaError(f"x0 has {len(doc['x0'])} entries, expected {n}", "/x0")
    terms = []
    for j, term in enumerate(doc["terms"]):
        A = term["A"]
        if len(A) != n or any(len(row) != n for row in A):
            raise SchemaError(f"coefficient matrix must be {n}x{n}", f"/terms/{j}/A")
        rows = []
        for a, row in enumerate(A):
            rows.append(tuple(_parse_entry(v, f"terms[{j}].A[{a}][{b}]")
                              for b, v in enumerate(row)))
        terms.append(Term(tuple(rows), _parse_entry(term["h"], f"terms[{j}].h")))
    t0 = float(doc.get("t0", 0.0))
    if doc["T"] < t0:
        raise SchemaError("T must not precede t0", "/T")
    sc = Scenario(
        name=doc.get("name", "scenario"), n=n, t0=t0, T=float(doc["T"]), dt=float(doc["dt"]),
        terms=doc["terms"], x0=[float(v) for v in doc["x0"]],
        lookahead_depth=doc.get("lookahead_depth", 3), extension=doc.get("extension", "hold"),
        L=float(doc.get("L", 1.0)), tol=float(doc.get("tol", 1e-8)),
        max_iter=doc.get("max_iter", 200), phi_threshold=float(doc.get("phi_threshold", 1e-6)),
        sweep=dict(doc.get("sweep", {})),
        system=AdvancedSystem(n=n, t0=t0, terms=tuple(terms)),
    )
    _check_horizon(sc)
    return sc


def _parse_entry(value, where):
    if not isinstance(value, str):
        return expr.Num(float(value))
    if _PLACEHOLDER.search(value):
        raise SchemaError(f"{where}: unresolved placeholder in {value!r}", "/terms")
    try:
        return expr.parse(value)
    except ExprSyntaxError as err:
        raise ExprSyntaxError(f"{where}: {err.msg}", value, err.offset) from None


def load_scenario(path, params=None) -> Scenario:
    return scenario_from_document(read_document(path), params)


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text, out_path, stdout):
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8", newline="\n")
    else:
        (stdout or sys.stdout).write(text)


def cmd_analyze(sc: Scenario, out_path=None, lam=None, stdout=None) -> int:
    report = analysis.stability_report(sc.system, sc.horizon, sc.x0, L=sc.L,
                                       phi_threshold=sc.phi_threshold, lam=lam)
    payload = report.to_dict()
    payload["scenario"] = sc.name
    _emit(dump_json(payload), out_path, stdout)
    return EXIT_OK if (report.thm1_verdict or report.thm3_verdict) else EXIT_NO_VERDICT


def _sidecar_path(out_path):
    p = Path(out_path)
    return p.with_suffix(".json") if p.suffix != ".json" else p.with_name(p.stem + ".iter.json")


def cmd_solve(sc: Scenario, out_path=None, stdout=None) -> int:
    out_path = out_path or f"{sc.name}.csv"
    g = build_fundamental(sc.system, sc.horizon)
    code = EXIT_OK
    try:
        result = picard_solve(sc.system, g, sc.x0, sc.tol, sc.max_iter)
    except NotConverged as err:
        result, code = err.result, EXIT_NOT_CONVERGED
    x = result.trajectory
    buf = io.StringIO()
    write_trajectory_csv(x, buf)
    Path(out_path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")

    sidecar = {
        "scenario": sc.name,
        "converged": result.converged,
        "flagged": not result.converged,
        "iterations": result.iterations,
        "residuals": result.residuals,
        "ratios": result.ratios,
        "ode_defect": ode_defect(sc.system, x) if result.converged else None,
        "provenance": {"dt": sc.dt, "horizon": sc.T, "t0": sc.t0, "policy": sc.extension,
                       "lookahead_depth": sc.lookahead_depth, "t_ext": g.t_ext},
    }
    if result.converged:
        other = "zero" if sc.extension == "hold" else "hold"
        try:
            alt = picard_solve(sc.system, g, sc.x0, sc.tol, sc.max_iter, extension=other)
            sidecar["policy_sensitivity"] = sup_distance(x.values, alt.trajectory.values, g.window)
        except NotConverged:
            sidecar["policy_sensitivity"] = None
    _sidecar_path(out_path).write_text(dump_json(sidecar), encoding="utf-8", newline="\n")
    (stdout or sys.stdout).write(f"{'converged' if result.converged else 'NOT converged'} after "
                 f"{result.iterations} iterations; wrote {out_path}\n")
    return code


def cmd_certify(sc: Scenario, lam=None, out_path=None, stdout=None) -> int:
    g = build_fundamental(sc.system, sc.horizon)
    outer, bounds = analysis.certificate_bounds(sc.system, g)
    payload = {"scenario": sc.name, "coeff_bounds": bounds, "S": sum(outer),
               "S_inner": sum(bounds), "x0_norm": vec_inf_norm(sc.x0)}
    try:
        M0, lambda0 = analysis.fit_exponential_bound(g)
    except NotDecaying as err:
        payload.update({"M0": None, "lambda0": None, "lambda": None, "M": None,
                        "feasible": False, "rho": None, "note": str(err)})
    else:
        cert = analysis.exponential_certificate(M0, lambda0, outer, payload["x0_norm"],
                                                sc.t0, lam, inner_bounds=bounds)
        payload.update(cert.to_dict())
    _emit(dump_json(payload), out_path, stdout)
    return EXIT_OK if payload["feasible"] else EXIT_NO_VERDICT


SWEEP_COLUMNS = ["alpha", "K", "thm1", "thm3", "decay_rate"]


def _sweep_point(doc, params, overrides):
    sc = scenario_from_document(doc, params).with_overrides(**overrides)
    report = analysis.stability_report(sc.system, sc.horizon, sc.x0, L=sc.L,
                                       phi_threshold=sc.phi_threshold)
    rate = None
    try:
        g = build_fundamental(sc.system, sc.horizon)
        sol = picard_solve(sc.system, g, sc.x0, sc.tol, sc.max_iter)
        rate = analysis.decay_rate(sol.trajectory, 0.5)[1]
    except AdvectaError:
        pass
    return [report.alpha, report.K, report.thm1_verdict, report.thm3_verdict, rate]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def cmd_sweep(doc, ranges=None, out_path=None, overrides=None, jobs=1, stdout=None) -> int:
    """Cartesian sweep over ``$name`` substitution variables of a template.

    Rows follow the lexicographic order of the declared ranges (first
    variable slowest) whatever the scheduling.
    """
    ranges = dict(doc.get("sweep", {})) if ranges is None else dict(ranges)
    names = list(ranges)
    points = list(itertools.product(*(ranges[k] for k in names))) if names else []
    overrides = overrides or {}
    if jobs > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda p: _sweep_point(doc, dict(zip(names, p)), overrides),
                                 points))
    else:
        rows = [_sweep_point(doc, dict(zip(names, p)), overrides) for p in points]
    lines = [",".join(names + SWEEP_COLUMNS)]
    for p, row in zip(points, rows):
        lines.append(",".join(_cell(float(v)) for v in p) + "," + ",".join(_cell(v) for v in row))
    _emit("\n".join(lines) + "\n", out_path, stdout)
    return EXIT_OK


def _parse_param(text):
    name, _, values = text.partition("=")
    if not _PLACEHOLDER.fullmatch("$" + name.strip()):
        raise argparse.ArgumentTypeError(f"bad sweep parameter {text!r}; use NAME=v1,v2,...")
    vals = [float(v) for v in values.split(",") if v.strip()]
    return name.strip(), vals


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario JSON file")
    common.add_argument("--out", help="output path (stdout for JSON commands if omitted)")
    common.add_argument("--dt", type=float, help="override the grid step")
    common.add_argument("--horizon", type=float, help="override the reporting end T")
    common.add_argument("--lookahead", type=int, help="override lookahead_depth")
    common.add_argument("--extension", choices=["hold", "zero"], help="override extension policy")
    common.add_argument("--lambda", dest="lam", type=float,
                        help="decay rate for the exponential certificate (scan if omitted)")

    parser = argparse.ArgumentParser(prog="advecta", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="stability certificates and verdicts")
    sub.add_parser("solve", parents=[common], help="Picard solve; CSV + iteration JSON")
    sub.add_parser("certify", parents=[common], help="exponential decay certificate")
    sweep = sub.add_parser("sweep", parents=[common], help="parameter sweep over a template")
    sweep.add_argument("--param", action="append", type=_parse_param, default=None,
                       metavar="NAME=V1,V2", help="sweep range (overrides the template's)")
    sweep.add_argument("--jobs", type=int, default=1, help="points evaluated concurrently")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"dt": args.dt, "horizon": args.horizon, "lookahead": args.lookahead,
                 "extension": args.extension}
    try:
        if args.command == "sweep":
            doc = read_document(args.scenario)
            _validate(doc)
            ranges = dict(args.param) if args.param else None
            return cmd_sweep(doc, ranges, args.out, overrides, args.jobs)
        sc = load_scenario(args.scenario).with_overrides(**overrides)
        if args.command == "analyze":
            return cmd_analyze(sc, args.out, args.lam)
        if args.command == "solve":
            return cmd_solve(sc, args.out)
        return cmd_certify(sc, args.lam, args.out)
    except (AdvectaError, ValueError, OSError) as err:
        print(f"advecta: error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
