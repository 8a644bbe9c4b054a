"""optrec command line: one JSON problem file per invocation, JSON (or CSV) results out.

Exit codes: 0 success, 1 infeasible data / uncertified result / failed check,
2 input error, 3 solver or internal failure.
"""
import argparse
import json
import logging
import math
import sys
import traceback
from dataclasses import dataclass, replace
from pathlib import Path

import jsonschema
import numpy as np

from . import conic, schemas
from .conic import Tolerances
from .errors import InfeasibleData, InvalidInput, OptRecError, SolverFailure, Uncertified
from .full import build_near_optimal_map, discontinuity_probe, error_certificate, recover
from .functional import (
    DEFAULT_GAP_TOL,
    DEFAULT_N_MAX,
    EstimationProblem,
    UncertaintySet,
    chebyshev_model,
    estimate,
    odd_polynomial_model,
    polynomial_model,
    solve_weights,
)
from .local import (
    PolynomialBallModel,
    PolytopeModel,
    augment_polytope,
    center_polyball,
    center_polytope,
    chebyshev_rows,
)
from .measures import SignedMeasure
from .oracles import (
    PolynomialBallSet,
    PolytopeSet,
    SampleBudget,
    midrange_center_oracle,
    sample_model,
    worst_case_error_oracle,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3

COMMANDS = {
    "center-polytope": "polytope-center",
    "center-polyball": "polyball-center",
    "estimate": "estimate",
    "recover": "recover",
    "probe-discontinuity": "probe",
    "oracle-check": None,  # any kind, or an oracle-check wrapper
}

DEFAULT_GRID = 201
CENTER_SLACK = 1e-6
POLYBALL_WINDOW = 5e-3

log = logging.getLogger("optrec")


# -- output formatting --------------------------------------------------------

def _number(x):
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0:
        return "0.0"
    s = format(x, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def dumps(obj, indent=0):
    """JSON text with floats at 17 significant digits; key order is insertion order."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _number(obj)
    return json.dumps(str(obj))


def csv_text(x, values):
    lines = ["x,value"] + [f"{_number(a)},{_number(b)}" for a, b in zip(x, values)]
    return "\n".join(lines) + "\n"


# -- settings and parsing -------------------------------------------------------

@dataclass(frozen=True)
class Settings:
    tol: Tolerances = Tolerances()
    gap_tol: float = DEFAULT_GAP_TOL
    N_max: int = DEFAULT_N_MAX
    budget: int = 10_000
    seed: int = 0
    threads: int = 1
    verify: bool = False

    def sample_budget(self):
        return SampleBudget(self.budget, self.seed, self.threads)

    def echo(self, truncation=False):
        out = {"solver": {"gap_tol": self.tol.gap_tol, "feas_tol": self.tol.feas_tol,
                          "dist_tol": self.tol.dist_tol, "max_iter": self.tol.max_iter}}
        if truncation:
            out.update(gap_tol=self.gap_tol, N_max=self.N_max)
        if self.verify:
            out.update(budget=self.budget, seed=self.seed)
        return out


def settings_for(doc, args):
    """File values first, command line flags override."""
    tol = Tolerances(**doc.get("solver", {}))
    st = Settings(tol, doc.get("gap_tol", DEFAULT_GAP_TOL), doc.get("N_max", DEFAULT_N_MAX),
                  doc.get("budget", 10_000), doc.get("seed", 0))
    flags = {k: v for k, v in (("gap_tol", args.gap_tol), ("N_max", args.N_max), ("budget", args.budget),
                                ("seed", args.seed), ("threads", args.threads)) if v is not None}
    st = replace(st, verify=bool(args.verify), **flags)
    if not st.gap_tol > 0 or st.N_max < 1 or st.budget < 1 or st.threads < 1 or st.seed < 0:
        raise InvalidInput("--gap-tol must be positive; --N-max, --budget and --threads at least 1; --seed >= 0")
    return st


def load_problem(path):
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise InvalidInput(f"{path}: {err.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise InvalidInput(f"{path}:{err.lineno}:{err.colno}: malformed JSON: {err.msg}") from None
    validate(doc, str(path))
    return doc


def _field(path):
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "(top level)"


def validate(doc, source="problem"):
    if not isinstance(doc, dict):
        raise InvalidInput(f"{source}: a problem file must be a JSON object")
    kind = doc.get("kind")
    if kind not in schemas.BY_KIND:
        raise InvalidInput(f"{source}: field kind: unknown problem kind {kind!r} "
                           f"(expected one of {', '.join(schemas.BY_KIND)})")
    validator = jsonschema.Draft202012Validator(schemas.BY_KIND[kind])
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{source}: field {_field(e.absolute_path)}: {e.message}" for e in errors]
        raise InvalidInput("\n".join(lines))
    if kind == "oracle-check":
        validate(doc["problem"], f"{source}: problem")
        if doc["problem"]["kind"] == "oracle-check":
            raise InvalidInput(f"{source}: field problem.kind: oracle-check problems cannot be nested")


def _matrix(rows, name):
    widths = {len(r) for r in rows}
    if len(widths) != 1 or 0 in widths:
        raise InvalidInput(f"field {name}: rows must be nonempty and of equal length")
    return np.array(rows, dtype=float)


def _expect(cond, message):
    if not cond:
        raise InvalidInput(message)


def _measures(items, name):
    out = []
    for i, d in enumerate(items):
        try:
            out.append(SignedMeasure.from_json(d))
        except InvalidInput as err:
            raise InvalidInput(f"field {name}[{i}]: {err}") from None
    return out


def _model(d):
    try:
        if d["kind"] == "chebyshev":
            return chebyshev_model(d["degrees"], d["eps"])
        if d["kind"] == "polynomial":
            return polynomial_model(d["n"], d["eps"])
        return odd_polynomial_model(d["n"], d["eps"])
    except InvalidInput as err:
        raise InvalidInput(f"field model: {err}") from None


def _noise(d):
    try:
        return UncertaintySet(d["p"], d["eta"])
    except InvalidInput as err:
        raise InvalidInput(f"field noise: {err}") from None


def _check(name, value, bound, ok, margin):
    return {"name": name, "pass": bool(ok), "value": value, "bound": bound, "margin": margin}


# -- handlers: each returns (report, exit code, csv text or None) ---------------------

def run_polytope_center(doc, st):
    A, L, Q = _matrix(doc["A"], "A"), _matrix(doc["L"], "L"), _matrix(doc["Q"], "Q")
    b, y = np.array(doc["b"], dtype=float), np.array(doc["y"], dtype=float)
    N, n = A.shape
    _expect(b.size == N, f"field b: expected {N} entries (rows of A), got {b.size}")
    _expect(L.shape[1] == n, f"field L: expected {n} columns (columns of A), got {L.shape[1]}")
    _expect(y.size == L.shape[0], f"field y: expected {L.shape[0]} entries (rows of L), got {y.size}")
    _expect(Q.shape[1] == n, f"field Q: expected {n} columns (columns of A), got {Q.shape[1]}")
    model = PolytopeModel(A, b)
    res = center_polytope(model, L, Q, y, doc["eta"], st.tol)
    report = _center_report(res, st)
    if st.verify:
        At, bt = augment_polytope(model, L, y, doc["eta"])
        z_o, r_o = midrange_center_oracle(At, bt, Q)
        dz = float(np.max(np.abs(z_o - res.z)))
        checks = [
            _check("radius matches midrange oracle", res.r, r_o, abs(res.r - r_o) <= CENTER_SLACK,
                   CENTER_SLACK - abs(res.r - r_o)),
            _check("center matches midrange oracle", dz, CENTER_SLACK, dz <= CENTER_SLACK, CENTER_SLACK - dz),
        ]
        # with eta = 0 the consistent set is flat; sample it through the equalities L f = y
        members = sample_model(PolytopeSet(A, b, L, y) if doc["eta"] == 0 else PolytopeSet(At, bt),
                               st.sample_budget())
        checks.append(_cover_check(members @ Q.T, res))
        report["verification"] = checks
    return report, _exit_for_checks(report), None


def run_polyball_center(doc, st):
    n = doc["n"]
    obs = _measures(doc["observations"], "observations")
    Q = _measures(doc["Q"], "Q")
    y = np.array(doc["y"], dtype=float)
    _expect(y.size == len(obs), f"field y: expected {len(obs)} entries (one per observation), got {y.size}")
    res = center_polyball(PolynomialBallModel(n), obs, Q, y, doc["eta"], st.tol)
    report = _center_report(res, st)
    if st.verify:
        q = chebyshev_rows(Q, n)
        R = chebyshev_rows(obs, n) if obs else None
        ball = PolynomialBallSet(n, R, y if obs else None, doc["eta"], directions=q)
        members = sample_model(ball, st.sample_budget())
        vals = members @ q.T
        lb = float(np.max(0.5 * (vals.max(axis=0) - vals.min(axis=0))))
        report["verification"] = [
            _check("radius >= sampled lower bound", res.r, lb, res.r >= lb - CENTER_SLACK, res.r - lb),
            _check("radius <= sampled lower bound + 5e-3", res.r, lb + POLYBALL_WINDOW,
                   res.r <= lb + POLYBALL_WINDOW, lb + POLYBALL_WINDOW - res.r),
            _cover_check(vals, res),
        ]
    return report, _exit_for_checks(report), None


def _center_report(res, st):
    return {
        "z": res.z,
        "r": res.r,
        "status": res.status,
        "nonunique": res.nonunique,
        "intervals": res.intervals,
        "tolerances": st.echo(),
    }


def _cover_check(values, res):
    worst = float(np.max(np.abs(values - res.z))) if values.size else 0.0
    return _check("sampled members within r of z", worst, res.r + CENTER_SLACK, worst <= res.r + CENTER_SLACK,
                  res.r + CENTER_SLACK - worst)


def _estimation_problem(doc):
    model, noise = _model(doc["model"]), _noise(doc["noise"])
    obs = _measures(doc["observations"], "observations")
    if "y" in doc:
        _expect(len(doc["y"]) == len(obs), f"field y: expected {len(obs)} entries (one per observation), "
                                           f"got {len(doc['y'])}")
    return model, noise, obs


def run_estimate(doc, st):
    model, noise, obs = _estimation_problem(doc)
    Q = _measures([doc["quantity"]], "quantity")[0]
    problem = EstimationProblem(Q, obs, model, noise)
    ws = solve_weights(problem, st.gap_tol, st.N_max, st.tol)
    worst = ws.certified_value * model.eps
    report = {
        "a": ws.a,
        "alpha": ws.alpha,
        "delta": ws.delta,
        "estimate": estimate(ws, doc["y"]) if "y" in doc else None,
        "certified_worst_case": worst,
        "quad_budget": ws.quad_budget,
        "certified": ws.certified,
        "N": ws.N,
        "monotone": ws.monotone,
        "history": [{"N": N, "alpha": a, "delta": d} for N, a, d in ws.history],
        "tolerances": st.echo(truncation=True),
    }
    if st.verify:
        lb = worst_case_error_oracle(ws, problem, st.sample_budget()).value
        bound = worst * (1 + 1e-9) + 1e-12
        report["verification"] = [
            _check("sampled worst-case error <= certified worst case", lb, bound, lb <= bound, bound - lb)
        ]
    code = _exit_for_checks(report)
    if not ws.certified:
        log.error("a-posteriori gap %.3e did not reach gap_tol %.3e by N_max = %d", ws.delta, st.gap_tol, st.N_max)
        code = EXIT_FAIL
    return report, code, None


def run_recover(doc, st):
    model, noise, obs = _estimation_problem(doc)
    _expect(model.is_full_polynomial_space, "field model: recover needs V = P_n (Chebyshev degrees 0..n-1)")
    grid = doc.get("grid", DEFAULT_GRID)
    grid = np.linspace(-1.0, 1.0, grid) if isinstance(grid, int) else np.array(grid, dtype=float)
    _expect(np.all(np.abs(grid) <= 1.0), "field grid: points must lie in [-1, 1]")
    nmap = build_near_optimal_map(obs, model, noise, gap_tol=st.gap_tol, N_max=st.N_max, tol=st.tol,
                                  threads=st.threads)
    values = recover(nmap, doc["y"], grid)
    qi = nmap.interpolant
    certificate = error_certificate(nmap) if nmap.certified else None
    report = {
        "certified": nmap.certified,
        "certificate": certificate,
        "gamma": qi.gamma,
        "gamma_bound": qi.gamma_bound,
        "mu_bar": nmap.mu_bar,
        "nodes": qi.nodes,
        "alphas": nmap.alphas,
        "deltas": nmap.deltas,
        "quad_budgets": nmap.budgets,
        "N": list(nmap.N),
        "weights": nmap.coefficients,
        "tolerances": st.echo(truncation=True),
    }
    if st.verify:
        if certificate is None:
            report["verification"] = [_check("certificate issued", None, None, False, None)]
        else:
            lb = worst_case_error_oracle(nmap, None, st.sample_budget()).value
            report["verification"] = [
                _check("sampled worst-case error <= error certificate", lb, certificate, lb <= certificate,
                       certificate - lb)
            ]
    code = _exit_for_checks(report)
    if not nmap.certified:
        log.error("some node weights did not reach gap_tol %.3e by N_max = %d; no certificate", st.gap_tol, st.N_max)
        code = EXIT_FAIL
    return report, code, csv_text(grid, values)


def run_probe(doc, st):
    model, noise = _model(doc["model"]), _noise(doc["noise"])
    points = np.array(doc["points"], dtype=float)
    nodes = doc.get("nodes", list(range(points.size)))
    for k in nodes:
        _expect(k < points.size, f"field nodes: index {k} out of range for {points.size} points")
    reports = [discontinuity_probe(points, model, noise, k, st.tol) for k in nodes]
    report = {
        "reports": [
            {"k": r.k, "x_k": r.x_k, "m_star": r.m_star, "threshold": r.threshold, "gap": r.gap, "a": r.a}
            for r in reports
        ],
        "max_gap": max(r.gap for r in reports),
        "tolerances": st.echo(),
    }
    if st.verify:
        checks = []
        for r in reports:
            pr = EstimationProblem(SignedMeasure.dirac(r.x_k), [SignedMeasure.dirac(float(x)) for x in points],
                                   model, noise)
            res = float(np.max(np.abs(pr.M @ np.array(r.a) - pr.b), initial=0.0))
            checks.append(_check(f"node {r.k}: weights reproduce V", res, 1e-7, res <= 1e-7, 1e-7 - res))
            checks.append(_check(f"node {r.k}: m* <= 1 + eta/eps (e_k is feasible)", r.m_star, r.threshold,
                                 r.m_star <= r.threshold + 1e-7, r.gap))
        report["verification"] = checks
    return report, _exit_for_checks(report), None


HANDLERS = {
    "polytope-center": run_polytope_center,
    "polyball-center": run_polyball_center,
    "estimate": run_estimate,
    "recover": run_recover,
    "probe": run_probe,
}


def _exit_for_checks(report):
    checks = report.get("verification", [])
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_FAIL


def run_oracle_check(doc, st):
    inner = doc["problem"] if doc["kind"] == "oracle-check" else doc
    report, code, _ = HANDLERS[inner["kind"]](inner, replace(st, verify=True))
    checks = report.pop("verification")
    ok = all(c["pass"] for c in checks)
    out = {"problem_kind": inner["kind"], "pass": ok, "checks": checks, "result": report}
    return out, (EXIT_OK if ok and code == EXIT_OK else EXIT_FAIL), None


def run(command, path, args):
    """Validate, dispatch, and return (exit code, stdout text, stderr text, files to write)."""
    doc = load_problem(path)
    expected = COMMANDS[command]
    if expected is not None and doc["kind"] != expected:
        raise InvalidInput(f"{path}: field kind: command {command} expects kind {expected!r}, got {doc['kind']!r}")
    st = settings_for(doc["problem"] if doc["kind"] == "oracle-check" else doc, args)
    if command == "oracle-check":
        report, code, csv = run_oracle_check(doc, st)
    else:
        report, code, csv = HANDLERS[doc["kind"]](doc, st)
    report = {"kind": doc["kind"] if command != "oracle-check" else "oracle-check", **report}
    text = dumps(report) + "\n"
    if csv is None:
        return code, {args.out: text} if args.out else {}, text if not args.out else "", ""
    if args.out:
        out = Path(args.out)
        sidecar = out.with_suffix(".json") if out.suffix != ".json" else out.with_suffix(".sidecar.json")
        return code, {str(out): csv, str(sidecar): text}, "", ""
    return code, {}, csv, text


def build_parser():
    parser = argparse.ArgumentParser(prog="optrec", description="Optimal recovery from noisy linear observations.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "center-polytope": "Chebyshev center of Q(K_E(y)) for a polytope model (linear program)",
        "center-polyball": "Chebyshev center for the unit ball of P_n (semidefinite program)",
        "estimate": "optimal weights and certified worst-case error for a linear quantity",
        "recover": "near-optimal recovery of f on a grid (CSV) with a certificate sidecar (JSON)",
        "probe-discontinuity": "test whether optimal weights can vary continuously at the observation points",
        "oracle-check": "solve and cross-check against the brute-force oracles",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("problem", help="problem file (JSON, see docs/formats.md)")
        p.add_argument("--out", help="write the result here instead of stdout")
        p.add_argument("--verify", action="store_true", help="append oracle cross-checks to the report")
        p.add_argument("--gap-tol", type=float, help="target a-posteriori gap for the truncation schedule")
        p.add_argument("--N-max", dest="N_max", type=int, help="largest truncation level")
        p.add_argument("--budget", type=int, help="oracle sample count")
        p.add_argument("--seed", type=int, help="oracle seed")
        p.add_argument("--threads", type=int, help="worker threads for per-node solves and sampling")
        p.add_argument("--dump-programs", metavar="DIR", help="write every conic program solved as JSON into DIR")
        p.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    conic.dump_programs(args.dump_programs)
    try:
        code, files, out, err = run(args.command, args.problem, args)
    except InvalidInput as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleData, Uncertified) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OptRecError as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    finally:
        conic.dump_programs(None)
    for path, text in files.items():
        Path(path).write_text(text)
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code


if __name__ == "__main__":
    sys.exit(main())
