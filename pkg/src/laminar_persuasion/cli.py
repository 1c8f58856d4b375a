"""Command-line front end.

Commands::

    solve FILE [--public] [--no-ic]      optimal menu in reduced form (JSON)
    partition FILE [--public]            laminar partitional signals (CSV and JSON)
    verify FILE [--mechanism M] [--mc N] audit, incentive report, optional Monte Carlo
    oracle FILE --bins N [--solution S]  discretized benchmark and gap to a solution
    demo {buyer,public_private} [--n N]  worked example with its acceptance table

Outputs go to ``--out DIR`` (default: ``$LAMINAR_PERSUASION_OUT``); without
either, the main artifact is printed to stdout.  JSON keys are sorted and
floats carry 17 significant digits so identical runs give identical bytes.

Exit codes: 0 success, 1 usage or parse error, 2 infeasible (or no
convergence), 3 failed assertion in ``verify``/``demo``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .dist import StateDistribution
from .errors import (ConstructionError, ConvergenceError, DomainError, InfeasibleError,
                     ProblemFormatError)
from .laminar import construct_mechanism, mechanism_from_intervals
from .model import Problem
from .reduced_form import SolverConfig, binding_groups, solve_opt, solve_public
from .verify import audit_mechanism, ic_report, monte_carlo_audit, oracle_discrete, reproduce_example

log = logging.getLogger("laminar_persuasion")

SCHEMA_VERSION = 1
OUT_ENV = "LAMINAR_PERSUASION_OUT"

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_ASSERT = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# canonical JSON


def _encode(obj: Any) -> str:
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(json.dumps(k) + ":" + _encode(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """Sorted keys, no whitespace, floats with 17 significant digits, non-finite as ``null``."""
    return _encode(obj) + "\n"


# ---------------------------------------------------------------------------
# problem files


def _matrix(data: dict, name: str, n: int, K: int, required: bool = True):
    if name not in data:
        if required:
            raise ProblemFormatError("missing required field", name)
        return None
    rows = data[name]
    if not isinstance(rows, list) or len(rows) != n:
        raise ProblemFormatError(f"expected {n} rows (one per type)", name)
    out = np.zeros((n, K))
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != K:
            raise ProblemFormatError(f"expected {K} entries (one per action)", f"{name}[{i}]")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise ProblemFormatError(f"expected a finite number, got {x!r}", f"{name}[{i}][{j}]")
            out[i, j] = x
    return out


def parse_problem(data: Any) -> tuple[Problem, SolverConfig]:
    """Validate a decoded problem file; errors name the offending field."""
    if not isinstance(data, dict):
        raise ProblemFormatError("top level must be an object")
    version = data.get("version")
    if version != SCHEMA_VERSION:
        raise ProblemFormatError(f"unsupported version {version!r}; expected {SCHEMA_VERSION}", "version")
    if "distribution" not in data:
        raise ProblemFormatError("missing required field", "distribution")
    try:
        dist = StateDistribution.from_dict(data["distribution"])
    except (DomainError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ProblemFormatError(str(exc), "distribution") from None

    types = data.get("types")
    if not isinstance(types, list) or not types:
        raise ProblemFormatError("expected a non-empty list of {label, weight}", "types")
    labels, weights = [], []
    for i, entry in enumerate(types):
        if not isinstance(entry, dict) or "weight" not in entry:
            raise ProblemFormatError("expected an object with 'weight'", f"types[{i}]")
        w = entry["weight"]
        if isinstance(w, bool) or not isinstance(w, (int, float)) or not w > 0 or not math.isfinite(w):
            raise ProblemFormatError(f"weight must be a positive number, got {w!r}", f"types[{i}].weight")
        labels.append(str(entry.get("label", i)))
        weights.append(float(w))
    weights = np.array(weights)
    if abs(weights.sum() - 1.0) > 1e-9:
        log.warning("type weights sum to %r; renormalizing", float(weights.sum()))
        weights = weights / weights.sum()

    actions = data.get("actions")
    if not isinstance(actions, list) or not actions:
        raise ProblemFormatError("expected a non-empty list of labels", "actions")
    n, K = len(labels), len(actions)
    u1 = _matrix(data, "u1", n, K)
    u2 = _matrix(data, "u2", n, K)
    v2 = _matrix(data, "v2", n, K)
    v1 = _matrix(data, "v1", n, K, required=False)

    part = data.get("participation")
    if part is not None:
        if not isinstance(part, list) or len(part) != n:
            raise ProblemFormatError(f"expected {n} entries (number or null)", "participation")
        for i, x in enumerate(part):
            if x is not None and (isinstance(x, bool) or not isinstance(x, (int, float))):
                raise ProblemFormatError(f"expected a number or null, got {x!r}", f"participation[{i}]")
        part = [np.nan if x is None else float(x) for x in part]

    solver = data.get("solver", {})
    if not isinstance(solver, dict):
        raise ProblemFormatError("expected an object", "solver")
    try:
        config = SolverConfig.from_dict(solver)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(str(exc), "solver") from None
    try:
        problem = Problem(dist, weights, u1, u2, v2, v1, part, tuple(labels), tuple(str(a) for a in actions))
    except DomainError as exc:
        raise ProblemFormatError(str(exc)) from None
    return problem, config


def load_problem(path: str | Path) -> tuple[Problem, SolverConfig]:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_problem(data)


def problem_to_dict(problem: Problem, config: SolverConfig | None = None) -> dict:
    """Problem file contents for ``problem`` (inverse of :func:`parse_problem`)."""
    out = {
        "version": SCHEMA_VERSION,
        "distribution": problem.distribution.to_dict(),
        "types": [{"label": lab, "weight": float(w)} for lab, w in zip(problem.type_labels, problem.weights)],
        "actions": list(problem.action_labels),
        "u1": problem.u1.tolist(), "u2": problem.u2.tolist(),
        "v1": problem.v1.tolist(), "v2": problem.v2.tolist(),
    }
    if problem.participation is not None:
        out["participation"] = [None if np.isnan(x) else float(x) for x in problem.participation]
    if config is not None:
        out["solver"] = {k: getattr(config, k) for k in config.__dataclass_fields__
                         if getattr(config, k) != getattr(SolverConfig(), k)}
    return out


def load_mechanism(problem: Problem, path: str | Path):
    """Read a private mechanism written by ``partition`` (CSV or JSON)."""
    path = Path(path)
    tindex = {lab: i for i, lab in enumerate(problem.type_labels)}
    aindex = {lab: i for i, lab in enumerate(problem.action_labels)}
    rows = []

    def add(t, a, lo, hi, where):
        if t not in tindex:
            raise ProblemFormatError(f"unknown type label {t!r}", where)
        if a not in aindex:
            raise ProblemFormatError(f"unknown action label {a!r}", where)
        rows.append((tindex[t], aindex[a], float(lo), float(hi)))

    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if data.get("public"):
            raise ProblemFormatError("public mechanisms cannot be re-verified from file", "public")
        for i, entry in enumerate(data.get("types", [])):
            for j, msg in enumerate(entry.get("messages", [])):
                for lo, hi in msg.get("intervals", []):
                    add(entry.get("type"), msg.get("action"), lo, hi, f"types[{i}].messages[{j}]")
    else:
        reader = csv.reader(io.StringIO(path.read_text()))
        header = next(reader, None)
        if header != ["type", "message", "interval_lo", "interval_hi"]:
            raise ProblemFormatError("expected header type,message,interval_lo,interval_hi", "line 1")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 4:
                raise ProblemFormatError("expected 4 columns", f"line {lineno}")
            if rec[0] == "public":
                raise ProblemFormatError("public mechanisms cannot be re-verified from file", f"line {lineno}")
            try:
                lo, hi = float(rec[2]), float(rec[3])
            except ValueError:
                raise ProblemFormatError("interval endpoints must be numbers", f"line {lineno}") from None
            add(rec[0], rec[1], lo, hi, f"line {lineno}")
    return mechanism_from_intervals(problem, rows)


# ---------------------------------------------------------------------------
# commands


def _config(base: SolverConfig, args) -> SolverConfig:
    if args.tol is None:
        return base
    return SolverConfig.from_dict({**{k: getattr(base, k) for k in base.__dataclass_fields__},
                                   "lp_tol": args.tol})


def _solve(problem: Problem, config: SolverConfig, args):
    if getattr(args, "public", False):
        return solve_public(problem, config)
    return solve_opt(problem, config, ic=not getattr(args, "no_ic", False))


def solution_report(solution) -> dict:
    out = solution.to_dict()
    out["diagnostics"].pop("seconds", None)  # keep output byte-identical across runs
    groups = []
    for t in range(solution.n_menus):
        try:
            blocks = binding_groups(solution, t)
        except ConstructionError:
            blocks = []
        groups.append([{"cells": list(b.cells), "q0": b.q0, "q1": b.q1} for b in blocks])
    out["binding_groups"] = groups
    out["ic_matrix"] = None if solution.mode == "public" else ic_report(solution.problem, solution).U.tolist()
    out["types"] = ["public"] if solution.mode == "public" else list(solution.problem.type_labels)
    return out


class _Output:
    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str, primary: bool = True) -> None:
        if self.dir is not None:
            (self.dir / name).write_text(text)
            print(self.dir / name)
        elif primary:
            sys.stdout.write(text)


def cmd_solve(args) -> int:
    problem, base = load_problem(args.problem)
    sol = _solve(problem, _config(base, args), args)
    _Output(args.out).emit("solution.json", canonical_json(solution_report(sol)))
    return EXIT_OK


def cmd_partition(args) -> int:
    problem, base = load_problem(args.problem)
    sol = _solve(problem, _config(base, args), args)
    mech = construct_mechanism(sol)
    out = _Output(args.out)
    out.emit("mechanism.csv", mech.to_csv())
    out.emit("mechanism.json", canonical_json(mech.to_dict()), primary=False)
    return EXIT_OK


def cmd_verify(args) -> int:
    problem, base = load_problem(args.problem)
    config = _config(base, args)
    sol = _solve(problem, config, args)
    mech = load_mechanism(problem, args.mechanism) if args.mechanism else construct_mechanism(sol)
    tol = 1e-8 if args.tol is None else args.tol
    audit = audit_mechanism(problem, mech, sol, tol=tol)
    report = {"objective": sol.objective, "mode": sol.mode, "audit": audit.to_dict()}
    passed = audit.passed
    if sol.mode != "public":
        icr = ic_report(problem, sol, tol=max(tol, 1e-7))
        report["ic"] = icr.to_dict()
        passed = passed and (sol.mode == "no_ic" or icr.ic_ok)
    if args.mc:
        mc = monte_carlo_audit(problem, mech, args.mc, seed=args.seed, objective=sol.objective)
        report["monte_carlo"] = mc.to_dict()
        passed = passed and mc.passed
    report["passed"] = passed
    _Output(args.out).emit("verify.json", canonical_json(report))
    if not passed:
        print("verification failed", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def cmd_oracle(args) -> int:
    problem, base = load_problem(args.problem)
    if args.bins < 1:
        raise ProblemFormatError("must be at least 1", "--bins")
    ic = not args.no_ic
    res = oracle_discrete(problem, args.bins, ic=ic)
    if args.solution:
        try:
            ref = float(json.loads(Path(args.solution).read_text())["objective"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise ProblemFormatError("expected a solution JSON with 'objective'", "--solution") from None
        source = str(args.solution)
    else:
        ref = solve_opt(problem, _config(base, args), ic=ic).objective
        source = "solve_opt"
    report = {"bins": res.bins, "objective": res.objective, "status": res.status,
              "reference": ref, "reference_source": source, "gap": ref - res.objective}
    _Output(args.out).emit("oracle.json", canonical_json(report))
    return EXIT_OK


def cmd_demo(args) -> int:
    rep = reproduce_example(args.example, n=args.n, seed=args.seed, samples=args.mc or 200_000,
                            bins=args.bins)
    out = _Output(args.out)
    print(f"{rep.name}  ({rep.seconds:.1f} s)")
    print(rep.table())
    if out.dir is not None:
        out.emit(f"demo_{args.example}.json", canonical_json(rep.to_dict()))
    return EXIT_OK if rep.passed else EXIT_ASSERT


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=os.environ.get(OUT_ENV),
                        help=f"output directory (default ${OUT_ENV}; stdout if unset)")
    common.add_argument("--tol", type=float, default=None,
                        help="LP tolerance for solving; also the audit tolerance in verify")
    common.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="laminar-persuasion",
                                     description="Optimal signal menus for a privately informed receiver.")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_mode(p):
        p.add_argument("problem", help="problem file (JSON)")
        p.add_argument("--public", action="store_true", help="one signal shown to every type")
        p.add_argument("--no-ic", action="store_true", help="drop incentive constraints (relaxation)")
        return p

    p = with_mode(sub.add_parser("solve", parents=[common], help="solve for the optimal menu"))
    p.set_defaults(func=cmd_solve)
    p = with_mode(sub.add_parser("partition", parents=[common], help="build laminar partitional signals"))
    p.set_defaults(func=cmd_partition)
    p = with_mode(sub.add_parser("verify", parents=[common], help="audit a mechanism"))
    p.add_argument("--mechanism", help="mechanism CSV/JSON from 'partition' (default: rebuild)")
    p.add_argument("--mc", type=int, default=0, metavar="N", help="Monte Carlo samples (0 = skip)")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("oracle", parents=[common], help="discretized benchmark")
    p.add_argument("problem", help="problem file (JSON)")
    p.add_argument("--bins", type=int, default=2000, help="equal-probability bins")
    p.add_argument("--no-ic", action="store_true", help="drop incentive constraints")
    p.add_argument("--solution", help="solution JSON whose objective is compared (default: solve now)")
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("demo", parents=[common], help="run a worked example")
    p.add_argument("example", choices=["buyer", "public_private"])
    p.add_argument("--n", type=int, default=3, help="number of types for public_private")
    p.add_argument("--bins", type=int, default=2000, help="oracle bins for buyer")
    p.add_argument("--mc", type=int, default=0, metavar="N", help="Monte Carlo samples for buyer")
    p.set_defaults(func=cmd_demo)
    return parser


def _error(kind: str, message: str, **extra) -> None:
    print(canonical_json({"error": kind, "message": message, **extra}), end="", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ProblemFormatError as exc:
        _error("parse", str(exc), field=exc.field)
        return EXIT_USAGE
    except (OSError, DomainError) as exc:
        _error("usage", str(exc))
        return EXIT_USAGE
    except InfeasibleError as exc:
        problem_labels = None
        try:
            problem_labels = load_problem(args.problem)[0].type_labels
        except Exception:
            pass
        label = (problem_labels[exc.type_index]
                 if problem_labels is not None and exc.type_index is not None else None)
        _error("infeasible", str(exc), constraint=exc.constraint, type=label)
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        _error("convergence", str(exc))
        return EXIT_INFEASIBLE
    except ConstructionError as exc:
        _error("assertion", str(exc))
        return EXIT_ASSERT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
