"""Compare the compiled and pure-Python simplex kernels.

Two workloads:

* random dense LPs of growing size, solved cold and then warm-started with
  extra cuts through ``add_rows``;
* the full cutting-plane solve of the buyer example, with the kernel module
  swapped under the solver.

Both backends must agree on every objective; the script exits nonzero if
they do not.  Usage::

    python3 benchmarks/bench_simplex.py [--repeat 3] [--json results.json]
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from laminar_persuasion import instances, simplex, solve_opt
from laminar_persuasion.simplex import LinearProgram, available_backends


def random_lp(rng: np.random.Generator, n: int, m: int):
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.5, 1.5, m)
    A = np.vstack([A, np.ones((1, n))])
    b = np.append(b, float(n))
    return rng.normal(size=n), A, b


def run_lp(backend, c, A, b, cuts):
    lp = LinearProgram(c, A, b, backend=backend)
    r = lp.solve()
    for A2 in cuts:
        # nonnegative rows shaving the incumbent; x = 0 stays feasible
        r = lp.add_rows(A2, 0.9 * (A2 @ r.x))
    return r.objective, lp.pivots


def best_of(fn, repeat: int):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="timing repetitions (best is reported)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the Python kernels are available", file=sys.stderr)
    results, ok = [], True
    rng = np.random.default_rng(args.seed)

    for n, m in ((20, 15), (60, 40), (150, 100), (300, 200)):
        c, A, b = random_lp(rng, n, m)
        cuts = [np.abs(rng.normal(size=(5, n))) for _ in range(5)]
        row = {"workload": f"dense LP n={n} m={m} (+25 cuts)"}
        objs = {}
        for name, be in backends.items():
            secs, (obj, piv) = best_of(lambda: run_lp(be, c, A, b, cuts), args.repeat)
            row[name] = secs
            row["pivots"] = piv
            objs[name] = obj
        ok &= max(objs.values()) - min(objs.values()) <= 1e-8 * (1 + max(abs(v) for v in objs.values()))
        results.append(row)

    problem = instances.buyer()
    row = {"workload": "buyer example, full cutting-plane solve"}
    objs = {}
    saved = simplex._backend
    try:
        for name, be in backends.items():
            simplex._backend = be
            secs, sol = best_of(lambda: solve_opt(problem), args.repeat)
            row[name] = secs
            row["pivots"] = sol.diagnostics.get("pivots")
            objs[name] = sol.objective
    finally:
        simplex._backend = saved
    ok &= max(objs.values()) - min(objs.values()) <= 1e-8
    results.append(row)

    print(f"{'workload':44s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s} {'pivots':>7s}")
    for r in results:
        py, cc = r.get("python"), r.get("compiled")
        speed = f"{py / cc:8.1f}" if py and cc else f"{'n/a':>8s}"
        print(f"{r['workload']:44s} {py:10.4f} {cc if cc is not None else float('nan'):11.4f} {speed} "
              f"{r['pivots']:7d}")
    print("objectives agree" if ok else "OBJECTIVE MISMATCH between backends")
    if args.json:
        with open(args.json, "w") as f:
            json.dump({"results": results, "agree": ok}, f, indent=1, sort_keys=True)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
