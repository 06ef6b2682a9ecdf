#!/usr/bin/env python3
"""Solve a momentopf-conic-1 JSON program with Clarabel or SCS.

Standard form handed to the solvers:  min q'x  s.t.  Ax + s = b,
s in  Zero(neq) x Nonneg(nineq) x PSDTriangle(d1) x ... .
Matrix rows for a PSD block vectorize M(x) = F0 + sum_k Fk x_k with the
solver's triangle convention (scaled off-diagonals), so b carries
svec(F0) and A carries -svec(Fk).

Run with --selftest to exercise both backends on small cones with known
answers; this pins down the svec ordering/scaling conventions.
"""

import argparse
import json
import math
import sys
import time


def _import_numpy():
    import numpy as np
    import scipy.sparse as sp

    return np, sp


def load_program(path):
    with open(path) as f:
        prog = json.load(f)
    if prog.get("format") != "momentopf-conic-1":
        raise ValueError("unknown program format: %r" % prog.get("format"))
    return prog


def triangle_indices(dim, convention):
    """Sequence of (row, col, scale) in the solver's svec order; row <= col."""
    out = []
    sq2 = math.sqrt(2.0)
    if convention == "upper-col":  # Clarabel: upper triangle, column major
        for c in range(dim):
            for r in range(c + 1):
                out.append((r, c, 1.0 if r == c else sq2))
    elif convention == "lower-col":  # SCS: lower triangle, column major
        for c in range(dim):
            for r in range(c, dim):
                out.append((c, r, 1.0 if r == c else sq2))  # store (min,max)
    else:
        raise ValueError(convention)
    return out


def build_cone_data(prog, convention):
    np, sp = _import_numpy()
    nvar = len(prog["variables"])
    rows, cols, vals, b = [], [], [], []

    def add_form_row(form, row, negate=True, scale=1.0):
        s = -scale if negate else scale
        for var, coef in form["terms"]:
            rows.append(row)
            cols.append(var)
            vals.append(s * coef)

    r = 0
    neq = len(prog["equalities"])
    for form in prog["equalities"]:
        add_form_row(form, r)
        b.append(form["constant"])
        r += 1
    nineq = len(prog["inequalities"])
    for form in prog["inequalities"]:
        add_form_row(form, r)
        b.append(form["constant"])
        r += 1

    psd_dims = []
    for block in prog["psd_blocks"]:
        dim = block["dim"]
        psd_dims.append(dim)
        entry = {(e[0], e[1]): e[2] for e in block["entries"]}
        for row_i, col_i, scale in triangle_indices(dim, convention):
            form = entry.get((row_i, col_i))
            if form is None:
                b.append(0.0)
            else:
                add_form_row(form, r, scale=scale)
                b.append(scale * form["constant"])
            r += 1

    A = sp.csc_matrix(
        (np.array(vals), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(r, nvar),
    )
    q = np.zeros(nvar)
    for var, coef in prog["objective"]["terms"]:
        q[var] += coef
    return A, np.array(b), q, neq, nineq, psd_dims


def solver_version(module_name):
    try:
        from importlib.metadata import version

        return version(module_name)
    except Exception:
        return "unknown"


def solve_clarabel(prog, eps, time_limit, max_iter, verbose, stat_reg=0.0):
    np, sp = _import_numpy()
    import clarabel

    A, b, q, neq, nineq, psd_dims = build_cone_data(prog, "upper-col")
    cones = []
    if neq:
        cones.append(clarabel.ZeroConeT(neq))
    if nineq:
        cones.append(clarabel.NonnegativeConeT(nineq))
    for d in psd_dims:
        cones.append(clarabel.PSDTriangleConeT(d))

    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.tol_gap_abs = eps
    settings.tol_gap_rel = eps
    settings.tol_feas = eps
    if stat_reg:
        # caller promises to re-verify the point against the exact data
        settings.static_regularization_constant = float(stat_reg)
    if time_limit:
        settings.time_limit = float(time_limit)
    if max_iter:
        settings.max_iter = int(max_iter)

    P = sp.csc_matrix((len(q), len(q)))
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    t0 = time.time()
    sol = solver.solve()
    wall = time.time() - t0

    status = str(sol.status)
    mapping = {
        "Solved": "optimal",
        "AlmostSolved": "near_optimal",
        "PrimalInfeasible": "infeasible",
        "AlmostPrimalInfeasible": "infeasible",
        "DualInfeasible": "unbounded",
        "AlmostDualInfeasible": "unbounded",
    }
    out = {
        "status": mapping.get(status, "numerical_failure"),
        "solver_status": status,
        "solver": "clarabel " + solver_version("clarabel"),
        "x": list(sol.x),
        "objective": float(sol.obj_val) + prog["objective"]["constant"],
        "iterations": int(sol.iterations),
        "solve_time_sec": wall,
        "primal_residual": float(sol.r_prim),
        "dual_residual": float(sol.r_dual),
    }
    return out


def solve_scs(prog, eps, time_limit, max_iter, verbose):
    np, sp = _import_numpy()
    import scs

    A, b, q, neq, nineq, psd_dims = build_cone_data(prog, "lower-col")
    cone = {}
    if neq:
        cone["z"] = neq
    if nineq:
        cone["l"] = nineq
    if psd_dims:
        cone["s"] = psd_dims

    data = {"A": A, "b": b, "c": q}
    kwargs = dict(eps_abs=eps, eps_rel=eps, verbose=verbose)
    if max_iter:
        kwargs["max_iters"] = int(max_iter)
    if time_limit:
        kwargs["time_limit_secs"] = float(time_limit)
    t0 = time.time()
    sol = scs.solve(data, cone, **kwargs)
    wall = time.time() - t0

    info = sol["info"]
    status = info["status"].lower()
    if status.startswith("solved") and "inaccurate" not in status:
        mapped = "optimal"
    elif "inaccurate" in status and "solved" in status:
        mapped = "near_optimal"
    elif "infeasible" in status:
        mapped = "infeasible"
    elif "unbounded" in status:
        mapped = "unbounded"
    else:
        mapped = "numerical_failure"

    x = sol.get("x")
    out = {
        "status": mapped,
        "solver_status": info["status"],
        "solver": "scs " + solver_version("scs"),
        "x": [] if x is None else [float(v) for v in x],
        "objective": (float(np.dot(q, x)) if x is not None else float("nan"))
        + prog["objective"]["constant"],
        "iterations": int(info.get("iter", -1)),
        "solve_time_sec": wall,
        "primal_residual": float(info.get("res_pri", float("nan"))),
        "dual_residual": float(info.get("res_dual", float("nan"))),
    }
    return out


BACKENDS = {"clarabel": solve_clarabel, "scs": solve_scs}


def selftest(backend):
    """Known-answer problems that pin down each solver's conventions."""
    np, _ = _import_numpy()

    def var(i):
        return {"kind": "epigraph", "bus": i}

    def prog(nvar, objective, eqs=(), ineqs=(), blocks=()):
        return {
            "format": "momentopf-conic-1",
            "variables": [var(i) for i in range(nvar)],
            "objective": objective,
            "equalities": list(eqs),
            "inequalities": list(ineqs),
            "psd_blocks": list(blocks),
            "metadata": {},
        }

    def form(constant, *terms):
        return {"constant": constant, "terms": [list(t) for t in terms]}

    failures = []

    def check(name, got, want, tol=1e-6):
        if isinstance(want, str):
            ok = got == want
        else:
            ok = abs(got - want) <= tol * max(1.0, abs(want))
        if not ok:
            failures.append("%s: got %r want %r" % (name, got, want))

    solve = BACKENDS[backend]

    # LP: min x0 s.t. x0 - 1 >= 0.
    r = solve(prog(1, form(0, (0, 1.0)), ineqs=[form(-1.0, (0, 1.0))]), 1e-9, 0, 0, False)
    check("lp status", r["status"], "optimal")
    check("lp obj", r["objective"], 1.0)

    # Infeasible: x0 == 1 and x0 == 2.
    r = solve(
        prog(1, form(0, (0, 1.0)), eqs=[form(-1.0, (0, 1.0)), form(-2.0, (0, 1.0))]),
        1e-9, 0, 0, False,
    )
    check("infeasible status", r["status"], "infeasible")

    # 2x2 SDP, off-diagonal scaling: [[1, x0], [x0, 4]] >= 0, max x0 -> 2.
    blocks = [
        {
            "label": "t",
            "dim": 2,
            "entries": [
                [0, 0, form(1.0)],
                [0, 1, form(0.0, (0, 1.0))],
                [1, 1, form(4.0)],
            ],
        }
    ]
    r = solve(prog(1, form(0, (0, -1.0)), blocks=blocks), 1e-9, 0, 0, False)
    check("sdp2 status", r["status"], "optimal")
    check("sdp2 obj", r["objective"], -2.0)

    # 3x3 SDP, entry ordering: tridiagonal [[x,1,0],[1,x,1],[0,1,x]] >= 0,
    # min x -> sqrt(2).
    blocks = [
        {
            "label": "t3",
            "dim": 3,
            "entries": [
                [0, 0, form(0.0, (0, 1.0))],
                [1, 1, form(0.0, (0, 1.0))],
                [2, 2, form(0.0, (0, 1.0))],
                [0, 1, form(1.0)],
                [1, 2, form(1.0)],
            ],
        }
    ]
    r = solve(prog(1, form(0, (0, 1.0)), blocks=blocks), 1e-9, 0, 0, False)
    check("sdp3 status", r["status"], "optimal")
    check("sdp3 obj", r["objective"], math.sqrt(2.0))

    if failures:
        print("SELFTEST FAIL (%s):" % backend)
        for f in failures:
            print("  " + f)
        return 1
    print("SELFTEST OK (%s)" % backend)
    return 0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--in", dest="inp", help="program JSON")
    ap.add_argument("--out", dest="out", help="solution JSON")
    ap.add_argument("--backend", default="clarabel", choices=sorted(BACKENDS))
    ap.add_argument("--eps", type=float, default=1e-8)
    ap.add_argument("--time-limit", type=float, default=0.0)
    ap.add_argument("--max-iter", type=int, default=0)
    ap.add_argument("--stat-reg", type=float, default=0.0,
                    help="clarabel static KKT regularization (0 = solver default)")
    ap.add_argument("--verbose", action="store_true")
    ap.add_argument("--selftest", action="store_true")
    args = ap.parse_args()

    if args.selftest:
        sys.exit(selftest(args.backend))
    if not args.inp or not args.out:
        ap.error("--in and --out are required")

    prog = load_program(args.inp)
    try:
        if args.backend == "clarabel":
            result = solve_clarabel(prog, args.eps, args.time_limit, args.max_iter,
                                    args.verbose, stat_reg=args.stat_reg)
        else:
            result = BACKENDS[args.backend](prog, args.eps, args.time_limit, args.max_iter,
                                            args.verbose)
    except Exception as exc:  # report as a structured failure, not a crash
        result = {
            "status": "numerical_failure",
            "solver_status": "exception: %s" % exc,
            "solver": args.backend,
            "x": [],
            "objective": float("nan"),
            "iterations": 0,
            "solve_time_sec": 0.0,
            "primal_residual": float("nan"),
            "dual_residual": float("nan"),
        }
    def _clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None  # strict JSON has no NaN/Inf
        if isinstance(v, dict):
            return {k: _clean(u) for k, u in v.items()}
        if isinstance(v, list):
            return [_clean(u) for u in v]
        return v

    with open(args.out, "w") as f:
        json.dump(_clean(result), f)


if __name__ == "__main__":
    main()
