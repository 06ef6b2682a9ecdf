#!/usr/bin/env python3
"""Local AC-OPF solver used to cross-check test cases.

Straight polar-form OPF with scipy's SLSQP and a few random restarts.  Parses
the MATPOWER file with its own tiny reader so nothing from the library under
test leaks in.  A local optimum is an upper bound on the global one; with
enough restarts on these small cases it is the global optimum in practice.
"""
import re
import sys
import numpy as np
from scipy.optimize import minimize


def parse_matpower(path):
    txt = open(path).read()
    txt = re.sub(r"%.*", "", txt)
    mats = {}
    for name in ("bus", "gen", "branch", "gencost"):
        m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, txt, re.S)
        rows = []
        for line in m.group(1).strip().splitlines():
            line = line.strip().rstrip(";")
            if line:
                rows.append([float(t) for t in line.split()])
        mats[name] = np.array(rows)
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.]+)", txt).group(1))
    return base, mats


def build(path):
    base, m = parse_matpower(path)
    bus, gen, branch, gencost = m["bus"], m["gen"], m["branch"], m["gencost"]
    ids = {int(b[0]): i for i, b in enumerate(bus)}
    n = len(bus)
    Y = np.zeros((n, n), complex)
    flows = []  # (f, t, yff, yft, ytf, ytt, rate_pu)
    for br in branch:
        if br[10] == 0:
            continue
        f, t = ids[int(br[0])], ids[int(br[1])]
        ys = 1.0 / (br[2] + 1j * br[3])
        bc = 1j * br[4] / 2
        tau = br[8] if br[8] != 0 else 1.0
        shift = np.deg2rad(br[9])
        tap = tau * np.exp(1j * shift)
        yff = (ys + bc) / (tau * tau)
        yft = -ys / np.conj(tap)
        ytf = -ys / tap
        ytt = ys + bc
        Y[f, f] += yff
        Y[f, t] += yft
        Y[t, f] += ytf
        Y[t, t] += ytt
        flows.append((f, t, yff, yft, ytf, ytt, br[5] / base))
    for b in bus:
        i = ids[int(b[0])]
        Y[i, i] += (b[4] + 1j * b[5]) / base
    Pd = bus[:, 2] / base
    Qd = bus[:, 3] / base
    Vmin, Vmax = bus[:, 12].copy(), bus[:, 11].copy()
    ref = ids[int(bus[bus[:, 1] == 3][0][0])]
    gbus = [ids[int(g[0])] for g in gen]
    Pg_lim = [(g[9] / base, g[8] / base) for g in gen]
    Qg_lim = [(g[4] / base, g[3] / base) for g in gen]
    cost = [(c[4], c[5], c[6]) for c in gencost]
    return dict(base=base, n=n, Y=Y, Pd=Pd, Qd=Qd, Vmin=Vmin, Vmax=Vmax,
                ref=ref, gbus=gbus, Pg_lim=Pg_lim, Qg_lim=Qg_lim, cost=cost,
                flows=flows)


def solve(net, x0=None, seed=0):
    n = net["n"]
    rng = np.random.default_rng(seed)
    gidx = {}
    for k, b in enumerate(net["gbus"]):
        gidx.setdefault(b, []).append(k)

    def volt(x):
        return x[:n] * np.exp(1j * x[n:])

    def injections(x):
        V = volt(x)
        S = V * np.conj(net["Y"] @ V)
        return S.real + net["Pd"], S.imag + net["Qd"]  # required generation

    def cost_of(x):
        P, _ = injections(x)
        c = 0.0
        for b, ks in gidx.items():
            # split bus generation across identical-bus units by capacity
            caps = np.array([net["Pg_lim"][k][1] for k in ks])
            share = caps / caps.sum() if caps.sum() > 0 else np.ones(len(ks)) / len(ks)
            for k, s in zip(ks, share):
                Pk = P[b] * s * net["base"]
                c2, c1, c0 = net["cost"][k]
                c += c2 * Pk * Pk + c1 * Pk + c0
        return c

    cons = []
    # generation envelope at generator buses, zero injection elsewhere
    Pmin = -net["Pd"].copy() * 0
    for b in range(n):
        ks = gidx.get(b, [])
        plo = sum(net["Pg_lim"][k][0] for k in ks)
        phi = sum(net["Pg_lim"][k][1] for k in ks)
        qlo = sum(net["Qg_lim"][k][0] for k in ks)
        qhi = sum(net["Qg_lim"][k][1] for k in ks)

        def haveP(x, b=b, plo=plo, phi=phi):
            P, _ = injections(x)
            return [P[b] - plo, phi - P[b]]

        def haveQ(x, b=b, qlo=qlo, qhi=qhi):
            _, Q = injections(x)
            return [Q[b] - qlo, qhi - Q[b]]

        def fixP(x, b=b, plo=plo):
            P, _ = injections(x)
            return P[b] - plo

        def fixQ(x, b=b, qlo=qlo):
            _, Q = injections(x)
            return Q[b] - qlo

        cons.append({"type": "eq", "fun": fixP} if plo == phi else {"type": "ineq", "fun": haveP})
        cons.append({"type": "eq", "fun": fixQ} if qlo == qhi else {"type": "ineq", "fun": haveQ})

    def flow_cons(x):
        V = volt(x)
        out = []
        for f, t, yff, yft, ytf, ytt, rate in net["flows"]:
            if rate <= 0:
                continue
            Sf = V[f] * np.conj(yff * V[f] + yft * V[t])
            St = V[t] * np.conj(ytf * V[f] + ytt * V[t])
            out.append(rate * rate - abs(Sf) ** 2)
            out.append(rate * rate - abs(St) ** 2)
        return out if out else [1.0]

    cons.append({"type": "ineq", "fun": flow_cons})

    bounds = [(net["Vmin"][i], net["Vmax"][i]) for i in range(n)]
    bounds += [(-np.pi, np.pi) if i != net["ref"] else (0.0, 0.0) for i in range(n)]

    best = None
    starts = []
    if x0 is not None:
        starts.append(x0)
    flat = np.concatenate([np.clip(np.ones(n), net["Vmin"], net["Vmax"]), np.zeros(n)])
    starts.append(flat)
    for _ in range(6):
        v = rng.uniform(net["Vmin"], net["Vmax"])
        th = rng.uniform(-0.3, 0.3, n)
        th[net["ref"]] = 0
        starts.append(np.concatenate([v, th]))
    for s in starts:
        r = minimize(cost_of, s, method="SLSQP", bounds=bounds, constraints=cons,
                     options={"maxiter": 400, "ftol": 1e-10})
        if not r.success:
            continue
        viol = 0.0
        for c in cons:
            v = np.atleast_1d(c["fun"](r.x))
            viol = min(viol, -np.abs(v).max() if c["type"] == "eq" else v.min())
        if viol < -1e-6:
            continue
        if best is None or r.fun < best[0]:
            best = (r.fun, r.x.copy())
    return best


if __name__ == "__main__":
    net = build(sys.argv[1])
    got = solve(net, seed=int(sys.argv[2]) if len(sys.argv) > 2 else 0)
    if got is None:
        print("no feasible local solution found")
        sys.exit(1)
    c, x = got
    n = net["n"]
    print(f"local optimum: {c:.6f} $/h")
    print("Vm:", np.array2string(x[:n], precision=5))
    print("Va(deg):", np.array2string(np.degrees(x[n:]), precision=3))
