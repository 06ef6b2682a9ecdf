#!/usr/bin/env python3
"""Independent optimum for tests/data/case2.m.

After fixing the slack voltage at 1.05 (Vmin = Vmax) and its angle at zero,
only |V2| and th2 remain.  Dense grid plus local polish; everything below is
written straight from the case file, not from the library under test.
"""
import numpy as np
from scipy.optimize import minimize

base = 100.0
V1 = 1.05 + 0j
R, X, bsh = 0.04, 0.2, 0.02
rate = 100.0 / base
Pd, Qd = 120.0 / base, 40.0 / base
# gen limits (pu) and costs on MW
P1min, P1max, Q1min, Q1max = 0.0, 1.5, -1.0, 1.0
P2min, P2max, Q2min, Q2max = 0.0, 0.8, -0.5, 0.5
cost1 = lambda P: 0.02 * (P * base) ** 2 + 20.0 * (P * base)
cost2 = lambda P: 0.05 * (P * base) ** 2 + 30.0 * (P * base)

y = 1.0 / (R + 1j * X)
ysh = 1j * bsh / 2

def eval_point(vm, th):
    V2 = vm * np.exp(1j * th)
    I1 = (y + ysh) * V1 - y * V2
    I2 = (y + ysh) * V2 - y * V1
    S1 = V1 * np.conj(I1)          # injection at bus 1 = generation (no load)
    S2 = V2 * np.conj(I2)          # injection at bus 2
    P1, Q1 = S1.real, S1.imag
    P2g, Q2g = S2.real + Pd, S2.imag + Qd
    viol = max(
        P1min - P1, P1 - P1max, Q1min - Q1, Q1 - Q1max,
        P2min - P2g, P2g - P2max, Q2min - Q2g, Q2g - Q2max,
        abs(S1) - rate, abs(S2) - rate,
    )
    return cost1(P1) + cost2(P2g), viol

best = (np.inf, None)
vms = np.linspace(0.95, 1.05, 1001)
ths = np.linspace(-np.pi / 4, np.pi / 4, 1001)
for vm in vms:
    for th in ths:
        c, viol = eval_point(vm, th)
        if viol <= 0 and c < best[0]:
            best = (c, (vm, th))
print("grid best:", best[0], "at", best[1])

def penalized(z):
    c, viol = eval_point(z[0], z[1])
    return c + 1e8 * max(0.0, viol) ** 2

res = minimize(penalized, best[1], method="Nelder-Mead",
               options={"xatol": 1e-12, "fatol": 1e-12, "maxiter": 20000})
c, viol = eval_point(res.x[0], res.x[1])
print(f"polished: {c:.9f} $/h  viol={viol:.3e}  vm={res.x[0]:.9f} th={np.degrees(res.x[1]):.6f} deg")

# hard-constrained polish (stays feasible)
def cost_only(z):
    return eval_point(z[0], z[1])[0]
def neg_viol(z):
    return -eval_point(z[0], z[1])[1]
res2 = minimize(cost_only, res.x, method="SLSQP",
                bounds=[(0.95, 1.05), (-np.pi / 2, np.pi / 2)],
                constraints=[{"type": "ineq", "fun": neg_viol}],
                options={"ftol": 1e-14, "maxiter": 500})
c2, v2 = eval_point(res2.x[0], res2.x[1])
print(f"feasible optimum: {c2:.9f} $/h  viol={v2:.3e}  vm={res2.x[0]:.9f} th={np.degrees(res2.x[1]):.6f} deg")
