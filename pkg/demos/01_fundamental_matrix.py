"""The fundamental matrix of the drift system y' = D(t) y.

Everything downstream (the mapping H, K, alpha, the exponential fit) is
built from Phi(t, t0) sampled on a uniform grid, so start there.
"""

import numpy as np

from advecta import AdvancedSystem, Horizon, build_fundamental, mat_exp, transition
from advecta.matrix_core import mat_inf_norm
from advecta.transition import check_chapman_kolmogorov

# A single term with zero advance: x' + A x(t) = 0, so the drift is D = -A.
A = np.array([[0.4, -1.0], [1.0, 0.4]])
sys_ = AdvancedSystem.from_strings([(A.tolist(), 0)])
g = build_fundamental(sys_, Horizon(T=5.0, dt=1e-3))
print(g)

# For constant D the answer is the matrix exponential.
for t in (0.5, 2.0, 5.0):
    err = mat_inf_norm(transition(g, t, 0.0) - mat_exp(-A, t))
    print(f"t = {t:3.1f}  |Phi(t,0) - e^(tD)| = {err:.2e}")

# Transition matrices compose: Phi(t,s) Phi(s,r) = Phi(t,r).
print("CK defect (4.2, 1.3, 0.7):", check_chapman_kolmogorov(g, 4.2, 1.3, 0.7))
print("Phi(r, r):\n", transition(g, 2.5, 2.5))

# RK4 is fourth order: halving dt cuts the error by about 16.
errors = []
for dt in (0.2, 0.1, 0.05):
    gd = build_fundamental(sys_, Horizon(T=4.0, dt=dt))
    errors.append(mat_inf_norm(gd.phi[gd.window] - mat_exp(-A, 4.0)))
print("refinement ratios:", [round(a / b, 2) for a, b in zip(errors, errors[1:])])

# A time-varying scalar drift d(t) = -1/(1+t) has Phi(t,0) = 1/(1+t).
s2 = AdvancedSystem.from_strings([([["1/(1+t)"]], 0)])
g2 = build_fundamental(s2, Horizon(T=3.0, dt=1e-3))
t = g2.times[g2.window]
print(f"Phi(3,0) = {g2.phi[g2.window, 0, 0]:.9f}   1/(1+t) = {1 / (1 + t):.9f}")
