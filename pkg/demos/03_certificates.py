"""Exponential decay certificates.

The certificate asks for M with  M0|x0| e^(lambda0 t0) + M rho <= M,
rho = S_out S_in M0 / (lambda (lambda0 - lambda)).  It only exists when the
advanced terms are small compared with how fast the drift decays.
"""

from advecta import (
    AdvancedSystem, Horizon, build_fundamental, exponential_certificate, fit_exponential_bound,
    stability_report,
)
from advecta.analysis import certificate_bounds

# Hand arithmetic: M0 = 1, lambda0 = 1, S = 0.4, lambda = 0.5 gives rho = 0.64.
cert = exponential_certificate(1.0, 1.0, [0.4], x0_norm=1.0, lam=0.5)
print(f"rho = {cert.rho:.2f}, M = {cert.M:.10f} (25/9 = {25 / 9:.10f})")

# For x' + a x(t+h) + b x(t+r) = 0 the fitted lambda0 equals a + b = S, so
# rho = S^2 / (lambda (S - lambda)) >= 4: never certifiable.
scalar = AdvancedSystem.two_term([[0.5]], "0.4", [[0.3]], "0.2")
g = build_fundamental(scalar, Horizon(20.0, 0.01))
M0, lam0 = fit_exponential_bound(g)
best = exponential_certificate(M0, lam0, [0.5, 0.3], 1.0)
print(f"scalar family: M0 = {M0:.4f}, lambda0 = {lam0:.4f}, feasible = {best.feasible}, "
      f"smallest rho = {best.rho:.3f}")

# Strong instantaneous damping with a weak advanced coupling is certifiable.
fast = AdvancedSystem.from_strings([
    ([[3, 0], [0, 4]], "0"),           # drift, no advance
    ([[0, 0.1], [0.1, 0]], "0.5"),     # small advanced coupling
])
g = build_fundamental(fast, Horizon(10.0, 0.01))
outer, inner = certificate_bounds(fast, g)
print(f"advanced-term bounds {outer}, all-term bounds {inner}")
rep = stability_report(fast, Horizon(10.0, 0.01), [1.0, 1.0])
print(f"fit (M0, lambda0) = ({rep.M0:.4f}, {rep.lambda0:.4f})")
print(f"certified |x(t)| <= {rep.M:.4f} exp(-{rep.lam:.4f} t); thm3 verdict {rep.thm3_verdict}")
