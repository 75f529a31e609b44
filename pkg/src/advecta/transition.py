"""Fundamental matrix of y' = D(t) y on a uniform grid and the state
transition queries built on it."""

from __future__ import annotations

import math

import numpy as np

from .errors import OffGrid, OutOfDomain, Overflow
from .matrix_core import mat_inf_norm, mat_inverse
from .system import AdvancedSystem, Horizon, eval_drift, extended_end

BLOWUP_LIMIT = 1e12


class TransitionGrid:
    """Samples Phi_k = Phi(t_k, t0) on t_k = t0 + k*dt, k = 0..G-1.

    ``window`` is the index of the reporting end T; indices past it belong
    to the lookahead extension up to ``t_ext``.  Inverses are cached in
    ``phi_inv`` so that Phi(t, s) costs one matrix product.
    """

    def __init__(self, t0, dt, phi, phi_inv, window, horizon=None):
        self.t0 = float(t0)
        self.dt = float(dt)
        self.phi = phi
        self.phi_inv = phi_inv
        self.window = int(window)
        self.horizon = horizon
        self.phi.setflags(write=False)
        self.phi_inv.setflags(write=False)

    @property
    def size(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.size)

    @property
    def t_ext(self) -> float:
        return self.t0 + self.dt * (self.size - 1)

    @property
    def T(self) -> float:
        return self.t0 + self.dt * self.window

    def index(self, t) -> int:
        """Grid index nearest to ``t``."""
        x = (float(t) - self.t0) / self.dt
        half = 0.5 + 1e-9
        if x < -half or x > self.size - 1 + half:
            raise OutOfDomain(f"t={t} outside [{self.t0}, {self.t_ext}]")
        k = int(round(x))
        if abs(x - k) > half:
            raise OffGrid(f"t={t} is not within dt/2 of a grid point")
        return min(max(k, 0), self.size - 1)

    def __repr__(self):
        return (f"TransitionGrid(n={self.n}, t0={self.t0}, dt={self.dt}, "
                f"T={self.T}, t_ext={self.t_ext}, size={self.size})")


def _rk4_propagators(sys, times, dt):
    n = sys.n
    half = times[0] + 0.5 * dt * np.arange(2 * len(times) - 1)
    d = eval_drift(sys, half)
    d1, d2, d3 = d[0:-1:2], d[1::2], d[2::2]
    eye = np.eye(n)
    k1 = d1
    k2 = d2 @ (eye + 0.5 * dt * k1)
    k3 = d2 @ (eye + 0.5 * dt * k2)
    k4 = d3 @ (eye + dt * k3)
    return eye + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def build_fundamental(sys: AdvancedSystem, hz: Horizon) -> TransitionGrid:
    """Integrate Phi' = D(t) Phi, Phi(t0) = I with classical RK4 over [t0, T_ext].

    For a linear right-hand side one RK4 step is the matrix polynomial
    ``P_k`` in the stage drifts, so the steps are formed in bulk and then
    chained ``Phi_{k+1} = P_k Phi_k``.
    """
    dt = hz.dt
    window = hz.window_steps(sys.t0)
    t_ext = extended_end(sys, hz)
    extra = max(0, int(math.ceil((t_ext - hz.T) / dt - 1e-9)))
    size = window + extra + 1
    times = sys.t0 + dt * np.arange(size)

    phi = np.empty((size, sys.n, sys.n))
    phi[0] = np.eye(sys.n)
    if size > 1:
        steps = _rk4_propagators(sys, times, dt)
        with np.errstate(over="ignore", invalid="ignore"):
            if sys.n == 1:
                phi[1:, 0, 0] = np.cumprod(steps[:, 0, 0])
            else:
                for k in range(size - 1):
                    phi[k + 1] = steps[k] @ phi[k]
        norms = mat_inf_norm(phi)
        bad = ~(norms <= BLOWUP_LIMIT)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise Overflow(f"|Phi(t, t0)| exceeds {BLOWUP_LIMIT:g} at t={times[k]:g}")
    phi_inv = mat_inverse(phi)
    return TransitionGrid(sys.t0, dt, phi, phi_inv, window, horizon=hz)


def transition(g: TransitionGrid, t, s):
    """Phi(t, s) = Phi(t) Phi(s)^{-1}, with t and s snapped to the grid."""
    i, k = g.index(t), g.index(s)
    if i == k:
        return np.eye(g.n)
    return g.phi[i] @ g.phi_inv[k]


def check_chapman_kolmogorov(g: TransitionGrid, t, s, r) -> float:
    """Defect |Phi(t,s) Phi(s,r) - Phi(t,r)|_inf."""
    lhs = transition(g, t, s) @ transition(g, s, r)
    return mat_inf_norm(lhs - transition(g, t, r))


def write_transition_csv(g: TransitionGrid, fh):
    """CSV rows ``t, phi_11, phi_12, ..., phi_nn`` (row-major Phi(t, t0))."""
    n = g.n
    header = ["t"] + [f"phi_{a + 1}{b + 1}" if n < 10 else f"phi_{a + 1}_{b + 1}"
                      for a in range(n) for b in range(n)]
    fh.write(",".join(header) + "\n")
    for t, m in zip(g.times, g.phi):
        fh.write(",".join(repr(float(v)) for v in (t, *m.ravel())) + "\n")
