"""The integral mapping H and its Picard iteration.

For a trajectory x on the grid of a :class:`TransitionGrid`,

    (Hx)(t) = Phi(t,t0) x0 + sum_j int_{t0}^{t} Phi(t,s) A_j(s) int_s^{s+h_j(s)} E_x(u) du ds,
    E_x(u)  = sum_k A_k(u) x(u + h_k(u)).

Both integrals use the composite trapezoid rule.  The inner one runs over
the grid points strictly inside (s, s+h_j(s)] plus the exact endpoint
s + h_j(s); it is evaluated as a difference of the running integral of E_x
plus one partial panel.  The outer one factors as
Phi(t) * int Phi(s)^{-1} (...) ds and is accumulated along the grid.

Everything that does not depend on x (coefficients, advances, interpolation
weights) is precomputed once per (system, grid, extension policy) in
:class:`IntegralOperator`.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotConverged, OutOfDomain
from .matrix_core import as_vector, mat_inf_norm
from .system import AdvancedSystem, EXTENSION_POLICIES, eval_advance, eval_coefficient
from .transition import TransitionGrid

_SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class Trajectory:
    """x sampled at t0 + k*dt; linear between samples, ``extension`` beyond."""

    t0: float
    dt: float
    values: np.ndarray
    extension: str = "hold"
    window: int | None = None

    def __post_init__(self):
        if self.extension not in EXTENSION_POLICIES:
            raise ValueError(f"unknown extension policy {self.extension!r}")
        if self.values.ndim != 2:
            raise ValueError("trajectory values must be (G, n)")
        if self.window is None:
            object.__setattr__(self, "window", self.values.shape[0] - 1)

    @classmethod
    def on_grid(cls, g: TransitionGrid, values, extension=None):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape != (g.size, g.n):
            raise ValueError(f"expected values of shape {(g.size, g.n)}, got {values.shape}")
        ext = extension or (g.horizon.extension if g.horizon else "hold")
        return cls(g.t0, g.dt, values, ext, g.window)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.values.shape[0])

    def window_values(self):
        return self.values[: self.window + 1]

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        lo, hi, wlo, whi = interpolation_weights(
            self.t0, self.dt, self.values.shape[0], t_arr.ravel(), self.extension)
        out = wlo[:, None] * self.values[lo] + whi[:, None] * self.values[hi]
        return out.reshape(t_arr.shape + (self.n,))

    def with_values(self, values):
        return Trajectory(self.t0, self.dt, values, self.extension, self.window)


def interpolation_weights(t0, dt, size, positions, extension):
    """Indices and weights reading a grid function at arbitrary times.

    Positions within 1e-9 steps of a grid point read that sample exactly.
    Beyond the last sample the ``extension`` policy applies.
    """
    x = (np.asarray(positions, dtype=float) - t0) / dt
    if np.any(x < -_SNAP):
        raise OutOfDomain(f"read at t={t0 + dt * float(x.min()):g} precedes t0={t0:g}")
    nearest = np.rint(x)
    x = np.where(np.abs(x - nearest) < _SNAP, nearest, x)
    x = np.maximum(x, 0.0)
    last = size - 1
    beyond = x > last
    if last == 0:
        lo = np.zeros(x.shape, dtype=np.intp)
        hi = lo
        frac = np.zeros(x.shape)
    else:
        lo = np.minimum(np.floor(x).astype(np.intp), last - 1)
        hi = lo + 1
        frac = np.clip(x - lo, 0.0, 1.0)
    wlo = 1.0 - frac
    whi = frac
    if np.any(beyond):
        lo = np.where(beyond, last, lo)
        hi = np.where(beyond, last, hi)
        keep = 1.0 if extension == "hold" else 0.0
        wlo = np.where(beyond, keep, wlo)
        whi = np.where(beyond, 0.0, whi)
    return lo, hi, wlo, whi


def _cumtrapz(y, dt):
    out = np.zeros_like(y)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]), axis=0)
    return out


class IntegralOperator:
    """The x-independent part of H for one system, grid and extension policy."""

    def __init__(self, sys: AdvancedSystem, g: TransitionGrid, extension: str):
        if extension not in EXTENSION_POLICIES:
            raise ValueError(f"unknown extension policy {extension!r}")
        self.sys, self.grid, self.extension = sys, g, extension
        N, G, dt, t0 = sys.N, g.size, g.dt, g.t0
        t = g.times

        ends = np.stack([t + eval_advance(sys, j, t) for j in range(N)])
        span = float(ends.max()) - g.t_ext
        M = G + max(0, int(math.ceil(span / dt - _SNAP)))
        u = t0 + dt * np.arange(M)
        self.size_u = M

        # quadrature nodes on the (possibly longer) inner-integral grid
        self.A_u = np.stack([eval_coefficient(sys, k, u) for k in range(N)])
        self.read_u = [interpolation_weights(t0, dt, G, u + eval_advance(sys, k, u), extension)
                       for k in range(N)]

        # exact right endpoints s + h_j(s) and the panel that contains them
        pos = (ends - t0) / dt
        p = np.floor(pos + _SNAP).astype(np.intp)
        self.panel = np.clip(p, 0, M - 1)
        self.tail = np.maximum(ends - (t0 + dt * self.panel), 0.0)
        flat = ends.ravel()
        self.A_e = np.stack([eval_coefficient(sys, k, flat) for k in range(N)], axis=1)
        self.A_e = self.A_e.reshape(N, G, N, sys.n, sys.n).transpose(0, 2, 1, 3, 4)
        self.read_e = [
            [interpolation_weights(t0, dt, G, ends[j] + eval_advance(sys, k, ends[j]), extension)
             for k in range(N)]
            for j in range(N)
        ]
        self.A_s = self.A_u[:, :G]

    def inner_integrals(self, node_values, end_values):
        """int_s^{s+h_j(s)} of a function known at grid nodes and at the endpoints.

        ``node_values`` is (M, ...) on the inner grid, ``end_values`` is
        (N, G, ...); returns (N, G, ...).
        """
        G = self.grid.size
        running = _cumtrapz(node_values, self.grid.dt)
        start = running[:G]
        out = []
        for j in range(self.sys.N):
            p = self.panel[j]
            d = self.tail[j].reshape((G,) + (1,) * (node_values.ndim - 1))
            out.append(running[p] - start + 0.5 * d * (node_values[p] + end_values[j]))
        return np.stack(out)

    @staticmethod
    def _read(values, weights):
        lo, hi, wlo, whi = weights
        return wlo[:, None] * values[lo] + whi[:, None] * values[hi]

    def eval_E_nodes(self, values):
        """E_x on the inner grid (M, n) and at every endpoint (N, G, n)."""
        E = sum(np.einsum("mab,mb->ma", self.A_u[k], self._read(values, self.read_u[k]))
                for k in range(self.sys.N))
        E_end = np.stack([
            sum(np.einsum("gab,gb->ga", self.A_e[j, k], self._read(values, self.read_e[j][k]))
                for k in range(self.sys.N))
            for j in range(self.sys.N)
        ])
        return E, E_end

    def apply(self, values, x0):
        g = self.grid
        E, E_end = self.eval_E_nodes(values)
        inner = self.inner_integrals(E, E_end)
        forcing = np.einsum("jgab,jgb->ga", self.A_s, inner)
        integrand = np.einsum("gab,gb->ga", g.phi_inv, forcing)
        acc = _cumtrapz(integrand, g.dt) + x0
        out = np.einsum("gab,gb->ga", g.phi, acc)
        out[0] = x0
        return out

    def alpha_weights(self):
        """w(s) = sum_j |A_j(s)| int_s^{s+h_j(s)} sum_k |A_k(u)| du on the grid."""
        sum_u = mat_inf_norm(self.A_u).sum(axis=0)
        sum_e = mat_inf_norm(self.A_e).sum(axis=1)
        inner = self.inner_integrals(sum_u, sum_e)
        return np.sum(mat_inf_norm(self.A_s) * inner, axis=0)


@functools.lru_cache(maxsize=8)
def integral_operator(sys: AdvancedSystem, g: TransitionGrid, extension: str) -> IntegralOperator:
    return IntegralOperator(sys, g, extension)


def free_response(g: TransitionGrid, x0):
    """Phi(t, t0) x0 on the grid."""
    return np.einsum("gab,b->ga", g.phi, x0)


def eval_E(sys: AdvancedSystem, x: Trajectory, u):
    """E_x(u) = sum_j A_j(u) x(u + h_j(u)) for scalar or array ``u``."""
    u_arr = np.asarray(u, dtype=float)
    total = np.zeros(u_arr.shape + (sys.n,))
    for j in range(sys.N):
        A = eval_coefficient(sys, j, u_arr)
        total = total + np.einsum("...ab,...b->...a", A, x(u_arr + eval_advance(sys, j, u_arr)))
    return total


def apply_H(sys: AdvancedSystem, g: TransitionGrid, x: Trajectory, x0) -> Trajectory:
    if x.values.shape != (g.size, g.n) or x.t0 != g.t0 or x.dt != g.dt:
        raise ValueError("trajectory is not sampled on the transition grid")
    x0 = as_vector(x0)
    op = integral_operator(sys, g, x.extension)
    return x.with_values(op.apply(x.values, x0))


def sup_distance(x, y, window=None) -> float:
    """Sup-norm distance of two sampled trajectories, optionally on [0, window]."""
    a, b = np.asarray(x), np.asarray(y)
    if window is not None:
        a, b = a[: window + 1], b[: window + 1]
    return float(np.max(np.abs(a - b))) if a.size else 0.0


@dataclass
class IterationResult:
    trajectory: Trajectory
    residuals: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


def picard_solve(sys: AdvancedSystem, g: TransitionGrid, x0, tol=1e-8, max_iter=200,
                 extension=None) -> IterationResult:
    """Iterate x^{k+1} = H x^k from x^0 = Phi(t, t0) x0.

    Stops when the sup distance of successive iterates on the reporting
    window drops to ``tol``; raises :class:`NotConverged` (carrying the
    partial :class:`IterationResult`) after ``max_iter`` applications.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x0 = as_vector(x0)
    if x0.shape != (sys.n,):
        raise ValueError(f"x0 must have {sys.n} entries")
    extension = extension or (g.horizon.extension if g.horizon else "hold")
    x = Trajectory.on_grid(g, free_response(g, x0), extension)
    result = IterationResult(trajectory=x)
    if g.window == 0:
        result.converged = True
        return result

    op = integral_operator(sys, g, extension)
    values = x.values
    for _ in range(max_iter):
        new = op.apply(values, x0)
        res = sup_distance(new, values, g.window)
        if result.residuals and result.residuals[-1] > 0:
            result.ratios.append(res / result.residuals[-1])
        result.residuals.append(res)
        result.iterations += 1
        values = new
        if not np.all(np.isfinite(values)):
            break
        if res <= tol:
            result.converged = True
            break
    result.trajectory = x.with_values(values)
    if not result.converged:
        raise NotConverged(
            f"no convergence after {result.iterations} iterations "
            f"(last residual {result.residuals[-1]:.3e})", result)
    return result


def ode_defect(sys: AdvancedSystem, x: Trajectory) -> float:
    """max_k |x'(t_k) + sum_j A_j(t_k) x(t_k + h_j(t_k))| over interior window points.

    x' is the central difference; the check is independent of how x was
    obtained.
    """
    w = x.window
    if w < 2:
        return 0.0
    t = x.times[1:w]
    deriv = (x.values[2 : w + 1] - x.values[0 : w - 1]) / (2.0 * x.dt)
    resid = deriv + eval_E(sys, x, t)
    return float(np.max(np.abs(resid)))


def policy_sensitivity(sys, g, x0, tol=1e-8, max_iter=200) -> float:
    """Window sup distance between the hold and zero extension solutions."""
    a = picard_solve(sys, g, x0, tol, max_iter, extension="hold").trajectory
    b = picard_solve(sys, g, x0, tol, max_iter, extension="zero").trajectory
    return sup_distance(a.values, b.values, g.window)


def write_trajectory_csv(x: Trajectory, fh):
    """``t, x_1, ..., x_n`` over the reporting window."""
    fh.write(",".join(["t"] + [f"x_{i + 1}" for i in range(x.n)]) + "\n")
    for t, row in zip(x.times[: x.window + 1], x.window_values()):
        fh.write(",".join(repr(float(v)) for v in (t, *row)) + "\n")
