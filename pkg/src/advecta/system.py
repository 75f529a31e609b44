"""Advanced systems  x'(t) + sum_j A_j(t) x(t + h_j(t)) = 0  and horizons.

The two-term form ``x' + A x(t+h) + B x(t+r) = 0`` is the N = 2 case with
terms ``[(A, h), (B, r)]``; :meth:`AdvancedSystem.two_term` builds it.

Term indices are 0-based throughout.  Every evaluator accepts a scalar time
or a 1-d array of times; array inputs give stacked results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import NegativeAdvance

ADVANCE_CLAMP = 1e-12
EXTENSION_POLICIES = ("hold", "zero")


@dataclass(frozen=True)
class Term:
    """One coefficient matrix A_j(t) with its advance h_j(t)."""

    A: tuple  # n rows of n Expressions
    h: ex.Expression


@dataclass(frozen=True)
class AdvancedSystem:
    n: int
    t0: float
    terms: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension n must be positive")
        if not self.terms:
            raise ValueError("an advanced system needs at least one term")
        if self.t0 < 0 or not math.isfinite(self.t0):
            raise ValueError("t0 must be finite and >= 0")
        for j, term in enumerate(self.terms):
            if len(term.A) != self.n or any(len(row) != self.n for row in term.A):
                raise ValueError(f"term {j}: coefficient matrix must be {self.n}x{self.n}")

    @property
    def N(self) -> int:
        return len(self.terms)

    @classmethod
    def from_strings(cls, terms, t0=0.0, n=None):
        """Build from ``[(A_rows_of_strings_or_numbers, h_string), ...]``."""
        built = []
        for A, h in terms:
            A = np.atleast_2d(np.array(A, dtype=object))
            rows = tuple(tuple(_as_expr(v) for v in row) for row in A)
            built.append(Term(rows, _as_expr(h)))
        if n is None:
            n = len(built[0].A)
        return cls(n=n, t0=float(t0), terms=tuple(built))

    @classmethod
    def two_term(cls, A, h, B, r, t0=0.0):
        return cls.from_strings([(A, h), (B, r)], t0=t0)


def _as_expr(v):
    if isinstance(v, (ex.Num, ex.Var, ex.Const, ex.Neg, ex.BinOp, ex.Call)):
        return v
    if isinstance(v, str):
        return ex.parse(v)
    return ex.Num(float(v))


def eval_coefficient(sys: AdvancedSystem, j: int, t):
    """A_j(t) as an (n, n) matrix, or (len(t), n, n) for an array of times."""
    term = sys.terms[j]
    t_arr = np.asarray(t, dtype=float)
    out = np.empty(t_arr.shape + (sys.n, sys.n))
    for a, row in enumerate(term.A):
        for b, entry in enumerate(row):
            out[..., a, b] = ex.evaluate(entry, t_arr)
    return out


def eval_drift(sys: AdvancedSystem, t):
    """D(t) = -sum_j A_j(t), summed in term order."""
    total = eval_coefficient(sys, 0, t)
    for j in range(1, sys.N):
        total = total + eval_coefficient(sys, j, t)
    return -total


def eval_advance(sys: AdvancedSystem, j: int, t):
    """h_j(t); values in [-1e-12, 0) clamp to zero, anything lower raises."""
    value = np.asarray(ex.evaluate(sys.terms[j].h, t), dtype=float)
    if np.any(value < -ADVANCE_CLAMP):
        where = np.flatnonzero(np.atleast_1d(value) < -ADVANCE_CLAMP)[0]
        t_bad = float(np.atleast_1d(np.asarray(t, dtype=float))[where]) if value.ndim else float(t)
        raise NegativeAdvance(
            f"term {j}: advance is negative ({float(np.atleast_1d(value)[where]):g}) at t={t_bad:g}",
            term=j, t=t_bad,
        )
    value = np.maximum(value, 0.0)
    return float(value) if value.ndim == 0 else value


def grid_points(a, b, dt):
    """a, a+dt, ..., b with the count rounded so b lands on the grid."""
    if b < a:
        raise ValueError("grid end before start")
    steps = int(round((b - a) / dt))
    if a + steps * dt < b - 1e-9 * max(1.0, abs(b)):
        steps += 1
    return a + dt * np.arange(steps + 1)


def max_advance(sys: AdvancedSystem, a, b, dt) -> float:
    """Largest h_j over all terms and all grid points of [a, b]."""
    ts = grid_points(a, b, dt)
    return max(float(np.max(eval_advance(sys, j, ts))) for j in range(sys.N))


@dataclass(frozen=True)
class Horizon:
    """Truncation of [t0, inf): reporting window [t0, T] on a uniform step.

    ``lookahead_depth`` advance-lengths are appended beyond ``T`` so that the
    mapping H reads genuine trajectory values on the window; past the
    extended end the trajectory follows ``extension`` ("hold" the last value
    or read "zero").
    """

    T: float
    dt: float
    lookahead_depth: int = 3
    extension: str = "hold"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if self.lookahead_depth < 0:
            raise ValueError("lookahead_depth must be >= 0")
        if self.extension not in EXTENSION_POLICIES:
            raise ValueError(f"extension must be one of {EXTENSION_POLICIES}")

    def window_steps(self, t0) -> int:
        if self.T < t0:
            raise ValueError(f"horizon end T={self.T} precedes t0={t0}")
        ratio = (self.T - t0) / self.dt
        steps = int(round(ratio))
        if abs(ratio - steps) > 1e-6 * max(1.0, ratio):
            raise ValueError(f"(T - t0)/dt = {ratio} is not an integer")
        return steps


def extended_end(sys: AdvancedSystem, hz: Horizon) -> float:
    """T_ext = T + m * H_max, with H_max re-measured m times on the growing range."""
    m = hz.lookahead_depth
    if m == 0:
        return float(hz.T)
    h_max = max_advance(sys, sys.t0, hz.T, hz.dt)
    for _ in range(m):
        h_max = max(h_max, max_advance(sys, sys.t0, hz.T + (m - 1) * h_max, hz.dt))
    return float(hz.T + m * h_max)
