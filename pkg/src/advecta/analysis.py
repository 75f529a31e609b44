"""Certificate quantities for the convergence theorems and their verdicts.

All suprema are maxima over the grid: K over every pair of grid times,
alpha over the reporting window, coefficient bounds over sampled times.
Pairwise transition norms |Phi(t_r, t_i)| are streamed in row blocks so the
O(G^2) scans never hold the full pair matrix.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import expr as ex
from .errors import (
    DegenerateWindow, InvalidCertificate, NotDecaying, Overflow, SingularMatrix,
)
from .fixedpoint import Trajectory, integral_operator
from .matrix_core import as_vector, mat_inf_norm, vec_inf_norm
from .system import AdvancedSystem, Horizon, eval_advance, grid_points
from .transition import TransitionGrid, build_fundamental

_BLOCK_ELEMENTS = 2_000_000


def _row_blocks(g, rows, cols):
    """Yield (row_indices, norms) with norms[b, i] = |Phi(t_rows[b], t_i)|, i < cols."""
    n = g.n
    step = max(1, _BLOCK_ELEMENTS // max(1, cols * n * n))
    for r0 in range(0, len(rows), step):
        block = rows[r0 : r0 + step]
        prod = np.einsum("rab,ibc->riac", g.phi[block], g.phi_inv[:cols])
        yield block, np.abs(prod).sum(axis=-1).max(axis=-1)


def uniform_matrix_bound(entries, a, b, dt) -> float:
    """max_i sum_j sup_t |a_ij(t)| with the sup taken over a, a+dt, ..., b."""
    ts = grid_points(a, b, dt)
    rows = []
    for row in entries:
        total = 0.0
        for e in row:
            e = ex.parse(e) if isinstance(e, str) else e
            total += float(np.max(np.abs(ex.evaluate(e, ts))))
        rows.append(total)
    return max(rows)


def compute_K(g: TransitionGrid) -> float:
    """sup over grid pairs s1 <= s2 of |Phi(s2, s1)|."""
    if g.n == 1:
        # |Phi(s2,s1)| = |phi(s2)| |phi(s1)^{-1}| factorises
        fwd = np.abs(g.phi[:, 0, 0])
        back = np.maximum.accumulate(np.abs(g.phi_inv[:, 0, 0]))
        return float(np.max(fwd * back))
    best = 1.0
    G = g.size
    rows = np.arange(G)
    for r0 in range(0, G, 256):
        block = rows[r0 : r0 + 256]
        cols = block[-1] + 1
        for sub, norms in _row_blocks(g, block, cols):
            mask = np.arange(cols)[None, :] <= sub[:, None]
            best = max(best, float(np.max(np.where(mask, norms, 0.0))))
    return best


def check_phi_vanishes(g: TransitionGrid, threshold=1e-6):
    """(flag, tail_norm) for the condition Phi(t, t0) -> 0.

    The flag needs the final norm at or below ``threshold`` and, over the
    last quarter of the grid, no norm more than 10% above the running
    minimum.
    """
    norms = mat_inf_norm(g.phi)
    norms = np.atleast_1d(norms)
    tail = float(norms[-1])
    last = norms[(3 * len(norms)) // 4 :]
    settled = bool(np.all(last <= 1.1 * np.minimum.accumulate(last)))
    return (tail <= threshold and settled), tail


def compute_alpha(sys: AdvancedSystem, g: TransitionGrid, T=None) -> float:
    """sup_t sum_j int_{t0}^t |Phi(t,s)| |A_j(s)| int_s^{s+h_j(s)} sum_k |A_k(u)| du ds.

    ``T`` restricts the sup to [t0, T] (default: the reporting window).
    Norms are pointwise induced infinity norms; the quadrature matches
    the one used by the mapping H.
    """
    last = g.window if T is None else min(g.window, g.index(T))
    w = integral_operator(sys, g, "hold").alpha_weights()
    dt = g.dt
    if last == 0:
        return 0.0
    if g.n == 1:
        inner = np.zeros(last + 1)
        f = np.abs(g.phi_inv[: last + 1, 0, 0]) * w[: last + 1]
        inner[1:] = np.cumsum(0.5 * dt * (f[1:] + f[:-1]))
        return float(np.max(np.abs(g.phi[: last + 1, 0, 0]) * inner))
    best = 0.0
    rows = np.arange(last + 1)
    for r0 in range(0, last + 1, 256):
        block = rows[r0 : r0 + 256]
        cols = block[-1] + 1
        for sub, norms in _row_blocks(g, block, cols):
            f = norms * w[None, :cols]
            idx = np.arange(cols)[None, :]
            f = np.where(idx <= sub[:, None], f, 0.0)
            ends = f[np.arange(len(sub)), sub]
            vals = dt * (f.sum(axis=1) - 0.5 * (f[:, 0] + ends))
            best = max(best, float(np.max(vals)))
    return best


def admissible_initial_bound(K, alpha, L=1.0) -> float:
    """Largest |x0| with K|x0| + alpha L <= L."""
    if not (0 <= alpha < 1):
        raise InvalidCertificate(f"alpha={alpha} is not in [0, 1)")
    if K < 1 or L <= 0:
        raise InvalidCertificate(f"need K >= 1 and L > 0, got K={K}, L={L}")
    return (1.0 - alpha) * L / K


def fit_exponential_bound(g: TransitionGrid, max_points=2001):
    """(M0, lambda0) with |Phi(s+tau, s)| <= M0 exp(-lambda0 tau) on the sampled pairs.

    Pairs are taken on a sub-grid of at most ``max_points`` times.  For each
    pair distance the largest log-norm forms an upper envelope; lambda0 is
    minus the least-squares slope of that envelope and M0 the smallest
    constant making the bound hold at every sampled pair.
    """
    stride = max(1, math.ceil((g.size - 1) / max(1, max_points - 1)))
    idx = np.arange(0, g.size, stride)
    sub = TransitionGrid(g.t0, g.dt * stride, g.phi[idx], g.phi_inv[idx], len(idx) - 1)
    G = sub.size
    env = np.full(G, -np.inf)
    rows = np.arange(G)
    with np.errstate(divide="ignore"):
        for r0 in range(0, G, 256):
            block = rows[r0 : r0 + 256]
            cols = block[-1] + 1
            for rr, norms in _row_blocks(sub, block, cols):
                for b, r in enumerate(rr):
                    lag_vals = np.log(norms[b, : r + 1])[::-1]
                    np.maximum(env[: r + 1], lag_vals, out=env[: r + 1])
    tau = sub.dt * np.arange(G)
    ok = np.isfinite(env)
    if ok.sum() < 2:
        raise NotDecaying("not enough resolvable pair distances for a fit")
    slope = np.polyfit(tau[ok], env[ok], 1)[0]
    if not slope < -1e-12:
        raise NotDecaying(f"transition norms do not decay (envelope slope {slope:.3g})")
    lambda0 = -float(slope)
    M0 = math.exp(float(np.max(env[ok] + lambda0 * tau[ok])))
    return M0, lambda0


@dataclass
class Certificate:
    M0: float
    lambda0: float
    lam: float | None
    M: float | None
    feasible: bool
    rho: float | None = None

    def to_dict(self):
        return {"M0": self.M0, "lambda0": self.lambda0, "lambda": self.lam,
                "M": self.M, "feasible": self.feasible, "rho": self.rho}


def _certificate_at(M0, lambda0, S, S_inner, x0_norm, t0, lam):
    rho = S * S_inner * M0 / (lam * (lambda0 - lam))
    if rho < 1:
        M = M0 * x0_norm * math.exp(lambda0 * t0) / (1.0 - rho)
        return Certificate(M0, lambda0, lam, M, True, rho)
    return Certificate(M0, lambda0, lam, None, False, rho)


def exponential_certificate(M0, lambda0, coeff_bounds, x0_norm, t0=0.0, lam=None,
                            resolution=1000, inner_bounds=None) -> Certificate:
    """Smallest M with  M0|x0| e^{lambda0 t0} + M S^2 M0 / (lam (lambda0 - lam)) <= M.

    S is the sum of the uniform coefficient bounds.  ``inner_bounds``, when
    given, supplies the bounds summed inside the advance integrals, and the
    S^2 factor becomes sum(coeff_bounds) * sum(inner_bounds); see
    :func:`certificate_bounds`.  With ``lam`` omitted, lam is scanned over
    (0, lambda0) in steps of lambda0/resolution and the feasible value
    giving the smallest M is returned (the largest such lam on ties).
    """
    if not lambda0 > 0:
        raise InvalidCertificate("lambda0 must be positive")
    S = float(sum(coeff_bounds))
    S_inner = S if inner_bounds is None else float(sum(inner_bounds))
    if lam is not None:
        if not 0 < lam < lambda0:
            raise InvalidCertificate(f"lambda={lam} is not in (0, {lambda0})")
        return _certificate_at(M0, lambda0, S, S_inner, x0_norm, t0, lam)
    best = None
    for i in range(1, resolution):
        cert = _certificate_at(M0, lambda0, S, S_inner, x0_norm, t0, i * lambda0 / resolution)
        if cert.feasible and (best is None or cert.M <= best.M):
            best = cert
    if best is None:
        rho_min = 4.0 * S * S_inner * M0 / lambda0**2
        return Certificate(M0, lambda0, None, None, False, rho_min)
    return best


def certificate_bounds(sys: AdvancedSystem, g: TransitionGrid):
    """(outer, inner) coefficient bounds for :func:`exponential_certificate`.

    A term whose advance vanishes on the whole grid has a zero inner
    integral, so it contributes nothing to the outer factor; it still
    enters E_x and therefore the inner sum.
    """
    ts = g.times
    inner = [uniform_matrix_bound(term.A, g.t0, g.t_ext, g.dt) for term in sys.terms]
    outer = [b for j, b in enumerate(inner) if np.any(eval_advance(sys, j, ts) > 0)]
    return outer, inner


def decay_rate(x: Trajectory, window_fraction=0.5):
    """(M, lambda) from a least-squares fit of log|x(t)| over the window's tail."""
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must be in (0, 1]")
    w = x.window
    start = int(math.floor(w * (1.0 - window_fraction)))
    t = x.times[start : w + 1]
    mag = vec_inf_norm(x.values[start : w + 1])
    use = mag >= 1e-14
    if use.sum() < 8:
        raise DegenerateWindow(f"only {int(use.sum())} usable samples in the fit window")
    slope, intercept = np.polyfit(t[use], np.log(mag[use]), 1)
    return math.exp(intercept), -float(slope)


@dataclass
class StabilityReport:
    K: float | None
    alpha: float | None
    phi_vanishes: bool
    phi_tail_norm: float | None
    M0: float | None
    lambda0: float | None
    L: float
    x0_bound: float | None
    coeff_bounds: list
    Abar: float | None
    Bbar: float | None
    M: float | None
    lam: float | None
    certificate_feasible: bool
    thm1_verdict: bool
    thm2_verdict: dict
    thm3_verdict: bool
    notes: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def theorem_verdicts(*, K, alpha, phi_vanishes, phi_tail_norm, coeff_bounds, fit, certificate,
                     L=1.0, notes=(), provenance=None) -> StabilityReport:
    """Assemble the report.

    Convergence (first theorem, and part (i) of the N-term one) needs a
    finite K, Phi -> 0 and alpha < 1.  Exponential convergence (part (ii))
    needs finite coefficient bounds, a decaying exponential fit and a
    feasible certificate.
    """
    K_ok = K is not None and math.isfinite(K)
    alpha_ok = alpha is not None and alpha < 1
    thm1 = bool(K_ok and phi_vanishes and alpha_ok)
    bounds_ok = bool(coeff_bounds) and all(math.isfinite(b) for b in coeff_bounds)
    thm3 = bool(bounds_ok and fit is not None and certificate is not None and certificate.feasible)
    x0_bound = admissible_initial_bound(K, alpha, L) if (K_ok and alpha_ok) else None
    M0, lambda0 = fit if fit is not None else (None, None)
    return StabilityReport(
        K=K, alpha=alpha, phi_vanishes=bool(phi_vanishes), phi_tail_norm=phi_tail_norm,
        M0=M0, lambda0=lambda0, L=L, x0_bound=x0_bound,
        coeff_bounds=list(coeff_bounds),
        Abar=coeff_bounds[0] if len(coeff_bounds) == 2 else None,
        Bbar=coeff_bounds[1] if len(coeff_bounds) == 2 else None,
        M=certificate.M if certificate is not None and certificate.feasible else None,
        lam=certificate.lam if certificate is not None and certificate.feasible else None,
        certificate_feasible=bool(certificate is not None and certificate.feasible),
        thm1_verdict=thm1, thm2_verdict={"i": thm1, "ii": thm3}, thm3_verdict=thm3,
        notes=list(notes), provenance=dict(provenance or {}),
    )


def stability_report(sys: AdvancedSystem, hz: Horizon, x0, L=1.0, phi_threshold=1e-6,
                     lam=None, grid=None) -> StabilityReport:
    """Run every certificate computation for ``sys`` on ``hz``."""
    x0 = as_vector(x0)
    notes = []
    provenance = {"dt": hz.dt, "horizon": hz.T, "t0": sys.t0, "policy": hz.extension,
                  "lookahead_depth": hz.lookahead_depth}
    try:
        g = grid if grid is not None else build_fundamental(sys, hz)
    except (Overflow, SingularMatrix) as err:
        notes.append(f"fundamental matrix: {err}")
        return theorem_verdicts(K=None, alpha=None, phi_vanishes=False, phi_tail_norm=None,
                                coeff_bounds=[], fit=None, certificate=None, L=L,
                                notes=notes, provenance=provenance)
    provenance["t_ext"] = g.t_ext
    K = compute_K(g)
    alpha = compute_alpha(sys, g)
    vanishes, tail = check_phi_vanishes(g, phi_threshold)
    outer, bounds = certificate_bounds(sys, g)
    fit = certificate = None
    try:
        fit = fit_exponential_bound(g)
    except NotDecaying as err:
        notes.append(f"exponential fit: {err}")
    if fit is not None:
        try:
            certificate = exponential_certificate(fit[0], fit[1], outer, vec_inf_norm(x0),
                                                  sys.t0, lam, inner_bounds=bounds)
        except InvalidCertificate as err:
            notes.append(f"certificate: {err}")
    return theorem_verdicts(K=K, alpha=alpha, phi_vanishes=vanishes, phi_tail_norm=tail,
                            coeff_bounds=bounds, fit=fit, certificate=certificate, L=L,
                            notes=notes, provenance=provenance)
