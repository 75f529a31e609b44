"""Small dense matrix helpers: the norms used throughout, LU inversion and
a scaling-and-squaring matrix exponential.

Matrices and vectors are plain float64 numpy arrays.  Inversion works on a
single ``(n, n)`` matrix or on a stack ``(G, n, n)`` so that a whole grid of
fundamental matrices can be inverted in one call.
"""

import math

import numpy as np

from .errors import SingularMatrix

PIVOT_TOL = 1e-12


def as_matrix(m):
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def as_vector(v):
    a = np.array(v, dtype=float).reshape(-1)
    if a.size == 0:
        raise ValueError("empty vector")
    if not np.all(np.isfinite(a)):
        raise ValueError("vector has non-finite entries")
    return a


def vec_inf_norm(v) -> float:
    """max_i |v_i|; the last axis is reduced so stacks of vectors work too."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0
    out = np.max(np.abs(v), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def mat_inf_norm(m):
    """Induced infinity norm (max absolute row sum) of a matrix or a stack."""
    m = np.asarray(m, dtype=float)
    out = np.max(np.sum(np.abs(m), axis=-1), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _lu_inverse_stack(a):
    # Gauss-Jordan with partial pivoting, vectorised over the leading axis.
    g, n, _ = a.shape
    scale = np.max(np.sum(np.abs(a), axis=-1), axis=-1)
    work = np.concatenate([a.copy(), np.broadcast_to(np.eye(n), (g, n, n))], axis=2)
    rows = np.arange(g)
    for k in range(n):
        piv = k + np.argmax(np.abs(work[:, k:, k]), axis=1)
        pval = work[rows, piv, k]
        bad = ~(np.abs(pval) > PIVOT_TOL * scale)
        if np.any(bad):
            idx = int(np.flatnonzero(bad)[0])
            raise SingularMatrix(
                f"relative pivot {abs(pval[idx]) / max(scale[idx], 1e-300):.3e} below "
                f"{PIVOT_TOL:g} (matrix #{idx}, column {k})"
            )
        swap = piv != k
        if np.any(swap):
            tmp = work[swap, k, :].copy()
            work[swap, k, :] = work[rows[swap], piv[swap], :]
            work[rows[swap], piv[swap], :] = tmp
        work[:, k, :] /= work[:, k, k][:, None]
        factor = work[:, :, k].copy()
        factor[:, k] = 0.0
        work -= factor[:, :, None] * work[:, k, :][:, None, :]
    return work[:, :, n:]


def mat_inverse(m):
    """Inverse by elimination with partial pivoting.

    Accepts ``(n, n)`` or ``(G, n, n)``.  Raises :class:`SingularMatrix` when
    a pivot falls below ``1e-12`` times the matrix's infinity norm, so a
    uniformly tiny but well-conditioned matrix (a strongly decayed Phi) is
    still invertible.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim == 2:
        return _lu_inverse_stack(a[None])[0]
    if a.ndim == 3 and a.shape[1] == a.shape[2]:
        return _lu_inverse_stack(a)
    raise ValueError(f"cannot invert array of shape {a.shape}")


_TAYLOR_DEGREE = 13


def mat_exp(m, t=1.0):
    """e^{tM} by scaling and squaring around a degree-13 Taylor kernel.

    The argument is halved until its infinity norm is at most 0.5, which
    keeps the truncation term below 0.5**14/14! ~ 1e-15.
    """
    a = as_matrix(m) * float(t)
    n = a.shape[0]
    norm = mat_inf_norm(a)
    k = 0
    if norm > 0.5:
        k = int(math.ceil(math.log2(norm / 0.5)))
    a = a / (2.0**k)
    result = np.eye(n)
    term = np.eye(n)
    for i in range(1, _TAYLOR_DEGREE + 1):
        term = term @ a / i
        result = result + term
    for _ in range(k):
        result = result @ result
    return result
