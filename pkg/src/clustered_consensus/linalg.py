"""Dense linear algebra kernel.

Small, dense, real matrices only (networks of at most a few hundred agents).
Every function is pure: inputs are never modified and results are fresh arrays.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


class MultiplicityError(ValueError):
    """Null space has the wrong dimension for a unique normalized vector."""


class SingularMatrixError(ValueError):
    pass


def _as_square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def inf_norm(a) -> float:
    """Maximum absolute row sum."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(a), axis=1)))


# Taylor coefficients 1/k! for k = 0..13
_TAYLOR_DEGREE = 13
_TAYLOR_COEFFS = [1.0 / math.factorial(k) for k in range(_TAYLOR_DEGREE + 1)]
_SQUARING_TARGET = 0.5


def mat_exp(a, t: float = 1.0) -> np.ndarray:
    """Return ``exp(a * t)`` by scaling and squaring.

    The scaled argument ``a t / 2**s`` is brought below 0.5 in the infinity
    norm, a degree-13 Taylor polynomial is evaluated by Horner's rule and the
    result is squared ``s`` times. At norm 0.5 the truncation error of the
    polynomial is below 1e-15, so the overall error is dominated by the
    squaring phase.

    For ``a = -L`` with ``L`` a Laplacian every polynomial term beyond the
    identity annihilates the ones vector, so row sums stay at one up to
    rounding.
    """
    a = _as_square(a, "a")
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"t must be a finite nonnegative number, got {t}")
    n = a.shape[0]
    at = a * t
    norm = inf_norm(at)
    s = 0
    if norm > _SQUARING_TARGET:
        s = int(math.ceil(math.log2(norm / _SQUARING_TARGET)))
    scaled = at / (2.0 ** s)

    eye = np.eye(n)
    result = eye * _TAYLOR_COEFFS[_TAYLOR_DEGREE]
    for k in range(_TAYLOR_DEGREE - 1, -1, -1):
        result = scaled @ result + eye * _TAYLOR_COEFFS[k]
    for _ in range(s):
        result = result @ result
    return result


def _jacobi_rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    # in-place rotation annihilating a[p, q]
    apq = a[p, q]
    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
    c = 1.0 / math.hypot(t, 1.0)
    s = t * c

    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = c * col_p - s * col_q
    a[:, q] = s * col_p + c * col_q
    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = c * row_p - s * row_q
    a[q, :] = s * row_p + c * row_q
    a[p, q] = 0.0
    a[q, p] = 0.0

    vp = v[:, p].copy()
    vq = v[:, q].copy()
    v[:, p] = c * vp - s * vq
    v[:, q] = s * vp + c * vq


def sym_eig(m, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    The input is symmetrized as ``(m + m.T) / 2`` first; it must already be
    symmetric to within 1e-10 relative to its norm.

    Returns
    -------
    eigenvalues : ndarray, ascending
    eigenvectors : ndarray whose column ``k`` belongs to ``eigenvalues[k]``
    """
    m = _as_square(m, "m")
    scale = max(inf_norm(m), 1.0)
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (m + m.T)
    n = a.shape[0]
    v = np.eye(n)
    if n == 0:
        return np.zeros(0), v

    eps = np.finfo(float).eps
    tol = eps * np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = abs(a[p, q])
                if apq <= 1e-300:
                    continue
                if apq < eps * abs(a[p, p]) and apq < eps * abs(a[q, q]):
                    # negligible against both diagonal entries
                    a[p, q] = a[q, p] = 0.0
                    continue
                _jacobi_rotate(a, v, p, q)
    else:
        raise RuntimeError("Jacobi iteration did not converge")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def _null_dimension(a: np.ndarray, rtol: float) -> int:
    sv = np.linalg.svd(a, compute_uv=False)
    cutoff = rtol * max(float(sv[0]) if sv.size else 0.0, 1.0)
    return int(np.sum(sv <= cutoff))


def _normalized_null_vector(a: np.ndarray, rtol: float) -> np.ndarray:
    """Unique x with a x = 0 and sum(x) = 1, or MultiplicityError."""
    n = a.shape[0]
    dim = _null_dimension(a, rtol)
    if dim != 1:
        raise MultiplicityError(f"null space has dimension {dim}, expected 1")
    aug = np.vstack([a, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    x, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    return x


def left_null_vector(lap, rtol: float = 1e-10) -> np.ndarray:
    """Vector ``r`` with ``r @ lap = 0`` normalized so that ``sum(r) = 1``.

    Raises MultiplicityError when the left null space is not one-dimensional,
    i.e. the graph behind ``lap`` has no directed spanning tree.
    """
    lap = _as_square(lap, "lap")
    if lap.shape[0] == 1:
        return np.ones(1)
    r = _normalized_null_vector(lap.T, rtol * lap.shape[0])
    if np.min(r) < -1e-10:
        raise ValueError("left null vector has negative entries; not a Laplacian?")
    return r


def is_row_stochastic(p, tol: float = 1e-12) -> bool:
    p = np.asarray(p, dtype=float)
    return bool(np.all(p >= -tol) and np.all(np.abs(p.sum(axis=1) - 1.0) <= tol))


def is_irreducible(m) -> bool:
    """Strong connectivity of the support graph of ``m`` (boolean closure)."""
    m = np.asarray(m)
    n = m.shape[0]
    reach = (np.abs(m) > 0) | np.eye(n, dtype=bool)
    while True:
        nxt = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    return bool(reach.all())


def stationary_distribution(p, tol: float = 1e-12) -> np.ndarray:
    """Probability vector ``phi`` with ``phi @ p = phi`` for an irreducible stochastic ``p``."""
    p = _as_square(p, "p")
    if not is_row_stochastic(p, tol):
        raise ValueError("matrix is not row-stochastic")
    if not is_irreducible(p):
        raise ValueError("matrix is reducible; stationary vector is not unique")
    n = p.shape[0]
    return _normalized_null_vector(p.T - np.eye(n), 1e-10 * n)


def permutation_matrix(order: Sequence[int]) -> np.ndarray:
    """``M`` with ``(M @ x)[k] == x[order[k]]``."""
    n = len(order)
    if sorted(order) != list(range(n)):
        raise ValueError("order is not a permutation")
    m = np.zeros((n, n))
    m[np.arange(n), list(order)] = 1.0
    return m


def embed_leader_matrix(p_l, leaders: Sequence[int], n: int) -> np.ndarray:
    """Extend a leader-to-leader stochastic matrix to all ``n`` agents.

    Computes ``M.T @ blockdiag(p_l, I) @ M`` where ``M`` moves the leaders to
    the front (in cluster order) followed by the followers in index order.
    Followers get identity rows.
    """
    p_l = _as_square(p_l, "p_l")
    leaders = [int(x) for x in leaders]
    m = len(leaders)
    if p_l.shape[0] != m:
        raise ValueError(f"p_l is {p_l.shape[0]}x{p_l.shape[0]} but there are {m} leaders")
    if len(set(leaders)) != m or any(not 0 <= x < n for x in leaders):
        raise ValueError("leaders must be distinct agent indices in range")
    if not is_row_stochastic(p_l):
        raise ValueError("p_l is not row-stochastic")
    followers = [i for i in range(n) if i not in set(leaders)]
    perm = permutation_matrix(leaders + followers)
    block = np.eye(n)
    block[:m, :m] = p_l
    return perm.T @ block @ perm


def condition_number(a) -> float:
    a = _as_square(a, "a")
    return float(np.linalg.cond(a))


def solve_linear(a, b, max_cond: float = 1e12) -> np.ndarray:
    a = _as_square(a, "a")
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise ValueError("dimension mismatch between a and b")
    if condition_number(a) >= max_cond:
        raise SingularMatrixError("matrix is singular to working precision")
    return np.linalg.solve(a, b)


def inverse(a, max_cond: float = 1e12) -> np.ndarray:
    a = _as_square(a, "a")
    return solve_linear(a, np.eye(a.shape[0]), max_cond)
