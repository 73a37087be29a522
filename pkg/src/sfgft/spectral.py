"""Dense symmetric and generalized-symmetric eigensolvers.

The standard problem is solved by Householder reduction to tridiagonal
form followed by implicit-shift QL iterations.  The generalized problem
``m u = lam q u`` with ``q`` positive definite is reduced to a standard
one through the Cholesky factor of ``q``.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.blas import drot

from .errors import ConvergenceError, NotPositiveDefiniteError, ResidualError

RESIDUAL_TOL = 1e-8
ORTHO_TOL = 1e-8
CHOLESKY_PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs sorted by ascending eigenvalue.

    ``vectors[:, i]`` is paired with ``lambdas[i]``.
    """

    lambdas: np.ndarray
    vectors: np.ndarray

    @property
    def n(self):
        return self.lambdas.shape[0]


def _as_square(a, name="a"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def cholesky_lower(a, pivot_tol=CHOLESKY_PIVOT_TOL):
    """Lower-triangular ``G`` with ``G @ G.T == a``.

    Raises NotPositiveDefiniteError when a pivot falls below
    ``pivot_tol * max(diag(a))``.
    """
    a = _as_square(a)
    n = a.shape[0]
    g = np.zeros_like(a)
    if n == 0:
        return g
    threshold = pivot_tol * max(float(np.max(np.diag(a))), 0.0)
    for j in range(n):
        row = g[j, :j]
        pivot = a[j, j] - row @ row
        if not pivot > threshold:
            raise NotPositiveDefiniteError(
                f"not positive definite: pivot {pivot:.3e} at index {j} "
                f"(threshold {threshold:.3e})"
            )
        gjj = math.sqrt(pivot)
        g[j, j] = gjj
        if j + 1 < n:
            g[j + 1:, j] = (a[j + 1:, j] - g[j + 1:, :j] @ row) / gjj
    return g


def _tridiagonalize(a):
    """Householder reduction ``a = Q T Q^T``; returns (diag, offdiag, Q)."""
    a = a.copy()
    n = a.shape[0]
    reflectors = []
    for k in range(n - 2):
        x = a[k + 1:, k]
        scale = float(np.max(np.abs(x)))
        if scale == 0.0:
            reflectors.append(None)
            continue
        # work on x / scale so squared norms cannot under- or overflow
        v = x / scale
        nrm = math.sqrt(v @ v)
        alpha_s = -nrm if v[0] > 0 else nrm
        v[0] -= alpha_s
        vn = math.sqrt(v @ v)
        if vn == 0.0:
            reflectors.append(None)
            continue
        v /= vn
        beta = 2.0
        alpha = alpha_s * scale
        block = a[k + 1:, k + 1:]
        p = beta * (block @ v)
        w = p - (0.5 * beta * (p @ v)) * v
        block -= np.outer(v, w)
        block -= np.outer(w, v)
        a[k + 1, k] = a[k, k + 1] = alpha
        a[k + 2:, k] = 0.0
        a[k, k + 2:] = 0.0
        reflectors.append((v, beta))

    q = np.eye(n)
    for k in range(len(reflectors) - 1, -1, -1):
        if reflectors[k] is None:
            continue
        v, beta = reflectors[k]
        sub = q[k + 1:, k + 1:]
        sub -= beta * np.outer(v, v @ sub)
    return np.diag(a).copy(), np.diag(a, 1).copy(), q


def _tridiagonal_ql(d, e, zt, max_sweeps):
    """Implicit-shift QL on a symmetric tridiagonal matrix, in place.

    ``d`` and ``e`` are Python lists (diagonal, sub-diagonal padded with a
    trailing zero).  Rows of ``zt`` are rotated alongside so that on exit
    ``zt[j]`` is the eigenvector belonging to ``d[j]``.
    """
    n = len(d)
    eps = np.finfo(float).eps
    # absolute floor: tiny couplings between near-zero diagonals never pass the local test
    floor = eps * max((abs(d[i]) + abs(e[i]) + (abs(e[i - 1]) if i else 0.0) for i in range(n)),
                      default=0.0)
    sweeps = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd or abs(e[m]) <= floor:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > max_sweeps:
                raise ConvergenceError(
                    f"QL iteration did not converge within {max_sweeps} sweeps "
                    f"(stalled at index {l}, off-diagonal {e[l]:.3e})"
                )
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                drot(zt[i], zt[i + 1], c, -s, overwrite_x=1, overwrite_y=1)
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0


def _check_standard(a, lambdas, vectors):
    scale = np.linalg.norm(a, np.inf)
    res = np.max(np.abs(a @ vectors - vectors * lambdas), axis=0, initial=0.0)
    worst = float(np.max(res, initial=0.0))
    if worst > RESIDUAL_TOL * scale:
        raise ResidualError(
            f"eigen-residual {worst:.3e} exceeds {RESIDUAL_TOL:g} * |a|_inf = "
            f"{RESIDUAL_TOL * scale:.3e}",
            worst,
        )
    ortho = float(np.max(np.abs(vectors.T @ vectors - np.eye(len(lambdas))), initial=0.0))
    if ortho > ORTHO_TOL:
        raise ResidualError(f"eigenvectors lost orthonormality ({ortho:.3e})", ortho)


def sym_eig(a):
    """Full eigendecomposition of a real symmetric matrix.

    Returns an EigenDecomposition with ascending eigenvalues and
    orthonormal eigenvectors.  The result is checked against the residual
    contract ``|a v - lam v|_inf <= 1e-8 |a|_inf`` before returning.
    """
    a = _as_square(a)
    if not np.array_equal(a, a.T):
        a = 0.5 * (a + a.T)
    n = a.shape[0]
    if n == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    if n == 1:
        return EigenDecomposition(a[0].copy(), np.ones((1, 1)))

    # power-of-two scaling keeps Householder norms clear of under/overflow
    peak = float(np.max(np.abs(a)))
    exponent = int(np.frexp(peak)[1]) if peak > 0 else 0
    diag, off, q = _tridiagonalize(np.ldexp(a, -exponent))
    d = diag.tolist()
    e = off.tolist() + [0.0]
    zt = np.eye(n)
    _tridiagonal_ql(d, e, zt, max_sweeps=30 * n)

    lambdas = np.ldexp(np.asarray(d), exponent)
    order = np.argsort(lambdas, kind="stable")
    lambdas = lambdas[order]
    vectors = q @ zt[order].T
    _check_standard(a, lambdas, vectors)
    return EigenDecomposition(lambdas, vectors)


def generalized_sym_eig(m, q, psd_tol=1e-8):
    """Solve ``m u = lam q u`` for symmetric ``m`` and positive definite ``q``.

    With ``q = G G^T`` the problem becomes the standard one on
    ``G^-1 m G^-T``; eigenvectors are mapped back by ``u = G^-T v`` and are
    therefore q-orthonormal.

    Raises
    ------
    NotPositiveDefiniteError
        ``q`` failed the Cholesky factorization.
    ResidualError
        The generalized residual or q-orthonormality contract is violated.
    """
    m = _as_square(m, "m")
    q = _as_square(q, "q")
    if m.shape != q.shape:
        raise ValueError(f"shape mismatch: m {m.shape}, q {q.shape}")
    n = m.shape[0]
    g = cholesky_lower(q)
    if n == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))

    x = solve_triangular(g, m, lower=True)
    c = solve_triangular(g, x.T, lower=True)
    c = 0.5 * (c + c.T)
    std = sym_eig(c)
    u = solve_triangular(g.T, std.vectors, lower=False)
    lambdas = std.lambdas

    scale = np.linalg.norm(m, np.inf)
    res = np.max(np.abs(m @ u - (q @ u) * lambdas), axis=0)
    worst = float(np.max(res))
    if worst > RESIDUAL_TOL * scale:
        raise ResidualError(
            f"generalized residual {worst:.3e} exceeds {RESIDUAL_TOL:g} * |m|_inf "
            f"= {RESIDUAL_TOL * scale:.3e}",
            worst,
        )
    ortho = float(np.max(np.abs(u.T @ q @ u - np.eye(n))))
    if ortho > ORTHO_TOL:
        raise ResidualError(f"eigenvectors are not q-orthonormal ({ortho:.3e})", ortho)
    if lambdas[0] < -psd_tol:
        warnings.warn(
            f"smallest generalized eigenvalue {lambdas[0]:.3e} is negative; "
            "m is not positive semi-definite",
            RuntimeWarning,
            stacklevel=2,
        )
    return EigenDecomposition(lambdas, u)
