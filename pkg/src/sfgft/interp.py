"""Bandlimited interpolation from samples on S.

``interpolate_sf`` is the closed form for the folding GFT; the two
baselines fit the first ``k`` vectors of the (L, I) or (L, D) basis to
the samples by weighted least squares.
"""
import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyBandError
from .graph import degree_table, laplacian
from .spectral import cholesky_lower, generalized_sym_eig

PINV_RCOND = 1e-10


class Method(str, enum.Enum):
    SF_Q = "SF_Q"
    BL_I = "BL_I"
    BL_D = "BL_D"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class SampledSignal:
    partition: object
    values_on_s: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values_on_s, dtype=float).ravel()
        if v.shape != (self.partition.size,):
            raise ValueError(f"expected {self.partition.size} samples, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "values_on_s", v)

    @classmethod
    def from_signal(cls, partition, x):
        return cls(partition, np.asarray(x, dtype=float)[partition.sample_set])


def _same_partition(a, b):
    return a is b or (a.n == b.n and np.array_equal(a.sample_set, b.sample_set))


def _check_shared(gft, xs):
    if not _same_partition(gft.partition, xs.partition):
        raise ValueError("samples and GFT were built for different partitions")


def interpolate_sf(gft, xs):
    """Closed-form interpolant ``2 U_VR U_SR^T Q_S x_S``."""
    _check_shared(gft, xs)
    if gft.r == 0:
        raise EmptyBandError("empty bandlimited subspace: no eigenvalue below 1")
    u_sr = gft.band[gft.partition.sample_set]
    coeffs = u_sr.T @ (gft.q_s @ xs.values_on_s)
    return 2.0 * (gft.band @ coeffs)


def baseline_basis(g, method):
    """(L, I) or (L, D) eigendecomposition and the matching diagonal sample weights."""
    method = Method(method)
    lap = laplacian(g)
    if method is Method.BL_I:
        return generalized_sym_eig(lap, np.eye(g.n)), None
    if method is Method.BL_D:
        deg = degree_table(g)
        return generalized_sym_eig(lap, np.diag(deg)), deg
    raise ValueError(f"{method} is not a baseline method")


def interpolate_bl_ls(basis, weight, partition, xs, k):
    """Least-squares fit of the first ``k`` basis vectors to the samples.

    ``weight`` is None for the plain Euclidean fit, or a length-n diagonal
    (e.g. degrees) whose restriction to S weights the residual.  The fit
    uses a pseudo-inverse with relative singular-value cutoff 1e-10 and no
    further regularization.
    """
    n = basis.vectors.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"cutoff k={k} out of range [1, {n}]")
    if not _same_partition(partition, xs.partition):
        raise ValueError("samples and partition disagree")
    s = partition.sample_set
    u_sk = basis.vectors[s, :k]
    b = xs.values_on_s
    if weight is not None:
        sw = np.sqrt(np.asarray(weight, dtype=float)[s])
        u_sk = sw[:, None] * u_sk
        b = sw * b
    coeffs = np.linalg.pinv(u_sk, rcond=PINV_RCOND) @ b
    return basis.vectors[:, :k] @ coeffs


def objective_value(gft, y, xs):
    """``|y_S - x_S|^2_{Q_S} + |y_Sc|^2_{Q_Sc}``."""
    _check_shared(gft, xs)
    y = np.asarray(y, dtype=float)
    es = y[gft.partition.sample_set] - xs.values_on_s
    ysc = y[gft.partition.complement]
    return float(es @ gft.q_s @ es + ysc @ gft.q_sc @ ysc)


def brute_force_oracle(gft, xs, return_residual=False):
    """Solve the constrained problem directly: ``y = U_VR c`` with ``U_SR c = x_S``.

    The constraint is solved in the Q_S-weighted least-squares sense, so an
    infeasible sample vector yields its Q_S-closest bandlimited fit; the
    remaining Q_S-norm residual is returned when ``return_residual`` is set.
    Intended for small test graphs.
    """
    _check_shared(gft, xs)
    if gft.r == 0:
        raise EmptyBandError("empty bandlimited subspace: no eigenvalue below 1")
    u_sr = gft.band[gft.partition.sample_set]
    gs = cholesky_lower(gft.q_s)
    a = gs.T @ u_sr
    b = gs.T @ xs.values_on_s
    c, *_ = np.linalg.lstsq(a, b, rcond=None)
    y = gft.band @ c
    if return_residual:
        return y, float(np.linalg.norm(a @ c - b))
    return y
