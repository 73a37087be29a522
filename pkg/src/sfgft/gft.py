"""Spectral-folding (L, Q)-GFT for a vertex partition.

Q is block diagonal with blocks ``L_SS`` and ``L_ScSc``.  With this inner
product every eigenpair ``(u, lam)`` of ``L u = lam Q u`` has a partner
``(J u, 2 - lam)`` where ``J`` negates the entries on S^c, so the
spectrum lies in [0, 2] and is symmetric about 1.
"""
import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InadmissiblePartitionError, NumericalError
from .graph import check_partition_admissible, laplacian, principal_submatrix
from .spectral import generalized_sym_eig

EIG_TOL = 1e-8
FOLDING_SYMMETRY_TOL = 1e-7
RANGE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralFoldingGft:
    """Q-orthonormal basis of the folding GFT.

    ``basis`` rows are indexed by the original vertex labels; the solve is
    done in ``order`` (S first, then S^c) and mapped back.  Q is kept as
    its two diagonal blocks only.
    """

    partition: object
    lap: np.ndarray
    q_s: np.ndarray
    q_sc: np.ndarray
    basis: np.ndarray
    lambdas: np.ndarray
    r: int
    order: np.ndarray

    @property
    def n(self):
        return self.basis.shape[0]

    @property
    def band(self):
        """``U_VR``: the columns spanning the bandlimited subspace."""
        return self.basis[:, :self.r]

    def apply_q(self, x):
        x = np.asarray(x, dtype=float)
        s, sc = self.partition.sample_set, self.partition.complement
        out = np.empty_like(x)
        out[s] = self.q_s @ x[s]
        out[sc] = self.q_sc @ x[sc]
        return out

    def fold(self, x):
        """Apply J: flip the sign of the S^c entries."""
        out = np.array(x, dtype=float)
        out[self.partition.complement] *= -1.0
        return out


def build_q(lap, partition):
    """Return the diagonal blocks ``(L_SS, L_ScSc)`` of the folding inner product."""
    check = check_partition_admissible(lap, partition)
    if not check:
        raise InadmissiblePartitionError(check.diagnostic)
    s, sc = partition.sample_set, partition.complement
    return principal_submatrix(lap, s, s), principal_submatrix(lap, sc, sc)


def build_gft(g, partition, eig_tol=EIG_TOL):
    """Solve ``L u = lam Q u`` for the folding inner product of ``partition``.

    ``r`` counts eigenvalues strictly below ``1 - eig_tol``; eigenvalues
    numerically equal to 1 never enter the bandlimited subspace.
    """
    if partition.n != g.n:
        raise ValueError(f"partition is over {partition.n} vertices, graph has {g.n}")
    lap = laplacian(g)
    lap.setflags(write=False)
    q_s, q_sc = build_q(lap, partition)

    order = partition.order
    ns = partition.size
    q_full = np.zeros((g.n, g.n))
    q_full[:ns, :ns] = q_s
    q_full[ns:, ns:] = q_sc
    dec = generalized_sym_eig(principal_submatrix(lap, order, order), q_full)

    basis = np.empty_like(dec.vectors)
    basis[order] = dec.vectors
    lambdas = dec.lambdas
    r = int(np.count_nonzero(lambdas < 1.0 - eig_tol))

    if lambdas[0] < -RANGE_TOL or lambdas[-1] > 2.0 + RANGE_TOL:
        raise NumericalError(
            f"eigenvalues outside [0, 2]: min {lambdas[0]:.3e}, max {lambdas[-1]:.3e}"
        )
    gap = float(np.max(np.abs(lambdas - np.sort(2.0 - lambdas))))
    if gap > FOLDING_SYMMETRY_TOL:
        raise NumericalError(f"spectrum is not symmetric about 1 (deviation {gap:.3e})")
    if r > ns:
        raise NumericalError(f"bandlimited dimension {r} exceeds |S| = {ns}")

    for arr in (q_s, q_sc, basis, lambdas):
        arr.setflags(write=False)
    return SpectralFoldingGft(partition, lap, q_s, q_sc, basis, lambdas, r, order)


def _check_length(gft, x, name="x"):
    x = np.asarray(x, dtype=float)
    if x.shape != (gft.n,):
        raise ValueError(f"{name} must have length {gft.n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def forward(gft, x):
    """Spectral coefficients ``U^T Q x``."""
    x = _check_length(gft, x)
    return gft.basis.T @ gft.apply_q(x)


def inverse(gft, xhat):
    xhat = _check_length(gft, xhat, "xhat")
    return gft.basis @ xhat


def q_inner(gft, x, y):
    """``<x, y>_Q`` evaluated blockwise over S and S^c."""
    x = _check_length(gft, x)
    y = _check_length(gft, y, "y")
    s, sc = gft.partition.sample_set, gft.partition.complement
    return float(x[s] @ gft.q_s @ y[s] + x[sc] @ gft.q_sc @ y[sc])


def sample_gram(gft):
    """``U_SR^T Q_S U_SR``; equals I/2 when the band sits strictly below 1."""
    u_sr = gft.band[gft.partition.sample_set]
    return u_sr.T @ gft.q_s @ u_sr


@dataclass(frozen=True)
class FoldingReport:
    tol: float
    residuals: np.ndarray
    threshold: float

    @property
    def passed(self):
        return self.residuals <= self.threshold

    @property
    def max_residual(self):
        return float(np.max(self.residuals))

    @property
    def ok(self):
        return bool(np.all(self.passed))

    @property
    def failures(self):
        return np.flatnonzero(~self.passed).tolist()

    def describe(self):
        if self.ok:
            return f"all {len(self.residuals)} folded pairs pass (max residual {self.max_residual:.3e})"
        idx = self.failures
        shown = ", ".join(f"pair {i} (residual {self.residuals[i]:.3e})" for i in idx[:5])
        more = f" and {len(idx) - 5} more" if len(idx) > 5 else ""
        return f"folding fails for {shown}{more}; threshold {self.threshold:.3e}"


def verify_spectral_folding(gft, tol=1e-8):
    """Check that ``(J u_i, 2 - lam_i)`` is an eigenpair for every i."""
    ju = gft.basis.copy()
    ju[gft.partition.complement] *= -1.0
    lhs = gft.lap @ ju
    qju = np.empty_like(ju)
    s, sc = gft.partition.sample_set, gft.partition.complement
    qju[s] = gft.q_s @ ju[s]
    qju[sc] = gft.q_sc @ ju[sc]
    residuals = np.max(np.abs(lhs - qju * (2.0 - gft.lambdas)), axis=0)
    threshold = tol * float(np.linalg.norm(gft.lap, np.inf))
    return FoldingReport(tol, residuals, threshold)


def perturb_eigenvalue(gft, index, delta):
    """Copy of ``gft`` with one eigenvalue shifted; for fault-injection tests."""
    lambdas = np.array(gft.lambdas)
    lambdas[index] += delta
    return replace(gft, lambdas=lambdas)


def write_debug_dump(gft, lambdas_path, basis_path):
    """Write ``index,lambda`` and the basis columns (one row per vertex)."""
    with Path(lambdas_path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "lambda"])
        for i, lam in enumerate(gft.lambdas.tolist()):
            writer.writerow([i, repr(lam)])
    with Path(basis_path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["vertex"] + [f"u{i}" for i in range(gft.n)])
        for v, row in enumerate(gft.basis.tolist()):
            writer.writerow([v] + [repr(x) for x in row])
