"""Symmetric eigendecomposition (cyclic Jacobi) and eigenvalue thresholding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

MAX_DIM = 64
MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-10
OFFDIAG_TOL = 1e-13


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues with matching orthonormal eigenvector columns.

    Sign convention: in every column the entry of largest absolute value is
    positive, ties broken by the lowest row index, so the decomposition is a
    deterministic function of the input.
    """

    values: np.ndarray
    vectors: np.ndarray


def _off_diagonal_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def symmetric_eigen(s: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Sweeps rotate every upper off-diagonal entry in turn until the
    off-diagonal Frobenius norm falls below 1e-13 * ||S||_F (at most 100
    sweeps). Matrices up to 64 x 64 are accepted.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("matrix must be square")
    m = s.shape[0]
    if m > MAX_DIM:
        raise ValueError(f"matrix dimension {m} exceeds the {MAX_DIM} limit")
    scale = max(1.0, float(np.max(np.abs(s))) if m else 1.0)
    if float(np.max(np.abs(s - s.T), initial=0.0)) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric within tolerance")

    a = 0.5 * (s + s.T)
    v = np.eye(m)
    norm = float(np.linalg.norm(a))
    if m == 1 or norm == 0.0:
        return _finalize(np.diag(a).copy(), v)
    target = OFFDIAG_TOL * norm

    for _ in range(MAX_SWEEPS):
        if _off_diagonal_norm(a) <= target:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                # Stable rotation: t = sign(theta) / (|theta| + sqrt(theta^2 + 1))
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(t, 1.0)
                sn = t * c
                rot = np.array([[c, sn], [-sn, c]])
                idx = [p, q]
                a[idx, :] = rot.T @ a[idx, :]
                a[:, idx] = a[:, idx] @ rot
                a[p, q] = 0.0
                a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ rot
    else:
        if _off_diagonal_norm(a) > target:
            raise NumericalError("Jacobi iteration did not converge in 100 sweeps")

    return _finalize(np.diag(a).copy(), v)


def _finalize(values: np.ndarray, vectors: np.ndarray) -> EigenDecomposition:
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        magnitudes = np.round(np.abs(col), 12)  # blur fp noise so ties are exact
        lead = int(np.argmax(magnitudes))  # argmax takes the lowest index on ties
        if col[lead] < 0:
            vectors[:, j] = -col
    values.setflags(write=False)
    vectors.setflags(write=False)
    return EigenDecomposition(values, vectors)


@dataclass(frozen=True)
class RankSelection:
    """Count of eigenvalues below the threshold c * T_ave**(-delta)."""

    eigenvalues: np.ndarray
    threshold: float
    r_tilde: int
    delta: float
    c: float
    t_ave_used: float

    def __post_init__(self):
        arr = np.array(self.eigenvalues, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "eigenvalues", arr)


def select_rank(
    eigenvalues: np.ndarray, t_ave: float, delta: float = 0.25, c: float = 1.0
) -> RankSelection:
    """Estimate the number of long run relations by eigenvalue thresholding.

    Counts eigenvalues strictly below c * t_ave**(-delta); an eigenvalue
    exactly at the threshold does not count.
    """
    eig = np.asarray(eigenvalues, dtype=float)
    if eig.ndim != 1:
        raise ValueError("eigenvalues must be a vector")
    if np.any(np.diff(eig) < -1e-12 * max(1.0, float(np.max(np.abs(eig))))):
        raise ValueError("eigenvalues must be ascending")
    if not t_ave > 1.0:
        raise ValueError("t_ave must exceed 1")
    threshold = c * t_ave ** (-delta)
    r_tilde = int(np.count_nonzero(eig < threshold))
    return RankSelection(eig, float(threshold), r_tilde, delta, c, float(t_ave))
