"""Eigenvector basis, exact identification, plug-in covariance, and the pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .eigen import RankSelection, select_rank, symmetric_eigen
from .errors import DegenerateVariableError, IdentificationError
from .moments import (
    SubsampleMoments,
    SubsamplePlan,
    build_plan,
    correlation_from_covariance,
    pooled_covariance,
    scale_by_diff_sd,
)
from .panel import (
    EstimationConfig,
    General,
    IdentificationScheme,
    LongRunEstimate,
    Normalized,
    PanelDataset,
    require_valid,
)

CONDITION_LIMIT = 1e12


def pme_basis(moments: SubsampleMoments, r: int) -> np.ndarray:
    """Orthonormal eigenvectors of the pooled covariance with the r smallest eigenvalues.

    Columns are ordered by ascending eigenvalue and B'B = I_r.
    """
    m = moments.m
    if not 1 <= r <= m - 1:
        raise ValueError(f"rank must satisfy 1 <= r <= m-1, got r={r}, m={m}")
    decomp = symmetric_eigen(moments.q_matrix)
    return np.array(decomp.vectors[:, :r])


def exact_identify(b_hat: np.ndarray, scheme: IdentificationScheme) -> np.ndarray:
    """Map an eigenvector basis to the unique matrix satisfying R B = A.

    Returns B (R B_hat)^-1 A. The result depends only on the span of
    ``b_hat``: any invertible recombination of its columns gives the same
    output. For the normalized scheme the top r x r block is exactly I_r.
    """
    b_hat = np.asarray(b_hat, dtype=float)
    m, r = b_hat.shape
    if isinstance(scheme, Normalized):
        if scheme.r != r:
            raise ValueError("scheme rank does not match basis")
        restr = np.eye(r, m)
        targets = np.eye(r)
    else:
        if scheme.r != r or scheme.restrictions.shape[1] != m:
            raise ValueError("scheme dimensions do not match basis")
        restr = scheme.restrictions
        targets = scheme.targets
    rb = restr @ b_hat
    cond = np.linalg.cond(rb)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IdentificationError(
            f"restrictions applied to the basis are ill-conditioned (cond={cond:.3g})"
        )
    identified = b_hat @ np.linalg.solve(rb, targets)
    if isinstance(scheme, Normalized):
        identified[:r, :] = np.eye(r)  # exact by construction, kill rounding
    return identified


@dataclass(frozen=True)
class CovarianceComponents:
    """Pieces of the plug-in covariance of vec(theta_hat)."""

    omega_hat: np.ndarray  # (m r) x (m r)
    omega_22: np.ndarray  # ((m-r) r) x ((m-r) r)
    q22: np.ndarray  # (m-r) x (m-r) lower-right block of the pooled covariance
    error_corrections: tuple[np.ndarray, ...]  # unit i: (q_i, r)
    var_vec_theta: np.ndarray
    std_errors: np.ndarray  # (m-r) x r


def estimate_covariance(
    moments: SubsampleMoments,
    b_ring: np.ndarray,
    plan: SubsamplePlan,
    t_ave_kind: str = "arithmetic",
) -> CovarianceComponents:
    """Robust covariance of the normalized coefficient block.

    Per unit, zeta_i = q_i^-1 sum_l (E_il kron I_m) d_il with error
    corrections E_il = B' d_il; the outer products pool with weights
    phi_i^2 (phi_i = 1 for balanced panels, so the weight is q^-2 overall).
    The variance of vec(theta_hat) is
    (n T_ave^2)^-1 (I_r kron Q22^-1) Omega_22 (I_r kron Q22^-1).
    """
    b_ring = np.asarray(b_ring, dtype=float)
    m, r = b_ring.shape
    if not np.allclose(b_ring[:r, :], np.eye(r)):
        raise ValueError("covariance requires the normalized form (I_r top block)")
    n = moments.n

    omega = np.zeros((m * r, m * r))
    error_corrections = []
    for dev, phi in zip(moments.deviations, plan.phi):
        qi = dev.shape[0]
        ec = dev @ b_ring  # (q_i, r), row l = E_il'
        error_corrections.append(ec)
        # zeta blocks: block j = q_i^-1 sum_l E_il[j] * d_il
        zeta = (ec[:, :, None] * dev[:, None, :]).sum(axis=0).reshape(m * r) / qi
        omega += (phi * phi) * np.outer(zeta, zeta)
    omega /= n
    omega = 0.5 * (omega + omega.T)

    keep = np.concatenate([j * m + np.arange(r, m) for j in range(r)])
    omega_22 = omega[np.ix_(keep, keep)]
    q22 = moments.q_matrix[r:, r:]

    try:
        q22_inv = np.linalg.inv(q22)
    except np.linalg.LinAlgError as exc:
        raise DegenerateVariableError(
            "lower-right covariance block is singular"
        ) from exc
    sandwich = np.kron(np.eye(r), q22_inv)
    t_ave = plan.t_ave(t_ave_kind)
    var = sandwich @ omega_22 @ sandwich / (n * t_ave * t_ave)
    var = 0.5 * (var + var.T)

    diag = np.clip(np.diag(var), 0.0, None)
    std_errors = np.sqrt(diag).reshape(r, m - r).T  # index j*(m-r)+a -> theta[a, j]
    return CovarianceComponents(
        omega, omega_22, q22, tuple(error_corrections), var, std_errors
    )


def t_statistics(
    theta_hat: np.ndarray, std_errors: np.ndarray, nulls: np.ndarray
) -> np.ndarray:
    """Entrywise (theta_hat - nulls) / std_errors."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    std_errors = np.asarray(std_errors, dtype=float)
    nulls = np.broadcast_to(np.asarray(nulls, dtype=float), theta_hat.shape)
    if std_errors.shape != theta_hat.shape:
        raise ValueError("std_errors shape must match theta_hat")
    if np.any(std_errors <= 0.0):
        raise DegenerateVariableError("standard errors must be strictly positive")
    return (theta_hat - nulls) / std_errors


def estimate(
    panel: PanelDataset, config: EstimationConfig
) -> tuple[Optional[RankSelection], Optional[LongRunEstimate]]:
    """Full pipeline: plan, rank selection, basis, identification, inference.

    Rank selection runs on scaled data when ``config.scale_for_selection``
    (the correlation matrix is invariant to the common scaling, so this only
    affects reporting and the scaled-path error checks); coefficients always
    come from the original data. With ``config.rank`` set, selection is
    skipped and the first element of the result is None. A selection of
    r~ = 0 or r~ = m returns (selection, None).
    """
    require_valid(panel, config)
    plan = build_plan(panel, config.q)
    t_ave = plan.t_ave(config.threshold_t_ave)

    rank_selection: Optional[RankSelection] = None
    if config.rank is None:
        selection_panel = panel
        if config.scale_for_selection:
            selection_panel, _ = scale_by_diff_sd(panel)
        sel_moments = pooled_covariance(selection_panel, plan)
        corr = correlation_from_covariance(sel_moments.q_matrix)
        eig = symmetric_eigen(corr)
        rank_selection = select_rank(eig.values, t_ave, config.delta, config.c)
        r = rank_selection.r_tilde
        if r == 0 or r == panel.m:
            # r = 0: no long run relations detected; r = m: all eigenvalues
            # below the threshold, inconsistent with m - r0 > 0.
            return rank_selection, None
    else:
        if config.rank >= panel.m:
            raise ValueError(f"rank must be < m={panel.m}, got {config.rank}")
        r = config.rank

    moments = pooled_covariance(panel, plan)
    basis = pme_basis(moments, r)
    scheme: IdentificationScheme
    if config.identification is None:
        scheme = Normalized(r)
    else:
        scheme = config.identification
        if scheme.r != r:
            raise ValueError(
                f"identification scheme has rank {scheme.r} but selected rank is {r}"
            )
    b_ring = exact_identify(basis, scheme)

    theta = var = se = tstats = None
    if isinstance(scheme, Normalized):
        cov = estimate_covariance(moments, b_ring, plan)
        theta = b_ring[r:, :]
        var = cov.var_vec_theta
        se = cov.std_errors
        if config.null_values is not None:
            tstats = t_statistics(theta, se, config.null_values)
    est = LongRunEstimate(
        r=r,
        b_hat=b_ring,
        theta_hat=theta,
        var_vec_theta=var,
        std_errors=se,
        t_stats=tstats,
        q_used=config.q,
        n=panel.n,
        t_ave=plan.t_ave_arith,
    )
    return rank_selection, est
