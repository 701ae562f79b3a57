"""Sub-sample partitioning, deviations, and the pooled covariance of time averages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DegenerateVariableError, LengthError
from .panel import PanelDataset, UnitSeries, resolve_q


@dataclass(frozen=True)
class SubsamplePlan:
    """Per-unit block layout and pooling weights.

    ``blocks[i]`` holds unit i's q_i contiguous index ranges as 1-based
    inclusive (start, end) pairs covering 1..T_i, block lengths differing by
    at most one (earliest blocks take the extra observations). ``phi[i]`` is
    the harmonic-mean pooling weight T_ave_harm / T_i; for a balanced panel
    phi = 1 and both T averages equal T.
    """

    q_per_unit: tuple[int, ...]
    blocks: tuple[tuple[tuple[int, int], ...], ...]
    phi: np.ndarray
    t_ave_arith: float
    t_ave_harm: float

    def t_ave(self, kind: str) -> float:
        if kind == "arithmetic":
            return self.t_ave_arith
        if kind == "harmonic":
            return self.t_ave_harm
        raise ValueError("kind must be 'arithmetic' or 'harmonic'")


@dataclass(frozen=True)
class SubsampleMoments:
    """Per-unit sub-sample deviations and the pooled covariance matrix."""

    deviations: tuple[np.ndarray, ...]  # unit i: (q_i, m) rows d_il'
    q_matrix: np.ndarray  # m x m pooled covariance of time averages
    unit_q: tuple[np.ndarray, ...]
    plan: SubsamplePlan

    @property
    def m(self) -> int:
        return self.q_matrix.shape[0]

    @property
    def n(self) -> int:
        return len(self.deviations)


def partition(t_len: int, q: int) -> list[tuple[int, int]]:
    """Split 1..t_len into q contiguous blocks of near-equal length.

    When q does not divide t_len the first (t_len mod q) blocks are one
    observation longer, so for q=2 and odd T the first half has (T+1)/2
    observations.
    """
    if q < 2:
        raise LengthError(f"need q >= 2, got {q}")
    if t_len < 2 * q:
        raise LengthError(f"T_i={t_len} is too short for q={q} (need T_i >= {2 * q})")
    base, extra = divmod(t_len, q)
    out = []
    start = 1
    for b in range(q):
        length = base + (1 if b < extra else 0)
        out.append((start, start + length - 1))
        start += length
    return out


def subsample_deviations(series: UnitSeries, blocks) -> np.ndarray:
    """Block means minus the unit's full-sample mean, one row per block.

    The full-sample mean is the block-length weighted average of block means,
    which equals the plain mean over all T_i observations.
    """
    values = series.values
    rows = np.empty((len(blocks), values.shape[1]))
    for idx, (start, end) in enumerate(blocks):
        rows[idx] = values[start - 1 : end].mean(axis=0)
    grand = values.mean(axis=0)
    return rows - grand


def build_plan(panel: PanelDataset, q: Union[int, str]) -> SubsamplePlan:
    lengths = panel.t_lengths.astype(float)
    q_per_unit = tuple(resolve_q(u.t_len, q) for u in panel.units)
    blocks = tuple(
        tuple(partition(u.t_len, qi)) for u, qi in zip(panel.units, q_per_unit)
    )
    t_ave_arith = float(lengths.mean())
    t_ave_harm = float(len(lengths) / np.sum(1.0 / lengths))
    phi = t_ave_harm / lengths
    phi.setflags(write=False)
    return SubsamplePlan(q_per_unit, blocks, phi, t_ave_arith, t_ave_harm)


def pooled_covariance(panel: PanelDataset, plan: SubsamplePlan) -> SubsampleMoments:
    """Pooled covariance of sub-sample time averages.

    Q = n^-1 sum_i T_i^-1 q_i^-1 sum_l d_il d_il', which for a balanced panel
    equals (n T q)^-1 sum_i sum_l d_il d_il' exactly.
    """
    m = panel.m
    deviations = []
    unit_q = []
    q_matrix = np.zeros((m, m))
    for u, qi, blk in zip(panel.units, plan.q_per_unit, plan.blocks):
        dev = subsample_deviations(u, blk)
        qi_mat = dev.T @ dev / (u.t_len * qi)
        deviations.append(dev)
        unit_q.append(qi_mat)
        q_matrix += qi_mat
    q_matrix /= panel.n
    q_matrix = 0.5 * (q_matrix + q_matrix.T)
    return SubsampleMoments(tuple(deviations), q_matrix, tuple(unit_q), plan)


def scale_by_diff_sd(panel: PanelDataset) -> tuple[PanelDataset, np.ndarray]:
    """Divide each variable by the pooled standard deviation of its first differences.

    The scale is pooled across all units (a single common factor per
    variable), so the correlation matrix of the pooled covariance is
    unchanged by construction. Returns the scaled panel and the m factors.
    """
    for u in panel.units:
        if u.t_len < 3:
            raise LengthError(f"unit {u.unit_id}: need T_i >= 3 to scale by diff sd")
    diffs = np.concatenate([np.diff(u.values, axis=0) for u in panel.units], axis=0)
    factors = diffs.std(axis=0, ddof=1)
    bad = ~np.isfinite(factors) | (factors <= 0.0)
    if np.any(bad):
        names = [panel.variable_names[k] for k in np.flatnonzero(bad)]
        raise DegenerateVariableError(
            f"zero or non-finite diff standard deviation for: {', '.join(names)}"
        )
    units = tuple(
        UnitSeries(u.unit_id, u.start_time, u.values / factors, u.times)
        for u in panel.units
    )
    return PanelDataset(units, panel.variable_names), factors


def correlation_from_covariance(q_matrix: np.ndarray) -> np.ndarray:
    """Rescale a PSD matrix to unit diagonal: R = D^-1/2 Q D^-1/2."""
    q_matrix = np.asarray(q_matrix, dtype=float)
    diag = np.diag(q_matrix)
    if np.any(diag <= 0.0) or not np.all(np.isfinite(diag)):
        raise DegenerateVariableError(
            "covariance diagonal must be strictly positive to form a correlation matrix"
        )
    inv_sd = 1.0 / np.sqrt(diag)
    r = q_matrix * np.outer(inv_sd, inv_sd)
    return 0.5 * (r + r.T)
