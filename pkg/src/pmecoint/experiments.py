"""Monte Carlo experiment runner: selection frequencies, bias, RMSE, size, power."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dgp import (
    Design,
    PbDesign,
    VarDiffDesign,
    VecmDesign,
    dgp_pb,
    dgp_var_diff,
    dgp_vecm,
    solve_kappa_simulated,
)
from .eigen import select_rank, symmetric_eigen
from .errors import DesignError, PmeError
from .longrun import estimate_covariance, exact_identify, pme_basis
from .moments import build_plan, correlation_from_covariance, pooled_covariance
from .panel import Normalized

CRITICAL_5PCT = 1.96


@dataclass(frozen=True)
class CoefficientSummary:
    """Accuracy and test metrics for one identified coefficient."""

    name: str
    truth: float
    bias: float
    rmse: float
    size: float
    power: float
    power_alternative: float
    mean_se: float


@dataclass(frozen=True)
class CellReport:
    """Results for one (n, T) grid cell."""

    n: int
    t: int
    selection_counts: dict  # delta -> tuple of counts over r~ = 0..m
    selection_freq: dict  # delta -> tuple of frequencies
    coefficients: tuple[CoefficientSummary, ...]
    failures: int


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated Monte Carlo results over a grid of panel dimensions."""

    design: Design
    grid: tuple[tuple[int, int], ...]
    reps: int
    q: int
    deltas: tuple[float, ...]
    seed: int
    power_shift: float
    kappa: Optional[float]
    cells: tuple[CellReport, ...]


def _generate(design: Design, n: int, t_len: int, ss: np.random.SeedSequence, kappa):
    core_ss, fac_ss = ss.spawn(2)
    rng_core = np.random.default_rng(core_ss)
    if isinstance(design, VecmDesign):
        rng_fac = np.random.default_rng(fac_ss)
        return dgp_vecm(
            design, n, t_len, kappa=kappa, rng_core=rng_core, rng_factors=rng_fac
        )
    if isinstance(design, VarDiffDesign):
        return dgp_var_diff(n, t_len, design.persistence, rng=rng_core), None
    if isinstance(design, PbDesign):
        return dgp_pb(n, t_len, rng=rng_core)
    raise TypeError(f"unknown design type {type(design)!r}")


def run_replication(
    design: Design,
    n: int,
    t_len: int,
    q: int,
    deltas: Sequence[float],
    seed: int,
    cell_index: int,
    rep_index: int,
    kappa: Optional[float] = None,
):
    """One replication: simulate, select the rank, estimate at the true rank.

    The stream is fully determined by (seed, cell_index, rep_index), so
    results do not depend on scheduling or worker count.
    """
    ss = np.random.SeedSequence([seed, cell_index, rep_index])
    try:
        panel, truth = _generate(design, n, t_len, ss, kappa)
        plan = build_plan(panel, q)
        moments = pooled_covariance(panel, plan)
        # The correlation matrix is invariant to the common diff-sd scaling,
        # so selection can reuse the unscaled moments.
        corr = correlation_from_covariance(moments.q_matrix)
        eigvals = symmetric_eigen(corr).values
        r_tilde = tuple(
            select_rank(eigvals, plan.t_ave_arith, d, 1.0).r_tilde for d in deltas
        )
        if truth is None or truth.r0 == 0:
            return r_tilde, None, None, False, None
        r0 = truth.r0
        basis = pme_basis(moments, r0)
        b_ring = exact_identify(basis, Normalized(r0))
        cov = estimate_covariance(moments, b_ring, plan)
        theta = b_ring[r0:, :].ravel(order="F")
        se = cov.std_errors.ravel(order="F")
        return r_tilde, theta, se, False, None
    except (PmeError, np.linalg.LinAlgError) as exc:
        return tuple(-1 for _ in deltas), None, None, True, f"{type(exc).__name__}: {exc}"


def _replication_star(args):
    return run_replication(*args)


def _coefficient_names(design: Design) -> list[str]:
    """Positional names: relation index then variable index, e.g. b13, b23."""
    if isinstance(design, VarDiffDesign):
        return []
    m, r0 = design.m, design.r0
    return [f"b{j + 1}{r0 + a + 1}" for j in range(r0) for a in range(m - r0)]


def _truth_flat(design: Design) -> np.ndarray:
    if isinstance(design, VecmDesign):
        b0 = design.b0
        return b0[design.r0 :, :].ravel(order="F")
    if isinstance(design, PbDesign):
        return np.array([-1.0])
    return np.array([])


def run_experiment(
    design: Design,
    grid: Sequence[tuple[int, int]],
    reps: int,
    q: int = 2,
    deltas: Sequence[float] = (0.25,),
    seed: int = 0,
    workers: int = 1,
    power_shift: float = 0.03,
    max_failure_share: float = 0.01,
) -> ExperimentReport:
    """Run the design over a grid of (n, T) cells and aggregate the metrics.

    Replications use independent streams keyed by (seed, cell, replication)
    and are reduced in replication order, so the report is bit-identical for
    any worker count. Per-replication failures are counted and tolerated up
    to ``max_failure_share`` of the replications in a cell.
    """
    if reps < 1:
        raise ValueError("need at least one replication")
    deltas = tuple(float(d) for d in deltas)
    grid = tuple((int(n), int(t)) for n, t in grid)

    kappa = None
    if isinstance(design, VecmDesign) and design.model == "varma11":
        kappa = solve_kappa_simulated(design)

    names = _coefficient_names(design)
    truth = _truth_flat(design)
    m = design.m

    cells = []
    for cell_index, (n, t_len) in enumerate(grid):
        tasks = [
            (design, n, t_len, q, deltas, seed, cell_index, rep, kappa)
            for rep in range(reps)
        ]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_replication_star, tasks, chunksize=16))
        else:
            results = [_replication_star(t) for t in tasks]

        failures = sum(1 for r in results if r[3])
        if failures > max_failure_share * reps:
            first = next(r[4] for r in results if r[3])
            raise DesignError(
                f"{failures}/{reps} replications failed in cell (n={n}, T={t_len}); "
                f"first failure: {first}"
            )

        counts = {d: np.zeros(m + 1, dtype=int) for d in deltas}
        for r in results:
            if r[3]:
                continue
            for d, rt in zip(deltas, r[0]):
                if 0 <= rt <= m:
                    counts[d][rt] += 1
        used = reps - failures
        selection_counts = {d: tuple(int(c) for c in counts[d]) for d in deltas}
        selection_freq = {
            d: tuple(float(c) / used for c in counts[d]) for d in deltas
        }

        summaries = []
        if names:
            thetas = np.array([r[1] for r in results if not r[3]])
            ses = np.array([r[2] for r in results if not r[3]])
            for k, name in enumerate(names):
                est = thetas[:, k]
                se = ses[:, k]
                err = est - truth[k]
                bias = float(err.mean())
                rmse = float(np.sqrt(np.mean(err * err)))
                size = float(np.mean(np.abs(err / se) > CRITICAL_5PCT))
                alt = truth[k] + power_shift
                power = float(np.mean(np.abs((est - alt) / se) > CRITICAL_5PCT))
                summaries.append(
                    CoefficientSummary(
                        name=name,
                        truth=float(truth[k]),
                        bias=bias,
                        rmse=rmse,
                        size=size,
                        power=power,
                        power_alternative=float(alt),
                        mean_se=float(se.mean()),
                    )
                )
        cells.append(
            CellReport(
                n=n,
                t=t_len,
                selection_counts=selection_counts,
                selection_freq=selection_freq,
                coefficients=tuple(summaries),
                failures=failures,
            )
        )

    return ExperimentReport(
        design=design,
        grid=grid,
        reps=reps,
        q=q,
        deltas=deltas,
        seed=seed,
        power_shift=power_shift,
        kappa=kappa,
        cells=tuple(cells),
    )
