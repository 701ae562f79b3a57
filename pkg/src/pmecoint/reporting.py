"""Report assembly: dictionaries for JSON output and plain-text tables."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .dataio import REPORT_VERSION, ExclusionEntry
from .dgp import PbDesign, VarDiffDesign, VecmDesign
from .eigen import RankSelection
from .experiments import ExperimentReport
from .moments import SubsamplePlan
from .panel import LongRunEstimate, PanelDataset


def sample_dict(panel: PanelDataset, plan: Optional[SubsamplePlan] = None) -> dict:
    lengths = panel.t_lengths
    out = {
        "n": panel.n,
        "m": panel.m,
        "variable_names": list(panel.variable_names),
        "t_ave": float(lengths.mean()),
        "max_t": int(lengths.max()),
        "total_obs": int(lengths.sum()),
    }
    if plan is not None:
        out["t_ave_harmonic"] = plan.t_ave_harm
    return out


def rank_selection_dict(
    selections: Sequence[RankSelection], deltas: Sequence[float]
) -> dict:
    sel = list(selections)
    return {
        "eigenvalues": [float(v) for v in sel[0].eigenvalues],
        "t_ave_used": sel[0].t_ave_used,
        "by_delta": [
            {
                "delta": s.delta,
                "c": s.c,
                "threshold": s.threshold,
                "r_tilde": s.r_tilde,
            }
            for s in sel
        ],
    }


def estimate_dict(est: LongRunEstimate, variable_names: Sequence[str]) -> dict:
    out = {
        "r": est.r,
        "b_hat": est.b_hat,
        "q_used": est.q_used,
        "n": est.n,
        "t_ave": est.t_ave,
    }
    if est.theta_hat is not None:
        out["theta_hat"] = est.theta_hat
        out["std_errors"] = est.std_errors
        out["var_vec_theta"] = est.var_vec_theta
        out["coefficient_names"] = [
            f"{variable_names[est.r + a]}~{j + 1}"
            for j in range(est.r)
            for a in range(len(variable_names) - est.r)
        ]
    if est.t_stats is not None:
        out["t_stats"] = est.t_stats
    return out


def exclusions_list(log: Sequence[ExclusionEntry]) -> list:
    return [
        {
            "unit_id": e.unit_id,
            "filter": e.filter_name,
            "action": e.action,
            "detail": e.detail,
        }
        for e in log
    ]


def design_dict(design) -> dict:
    if isinstance(design, VecmDesign):
        return {
            "kind": "vecm",
            "r0": design.r0,
            "model": design.model,
            "error_dist": design.error_dist,
            "convergence": design.convergence,
            "pr2_target": design.pr2_target,
            "interactive_effects": design.interactive_effects,
            "m_f": design.m_f,
            "seed": design.seed,
        }
    if isinstance(design, VarDiffDesign):
        return {"kind": "vardiff", "persistence": design.persistence, "seed": design.seed}
    if isinstance(design, PbDesign):
        return {"kind": "pb", "seed": design.seed}
    raise TypeError(f"unknown design {type(design)!r}")


def experiment_dict(report: ExperimentReport) -> dict:
    cells = []
    for cell in report.cells:
        selection = [
            {
                "delta": d,
                "counts": list(cell.selection_counts[d]),
                "frequencies": list(cell.selection_freq[d]),
            }
            for d in report.deltas
        ]
        coeffs = [
            {
                "name": c.name,
                "truth": c.truth,
                "bias": c.bias,
                "rmse": c.rmse,
                "size": c.size,
                "power": c.power,
                "power_alternative": c.power_alternative,
                "mean_se": c.mean_se,
            }
            for c in cell.coefficients
        ]
        cells.append(
            {
                "n": cell.n,
                "t": cell.t,
                "selection": selection,
                "coefficients": coeffs,
                "failures": cell.failures,
            }
        )
    return {
        "design": design_dict(report.design),
        "grid": [[n, t] for n, t in report.grid],
        "reps": report.reps,
        "q": report.q,
        "deltas": list(report.deltas),
        "seed": report.seed,
        "power_shift": report.power_shift,
        "kappa": report.kappa,
        "cells": cells,
    }


def run_report(
    config: dict,
    sample: Optional[dict] = None,
    rank_selection: Optional[dict] = None,
    estimate: Optional[dict] = None,
    exclusions: Optional[list] = None,
    experiment: Optional[dict] = None,
) -> dict:
    out = {"version": REPORT_VERSION, "config": config}
    if rank_selection is not None:
        out["rank_selection"] = rank_selection
    if estimate is not None:
        out["estimate"] = estimate
    if sample is not None:
        out["sample"] = sample
    if exclusions is not None:
        out["exclusions"] = exclusions
    if experiment is not None:
        out["experiment"] = experiment
    return out


def _fmt(x: float, digits: int = 4) -> str:
    return f"{x:.{digits}f}"


def selection_table(
    selections: Sequence[RankSelection], sample: dict, variable_names: Sequence[str]
) -> str:
    """Table-style text block: eigenvalues, thresholds per delta, and counts."""
    lines = []
    lines.append("Estimated number of long run relations")
    lines.append("-" * 54)
    for s in selections:
        lines.append(f"  r~ (delta={s.delta:g}, c={s.c:g})".ljust(34) + str(s.r_tilde))
    lines.append("Eigenvalues (ascending)")
    for j, val in enumerate(selections[0].eigenvalues):
        lines.append(f"  lambda_{j + 1}".ljust(34) + _fmt(val, 3))
    lines.append("Thresholds c * T_ave^(-delta)")
    for s in selections:
        lines.append(f"  delta={s.delta:g}".ljust(34) + _fmt(s.threshold, 3))
    lines.append("Sample dimensions")
    lines.append("  n".ljust(34) + str(sample["n"]))
    lines.append("  T_ave".ljust(34) + _fmt(sample["t_ave"], 1))
    lines.append("  max T_i".ljust(34) + str(sample["max_t"]))
    lines.append("  total observations".ljust(34) + str(sample["total_obs"]))
    lines.append("  variables".ljust(34) + ", ".join(variable_names))
    return "\n".join(lines)


def estimate_table(est: LongRunEstimate, variable_names: Sequence[str]) -> str:
    lines = []
    lines.append(f"Long run estimate (r={est.r}, q={est.q_used})")
    lines.append("-" * 54)
    names = list(variable_names)
    width = max(len(s) for s in names) + 2
    header = "".ljust(width) + "".join(f"rel {j + 1}".rjust(12) for j in range(est.r))
    lines.append(header)
    for k, name in enumerate(names):
        row = name.ljust(width)
        row += "".join(_fmt(est.b_hat[k, j]).rjust(12) for j in range(est.r))
        lines.append(row)
    if est.std_errors is not None:
        lines.append("Standard errors (free coefficients)")
        for a in range(est.std_errors.shape[0]):
            row = names[est.r + a].ljust(width)
            row += "".join(
                f"({_fmt(est.std_errors[a, j])})".rjust(12) for j in range(est.r)
            )
            lines.append(row)
    if est.t_stats is not None:
        lines.append("t-statistics against the configured nulls")
        for a in range(est.t_stats.shape[0]):
            row = names[est.r + a].ljust(width)
            row += "".join(_fmt(est.t_stats[a, j], 2).rjust(12) for j in range(est.r))
            lines.append(row)
    lines.append(f"n = {est.n}, T_ave = {est.t_ave:.1f}")
    return "\n".join(lines)


def experiment_table(report: ExperimentReport) -> str:
    lines = []
    d = design_dict(report.design)
    desc = ", ".join(f"{k}={v}" for k, v in d.items())
    lines.append(f"Experiment: {desc}")
    lines.append(f"reps={report.reps}, q={report.q}, seed={report.seed}")
    if report.kappa is not None:
        lines.append(f"kappa={report.kappa:.4f}")
    for cell in report.cells:
        lines.append("-" * 60)
        lines.append(f"n={cell.n}, T={cell.t}  (failures: {cell.failures})")
        m = len(next(iter(cell.selection_freq.values()))) - 1
        head = "  delta".ljust(12) + "".join(f"r~={r}".rjust(8) for r in range(m + 1))
        lines.append(head)
        for delta in report.deltas:
            row = f"  {delta:g}".ljust(12)
            row += "".join(_fmt(f, 3).rjust(8) for f in cell.selection_freq[delta])
            lines.append(row)
        if cell.coefficients:
            lines.append(
                "  coef".ljust(10)
                + "truth".rjust(8)
                + "bias".rjust(10)
                + "rmse".rjust(10)
                + "size".rjust(8)
                + "power".rjust(8)
            )
            for c in cell.coefficients:
                lines.append(
                    f"  {c.name}".ljust(10)
                    + _fmt(c.truth, 2).rjust(8)
                    + _fmt(c.bias).rjust(10)
                    + _fmt(c.rmse).rjust(10)
                    + _fmt(c.size, 3).rjust(8)
                    + _fmt(c.power, 3).rjust(8)
                )
    return "\n".join(lines)
