"""Command-line interface: select-rank, estimate, simulate, and filter."""

from __future__ import annotations

import argparse
import sys
from typing import Optional

import numpy as np

from . import __version__
from .dataio import (
    FilterSpec,
    RatioTrim,
    apply_filters,
    dumps_json,
    read_csv_long,
    records_to_panel,
    write_csv_long,
)
from .dgp import PbDesign, VarDiffDesign, VecmDesign, dgp_pb, dgp_var_diff, dgp_vecm
from .eigen import select_rank, symmetric_eigen
from .errors import PmeError
from .experiments import run_experiment
from .longrun import estimate as run_estimate
from .moments import build_plan, correlation_from_covariance, pooled_covariance, scale_by_diff_sd
from .panel import EstimationConfig, PanelDataset, require_valid
from .reporting import (
    estimate_dict,
    estimate_table,
    exclusions_list,
    experiment_dict,
    experiment_table,
    rank_selection_dict,
    run_report,
    sample_dict,
    selection_table,
)


class UsageError(Exception):
    """Invalid flag combination detected after parsing."""


def _parse_deltas(text: str) -> list[float]:
    try:
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse delta list {text!r}") from None
    if not values or any(d <= 0 for d in values):
        raise UsageError("deltas must be positive numbers")
    return values


def _parse_q(text: str):
    if text == "auto":
        return "auto"
    try:
        q = int(text)
    except ValueError:
        raise UsageError(f"q must be an integer or 'auto', got {text!r}") from None
    if q < 2:
        raise UsageError("q must be >= 2")
    return q


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse integer list {text!r}") from None


def _parse_null_matrix(text: str, rows: int, cols: int) -> np.ndarray:
    parts = [p for p in text.replace(" ", "").split(";") if p]
    try:
        if len(parts) == 1 and "," not in parts[0]:
            return np.full((rows, cols), float(parts[0]))
        mat = np.array([[float(v) for v in row.split(",")] for row in parts])
    except ValueError:
        raise UsageError(f"cannot parse null matrix {text!r}") from None
    if mat.shape != (rows, cols):
        raise UsageError(
            f"null matrix must be {rows}x{cols} (rows ';'-separated), got {mat.shape}"
        )
    return mat


def _add_input_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--input", help="long-format CSV path")
    sub.add_argument("--unit-col", default="unit")
    sub.add_argument("--time-col", default="time")
    sub.add_argument(
        "--value-cols",
        help="comma-separated variable columns (default: all non-key columns)",
    )
    sub.add_argument(
        "--design",
        choices=["var1", "varma11", "vardiff", "pb"],
        help="simulate the input panel instead of reading a CSV",
    )
    sub.add_argument("--r0", type=int, choices=[1, 2], default=1)
    sub.add_argument("--dist", choices=["gaussian", "chisq"], default="gaussian")
    sub.add_argument("--pr2", type=float, default=0.2)
    sub.add_argument(
        "--speed",
        choices=["moderate", "slow", "low", "high"],
        default="moderate",
        help="convergence speed (vecm designs) or persistence (vardiff)",
    )
    sub.add_argument("--factors", action="store_true", help="add interactive effects")
    sub.add_argument("--n", type=int, default=500)
    sub.add_argument("--t", type=int, default=50)
    sub.add_argument("--seed", type=int, default=0)


def _vecm_design(args, model: str) -> VecmDesign:
    if args.speed not in ("moderate", "slow"):
        raise UsageError("vecm designs take --speed moderate|slow")
    return VecmDesign(
        r0=args.r0,
        model=model,
        error_dist=args.dist,
        convergence=args.speed,
        pr2_target=args.pr2,
        interactive_effects=args.factors,
        seed=args.seed,
    )


def _design_from_args(args):
    if args.design in ("var1", "varma11"):
        model = args.design
        if getattr(args, "model", None):
            model = args.model
        return _vecm_design(args, model)
    if args.design == "vardiff":
        persistence = args.speed if args.speed in ("low", "moderate", "high") else None
        if persistence is None:
            raise UsageError("vardiff takes --speed low|moderate|high")
        if args.factors:
            raise UsageError("vardiff design has no interactive-effects variant")
        return VarDiffDesign(persistence=persistence, seed=args.seed)
    if args.design == "pb":
        if args.r0 != 1:
            raise UsageError("the pb design has exactly one long run relation")
        if args.factors:
            raise UsageError("the pb design has no interactive-effects variant")
        return PbDesign(seed=args.seed)
    raise UsageError("provide either --input or --design")


def _simulated_panel(args) -> PanelDataset:
    design = _design_from_args(args)
    if isinstance(design, VecmDesign):
        panel, _ = dgp_vecm(design, args.n, args.t, seed=args.seed)
    elif isinstance(design, VarDiffDesign):
        panel = dgp_var_diff(args.n, args.t, design.persistence, seed=args.seed)
    else:
        panel, _ = dgp_pb(args.n, args.t, seed=args.seed)
    return panel


def _load_panel(args, min_t: Optional[int] = None):
    """Panel from --input CSV or a seeded simulation; optional length filter."""
    if args.input and args.design:
        raise UsageError("--input and --design are mutually exclusive")
    if args.input:
        if args.value_cols:
            value_cols = [c.strip() for c in args.value_cols.split(",") if c.strip()]
        else:
            import csv as _csv

            with open(args.input, newline="", encoding="utf-8") as handle:
                header = next(_csv.reader(handle))
            value_cols = [c for c in header if c not in (args.unit_col, args.time_col)]
        records = read_csv_long(args.input, args.unit_col, args.time_col, value_cols)
        exclusions = None
        if min_t is not None:
            panel, log = apply_filters(
                records, value_cols, FilterSpec(min_t=min_t, require_positive=False)
            )
            exclusions = log
        else:
            panel = records_to_panel(records, value_cols)
        return panel, exclusions
    if args.design:
        return _simulated_panel(args), None
    raise UsageError("provide either --input or --design")


def _cmd_select_rank(args) -> int:
    panel, exclusions = _load_panel(args, min_t=args.min_t)
    config = EstimationConfig(q=_parse_q(args.q), c=args.c)
    require_valid(panel, config)
    plan = build_plan(panel, config.q)
    selection_panel = panel
    if args.no_scale:
        selection_panel = panel
    else:
        selection_panel, _ = scale_by_diff_sd(panel)
    moments = pooled_covariance(selection_panel, plan)
    corr = correlation_from_covariance(moments.q_matrix)
    eigvals = symmetric_eigen(corr).values
    t_ave = plan.t_ave(args.t_ave)
    deltas = _parse_deltas(args.delta)
    selections = [select_rank(eigvals, t_ave, d, args.c) for d in deltas]

    sample = sample_dict(panel, plan)
    if args.json:
        report = run_report(
            config=_config_echo(args, deltas),
            sample=sample,
            rank_selection=rank_selection_dict(selections, deltas),
            exclusions=exclusions_list(exclusions) if exclusions else None,
        )
        print(dumps_json(report, indent=2))
    else:
        print(selection_table(selections, sample, panel.variable_names))
    return 0


def _config_echo(args, deltas) -> dict:
    echo = {"command": args.command, "q": args.q, "deltas": list(deltas), "c": args.c}
    for key in ("input", "design", "seed", "n", "t"):
        val = getattr(args, key, None)
        if val is not None:
            echo[key] = val
    return echo


def _cmd_estimate(args) -> int:
    panel, exclusions = _load_panel(args, min_t=args.min_t)
    if args.rank is not None and args.rank >= panel.m:
        raise UsageError(f"rank must be < m={panel.m}")

    if args.normalize_on:
        wanted = [v.strip() for v in args.normalize_on.split(",") if v.strip()]
        missing = [v for v in wanted if v not in panel.variable_names]
        if missing:
            raise UsageError(f"unknown variable(s) in --normalize-on: {missing}")
        order = wanted + [v for v in panel.variable_names if v not in wanted]
        perm = [panel.variable_names.index(v) for v in order]
        units = tuple(
            type(u)(u.unit_id, u.start_time, u.values[:, perm], u.times)
            for u in panel.units
        )
        panel = PanelDataset(units, tuple(order))

    deltas = _parse_deltas(args.delta)
    config = EstimationConfig(
        q=_parse_q(args.q),
        delta=deltas[0],
        c=args.c,
        rank=args.rank,
        scale_for_selection=not args.no_scale,
    )
    rank_selection, est = run_estimate(panel, config)

    null_matrix = None
    if args.null is not None and est is not None and est.theta_hat is not None:
        null_matrix = _parse_null_matrix(
            args.null, est.theta_hat.shape[0], est.theta_hat.shape[1]
        )
        from .longrun import t_statistics

        tstats = t_statistics(est.theta_hat, est.std_errors, null_matrix)
        est = type(est)(
            r=est.r,
            b_hat=est.b_hat,
            theta_hat=est.theta_hat,
            var_vec_theta=est.var_vec_theta,
            std_errors=est.std_errors,
            t_stats=tstats,
            q_used=est.q_used,
            n=est.n,
            t_ave=est.t_ave,
        )

    plan = build_plan(panel, config.q)
    sample = sample_dict(panel, plan)
    sel_dict = None
    if rank_selection is not None:
        extra = [
            select_rank(rank_selection.eigenvalues, rank_selection.t_ave_used, d, args.c)
            for d in deltas[1:]
        ]
        sel_dict = rank_selection_dict([rank_selection, *extra], deltas)

    if args.json:
        report = run_report(
            config=_config_echo(args, deltas),
            sample=sample,
            rank_selection=sel_dict,
            estimate=estimate_dict(est, panel.variable_names) if est else None,
            exclusions=exclusions_list(exclusions) if exclusions else None,
        )
        print(dumps_json(report, indent=2))
    else:
        if sel_dict is not None:
            sels = [
                select_rank(
                    rank_selection.eigenvalues, rank_selection.t_ave_used, d, args.c
                )
                for d in deltas
            ]
            print(selection_table(sels, sample, panel.variable_names))
        if est is None:
            r = rank_selection.r_tilde if rank_selection else 0
            if r == 0:
                print("No long run relations detected (r~ = 0); nothing to estimate.")
            else:
                print(
                    f"All {r} eigenvalues fall below the threshold (r~ = m), which "
                    "contradicts m - r0 > 0; no estimate produced."
                )
        else:
            print(estimate_table(est, panel.variable_names))
    return 0


def _cmd_simulate(args) -> int:
    design = _design_from_args(args)
    deltas = _parse_deltas(args.delta)
    q = _parse_q(args.q)
    if q == "auto":
        raise UsageError("simulate needs a fixed --q")
    ns = _parse_int_list(str(args.n)) if isinstance(args.n, str) else [args.n]
    ts = _parse_int_list(str(args.t)) if isinstance(args.t, str) else [args.t]
    grid = [(n, t) for n in ns for t in ts]
    report = run_experiment(
        design,
        grid,
        reps=args.reps,
        q=q,
        deltas=deltas,
        seed=args.seed,
        workers=args.workers,
        power_shift=args.power_shift,
    )
    if args.json:
        payload = run_report(
            config=_config_echo(args, deltas), experiment=experiment_dict(report)
        )
        print(dumps_json(payload, indent=2))
    else:
        print(experiment_table(report))
    return 0


def _cmd_filter(args) -> int:
    if not args.input:
        raise UsageError("filter needs --input")
    if args.value_cols:
        value_cols = [c.strip() for c in args.value_cols.split(",") if c.strip()]
    else:
        import csv as _csv

        with open(args.input, newline="", encoding="utf-8") as handle:
            header = next(_csv.reader(handle))
        value_cols = [c for c in header if c not in (args.unit_col, args.time_col)]
    records = read_csv_long(args.input, args.unit_col, args.time_col, value_cols)

    trims = []
    for text in args.trim_ratio or []:
        parts = text.split(":")
        if len(parts) not in (2, 4):
            raise UsageError("--trim-ratio takes NUM:DEN or NUM:DEN:LO:HI")
        lo, hi = (float(parts[2]), float(parts[3])) if len(parts) == 4 else (1.0, 99.0)
        trims.append(RatioTrim(parts[0], parts[1], lo, hi))
    spec = FilterSpec(
        min_t=args.min_t if args.min_t is not None else 20,
        require_positive=args.require_positive,
        log_transform=args.log,
        trim_ratios=tuple(trims),
    )
    panel, log = apply_filters(records, value_cols, spec)
    write_csv_long(args.output, panel, args.unit_col, args.time_col)

    if args.json:
        report = run_report(
            config={
                "command": "filter",
                "input": args.input,
                "output": args.output,
                "min_t": spec.min_t,
                "require_positive": spec.require_positive,
                "log_transform": spec.log_transform,
            },
            sample=sample_dict(panel),
            exclusions=exclusions_list(log),
        )
        print(dumps_json(report, indent=2))
    else:
        print(f"Wrote {panel.n} units to {args.output}")
        for entry in log:
            print(f"  [{entry.filter_name}] {entry.action} {entry.unit_id}: {entry.detail}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pme",
        description=(
            "Estimate how many long run relations an n-unit panel of "
            "nonstationary variables carries, and their coefficients."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sel = subs.add_parser("select-rank", help="eigenvalue thresholding only")
    _add_input_flags(sel)
    sel.add_argument("--q", default="2")
    sel.add_argument("--delta", default="0.25,0.5")
    sel.add_argument("--c", type=float, default=1.0)
    sel.add_argument("--t-ave", choices=["arithmetic", "harmonic"], default="arithmetic")
    sel.add_argument("--min-t", type=int, help="trim gaps and drop units shorter than this")
    sel.add_argument("--no-scale", action="store_true", help="skip diff-sd scaling")
    sel.add_argument("--json", action="store_true")
    sel.set_defaults(func=_cmd_select_rank)

    est = subs.add_parser("estimate", help="full estimation pipeline")
    _add_input_flags(est)
    est.add_argument("--q", default="2")
    est.add_argument("--delta", default="0.25")
    est.add_argument("--c", type=float, default=1.0)
    est.add_argument("--rank", type=int, help="fix the number of relations")
    est.add_argument(
        "--normalize-on", help="comma-separated variables to order first (I_r block)"
    )
    est.add_argument("--null", help="null coefficients for t-tests (scalar or 'a,b;c,d')")
    est.add_argument("--min-t", type=int, help="trim gaps and drop units shorter than this")
    est.add_argument("--no-scale", action="store_true", help="skip diff-sd scaling")
    est.add_argument("--json", action="store_true")
    est.set_defaults(func=_cmd_estimate)

    sim = subs.add_parser("simulate", help="Monte Carlo experiment runner")
    sim.add_argument(
        "--design", choices=["var1", "varma11", "vardiff", "pb"], required=True
    )
    sim.add_argument("--model", choices=["var1", "varma11"], help="override the model")
    sim.add_argument("--r0", type=int, choices=[1, 2], default=1)
    sim.add_argument("--dist", choices=["gaussian", "chisq"], default="gaussian")
    sim.add_argument("--pr2", type=float, default=0.2)
    sim.add_argument(
        "--speed", choices=["moderate", "slow", "low", "high"], default="moderate"
    )
    sim.add_argument("--factors", action="store_true")
    sim.add_argument("--n", default="500", help="panel size or comma list")
    sim.add_argument("--t", default="50", help="periods or comma list")
    sim.add_argument("--reps", type=int, default=200)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--q", default="2")
    sim.add_argument("--delta", default="0.25")
    sim.add_argument("--power-shift", type=float, default=0.03)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--json", action="store_true")
    sim.set_defaults(func=_cmd_simulate)

    flt = subs.add_parser("filter", help="clean a long-format CSV")
    flt.add_argument("--input", required=True)
    flt.add_argument("--output", required=True)
    flt.add_argument("--unit-col", default="unit")
    flt.add_argument("--time-col", default="time")
    flt.add_argument("--value-cols")
    flt.add_argument("--min-t", type=int, default=20)
    flt.add_argument("--require-positive", action="store_true")
    flt.add_argument("--log", action="store_true", help="log-transform after filter 2")
    flt.add_argument(
        "--trim-ratio",
        action="append",
        help="NUM:DEN[:LO:HI] percentile trim on unit-mean ratios (repeatable)",
    )
    flt.add_argument("--json", action="store_true")
    flt.set_defaults(func=_cmd_filter)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (PmeError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
