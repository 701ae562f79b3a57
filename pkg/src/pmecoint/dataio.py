"""Long-format CSV ingestion, the sequential filter pipeline, and JSON output."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO, Union

import numpy as np

from .errors import ValidationError
from .panel import PanelDataset, UnitSeries

REPORT_VERSION = "pme-report/1"


@dataclass(frozen=True)
class RatioTrim:
    """Percentile trim on the unit-level time average of numerator/denominator."""

    numerator: str
    denominator: str
    lower_pct: float = 1.0
    upper_pct: float = 99.0

    def __post_init__(self):
        if not 0.0 <= self.lower_pct < self.upper_pct <= 100.0:
            raise ValueError("need 0 <= lower_pct < upper_pct <= 100")


@dataclass(frozen=True)
class FilterSpec:
    """Sequential cleaning rules applied before estimation."""

    min_t: int = 20
    require_positive: bool = False
    log_transform: bool = False
    trim_ratios: tuple[RatioTrim, ...] = ()


@dataclass(frozen=True)
class ExclusionEntry:
    unit_id: str
    filter_name: str
    action: str  # "dropped" | "trimmed"
    detail: str


# Per-unit raw records: sorted (time, values) pairs keyed by unit id.
RawRecords = dict[str, list[tuple[int, tuple[float, ...]]]]


def read_csv_long(
    path_or_file: Union[str, TextIO],
    unit_col: str,
    time_col: str,
    value_cols: Sequence[str],
) -> RawRecords:
    """Read a long-format CSV into per-unit records sorted by time.

    The header row must contain all named columns; times must parse as
    integers; duplicate (unit, time) keys and missing value cells are
    errors naming the offending line.
    """
    close = False
    if isinstance(path_or_file, str):
        handle = open(path_or_file, newline="", encoding="utf-8")
        close = True
    else:
        handle = path_or_file
    try:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ValidationError("CSV is empty (no header row)")
        missing = [
            c for c in [unit_col, time_col, *value_cols] if c not in reader.fieldnames
        ]
        if missing:
            raise ValidationError(f"CSV header lacks column(s): {', '.join(missing)}")
        records: dict[str, dict[int, tuple[float, ...]]] = {}
        for row in reader:
            line = reader.line_num
            unit = row[unit_col]
            try:
                time = int(row[time_col])
            except (TypeError, ValueError):
                raise ValidationError(
                    f"line {line}: time {row[time_col]!r} is not an integer"
                ) from None
            values = []
            for col in value_cols:
                cell = row[col]
                if cell is None or cell.strip() == "":
                    raise ValidationError(f"line {line}: missing value in column {col}")
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ValidationError(
                        f"line {line}: cannot parse {cell!r} in column {col}"
                    ) from None
            bucket = records.setdefault(unit, {})
            if time in bucket:
                raise ValidationError(
                    f"line {line}: duplicate observation for unit {unit} at time {time}"
                )
            bucket[time] = tuple(values)
        return {
            unit: sorted(bucket.items()) for unit, bucket in sorted(records.items())
        }
    finally:
        if close:
            handle.close()


def write_csv_long(
    path_or_file: Union[str, TextIO],
    panel: PanelDataset,
    unit_col: str = "unit",
    time_col: str = "time",
) -> None:
    """Write a panel back to long format with full float precision."""
    close = False
    if isinstance(path_or_file, str):
        handle = open(path_or_file, "w", newline="", encoding="utf-8")
        close = True
    else:
        handle = path_or_file
    try:
        writer = csv.writer(handle)
        writer.writerow([unit_col, time_col, *panel.variable_names])
        for unit in panel.units:
            stamps = unit.time_stamps
            for row, time in zip(unit.values, stamps):
                writer.writerow([unit.unit_id, int(time), *[repr(v) for v in row]])
    finally:
        if close:
            handle.close()


def records_to_panel(records: RawRecords, variable_names: Sequence[str]) -> PanelDataset:
    """Build a panel from raw records, keeping explicit time stamps.

    Gaps are preserved and surface as validation errors downstream; use
    ``apply_filters`` to repair them.
    """
    units = []
    for unit_id, rows in records.items():
        times = np.array([t for t, _ in rows], dtype=int)
        values = np.array([v for _, v in rows], dtype=float)
        units.append(UnitSeries(unit_id, int(times[0]), values, times))
    return PanelDataset(tuple(units), tuple(variable_names))


def _longest_consecutive_run(times: np.ndarray) -> tuple[int, int]:
    """Slice bounds of the longest stride-1 run, earliest on ties."""
    breaks = np.flatnonzero(np.diff(times) != 1)
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks + 1, [times.size]])
    lengths = ends - starts
    best = int(np.argmax(lengths))  # argmax keeps the earliest maximal run
    return int(starts[best]), int(ends[best])


def _nearest_rank_percentile(sorted_values: np.ndarray, pct: float) -> float:
    """Value at the index nearest to (N-1) * pct / 100 of the sorted sample."""
    idx = int(round((sorted_values.size - 1) * pct / 100.0))
    return float(sorted_values[idx])


def apply_filters(
    records: RawRecords,
    variable_names: Sequence[str],
    spec: FilterSpec,
) -> tuple[PanelDataset, list[ExclusionEntry]]:
    """Sequential cleaning: gaps/length, positivity, log transform, ratio trim.

    Filter 1 trims each unit to its longest consecutive run and drops units
    whose run is shorter than ``min_t``. Filter 2 drops units with any
    non-positive value (when required); the log transform follows. Filter 3
    computes each unit's time-average ratio for every configured pair and
    drops units outside the nearest-rank percentile band computed over the
    units surviving the first two filters. Re-applying the pipeline to its
    own output is a no-op.
    """
    variable_names = list(variable_names)
    col = {name: k for k, name in enumerate(variable_names)}
    for trim in spec.trim_ratios:
        for name in (trim.numerator, trim.denominator):
            if name not in col:
                raise ValueError(f"ratio trim references unknown variable {name!r}")

    log: list[ExclusionEntry] = []
    surviving: dict[str, tuple[int, np.ndarray]] = {}  # unit -> (start_time, values)

    for unit_id, rows in records.items():
        times = np.array([t for t, _ in rows], dtype=int)
        values = np.array([v for _, v in rows], dtype=float)
        start, end = _longest_consecutive_run(times)
        if end - start < times.size:
            log.append(
                ExclusionEntry(
                    unit_id,
                    "filter1",
                    "trimmed",
                    f"kept longest consecutive run {int(times[start])}.."
                    f"{int(times[end - 1])} of {times.size} observations",
                )
            )
            times = times[start:end]
            values = values[start:end]
        if times.size < spec.min_t:
            log.append(
                ExclusionEntry(
                    unit_id,
                    "filter1",
                    "dropped",
                    f"T_i={times.size} < min_t={spec.min_t}",
                )
            )
            continue
        surviving[unit_id] = (int(times[0]), values)

    if spec.require_positive:
        kept = {}
        for unit_id, (start_time, values) in surviving.items():
            if np.any(values <= 0.0):
                bad = int(np.count_nonzero(values <= 0.0))
                log.append(
                    ExclusionEntry(
                        unit_id, "filter2", "dropped", f"{bad} non-positive value(s)"
                    )
                )
            else:
                kept[unit_id] = (start_time, values)
        surviving = kept

    if spec.trim_ratios:
        # Ratios use the values as they stand after filter 2, before any log.
        for trim in spec.trim_ratios:
            if not surviving:
                break
            num, den = col[trim.numerator], col[trim.denominator]
            means = {}
            for unit_id, (_, values) in surviving.items():
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = values[:, num] / values[:, den]
                means[unit_id] = float(np.mean(ratio))
            ordered = np.sort(np.array(list(means.values())))
            lo = _nearest_rank_percentile(ordered, trim.lower_pct)
            hi = _nearest_rank_percentile(ordered, trim.upper_pct)
            kept = {}
            for unit_id, payload in surviving.items():
                mean = means[unit_id]
                if not math.isfinite(mean) or mean < lo or mean > hi:
                    log.append(
                        ExclusionEntry(
                            unit_id,
                            "filter3",
                            "dropped",
                            f"mean {trim.numerator}/{trim.denominator}="
                            f"{mean:.6g} outside [{lo:.6g}, {hi:.6g}]",
                        )
                    )
                else:
                    kept[unit_id] = payload
            surviving = kept

    if spec.log_transform:
        transformed = {}
        for unit_id, (start_time, values) in surviving.items():
            if np.any(values <= 0.0):
                raise ValidationError(
                    f"cannot log-transform unit {unit_id}: non-positive values "
                    "(enable require_positive)"
                )
            transformed[unit_id] = (start_time, np.log(values))
        surviving = transformed

    if not surviving:
        raise ValidationError("no units survive the filter pipeline")
    units = tuple(
        UnitSeries(uid, start, vals) for uid, (start, vals) in surviving.items()
    )
    return PanelDataset(units, tuple(variable_names)), log


def _format_float(x: float) -> str:
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def dumps_json(obj, indent: Optional[int] = None) -> str:
    """Serialize a report tree with floats at 17 significant digits.

    Deterministic: key order is insertion order, floats round-trip
    losslessly through ``float()``.
    """

    def render(node, depth: int) -> str:
        pad = "" if indent is None else "\n" + " " * (indent * (depth + 1))
        closing = "" if indent is None else "\n" + " " * (indent * depth)
        sep = "," if indent is None else ","
        if node is None:
            return "null"
        if isinstance(node, bool):
            return "true" if node else "false"
        if isinstance(node, (int, np.integer)):
            return str(int(node))
        if isinstance(node, (float, np.floating)):
            return _format_float(float(node))
        if isinstance(node, str):
            return json.dumps(node)
        if isinstance(node, np.ndarray):
            node = node.tolist()
        if isinstance(node, (list, tuple)):
            if not node:
                return "[]"
            items = [pad + render(v, depth + 1) for v in node]
            return "[" + sep.join(items) + closing + "]"
        if isinstance(node, dict):
            if not node:
                return "{}"
            items = [
                pad + json.dumps(str(k)) + (": " if indent else ":") + render(v, depth + 1)
                for k, v in node.items()
            ]
            return "{" + sep.join(items) + closing + "}"
        raise TypeError(f"cannot serialize {type(node)!r}")

    return render(obj, 0)


def loads_json(text: str):
    return json.loads(text)
