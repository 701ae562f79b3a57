"""Panel containers, estimation configuration, and the shared result model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ValidationError


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class UnitSeries:
    """Observations for one cross-section unit.

    ``values`` is T_i x m with row t holding the m variables at time
    ``times[t]``. Time stamps are integers; a valid unit has stride exactly 1
    (no gaps), which ``validate`` checks at estimation time. When ``times``
    is omitted the stamps are ``start_time, start_time + 1, ...`` and the
    unit is gap-free by construction.
    """

    unit_id: str
    start_time: int
    values: np.ndarray
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim != 2:
            raise ValueError(f"unit {self.unit_id}: values must be 2-d (T_i x m)")
        object.__setattr__(self, "values", arr)
        if self.times is not None:
            t = _frozen_array(self.times, dtype=int)
            if t.ndim != 1 or t.shape[0] != arr.shape[0]:
                raise ValueError(f"unit {self.unit_id}: times must match row count")
            if t.size and np.any(np.diff(t) <= 0):
                raise ValueError(f"unit {self.unit_id}: times must be increasing")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "start_time", int(t[0]) if t.size else self.start_time)

    @property
    def t_len(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def time_stamps(self) -> np.ndarray:
        if self.times is not None:
            return self.times
        return np.arange(self.start_time, self.start_time + self.t_len)

    def has_gap(self) -> bool:
        if self.times is None:
            return False
        return bool(self.times.size > 1 and np.any(np.diff(self.times) != 1))


@dataclass(frozen=True)
class PanelDataset:
    """An n-unit panel of m-variate series, possibly of unequal lengths."""

    units: tuple[UnitSeries, ...]
    variable_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        if not self.units:
            raise ValueError("panel needs at least one unit")
        m = len(self.variable_names)
        if m < 1:
            raise ValueError("panel needs at least one variable")
        for u in self.units:
            if u.m != m:
                raise ValueError(f"unit {u.unit_id} has {u.m} variables, expected {m}")

    @property
    def n(self) -> int:
        return len(self.units)

    @property
    def m(self) -> int:
        return len(self.variable_names)

    @property
    def t_lengths(self) -> np.ndarray:
        return np.array([u.t_len for u in self.units])

    def is_balanced(self) -> bool:
        lengths = self.t_lengths
        return bool(np.all(lengths == lengths[0]))

    @classmethod
    def from_balanced(
        cls,
        values: np.ndarray,
        variable_names: Optional[Sequence[str]] = None,
        unit_ids: Optional[Sequence[str]] = None,
        start_time: int = 1,
    ) -> "PanelDataset":
        """Build a balanced panel from an (n, T, m) array."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 3:
            raise ValueError("expected an (n, T, m) array")
        n, _, m = values.shape
        if variable_names is None:
            variable_names = [f"v{k + 1}" for k in range(m)]
        if unit_ids is None:
            width = len(str(n))
            unit_ids = [f"u{str(i + 1).zfill(width)}" for i in range(n)]
        units = tuple(
            UnitSeries(uid, start_time, values[i]) for i, uid in enumerate(unit_ids)
        )
        return cls(units, tuple(variable_names))


@dataclass(frozen=True)
class Normalized:
    """Identify the first r variables: the top r x r block of B is pinned to I_r."""

    r: int

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("rank must be >= 1")


@dataclass(frozen=True)
class General:
    """General exact identification R B = A with full-rank R (r x m) and A (r x r)."""

    restrictions: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        restr = _frozen_array(self.restrictions)
        targ = _frozen_array(self.targets)
        if restr.ndim != 2 or targ.ndim != 2:
            raise ValueError("restrictions and targets must be matrices")
        r = restr.shape[0]
        if targ.shape != (r, r):
            raise ValueError("targets must be r x r")
        if restr.shape[1] <= r:
            raise ValueError("need r < m")
        if np.linalg.matrix_rank(restr) < r or np.linalg.matrix_rank(targ) < r:
            raise ValueError("restrictions and targets must have rank r")
        object.__setattr__(self, "restrictions", restr)
        object.__setattr__(self, "targets", targ)

    @property
    def r(self) -> int:
        return self.restrictions.shape[0]


IdentificationScheme = Union[Normalized, General]


@dataclass(frozen=True)
class EstimationConfig:
    """Knobs for the estimation pipeline.

    ``q`` is either a fixed integer >= 2 or "auto" for the lower integer part
    of max(2, T_i^(1/3)) applied per unit. The count of long run relations
    thresholds eigenvalues of the pooled correlation matrix at
    ``c * T_ave**(-delta)``, with the arithmetic panel average of T_i by
    default ("harmonic" is also accepted).
    """

    q: Union[int, str] = 2
    delta: float = 0.25
    c: float = 1.0
    rank: Optional[int] = None
    identification: Optional[IdentificationScheme] = None
    null_values: Optional[np.ndarray] = None
    scale_for_selection: bool = True
    threshold_t_ave: str = "arithmetic"
    relative_length_warn: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.q, str):
            if self.q != "auto":
                raise ValueError("q must be an integer >= 2 or 'auto'")
        elif self.q < 2:
            raise ValueError("q must be >= 2")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank override must be >= 1")
        if self.threshold_t_ave not in ("arithmetic", "harmonic"):
            raise ValueError("threshold_t_ave must be 'arithmetic' or 'harmonic'")
        if self.null_values is not None:
            object.__setattr__(self, "null_values", _frozen_array(self.null_values))


@dataclass(frozen=True)
class LongRunEstimate:
    """Identified long run relations with inference (normalized case)."""

    r: int
    b_hat: np.ndarray
    theta_hat: Optional[np.ndarray]
    var_vec_theta: Optional[np.ndarray]
    std_errors: Optional[np.ndarray]
    t_stats: Optional[np.ndarray]
    q_used: Union[int, str]
    n: int
    t_ave: float

    def __post_init__(self):
        object.__setattr__(self, "b_hat", _frozen_array(self.b_hat))
        for name in ("theta_hat", "var_vec_theta", "std_errors", "t_stats"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen_array(val))


@dataclass(frozen=True)
class Violation:
    unit_id: str
    kind: str  # "gap" | "length" | "non_finite"
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    warnings: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations


def resolve_q(t_len: int, q: Union[int, str]) -> int:
    """Sub-sample count for one unit under a fixed-q or the "auto" rule."""
    if q == "auto":
        guess = int(t_len ** (1.0 / 3.0))
        if (guess + 1) ** 3 <= t_len:  # exact cubes land below the floor in fp
            guess += 1
        return max(2, guess)
    return int(q)


def validate(panel: PanelDataset, config: EstimationConfig) -> ValidationReport:
    """Report per-unit violations; an empty report means the panel is estimable.

    Checks gaps (time stride != 1), T_i >= 2 q_i, and non-finite values.
    Side-effect free and idempotent.
    """
    violations: list[Violation] = []
    warnings: list[str] = []
    for u in panel.units:
        if u.has_gap():
            stamps = u.times
            jumps = np.flatnonzero(np.diff(stamps) != 1)
            first = int(stamps[jumps[0]])
            violations.append(
                Violation(u.unit_id, "gap", f"gap after time {first}")
            )
        if not np.all(np.isfinite(u.values)):
            bad = int(np.count_nonzero(~np.isfinite(u.values)))
            violations.append(
                Violation(u.unit_id, "non_finite", f"{bad} non-finite value(s)")
            )
        qi = resolve_q(u.t_len, config.q)
        if u.t_len < 2 * qi:
            violations.append(
                Violation(u.unit_id, "length", f"T_i={u.t_len} < 2*q_i={2 * qi}")
            )
    if config.relative_length_warn is not None:
        t_max = int(panel.t_lengths.max())
        floor = config.relative_length_warn * t_max
        for u in panel.units:
            if u.t_len < floor:
                warnings.append(
                    f"unit {u.unit_id}: T_i={u.t_len} below "
                    f"{config.relative_length_warn:g} * max T_i ({t_max})"
                )
    return ValidationReport(tuple(violations), tuple(warnings))


def require_valid(panel: PanelDataset, config: EstimationConfig) -> None:
    report = validate(panel, config)
    if not report.ok:
        lines = "; ".join(
            f"{v.unit_id}: {v.kind} ({v.detail})" for v in report.violations[:5]
        )
        more = len(report.violations) - 5
        if more > 0:
            lines += f"; and {more} more"
        raise ValidationError(f"panel fails validation: {lines}")
