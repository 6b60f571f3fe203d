"""Turning outlier profiles into per-column bit and reservation plans.

Adaptive precision assigns the higher width of a two-element candidate
set to the top fraction of columns in outlier order. Outlier reservation
converts a bit budget (bits per parameter, at 48 bits per reserved
scalar) into per-column even counts, splitting the budget between the
top-decile columns and the rest. Fusion presets bundle the two: the
preset label is base bits + adaptive-precision increment + reservation
budget, e.g. 2.12 = 2 + 0.05 + 0.07.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InfeasibleBudgetError, ValidationError
from .outliers import (
    DEFAULT_SCALE,
    OutlierProfile,
    outlier_ratio,
    threshold_for_fraction,
    top_count,
)
from .packed import (
    ALLOWED_BITS,
    OUTLIER_BITS,
    codebook_bits_for,
    index_bits_for,
    size_report_from_counts,
)
from .weights import ModelWeights

SPLIT_SETTINGS = {
    # budget share (top-decile columns, remaining columns)
    1: (0.19, 0.81),
    2: (0.28, 0.72),
    3: (0.37, 0.63),
}
DEFAULT_SPLIT = SPLIT_SETTINGS[2]
DEFAULT_TOP_FRACTION = 0.10

# preset -> (base bits, bit pair, high-column fraction, reservation budget)
FUSION_PRESETS = {
    "2.12": (2, (4, 2), 0.05 / 2, 0.07),
    "2.24": (2, (4, 2), 0.10 / 2, 0.13),
    "3.12": (3, (4, 3), 0.05 / 1, 0.07),
    "3.23": (3, (4, 3), 0.10 / 1, 0.13),
}


@dataclass
class ColumnPlan:
    """Per-column bit widths and reserved-outlier counts for one matrix."""

    rows: int
    bits: np.ndarray  # per-column width
    outlier_counts: np.ndarray  # per-column reserved scalars, always even
    t_ap: float | None = None  # adaptive-precision threshold, audit only
    t_or: float | None = None  # reservation threshold, audit only

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=np.int64)
        self.outlier_counts = np.asarray(self.outlier_counts, dtype=np.int64)
        if self.bits.ndim != 1 or self.outlier_counts.shape != self.bits.shape:
            raise ValidationError("plan arrays must be 1-D and matched in length")
        bad = set(self.bits.tolist()) - set(ALLOWED_BITS)
        if bad:
            raise ValidationError(f"unsupported bit widths {sorted(bad)}")
        if np.any(self.outlier_counts < 0) or np.any(self.outlier_counts % 2 != 0):
            raise ValidationError("reserved counts must be even and non-negative")
        if np.any(self.outlier_counts > self.rows):
            raise ValidationError("reserved count exceeds the row count")

    @property
    def cols(self) -> int:
        return self.bits.shape[0]

    @property
    def total_reserved(self) -> int:
        return int(self.outlier_counts.sum())


def uniform_plan(rows: int, cols: int, bits: int) -> ColumnPlan:
    if bits not in ALLOWED_BITS:
        raise ValidationError(f"bit width must be one of {ALLOWED_BITS}")
    return ColumnPlan(rows=rows, bits=np.full(cols, bits), outlier_counts=np.zeros(cols))


def allocate_precision(
    profile: OutlierProfile, bit_pair: tuple[int, int], high_fraction: float
) -> tuple[np.ndarray, float | None]:
    """Assign p1 to the top high_fraction of columns in outlier order, p2 to the rest."""
    p1, p2 = int(bit_pair[0]), int(bit_pair[1])
    if p1 not in ALLOWED_BITS or p2 not in ALLOWED_BITS or p1 <= p2:
        raise ValidationError(f"invalid bit pair ({p1}, {p2})")
    if not 0 <= high_fraction <= 1:
        raise ValidationError(f"high fraction must be in [0, 1], got {high_fraction}")
    bits = np.full(profile.cols, p2, dtype=np.int64)
    if high_fraction == 0:
        return bits, None
    t_ap, selected = threshold_for_fraction(profile, high_fraction)
    bits[selected] = p1
    return bits, t_ap


def _spread_evenly(
    counts: np.ndarray, group_in_order: np.ndarray, target: float
) -> None:
    # Give every column of the group the same even count, then hand the
    # leftover pairs to the highest-ratio columns first.
    m = group_in_order.shape[0]
    if m == 0 or target <= 0:
        return
    base_pairs = int(target // (2 * m))
    counts[group_in_order] = 2 * base_pairs
    extra = int((target - base_pairs * 2 * m) // 2)
    counts[group_in_order[:extra]] += 2


def allocate_outlier_budget(
    profile: OutlierProfile,
    rows: int,
    budget_bits_per_param: float,
    split: tuple[float, float] = DEFAULT_SPLIT,
    top_fraction: float = DEFAULT_TOP_FRACTION,
) -> tuple[np.ndarray, float | None]:
    """Convert a reservation budget into per-column even counts.

    The total number of reservable scalars is floor(budget * params / 48).
    A ``split = (s_top, s_rest)`` share goes to the top ``top_fraction``
    columns in outlier order and the rest to the remaining columns, spread
    evenly within each group (leftover pairs to higher-ratio columns).
    Counts are even because each column reserves the same number of
    largest and smallest values. Budgets implying more reservations than
    a column has rows are clamped with a warning.
    """
    if budget_bits_per_param < 0:
        raise ValidationError("reservation budget must be non-negative")
    s_top, s_rest = split
    if s_top < 0 or s_rest < 0 or abs(s_top + s_rest - 1.0) > 1e-9:
        raise ValidationError(f"split shares must be non-negative and sum to 1, got {split}")
    cols = profile.cols
    counts = np.zeros(cols, dtype=np.int64)
    total = int(budget_bits_per_param * rows * cols // OUTLIER_BITS)
    if total == 0:
        return counts, None

    t_or, _ = threshold_for_fraction(profile, top_fraction)
    m = top_count(cols, top_fraction)
    top_in_order = profile.order[:m]
    rest_in_order = profile.order[m:]

    n_top = int(math.floor(s_top * total + 0.5))
    if rest_in_order.size == 0:
        n_top = total
    _spread_evenly(counts, top_in_order, n_top)
    _spread_evenly(counts, rest_in_order, total - n_top)

    max_even = rows - (rows % 2)
    if np.any(counts > max_even):
        warnings.warn(
            "reservation budget exceeds column capacity; counts clamped", stacklevel=2
        )
        np.minimum(counts, max_even, out=counts)
    return counts, t_or


@dataclass
class ModelAllocation:
    """Per-matrix column plans plus the achieved equivalent bit widths."""

    plans: dict[str, ColumnPlan]
    achieved_bits_index_only: float
    achieved_bits_total: float
    config: dict = field(default_factory=dict)


def equivalent_bits_of(plans: dict[str, ColumnPlan]) -> tuple[float, float]:
    """Recompute (index-only, total) equivalent bits from plans alone.

    Uses the same cost model as ``measure_size``, so the numbers match
    the eventually packed model exactly.
    """
    index_bits = codebook_bits = outliers = cols_total = params = 0
    for plan in plans.values():
        index_bits += index_bits_for(plan.rows, plan.bits)
        codebook_bits += codebook_bits_for(plan.bits)
        outliers += plan.total_reserved
        cols_total += plan.cols
        params += plan.rows * plan.cols
    report = size_report_from_counts(index_bits, codebook_bits, outliers, cols_total, params)
    return report.equivalent_bits_index_only, report.equivalent_bits_total


def plan_fusion(
    model: ModelWeights,
    preset: str | None = None,
    custom: tuple[float, float, float] | None = None,
    *,
    bit_pair: tuple[int, int] | None = None,
    scale: float = DEFAULT_SCALE,
    split: tuple[float, float] = DEFAULT_SPLIT,
    top_fraction: float = DEFAULT_TOP_FRACTION,
) -> ModelAllocation:
    """Build per-matrix plans for a fusion preset or a custom budget triple.

    ``custom`` is (base_bits, ap_increment, or_budget), both budgets in
    bits per parameter. The high-column fraction follows from the
    increment: f = increment / (p1 - p2).
    """
    if (preset is None) == (custom is None):
        raise ValidationError("specify exactly one of preset or custom")
    if preset is not None:
        try:
            base, pair, fraction, or_budget = FUSION_PRESETS[preset]
        except KeyError:
            raise ValidationError(
                f"unknown preset {preset!r}; choose from {sorted(FUSION_PRESETS)}"
            )
        increment = fraction * (pair[0] - pair[1])
    else:
        base_f, increment, or_budget = custom
        base = int(base_f)
        if base not in ALLOWED_BITS:
            raise ValidationError(f"base bits must be one of {ALLOWED_BITS}")
        if increment < 0 or or_budget < 0:
            raise ValidationError("budgets must be non-negative")
        pair = bit_pair if bit_pair is not None else (4, base)
        if increment == 0:
            fraction = 0.0
        else:
            if pair[0] <= base:
                raise ValidationError(f"bit pair {pair} cannot realize an increment over base {base}")
            if increment > pair[0] - pair[1]:
                raise InfeasibleBudgetError(
                    f"increment {increment} exceeds the bit-pair span {pair[0] - pair[1]}"
                )
            fraction = increment / (pair[0] - pair[1])

    plans: dict[str, ColumnPlan] = {}
    for w in model:
        profile = outlier_ratio(w, scale)
        if fraction > 0:
            bits, t_ap = allocate_precision(profile, pair, fraction)
        else:
            bits, t_ap = np.full(w.cols, base, dtype=np.int64), None
        counts, t_or = allocate_outlier_budget(
            profile, w.rows, or_budget, split=split, top_fraction=top_fraction
        )
        plans[w.name] = ColumnPlan(
            rows=w.rows, bits=bits, outlier_counts=counts, t_ap=t_ap, t_or=t_or
        )

    idx_only, total = equivalent_bits_of(plans)
    config = {
        "preset": preset,
        "base_bits": base,
        "bit_pair": list(pair),
        "high_fraction": fraction,
        "ap_increment": fraction * (pair[0] - pair[1]) if fraction else 0.0,
        "or_budget_bits_per_param": or_budget,
        "or_split": list(split),
        "top_fraction": top_fraction,
        "outlier_scale": scale,
    }
    return ModelAllocation(
        plans=plans,
        achieved_bits_index_only=idx_only,
        achieved_bits_total=total,
        config=config,
    )


def _rle_ints(values: np.ndarray) -> list[list[int]]:
    runs: list[list[int]] = []
    for v in values.tolist():
        if runs and runs[-1][0] == v:
            runs[-1][1] += 1
        else:
            runs.append([int(v), 1])
    return runs


def allocation_to_dict(alloc: ModelAllocation) -> dict:
    """JSON-ready audit form: RLE column lists, thresholds, config echo."""
    matrices = {}
    for name, plan in alloc.plans.items():
        matrices[name] = {
            "rows": plan.rows,
            "cols": plan.cols,
            "bits_rle": _rle_ints(plan.bits),
            "outlier_counts_rle": _rle_ints(plan.outlier_counts),
            "t_ap": plan.t_ap,
            "t_or": plan.t_or,
            "reserved_total": plan.total_reserved,
        }
    return {
        "config": alloc.config,
        "achieved_bits_index_only": alloc.achieved_bits_index_only,
        "achieved_bits_total": alloc.achieved_bits_total,
        "matrices": matrices,
    }


def save_allocation(alloc: ModelAllocation, path: str | Path, extra: dict | None = None) -> None:
    payload = allocation_to_dict(alloc)
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
