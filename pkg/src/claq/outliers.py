"""Per-column outlier ratios and the rankings derived from them.

A weight is an outlier when its magnitude exceeds S times the mean
absolute value of the whole matrix. The per-column fraction of such
weights is the quantization-sensitivity metric that drives both adaptive
precision and outlier reservation; ranking the columns by it (descending,
ties broken by ascending column index) gives a deterministic order that
all downstream selections share.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .weights import ModelWeights, WeightMatrix

DEFAULT_SCALE = 13.0

_LAYER_RE = re.compile(r"layers\.(\d+)\.")


@dataclass
class OutlierProfile:
    """Per-column outlier ratios for one matrix plus the derived ranking."""

    ratios: np.ndarray
    scale: float
    matrix_mean_abs: float
    order: np.ndarray  # column indices, descending ratio, ties ascending

    @property
    def cols(self) -> int:
        return self.ratios.shape[0]


def outlier_ratio(w: WeightMatrix, scale: float = DEFAULT_SCALE) -> OutlierProfile:
    """Fraction of entries per column strictly above scale * mean(|W|)."""
    if scale <= 0:
        raise ValidationError(f"scale must be positive, got {scale}")
    a = np.abs(w.data)
    mean_abs = float(a.mean())
    threshold = scale * mean_abs
    counts = (a > threshold).sum(axis=0)
    ratios = counts / w.rows
    order = np.argsort(-ratios, kind="stable")
    return OutlierProfile(ratios=ratios, scale=float(scale), matrix_mean_abs=mean_abs, order=order)


def top_count(cols: int, fraction: float) -> int:
    """ceil(fraction * cols), guarded against float noise on exact products."""
    return min(cols, max(1, math.ceil(fraction * cols - 1e-9)))


def threshold_for_fraction(
    profile: OutlierProfile, fraction: float
) -> tuple[float, np.ndarray]:
    """Select the top ceil(fraction * cols) columns of the ranking.

    Returns the ratio of the last selected column (the threshold value)
    and the selected column indices sorted ascending. Under ties the
    returned index set, not the scalar threshold, is authoritative.
    """
    if profile.cols == 0:
        raise ValidationError("empty profile")
    if not 0 < fraction <= 1:
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    m = top_count(profile.cols, fraction)
    selected = profile.order[:m]
    threshold = float(profile.ratios[selected[-1]])
    return threshold, np.sort(selected)


def layer_key(name: str) -> str:
    """Grouping key for per-layer aggregation: 'layers.<n>' prefix if present."""
    match = _LAYER_RE.search(name)
    return f"layers.{match.group(1)}" if match else name


@dataclass
class MatrixOutlierStats:
    name: str
    rows: int
    cols: int
    total_outlier_fraction: float
    top_decile_share: float
    max_ratio: float


def model_outlier_stats(
    model: ModelWeights, scale: float = DEFAULT_SCALE
) -> tuple[list[MatrixOutlierStats], dict[str, float]]:
    """Per-matrix outlier statistics plus a per-layer aggregate.

    The top-decile share is the fraction of a matrix's outliers held by
    its ceil(10%) highest-ratio columns; it is 0.0 for matrices without
    outliers.
    """
    per_matrix = []
    layer_outliers: dict[str, int] = {}
    layer_params: dict[str, int] = {}
    for w in model:
        a = np.abs(w.data)
        threshold = scale * float(a.mean())
        counts = (a > threshold).sum(axis=0)
        total = int(counts.sum())
        order = np.argsort(-(counts / w.rows), kind="stable")
        m = top_count(w.cols, 0.10)
        share = float(counts[order[:m]].sum() / total) if total > 0 else 0.0
        per_matrix.append(
            MatrixOutlierStats(
                name=w.name,
                rows=w.rows,
                cols=w.cols,
                total_outlier_fraction=total / (w.rows * w.cols),
                top_decile_share=share,
                max_ratio=float(counts.max() / w.rows),
            )
        )
        key = layer_key(w.name)
        layer_outliers[key] = layer_outliers.get(key, 0) + total
        layer_params[key] = layer_params.get(key, 0) + w.rows * w.cols
    layers = {k: layer_outliers[k] / layer_params[k] for k in layer_outliers}
    return per_matrix, layers
