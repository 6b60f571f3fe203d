"""Seeded synthetic weight models with column-concentrated outliers.

The generator mimics the outlier structure of transformer weight
matrices: a Gaussian bulk, a minority of "hot" columns carrying many
large-magnitude entries of diverse sizes, and a sparse sprinkling of
extreme entries across all columns. Most outliers land in the hot
columns, so ranking columns by outlier ratio is informative, while the
spread entries reward reserving extremes over raising codebook
precision.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .weights import ModelWeights, WeightMatrix

_ROLES = (
    "self_attn.q_proj.weight",
    "self_attn.k_proj.weight",
    "self_attn.v_proj.weight",
    "self_attn.o_proj.weight",
    "mlp.gate_proj.weight",
    "mlp.up_proj.weight",
    "mlp.down_proj.weight",
)


def synthetic_matrix(
    rows: int,
    cols: int,
    rng: np.random.Generator,
    base_std: float = 0.02,
    hot_fraction: float = 0.10,
    hot_entries: int = 32,
    hot_magnitude: tuple[float, float] = (0.3, 1.5),
    spread_prob: float = 0.005,
    spread_magnitude: tuple[float, float] = (0.5, 2.5),
) -> np.ndarray:
    data = rng.normal(0.0, base_std, size=(rows, cols))

    spread = rng.random((rows, cols)) < spread_prob
    n_spread = int(spread.sum())
    if n_spread:
        data[spread] = rng.uniform(*spread_magnitude, size=n_spread) * rng.choice(
            (-1.0, 1.0), size=n_spread
        )

    n_hot = max(1, int(round(hot_fraction * cols)))
    hot_cols = rng.choice(cols, size=n_hot, replace=False)
    for c in hot_cols:
        picks = rng.choice(rows, size=min(hot_entries, rows), replace=False)
        data[picks, c] = rng.uniform(*hot_magnitude, size=picks.size) * rng.choice(
            (-1.0, 1.0), size=picks.size
        )
    return data


def synthetic_model(
    n_matrices: int = 8,
    rows: int = 512,
    cols: int = 512,
    seed: int = 0,
    **matrix_kwargs,
) -> ModelWeights:
    """A seeded heavy-tailed model, one matrix per synthetic layer."""
    if n_matrices < 1:
        raise ValidationError("need at least one matrix")
    rng = np.random.default_rng(seed)
    matrices = []
    for i in range(n_matrices):
        name = f"layers.{i}.{_ROLES[i % len(_ROLES)]}"
        matrices.append(
            WeightMatrix(name=name, data=synthetic_matrix(rows, cols, rng, **matrix_kwargs))
        )
    return ModelWeights(
        matrices=matrices,
        metadata={"source": "synthetic", "seed": str(seed)},
    )
