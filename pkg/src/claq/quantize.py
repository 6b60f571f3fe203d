"""Column-by-column quantization with optional error compensation.

Each column is processed in natural index order: reserve the planned
number of extreme values as full-precision outliers, fit a codebook on
the remaining values, assign every entry to its nearest centroid, and
(on the compensated path) push the quantization error onto the columns
not yet processed through the inverse-Hessian factor.

Centroids and reserved values are rounded to float16 at this stage, so
every reported error already reflects exactly what the packed container
will reproduce. Reserved positions are taken from the original matrix
(the reservation plan stays independent of compensation history); the
values stored there are the current, compensation-updated ones, and the
propagated error at those positions is zero.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .allocation import ColumnPlan, ModelAllocation
from .errors import NumericalError, ValidationError
from .hessian import HessianState, permuted_hessian
from .kmeans import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    _nearest,
    exact_cluster_1d,
    lloyd_cluster,
)
from .packed import PackedTensor, measure_size, dequantize_tensor
from .weights import ModelWeights, WeightMatrix

_MASK64 = (1 << 64) - 1


def _mix64(a: int, b: int) -> int:
    # splitmix64 finalizer over the combined value; decorrelates the
    # per-column seeds derived from one user-facing seed.
    z = (a * 0x9E3779B97F4A7C15 + b) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def matrix_seed(base_seed: int, name: str) -> int:
    return _mix64(base_seed & _MASK64, zlib.crc32(name.encode()))


@dataclass
class ClusterConfig:
    """Clustering knobs shared by every column of a matrix."""

    seed: int = 0
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    use_exact_solver: bool = False  # DP oracle instead of Lloyd
    refit_on_original: bool = False  # fit codebooks on pre-compensation values
    act_order: bool = False  # process columns by descending Hessian diagonal


@dataclass
class QuantReport:
    """Reconstruction metrics for one quantized matrix."""

    name: str
    rows: int
    cols: int
    frobenius_error: float
    relative_error: float
    proxy_loss: float | None
    outlier_count: int
    bit_histogram: dict[int, int]
    equivalent_bits_index_only: float
    equivalent_bits_total: float

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "rows": self.rows,
            "cols": self.cols,
            "frobenius_error": self.frobenius_error,
            "relative_error": self.relative_error,
            "proxy_loss": self.proxy_loss,
            "outlier_count": self.outlier_count,
            "bit_histogram": {str(k): v for k, v in sorted(self.bit_histogram.items())},
            "equivalent_bits_index_only": self.equivalent_bits_index_only,
            "equivalent_bits_total": self.equivalent_bits_total,
        }


def _fit_codebook(values: np.ndarray, bits: int, cfg: ClusterConfig, col_seed: int):
    if cfg.use_exact_solver:
        return exact_cluster_1d(values, bits)
    return lloyd_cluster(values, bits, seed=col_seed, max_iter=cfg.max_iter, tol=cfg.tol)


def _quantize_core(
    w: WeightMatrix,
    plan: ColumnPlan,
    cfg: ClusterConfig,
    hessian: HessianState | None,
) -> PackedTensor:
    rows, cols = w.rows, w.cols
    if plan.cols != cols or plan.rows != rows:
        raise ValidationError(f"tensor {w.name!r}: plan shape does not match the matrix")
    if hessian is not None and hessian.dim != cols:
        raise ValidationError(
            f"tensor {w.name!r}: Hessian dim {hessian.dim} != column count {cols}"
        )

    col_order = np.arange(cols)
    if cfg.act_order:
        if hessian is None:
            raise ValidationError("activation ordering requires a Hessian")
        col_order = np.argsort(-np.diag(hessian.matrix), kind="stable")
        hessian = permuted_hessian(hessian, col_order)

    original = w.data[:, col_order]
    current = original.copy()
    bits = plan.bits[col_order]
    reserve = plan.outlier_counts[col_order]
    factor = hessian.inverse_factor if hessian is not None else None

    indices = np.zeros((rows, cols), dtype=np.uint8)
    codebooks: list[np.ndarray] = []
    out_rows: list[np.ndarray] = []
    out_cols: list[np.ndarray] = []
    out_vals: list[np.ndarray] = []

    for j in range(cols):
        col = current[:, j]
        half = int(reserve[j]) // 2
        if half > 0:
            by_value = np.argsort(original[:, j], kind="stable")
            reserved = np.sort(np.concatenate([by_value[:half], by_value[-half:]]))
        else:
            reserved = np.zeros(0, dtype=np.int64)
        keep = np.ones(rows, dtype=bool)
        keep[reserved] = False

        fit_source = original if cfg.refit_on_original else current
        fit_values = fit_source[keep, j]
        width = 1 << int(bits[j])
        if fit_values.size:
            centroids = _fit_codebook(
                fit_values, int(bits[j]), cfg, _mix64(cfg.seed & _MASK64, j)
            ).centroids
        else:
            centroids = np.zeros(width)  # fully reserved column; codebook unused
        with np.errstate(over="ignore"):
            cents16 = centroids.astype(np.float16)
        cents = cents16.astype(np.float64)
        if not np.isfinite(cents).all():
            raise NumericalError(f"tensor {w.name!r}: centroid exceeds the float16 range")

        qidx = _nearest(col, cents)
        indices[:, j] = qidx
        err = col - cents[qidx]
        err[reserved] = 0.0

        if factor is not None and j + 1 < cols:
            dj = factor[j, j]
            current[:, j + 1 :] -= np.outer(err / dj, factor[j, j + 1 :])

        codebooks.append(cents16)
        if half > 0:
            with np.errstate(over="ignore"):
                vals16 = col[reserved].astype(np.float16)
            if not np.isfinite(vals16.astype(np.float64)).all():
                raise NumericalError(
                    f"tensor {w.name!r}: reserved value exceeds the float16 range"
                )
            out_rows.append(reserved)
            out_cols.append(np.full(reserved.size, j, dtype=np.int64))
            out_vals.append(vals16)

    if not np.isfinite(current).all():
        raise NumericalError(f"tensor {w.name!r}: non-finite values during compensation")

    # Undo the column permutation so the packed tensor is in natural order.
    inverse = np.argsort(col_order)
    ocols = np.concatenate(out_cols) if out_cols else np.zeros(0, dtype=np.int64)
    packed = PackedTensor(
        name=w.name,
        rows=rows,
        cols=cols,
        precision_map=bits[inverse],
        codebooks=[codebooks[inverse[j]] for j in range(cols)],
        indices=indices[:, inverse],
        outlier_rows=np.concatenate(out_rows) if out_rows else np.zeros(0, dtype=np.int64),
        outlier_cols=col_order[ocols],
        outlier_values=np.concatenate(out_vals) if out_vals else np.zeros(0, dtype=np.float16),
    )
    return packed


def reconstruction_error(
    original: WeightMatrix, packed: PackedTensor, hessian: HessianState | None = None
) -> QuantReport:
    """Metrics of original vs dequantized, optionally with the proxy loss."""
    if (original.rows, original.cols) != (packed.rows, packed.cols):
        raise ValidationError("shape mismatch between original and packed tensor")
    delta = original.data - dequantize_tensor(packed).data
    fro = float(np.linalg.norm(delta))
    denom = float(np.linalg.norm(original.data))
    if denom > 0:
        rel = fro / denom
    else:
        rel = 0.0 if fro == 0 else float("inf")
    proxy = None
    if hessian is not None:
        if hessian.dim != original.cols:
            raise ValidationError("Hessian dim does not match the matrix")
        proxy = float(np.sum((delta @ hessian.matrix) * delta))
    hist: dict[int, int] = {}
    for b in packed.precision_map.tolist():
        hist[b] = hist.get(b, 0) + 1
    size = measure_size(packed)
    return QuantReport(
        name=original.name,
        rows=original.rows,
        cols=original.cols,
        frobenius_error=fro,
        relative_error=rel,
        proxy_loss=proxy,
        outlier_count=packed.outlier_count,
        bit_histogram=hist,
        equivalent_bits_index_only=size.equivalent_bits_index_only,
        equivalent_bits_total=size.equivalent_bits_total,
    )


def quantize_matrix(
    w: WeightMatrix, plan: ColumnPlan, hessian: HessianState, cfg: ClusterConfig | None = None
) -> tuple[PackedTensor, QuantReport]:
    """Quantize with column-order error compensation through the Hessian."""
    cfg = cfg or ClusterConfig()
    packed = _quantize_core(w, plan, cfg, hessian)
    return packed, reconstruction_error(w, packed, hessian)


def quantize_matrix_plain(
    w: WeightMatrix, plan: ColumnPlan, cfg: ClusterConfig | None = None
) -> tuple[PackedTensor, QuantReport]:
    """Baseline path: same clustering and reservation, no compensation."""
    cfg = cfg or ClusterConfig()
    packed = _quantize_core(w, plan, cfg, None)
    return packed, reconstruction_error(w, packed, None)


def quantize_model(
    model: ModelWeights,
    allocation: ModelAllocation,
    cfg: ClusterConfig | None = None,
    hessians: dict[str, HessianState] | None = None,
    threads: int | None = None,
) -> tuple[list[PackedTensor], list[QuantReport]]:
    """Quantize every matrix of a model, optionally in a thread pool.

    Matrices are independent, so results do not depend on the pool size;
    outputs are returned in model order. ``hessians`` maps matrix names to
    states; without it the plain path runs.
    """
    cfg = cfg or ClusterConfig()
    base_seed = cfg.seed

    def run(w: WeightMatrix) -> tuple[PackedTensor, QuantReport]:
        plan = allocation.plans.get(w.name)
        if plan is None:
            raise ValidationError(f"no plan for tensor {w.name!r}")
        local = ClusterConfig(
            seed=matrix_seed(base_seed, w.name),
            max_iter=cfg.max_iter,
            tol=cfg.tol,
            use_exact_solver=cfg.use_exact_solver,
            refit_on_original=cfg.refit_on_original,
            act_order=cfg.act_order,
        )
        if hessians is not None:
            return quantize_matrix(w, plan, hessians[w.name], local)
        return quantize_matrix_plain(w, plan, local)

    matrices = list(model)
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, matrices))
    else:
        results = [run(w) for w in matrices]
    return [r[0] for r in results], [r[1] for r in results]
