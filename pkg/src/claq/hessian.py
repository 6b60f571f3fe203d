"""Calibration Hessian for column-order error compensation.

H = 2 * sum(x x^T) over calibration inputs, damped by lambda * I with
lambda a fixed ratio of the pre-damping mean diagonal. The cached upper
triangular factor U satisfies U^T U = H^{-1}; the column loop consumes U
row by row, which is the information the sequential update needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError

DEFAULT_DAMP_RATIO = 0.01


@dataclass
class HessianState:
    """Damped second-moment matrix plus its cached inverse factor."""

    dim: int
    matrix: np.ndarray  # damped H, float64, symmetric positive definite
    damping: float
    inverse_factor: np.ndarray  # upper triangular U with U^T U = H^{-1}


def _factor(h: np.ndarray) -> np.ndarray:
    try:
        c, low = scipy.linalg.cho_factor(h, lower=True)
        inv = scipy.linalg.cho_solve((c, low), np.eye(h.shape[0]))
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"Hessian factorization failed: {exc}")
    inv = (inv + inv.T) / 2.0
    try:
        lower = np.linalg.cholesky(inv)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"inverse Hessian is not positive definite: {exc}")
    return np.ascontiguousarray(lower.T)


def compute_hessian(
    calibration: np.ndarray,
    dim: int | None = None,
    damp_ratio: float = DEFAULT_DAMP_RATIO,
) -> HessianState:
    """Accumulate and damp the calibration Hessian, caching its factor.

    ``calibration`` is a sequence of input vectors (one per row). Requires
    at least one vector with some nonzero entry; damping is proportional
    to the mean diagonal, so an all-zero Hessian cannot be regularized.
    """
    x = np.asarray(calibration, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValidationError("calibration must be a non-empty matrix of row vectors")
    if dim is not None and x.shape[1] != dim:
        raise ValidationError(f"calibration width {x.shape[1]} != expected {dim}")
    if not np.isfinite(x).all():
        raise ValidationError("non-finite calibration values")
    d = x.shape[1]
    if damp_ratio <= 0:
        raise ValidationError("damping ratio must be positive")

    h = 2.0 * (x.T @ x)
    if not np.isfinite(h).all():
        raise NumericalError("calibration second moments overflowed")
    lam = damp_ratio * float(np.mean(np.diag(h)))
    if lam <= 0:
        raise NumericalError("all-zero calibration yields a singular Hessian")
    h[np.diag_indices(d)] += lam
    return HessianState(dim=d, matrix=h, damping=lam, inverse_factor=_factor(h))


def permuted_hessian(state: HessianState, perm: np.ndarray) -> HessianState:
    """The same Hessian with rows/columns reordered; factor recomputed."""
    perm = np.asarray(perm, dtype=np.int64)
    if np.sort(perm).tolist() != list(range(state.dim)):
        raise ValidationError("perm must be a permutation of the column indices")
    h = state.matrix[np.ix_(perm, perm)]
    return HessianState(
        dim=state.dim, matrix=h, damping=state.damping, inverse_factor=_factor(h)
    )


def synthetic_calibration(
    dim: int,
    count: int = 128,
    seed: int = 0,
    tail_prob: float = 0.01,
    tail_scale: float = 8.0,
) -> np.ndarray:
    """Seeded Gaussian calibration vectors with an optional heavy-tail mixture.

    With probability ``tail_prob`` an entry is drawn at ``tail_scale``
    times the base standard deviation, mimicking activation outliers.
    """
    if dim < 1 or count < 1:
        raise ValidationError("dim and count must be positive")
    if not 0 <= tail_prob <= 1:
        raise ValidationError("tail probability must be in [0, 1]")
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, 1.0, size=(count, dim))
    if tail_prob > 0:
        mask = rng.random((count, dim)) < tail_prob
        x = np.where(mask, x * tail_scale, x)
    return x
