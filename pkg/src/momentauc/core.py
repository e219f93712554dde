"""Dense vector and symmetric-matrix primitives.

Vectors are 1-D float64 numpy arrays and symmetric matrices are 2-D float64
arrays. These helpers add the dimension checks and the PSD round-off clamp the
learners rely on; everything else is plain numpy.
"""
from __future__ import annotations

import numpy as np

Vector = np.ndarray
SymMatrix = np.ndarray

# Relative threshold below which a negative w'Mw on a covariance is round-off.
PSD_CLAMP_RTOL = 1e-12


class DimensionError(ValueError):
    """Raised when operand dimensions do not line up."""


def as_vector(v, dim: int | None = None) -> Vector:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


def symmetrize(m: np.ndarray) -> SymMatrix:
    """Return (M + M^T) / 2, which is exactly symmetric in floating point."""
    return 0.5 * (m + m.T)


def _check_square(m: np.ndarray, dim: int) -> None:
    if m.ndim != 2 or m.shape != (dim, dim):
        raise DimensionError(f"matrix of shape {m.shape} incompatible with dimension {dim}")


def dot(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionError(f"dot of shapes {u.shape} and {v.shape}")
    return float(u @ v)


def matvec(m, w) -> Vector:
    m = np.asarray(m, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {w.shape}")
    _check_square(m, w.shape[0])
    return m @ w


def quad_form(m, w, psd: bool = False) -> float:
    """Return w^T M w.

    With ``psd=True`` (M is a covariance built by this library) a tiny negative
    result, no larger in magnitude than 1e-12 * ||w||^2 * trace(M), is clamped
    to zero. Anything more negative means M is not a covariance and raises.
    """
    m = np.asarray(m, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {w.shape}")
    _check_square(m, w.shape[0])
    raw = float(w @ (m @ w))
    if psd:
        return clamp_psd(raw, float(w @ w), float(np.trace(m)))
    return raw


def clamp_psd(raw: float, w_sqnorm: float, trace: float) -> float:
    if raw >= 0.0:
        return raw
    if raw < -PSD_CLAMP_RTOL * w_sqnorm * abs(trace):
        raise ValueError(f"quadratic form {raw!r} on a covariance is below round-off tolerance")
    return 0.0
