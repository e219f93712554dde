"""Running per-class mean and covariance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DimensionError, symmetrize


@dataclass
class ClassMoments:
    """Count, mean and population covariance of the points seen so far.

    An empty instance holds a zero mean and zero covariance, which is how the
    learners are initialised.
    """

    dim: int
    count: int = 0
    mean: np.ndarray = field(default=None)
    cov: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.cov is None:
            self.cov = np.zeros((self.dim, self.dim))

    def update(self, x: np.ndarray) -> "ClassMoments":
        """Fold one point in, in place, and return self.

        Mean:  m_t = m_{t-1} + (x - m_{t-1}) / N_t
        Cov:   S_t = S_{t-1} + m_{t-1} m_{t-1}^T - m_t m_t^T
                     + (x x^T - S_{t-1} - m_{t-1} m_{t-1}^T) / N_t
        followed by re-symmetrisation.
        """
        if x.shape != (self.dim,):
            raise DimensionError(f"point of shape {x.shape} for moments of dimension {self.dim}")
        n = self.count + 1
        prev = self.mean
        mean = prev + (x - prev) / n
        prev_outer = np.outer(prev, prev)
        cov = self.cov + prev_outer - np.outer(mean, mean) + (np.outer(x, x) - self.cov - prev_outer) / n
        self.count = n
        self.mean = mean
        self.cov = symmetrize(cov)
        return self

    def copy(self) -> "ClassMoments":
        return ClassMoments(self.dim, self.count, self.mean.copy(), self.cov.copy())

    def to_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassMoments":
        mean = np.asarray(d["mean"], dtype=np.float64)
        cov = np.asarray(d["cov"], dtype=np.float64)
        return cls(mean.shape[0], int(d["count"]), mean, cov)


def update(m: ClassMoments, x) -> ClassMoments:
    """Functional form: return a new ClassMoments with ``x`` folded in."""
    return m.copy().update(np.asarray(x, dtype=np.float64))


def batch_recompute(points, dim: int | None = None) -> ClassMoments:
    """Two-pass mean and population covariance of ``points``."""
    try:
        pts = np.asarray(points, dtype=np.float64)
    except ValueError as exc:
        raise DimensionError("points must all share one dimension") from exc
    if pts.size == 0:
        if dim is None:
            raise ValueError("dimension required for an empty point list")
        return ClassMoments(dim)
    if pts.ndim != 2:
        raise DimensionError("points must all share one dimension")
    if dim is not None and pts.shape[1] != dim:
        raise DimensionError(f"points of dimension {pts.shape[1]}, expected {dim}")
    n = pts.shape[0]
    mean = pts.mean(axis=0)
    centred = pts - mean
    cov = symmetrize(centred.T @ centred / n)
    return ClassMoments(pts.shape[1], n, mean, cov)
