"""Linear online AUC learners.

:class:`MomentAUC` keeps the mean and covariance of each class and takes one
online gradient step per instance on

    L_t(w) = lam/2 ||w||^2 + psi(y_t w^T(x_t - xbar_t), w^T Sigma_t w)

where xbar_t, Sigma_t are the moments of the opposite class seen so far.
Perceptron and PA-I are the usual accuracy-driven baselines.
"""
from __future__ import annotations

import numpy as np

from .core import DimensionError
from .moments import ClassMoments
from .schedules import ConstantStep, InverseTimeStep, schedule_from_dict
from .surrogate import LossKind, eval_and_grad


def _check_label(y) -> int:
    if y not in (1, -1):
        raise ValueError(f"label must be +1 or -1, got {y!r}")
    return int(y)


class MomentAUC:
    """One-pass AUC maximisation from class moments.

    ``loss="hinge"`` uses psi_M, ``loss="square"`` uses psi_S / 2. Rounds with
    no opposite-class history are skipped (no loss, no step) unless
    ``strict_paper_init`` is set, in which case they are scored against the
    zero initial moments.
    """

    def __init__(self, dim: int, loss="hinge", lam: float = 1.0, schedule=None,
                 strict_paper_init: bool = False):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.dim = dim
        self.loss = LossKind.parse(loss)
        self.lam = float(lam)
        if schedule is None:
            schedule = InverseTimeStep(lam) if lam > 0 else ConstantStep(0.01)
        self.schedule = schedule
        self.strict_paper_init = strict_paper_init
        self.w = np.zeros(dim)
        self.pos = ClassMoments(dim)
        self.neg = ClassMoments(dim)
        self.t = 1
        self.updates = 0

    def step(self, x, y) -> float | None:
        """Consume one instance; return the round loss L_t(w_t) or None on a skip round."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimensionError(f"instance of shape {x.shape}, model dimension {self.dim}")
        y = _check_label(y)
        same, other = (self.pos, self.neg) if y == 1 else (self.neg, self.pos)
        loss = None
        if other.count > 0 or self.strict_paper_init:
            w = self.w
            psi, grad = eval_and_grad(self.loss, x, y, other, w, allow_empty=True)
            loss = 0.5 * self.lam * float(w @ w) + psi
            self.updates += 1
            eta = self.schedule(self.updates)
            w_new = (1.0 - eta * self.lam) * w - eta * grad
            if not np.all(np.isfinite(w_new)):
                raise FloatingPointError(f"weights diverged at round {self.t}")
            self.w = w_new
        same.update(x)
        self.t += 1
        return loss

    def score(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimensionError(f"instance of shape {x.shape}, model dimension {self.dim}")
        return float(self.w @ x)

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.w

    def fit(self, X, y) -> list:
        """One pass over the rows of X; returns the per-round losses (None for skips)."""
        return [self.step(xi, int(yi)) for xi, yi in zip(np.asarray(X, dtype=np.float64), y)]

    def to_dict(self) -> dict:
        return {
            "kind": "moment_auc",
            "dim": self.dim,
            "loss": self.loss.value,
            "lam": self.lam,
            "schedule": self.schedule.to_dict(),
            "strict_paper_init": self.strict_paper_init,
            "w": self.w.tolist(),
            "pos": self.pos.to_dict(),
            "neg": self.neg.to_dict(),
            "t": self.t,
            "updates": self.updates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MomentAUC":
        m = cls(d["dim"], d["loss"], d["lam"], schedule_from_dict(d["schedule"]), d["strict_paper_init"])
        m.w = np.asarray(d["w"], dtype=np.float64)
        m.pos = ClassMoments.from_dict(d["pos"])
        m.neg = ClassMoments.from_dict(d["neg"])
        m.t = d["t"]
        m.updates = d["updates"]
        return m


class Perceptron:
    def __init__(self, dim: int):
        self.dim = dim
        self.w = np.zeros(dim)

    def step(self, x, y) -> None:
        x = np.asarray(x, dtype=np.float64)
        y = _check_label(y)
        if x.shape != (self.dim,):
            raise DimensionError(f"instance of shape {x.shape}, model dimension {self.dim}")
        if y * float(self.w @ x) <= 0:
            self.w = self.w + y * x

    def score(self, x) -> float:
        return float(self.w @ np.asarray(x, dtype=np.float64))

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.w

    def fit(self, X, y) -> list:
        for xi, yi in zip(np.asarray(X, dtype=np.float64), y):
            self.step(xi, int(yi))
        return []

    def to_dict(self) -> dict:
        return {"kind": "perceptron", "dim": self.dim, "w": self.w.tolist()}


class PassiveAggressive(Perceptron):
    """PA-I: tau = min(C, hinge / ||x||^2), w += tau y x."""

    def __init__(self, dim: int, C: float = 1.0):
        if not C > 0:
            raise ValueError("C must be positive")
        super().__init__(dim)
        self.C = float(C)

    def step(self, x, y) -> None:
        x = np.asarray(x, dtype=np.float64)
        y = _check_label(y)
        if x.shape != (self.dim,):
            raise DimensionError(f"instance of shape {x.shape}, model dimension {self.dim}")
        hinge = max(0.0, 1.0 - y * float(self.w @ x))
        sq = float(x @ x)
        if hinge == 0.0 or sq == 0.0:
            return
        tau = min(self.C, hinge / sq)
        self.w = self.w + tau * y * x

    def to_dict(self) -> dict:
        return {"kind": "pa1", "dim": self.dim, "C": self.C, "w": self.w.tolist()}
