"""Kernelized online AUC learner over budgeted per-class support buffers.

The classifier is f = sum_i alpha_i k(x_i, .) over the points held in the
positive and negative buffers. Each round compares the incoming point with
the opposite-class buffer through the mean and variance of f on it, takes one
functional gradient step, then pushes the point into its own buffer. A full
buffer evicts its oldest point and hands that point's weight to the member
whose kernel section best approximates it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DimensionError
from .schedules import InverseTimeStep, schedule_from_dict
from .surrogate import EPS_SIGMA, LossKind, _psi_m_value

EVICTION_RULES = ("residual", "paper_literal")


@dataclass(frozen=True)
class GaussianKernel:
    """k(x, z) = exp(-||x - z||^2 / width^2)."""

    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("kernel width must be positive")

    def __call__(self, x, z) -> float:
        d = np.asarray(x, dtype=np.float64) - np.asarray(z, dtype=np.float64)
        return math.exp(-float(d @ d) / self.width ** 2)

    def gram(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(B, dtype=np.float64))
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-np.maximum(sq, 0.0) / self.width ** 2)

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "width": self.width}


@dataclass(frozen=True)
class LinearKernel:
    def __call__(self, x, z) -> float:
        return float(np.asarray(x, dtype=np.float64) @ np.asarray(z, dtype=np.float64))

    def gram(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(B, dtype=np.float64))
        return A @ B.T

    def to_dict(self) -> dict:
        return {"kind": "linear"}


def kernel_from_dict(d: dict):
    if d["kind"] == "gaussian":
        return GaussianKernel(d["width"])
    if d["kind"] == "linear":
        return LinearKernel()
    raise ValueError(f"unknown kernel kind {d['kind']!r}")


@dataclass
class SupportBuffer:
    """FIFO store of (arrival_index, x); ``budget=None`` never evicts."""

    budget: int | None
    entries: list = field(default_factory=list)

    def __post_init__(self):
        if self.budget is not None and self.budget < 1:
            raise ValueError("buffer budget must be a positive integer")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def full(self) -> bool:
        return self.budget is not None and len(self.entries) >= self.budget

    @property
    def indices(self) -> list:
        return [i for i, _ in self.entries]

    def copy(self) -> "SupportBuffer":
        return SupportBuffer(self.budget, list(self.entries))


@dataclass(frozen=True)
class KernelLossEval:
    mu_t: float
    sigma2_t: float
    b_t: float
    a_t: float
    psi_t: float


class SkipRound(Exception):
    """Raised by :func:`update_classifier` when the comparison buffer is empty."""


def transfer_target(k_rj: np.ndarray, k_rr: np.ndarray, rule: str = "residual") -> int:
    """Position of the member that receives an evicted point's weight.

    ``residual`` maximises k_rj^2 / k_rr, which minimises
    ||alpha_j k(., x_j) - delta k(., x_r)||_H over r and delta.
    ``paper_literal`` picks argmin |k_rj| instead.
    """
    if rule == "residual":
        return int(np.argmax(k_rj * k_rj / k_rr))
    if rule == "paper_literal":
        return int(np.argmin(np.abs(k_rj)))
    raise ValueError(f"unknown eviction rule {rule!r}")


def transfer_residual(alpha_j: float, k_jj: float, k_rj: float, k_rr: float, delta: float) -> float:
    """||alpha_j k(., x_j) - delta k(., x_r)||_H^2 expanded through the Gram entries."""
    return alpha_j ** 2 * k_jj - 2 * alpha_j * delta * k_rj + delta ** 2 * k_rr


def update_buffer(buf: SupportBuffer, alpha: dict, incoming, kernel, rule: str = "residual"):
    """Insert ``incoming = (index, x, alpha_value)``; returns new (buffer, alpha).

    On a full buffer the oldest entry j is evicted and
    alpha_r += alpha_j k(x_r, x_j) / k(x_r, x_r) for the chosen member r.
    """
    idx, x, a = incoming
    if idx in alpha or any(i == idx for i, _ in buf.entries):
        raise ValueError(f"arrival index {idx} already buffered")
    if buf.entries and idx <= buf.entries[-1][0]:
        raise ValueError("arrival indices must increase")
    buf = buf.copy()
    alpha = dict(alpha)
    if buf.full:
        j, xj = buf.entries.pop(0)
        aj = alpha.pop(j)
        if buf.entries:
            pts = np.array([p for _, p in buf.entries])
            keys = [i for i, _ in buf.entries]
        else:
            # budget 1: only the incoming point can absorb the weight
            pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
            keys = [idx]
        k_rj = kernel.gram(pts, xj)[:, 0]
        k_rr = np.array([kernel(p, p) for p in pts])
        r = transfer_target(k_rj, k_rr, rule)
        delta = aj * k_rj[r] / k_rr[r]
        if keys[r] == idx:
            a = a + delta
        else:
            alpha[keys[r]] += delta
    buf.entries.append((idx, np.asarray(x, dtype=np.float64)))
    alpha[idx] = a
    return buf, alpha


class KernelAUC:
    """Online kernel AUC learner with budgeted buffers.

    ``budget`` bounds each class buffer (None: unbounded); ``budget_neg``
    overrides it for the negative buffer. Gram entries among the support
    vectors are cached in a slot array that grows by doubling.
    """

    def __init__(self, dim: int, kernel, loss="hinge", lam: float = 1.0, budget: int | None = 100,
                 schedule=None, eviction_rule: str = "residual", budget_neg: int | None = -1):
        if not lam > 0:
            raise ValueError("lam must be positive")
        if eviction_rule not in EVICTION_RULES:
            raise ValueError(f"eviction_rule must be one of {EVICTION_RULES}")
        self.dim = dim
        self.kernel = kernel
        self.loss = LossKind.parse(loss)
        self.lam = float(lam)
        self.schedule = schedule if schedule is not None else InverseTimeStep(lam)
        self.eviction_rule = eviction_rule
        self.pos_buf = SupportBuffer(budget)
        self.neg_buf = SupportBuffer(budget if budget_neg == -1 else budget_neg)
        self.t = 1
        self.updates = 0
        self._keys: list[int] = []
        self._slot: dict[int, int] = {}
        cap = 16
        self._X = np.zeros((cap, dim))
        self._K = np.zeros((cap, cap))
        self._a = np.zeros(cap)

    # slot cache -------------------------------------------------------
    @property
    def n_support(self) -> int:
        return len(self._keys)

    @property
    def alpha(self) -> dict:
        return {k: float(self._a[s]) for k, s in self._slot.items()}

    def _grow(self):
        cap = 2 * self._X.shape[0]
        n = self.n_support
        X, K, a = np.zeros((cap, self.dim)), np.zeros((cap, cap)), np.zeros(cap)
        X[:n], K[:n, :n], a[:n] = self._X[:n], self._K[:n, :n], self._a[:n]
        self._X, self._K, self._a = X, K, a

    def _insert(self, key: int, x: np.ndarray, k_row: np.ndarray, a: float):
        n = self.n_support
        if n == self._X.shape[0]:
            self._grow()
        self._X[n] = x
        self._K[n, :n] = k_row
        self._K[:n, n] = k_row
        self._K[n, n] = self.kernel(x, x)
        self._a[n] = a
        self._keys.append(key)
        self._slot[key] = n

    def _remove(self, key: int):
        s = self._slot.pop(key)
        last = self.n_support - 1
        if s != last:
            moved = self._keys[last]
            self._X[s] = self._X[last]
            self._K[s, :] = self._K[last, :]
            self._K[:, s] = self._K[:, last]
            self._K[s, s] = self._K[last, last]
            self._a[s] = self._a[last]
            self._keys[s] = moved
            self._slot[moved] = s
        self._keys.pop()

    def _slots(self, buf: SupportBuffer) -> np.ndarray:
        return np.array([self._slot[i] for i in buf.indices], dtype=int)

    # evaluation -------------------------------------------------------
    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimensionError(f"instance of shape {x.shape}, model dimension {self.dim}")
        return x

    def _k_row(self, x: np.ndarray) -> np.ndarray:
        n = self.n_support
        if n == 0:
            return np.zeros(0)
        return self.kernel.gram(x, self._X[:n])[0]

    def f_eval(self, x) -> float:
        x = self._check(x)
        return float(self._k_row(x) @ self._a[: self.n_support])

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        n = self.n_support
        if n == 0:
            return np.zeros(X.shape[0])
        out = np.empty(X.shape[0])
        for lo in range(0, X.shape[0], 2048):
            out[lo:lo + 2048] = self.kernel.gram(X[lo:lo + 2048], self._X[:n]) @ self._a[:n]
        return out

    def rkhs_norm(self) -> float:
        n = self.n_support
        a = self._a[:n]
        return math.sqrt(max(float(a @ self._K[:n, :n] @ a), 0.0))

    # learning ---------------------------------------------------------
    def step(self, x, y) -> float | None:
        """Consume one instance; return the round loss or None on a skip round."""
        x = self._check(x)
        if y not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {y!r}")
        y = int(y)
        same, other = (self.pos_buf, self.neg_buf) if y == 1 else (self.neg_buf, self.pos_buf)
        k_row = self._k_row(x)
        loss = None
        a_new = 0.0
        if len(other):
            self.updates += 1
            eta = self.schedule(self.updates)
            norm2 = self.rkhs_norm() ** 2
            ev, a_new = self._classifier_step(x, y, k_row, self._slots(other), eta)
            loss = 0.5 * self.lam * norm2 + ev.psi_t
        self._push(same, x, k_row, a_new)
        self.t += 1
        return loss

    def _classifier_step(self, x, y, k_row, cslots, eta):
        n = self.n_support
        a = self._a[:n]
        fx = float(k_row @ a)
        fc = self._K[cslots, :n] @ a
        ev, coef = _comparison_update(self.loss, y, fx, fc, eta)
        a *= 1.0 - self.lam * eta
        a[cslots] += coef
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"coefficients diverged at round {self.t}")
        return ev, eta * y * (ev.b_t if self.loss is LossKind.SQUARE else _ratio(ev))

    def _push(self, buf: SupportBuffer, x, k_row, a_new: float):
        key = self.t
        if buf.full:
            j, _ = buf.entries.pop(0)
            sj = self._slot[j]
            aj = float(self._a[sj])
            if buf.entries:
                rs = self._slots(buf)
                keys = buf.indices
                k_rj = self._K[rs, sj]
                k_rr = self._K[rs, rs]
            else:
                keys = [key]
                k_rj = np.array([k_row[sj]])
                k_rr = np.array([self.kernel(x, x)])
            r = transfer_target(k_rj, k_rr, self.eviction_rule)
            delta = aj * k_rj[r] / k_rr[r]
            if keys[r] == key:
                a_new += delta
            else:
                self._a[self._slot[keys[r]]] += delta
            self._remove(j)
            k_row = self._k_row(x) if self.n_support else np.zeros(0)
        self._insert(key, x, k_row, a_new)
        buf.entries.append((key, x))

    def fit(self, X, y) -> list:
        return [self.step(xi, int(yi)) for xi, yi in zip(np.asarray(X, dtype=np.float64), y)]

    # snapshots --------------------------------------------------------
    def to_dict(self) -> dict:
        alpha = self.alpha
        return {
            "kind": "kernel_auc",
            "dim": self.dim,
            "kernel": self.kernel.to_dict(),
            "loss": self.loss.value,
            "lam": self.lam,
            "schedule": self.schedule.to_dict(),
            "eviction_rule": self.eviction_rule,
            "budgets": [self.pos_buf.budget, self.neg_buf.budget],
            "pos": [[i, x.tolist(), alpha[i]] for i, x in self.pos_buf.entries],
            "neg": [[i, x.tolist(), alpha[i]] for i, x in self.neg_buf.entries],
            "t": self.t,
            "updates": self.updates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelAUC":
        pb, nb = d["budgets"]
        m = cls(d["dim"], kernel_from_dict(d["kernel"]), d["loss"], d["lam"], pb,
                schedule_from_dict(d["schedule"]), d["eviction_rule"], nb)
        for name, buf in (("pos", m.pos_buf), ("neg", m.neg_buf)):
            for i, x, a in d[name]:
                x = np.asarray(x, dtype=np.float64)
                m._insert(i, x, m._k_row(x), a)
                buf.entries.append((i, x))
        m.t, m.updates = d["t"], d["updates"]
        return m


def _ratio(ev: KernelLossEval) -> float:
    """Psi_t / sqrt(A_t), with its limit 1/2 when A_t vanishes."""
    if ev.a_t <= EPS_SIGMA:
        return 0.5
    return ev.psi_t / math.sqrt(ev.a_t)


def _comparison_update(kind: LossKind, y: int, fx: float, fc: np.ndarray, eta: float):
    """Loss scalars and the additive change to the comparison-buffer weights."""
    n = fc.size
    mu = float(fc.mean())
    dev = fc - mu
    var = max(float(dev @ dev) / n, 0.0)
    b = 1.0 - y * (fx - mu)
    A = b * b + var
    if kind is LossKind.SQUARE:
        ev = KernelLossEval(mu, var, b, A, 0.5 * A)
        return ev, -(eta / n) * (y * b + dev)
    if A <= EPS_SIGMA:
        ev = KernelLossEval(mu, var, b, A, max(b, 0.0))
        return ev, np.full(n, -(eta / n) * y * 0.5)
    root = math.sqrt(A)
    psi = _psi_m_value(b, var, root)
    ev = KernelLossEval(mu, var, b, A, psi)
    return ev, -(eta / n) * (y * psi / root + 0.5 * dev / root)


def update_classifier(model: KernelAUC, x, y: int, eta: float | None = None):
    """One functional gradient step; returns (new alpha incl. the incoming point, loss scalars).

    Does not modify ``model``. The incoming point is keyed by ``model.t``.
    Raises :class:`SkipRound` when the opposite-class buffer is empty.
    """
    x = model._check(x)
    other = model.neg_buf if y == 1 else model.pos_buf
    if y not in (1, -1):
        raise ValueError(f"label must be +1 or -1, got {y!r}")
    if not len(other):
        raise SkipRound("comparison buffer is empty")
    eta = model.schedule(model.updates + 1) if eta is None else eta
    n = model.n_support
    a = model._a[:n].copy()
    fx = float(model._k_row(x) @ a)
    cslots = model._slots(other)
    fc = model._K[cslots, :n] @ a
    ev, coef = _comparison_update(model.loss, y, fx, fc, eta)
    a *= 1.0 - model.lam * eta
    a[cslots] += coef
    alpha = {k: float(a[s]) for k, s in model._slot.items()}
    alpha[model.t] = eta * y * (ev.b_t if model.loss is LossKind.SQUARE else _ratio(ev))
    return alpha, ev


def kernel_step(model: KernelAUC, x, y):
    """Advance ``model`` by one instance; returns (model, round loss or None)."""
    loss = model.step(x, y)
    return model, loss
