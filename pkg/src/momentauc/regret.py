"""Hindsight optimum and regret of the online AUC learners.

The cumulative objective sum_t L_t(f) only depends on f through its scores
s_i = f(x_i) on the stream, so both learners reduce to a problem over
s = Phi theta: Phi = X for linear models and Phi = V sqrt(Lambda) with
K = V Lambda V^T for kernel models (then ||f||_H = ||theta||). Comparison-set
means and variances come from prefix sums over each class in arrival order,
optionally restricted to the last ``budget`` points (the FIFO buffer).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .surrogate import EPS_SIGMA, LossKind

C_GRAD = 3.0


def linear_regret_bound(lam: float, rounds: int) -> float:
    """2 C^2 (1 + ln T) / lam with gradient bound C = 3."""
    return 2 * C_GRAD ** 2 * (1.0 + math.log(rounds)) / lam


def kernel_regret_bound(lam: float, rounds: int) -> float:
    return (2 * math.sqrt(2) + 1) ** 2 / (2 * lam) * (1.0 + math.log(rounds))


def linear_norm_bound(lam: float) -> float:
    return C_GRAD / lam


def kernel_norm_bound(lam: float) -> float:
    return (math.sqrt(2) + 0.5) / lam


def psi_and_partials(kind: LossKind, mu: np.ndarray, var: np.ndarray):
    """Vectorised loss and its partials in (mu, var). Square loss is halved."""
    b = 1.0 - mu
    if kind is LossKind.SQUARE:
        return 0.5 * (b * b + var), -b, np.full_like(b, 0.5)
    root = np.sqrt(b * b + var)
    smooth = var > EPS_SIGMA
    pos = b >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        # 0.5*(b + root) and 0.5*(1 + b/root), both without cancellation
        val = np.where(pos, b + var / (2 * (root + b)), var / (2 * (root - b)))
        cap = np.where(pos, 0.5 * (1 + b / root), 0.5 * var / (root * (root - b)))
        d_var = np.where(smooth, 0.25 / root, 0.0)
    val = np.where(smooth, val, np.maximum(b, 0.0))
    d_mu = np.where(smooth, -cap, -(b > 0).astype(float))
    return val, d_mu, d_var


@dataclass
class HindsightResult:
    value: float
    grad_norm: float
    lower_bound: float
    theta: np.ndarray
    rounds: int


class HindsightProblem:
    """min_theta sum over loss rounds of lam/2 ||theta||^2 + psi(round margins).

    ``budgets`` maps a label to the number of most recent points of that class
    used as the comparison set (None: the whole history).
    """

    def __init__(self, features, labels, loss="hinge", lam: float = 1.0,
                 strict_paper_init: bool = False, budgets=None):
        self.phi = np.asarray(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=int)
        if self.phi.ndim != 2 or self.phi.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be a T x d matrix matching the labels")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ValueError("labels must be +1 or -1")
        self.loss = LossKind.parse(loss)
        self.lam = float(lam)
        self.strict = strict_paper_init
        self.budgets = dict(budgets or {})

    def _tables(self, upto: int):
        """Per-round comparison windows for the first ``upto`` rounds."""
        labels = self.labels[:upto]
        out = {}
        for c in (1, -1):
            idx = np.flatnonzero(labels == c)
            rounds = np.flatnonzero(labels == -c)
            cnt = np.searchsorted(idx, rounds)
            budget = self.budgets.get(c)
            start = np.maximum(cnt - budget, 0) if budget is not None else np.zeros_like(cnt)
            out[c] = (idx, rounds, start, cnt)
        return out

    def loss_round_count(self, upto: int | None = None) -> int:
        upto = self.labels.shape[0] if upto is None else upto
        total = 0
        for c, (_, rounds, start, cnt) in self._tables(upto).items():
            total += rounds.size if self.strict else int(np.count_nonzero(cnt > start))
        return total

    def evaluate(self, theta: np.ndarray, upto: int | None = None, per_round: bool = False):
        """Objective and gradient in theta (or per-round losses with ``per_round``)."""
        upto = self.labels.shape[0] if upto is None else upto
        phi = self.phi[:upto]
        s = phi @ theta
        g_s = np.zeros(upto)
        total = 0.0
        n_rounds = 0
        reg = 0.5 * self.lam * float(theta @ theta)
        per = np.full(upto, np.nan)
        for c, (idx, rounds, start, cnt) in self._tables(upto).items():
            if rounds.size == 0:
                continue
            sc = s[idx]
            c1 = np.concatenate(([0.0], np.cumsum(sc)))
            c2 = np.concatenate(([0.0], np.cumsum(sc * sc)))
            n = (cnt - start).astype(float)
            active = n > 0 if not self.strict else np.ones(rounds.size, bool)
            if not active.any():
                continue
            r, st, ct, nn = rounds[active], start[active], cnt[active], n[active]
            with np.errstate(divide="ignore", invalid="ignore"):
                mean = np.where(nn > 0, (c1[ct] - c1[st]) / nn, 0.0)
                var = np.where(nn > 0, (c2[ct] - c2[st]) / nn - mean * mean, 0.0)
            var = np.maximum(var, 0.0)
            y = -c
            mu = y * (s[r] - mean)
            val, d_mu, d_var = psi_and_partials(self.loss, mu, var)
            total += float(val.sum())
            n_rounds += r.size
            per[r] = val + reg
            g_s[r] += d_mu * y
            has = nn > 0
            if has.any():
                inv = 1.0 / nn[has]
                a = (-d_mu[has] * y - 2.0 * d_var[has] * mean[has]) * inv
                b = 2.0 * d_var[has] * inv
                da = np.zeros(idx.size + 1)
                db = np.zeros(idx.size + 1)
                np.add.at(da, st[has], a)
                np.add.at(da, ct[has], -a)
                np.add.at(db, st[has], b)
                np.add.at(db, ct[has], -b)
                g_s[idx] += np.cumsum(da)[:-1] + np.cumsum(db)[:-1] * sc
        if per_round:
            return per
        value = total + n_rounds * reg
        grad = phi.T @ g_s + n_rounds * self.lam * theta
        return value, grad

    def solve(self, upto: int | None = None, x0: np.ndarray | None = None,
              gtol: float = 1e-8, maxiter: int = 100_000) -> HindsightResult:
        upto = self.labels.shape[0] if upto is None else upto
        d = self.phi.shape[1]
        rounds = self.loss_round_count(upto)
        if rounds == 0:
            return HindsightResult(0.0, 0.0, 0.0, np.zeros(d), 0)
        x0 = np.zeros(d) if x0 is None else x0
        res = minimize(self.evaluate, x0, args=(upto,), jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "gtol": gtol, "ftol": 0.0, "maxcor": 30})
        value, grad = self.evaluate(res.x, upto)
        gn = float(np.linalg.norm(grad))
        strong = rounds * self.lam
        lower = value - gn * gn / (2 * strong) if strong > 0 else -math.inf
        return HindsightResult(float(value), gn, float(lower), res.x, rounds)


@dataclass
class RegretCurve:
    """Per loss round: stream position, cumulative loss and hindsight optimum."""

    positions: np.ndarray
    rounds: np.ndarray
    cumulative_loss: np.ndarray
    optimum: np.ndarray
    optimum_lower: np.ndarray

    @property
    def regret(self) -> np.ndarray:
        return self.cumulative_loss - self.optimum

    @property
    def regret_upper(self) -> np.ndarray:
        """Regret against a certified lower bound on the optimum."""
        return self.cumulative_loss - self.optimum_lower


def _curve(problem: HindsightProblem, losses: list, every: int = 1) -> RegretCurve:
    positions = np.array([i for i, l in enumerate(losses) if l is not None], dtype=int)
    cum = np.cumsum([l for l in losses if l is not None]) if positions.size else np.zeros(0)
    opt = np.full(positions.size, np.nan)
    low = np.full(positions.size, np.nan)
    theta = None
    for k, pos in enumerate(positions):
        if (k + 1) % every and k + 1 != positions.size:
            continue
        res = problem.solve(upto=pos + 1, x0=theta)
        theta = res.theta
        opt[k], low[k] = res.value, res.lower_bound
    keep = ~np.isnan(opt)
    rounds = np.arange(1, positions.size + 1)
    return RegretCurve(positions[keep], rounds[keep], cum[keep], opt[keep], low[keep])


def _linear_run(X, y, loss, lam, schedule, strict_paper_init):
    from .linear import MomentAUC

    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("empty stream")
    model = MomentAUC(X.shape[1], loss, lam, schedule, strict_paper_init)
    losses = model.fit(X, y)
    return model, losses, HindsightProblem(X, y, loss, lam, strict_paper_init)


def regret_trace(X, y, loss="hinge", lam: float = 1.0, schedule=None,
                 strict_paper_init: bool = False):
    """Round losses of the online learner and the hindsight optimum over the stream."""
    _, losses, problem = _linear_run(X, y, loss, lam, schedule, strict_paper_init)
    return [l for l in losses if l is not None], problem.solve().value


def regret_curve(X, y, loss="hinge", lam: float = 1.0, schedule=None,
                 strict_paper_init: bool = False, every: int = 1) -> RegretCurve:
    _, losses, problem = _linear_run(X, y, loss, lam, schedule, strict_paper_init)
    return _curve(problem, losses, every)


def kernel_features(K: np.ndarray) -> np.ndarray:
    """Phi with Phi Phi^T = K (negative round-off eigenvalues dropped)."""
    evals, evecs = np.linalg.eigh(K)
    keep = evals > evals.max() * 1e-13
    return evecs[:, keep] * np.sqrt(evals[keep])


def _kernel_run(X, y, kernel, lam, loss, budget, schedule, eviction_rule):
    from .kernel import KernelAUC

    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("empty stream")
    model = KernelAUC(X.shape[1], kernel, loss=loss, lam=lam, budget=budget, schedule=schedule,
                      eviction_rule=eviction_rule)
    losses = model.fit(X, y)
    budgets = {1: model.pos_buf.budget, -1: model.neg_buf.budget}
    problem = HindsightProblem(kernel_features(kernel.gram(X, X)), y, loss, lam, budgets=budgets)
    return model, losses, problem


def kernel_regret_trace(X, y, kernel, lam: float = 1.0, loss="hinge", budget=None,
                        schedule=None, eviction_rule: str = "residual"):
    """As :func:`regret_trace` for the kernel learner; ``budget=None`` is the unbounded buffer."""
    _, losses, problem = _kernel_run(X, y, kernel, lam, loss, budget, schedule, eviction_rule)
    return [l for l in losses if l is not None], problem.solve().value


def kernel_regret_curve(X, y, kernel, lam: float = 1.0, loss="hinge", budget=None,
                        schedule=None, eviction_rule: str = "residual", every: int = 1) -> RegretCurve:
    _, losses, problem = _kernel_run(X, y, kernel, lam, loss, budget, schedule, eviction_rule)
    return _curve(problem, losses, every)
