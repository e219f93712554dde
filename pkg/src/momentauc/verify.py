"""Oracle suites for the closed forms, bounds and update rules.

Each suite draws fixed-seed random cases, compares the library against an
independent reference and reports how many cases were checked and which
failed. ``run_all`` drives them for the ``verify`` command.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernel as K
from .data import gaussian_stream
from .evaluation import auc
from .moments import ClassMoments, batch_recompute
from .surrogate import (extremal_candidates, extremal_loss, grad_psi_m, pairwise_square_avg,
                        psi_m_loss, psi_s, worst_case_sample)


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def check(self, cond: bool, detail) -> None:
        self.checks += 1
        if not cond:
            self.failures.append(detail)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{self.name:<22} {status}  {self.checks - len(self.failures)}/{self.checks} passed"


def _unit_ball(rng, n, p):
    z = rng.standard_normal((n, p))
    r = rng.random(n) ** (1.0 / p)
    return z / np.linalg.norm(z, axis=1, keepdims=True) * r[:, None]


def square_identity(cases: int = 1000, seed: int = 0, max_n: int = 200, max_p: int = 20,
                    rtol: float = 1e-10) -> SuiteResult:
    """Average pairwise square loss equals psi_S of the margin moments."""
    res = SuiteResult("square_identity")
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        n, p = int(rng.integers(1, max_n + 1)), int(rng.integers(1, max_p + 1))
        pts = rng.standard_normal((n, p)) * rng.uniform(0.1, 3)
        x, w = rng.standard_normal(p), rng.standard_normal(p)
        y = int(rng.choice([-1, 1]))
        m = batch_recompute(pts)
        mu = y * float(w @ (x - m.mean))
        s2 = max(float(w @ m.cov @ w), 0.0)
        lhs, rhs = pairwise_square_avg(x, y, pts, w), psi_s(mu, s2)
        res.check(abs(lhs - rhs) <= rtol * max(abs(rhs), 1e-300), (n, p, lhs, rhs))
    return res


def worst_case_bound(trials: int = 10_000, seed: int = 0, mus=(-2, 0, 0.5, 1, 2), sigmas=(0.1, 1, 5),
                     ns=(10, 100, 1000), atol: float = 1e-9) -> SuiteResult:
    """No moment-matched sample beats psi_M; two-level configurations come close.

    Closeness is measured against the gap allowed by rounding the optimal
    split k* to an integer: g(k) = (k(1-mu) + sigma sqrt(k(n-k)))/n is a lower
    bound on the two-level loss and is concave with g(k*) = psi_M.
    """
    res = SuiteResult("worst_case_bound")
    for i, (mu, sigma, n) in enumerate((a, b, c) for a in mus for b in sigmas for c in ns):
        target = psi_m_loss(mu, sigma * sigma)
        best = worst_case_sample(n, mu, sigma, trials, seed + i)
        res.check(best <= target + atol, ("upper", mu, sigma, n, best, target))
        v = (1 - mu) / sigma
        ks = 0.5 * n * (1 + v / math.sqrt(1 + v * v))
        slack = math.inf
        for k in extremal_candidates(n, mu, sigma):
            # |g''| = sigma n / (4 (a(n-a))^1.5) peaks at an endpoint of [k, k*]
            h = min(a * (n - a) for a in (k, ks))
            slack = min(slack, 0.5 * sigma * n / (4 * h ** 1.5) * (k - ks) ** 2)
        ext = extremal_loss(n, mu, sigma)
        res.check(ext >= target - slack - atol, ("tight", mu, sigma, n, ext, target, slack))
    return res


def approximation_band(grid: int = 100, seed: int = 0) -> SuiteResult:
    """0 <= psi_M - hinge <= sigma/2 on a (mu, sigma) grid, exact comparisons."""
    res = SuiteResult("approximation_band")
    for mu in np.linspace(-5, 5, grid):
        for sigma in np.geomspace(1e-6, 10, grid):
            gap = psi_m_loss(float(mu), float(sigma) ** 2) - max(0.0, 1.0 - float(mu))
            res.check(0.0 <= gap <= float(sigma) / 2, (float(mu), float(sigma), gap))
    return res


def _psi_w(x, y, m: ClassMoments, w):
    d = y * (x - m.mean)
    return psi_m_loss(float(w @ d), max(float(w @ m.cov @ w), 0.0))


def gradient_properties(cases: int = 500, norm_cases: int = 10_000, seed: int = 0,
                        rtol: float = 1e-5) -> SuiteResult:
    """Finite differences, convexity along chords and the gradient norm bound 3."""
    res = SuiteResult("gradient_properties")
    rng = np.random.default_rng(seed)
    done = 0
    while done < cases:
        p, n = int(rng.integers(1, 8)), int(rng.integers(2, 30))
        m = batch_recompute(rng.standard_normal((n, p)))
        x, w, y = rng.standard_normal(p), rng.standard_normal(p), int(rng.choice([-1, 1]))
        if float(w @ m.cov @ w) <= 0.01:
            continue
        done += 1
        g = grad_psi_m(x, y, m, w)
        h = 1e-6
        fd = np.array([(_psi_w(x, y, m, w + h * e) - _psi_w(x, y, m, w - h * e)) / (2 * h)
                       for e in np.eye(p)])
        err = np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-12)
        res.check(err <= rtol, ("fd", p, n, err))
        w2, th = rng.standard_normal(p) * 3, rng.random()
        lhs = _psi_w(x, y, m, th * w + (1 - th) * w2)
        rhs = th * _psi_w(x, y, m, w) + (1 - th) * _psi_w(x, y, m, w2)
        res.check(lhs <= rhs + 1e-12 * max(1.0, abs(rhs)), ("convex", lhs, rhs))
    for _ in range(norm_cases):
        p, n = int(rng.integers(1, 8)), int(rng.integers(2, 30))
        pts = _unit_ball(rng, n + 1, p)
        m = batch_recompute(pts[1:])
        w = rng.standard_normal(p) * 10 ** rng.uniform(-3, 3)
        y = int(rng.choice([-1, 1]))
        gn = float(np.linalg.norm(grad_psi_m(pts[0], y, m, w)))
        res.check(gn <= 3.0, ("norm", gn))
    return res


def moment_recursion(cases: int = 100, seed: int = 0, max_len: int = 1000, max_dim: int = 60,
                     atol: float = 1e-9) -> SuiteResult:
    """Folding the running update equals the two-pass batch moments."""
    res = SuiteResult("moment_recursion")
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        n, p = int(rng.integers(1, max_len + 1)), int(rng.integers(1, max_dim + 1))
        pts = rng.standard_normal((n, p)) * rng.uniform(0.1, 3) + rng.uniform(-2, 2)
        m = ClassMoments(p)
        for x in pts:
            m.update(x)
        ref = batch_recompute(pts)
        err = max(float(np.abs(m.mean - ref.mean).max()), float(np.abs(m.cov - ref.cov).max()))
        res.check(err <= atol, (n, p, err))
    return res


def kernel_norm(T: int = 1000, lam: float = 1.0, width: float = 1.0, seed: int = 0,
                budget=None) -> SuiteResult:
    """||f_t||_H <= (sqrt 2 + 1/2)/lam at every round for the inverse-time schedule."""
    res = SuiteResult("kernel_norm")
    ds = gaussian_stream(T, 2, seed)
    model = K.KernelAUC(2, K.GaussianKernel(width), "hinge", lam, budget)
    bound = (math.sqrt(2) + 0.5) / lam
    for t, (x, y) in enumerate(zip(ds.X, ds.y), start=1):
        model.step(x, int(y))
        nrm = model.rkhs_norm()
        res.check(nrm <= bound, (t, nrm, bound))
    return res


def eviction_optimality(cases: int = 200, seed: int = 0, max_size: int = 10, tol: float = 1e-9,
                        rule: str = "residual") -> SuiteResult:
    """The transfer (r, delta) reaches the brute-force minimum RKHS residual."""
    res = SuiteResult("eviction_optimality")
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        size, p = int(rng.integers(2, max_size + 1)), int(rng.integers(1, 4))
        kern = K.GaussianKernel(float(2.0 ** rng.uniform(-2, 2)))
        pts = rng.standard_normal((size, p))
        alpha = {i: float(a) for i, a in enumerate(rng.standard_normal(size), start=1)}
        buf = K.SupportBuffer(size, [(i, pts[i - 1]) for i in alpha])
        x_new = rng.standard_normal(p)
        nbuf, nalpha = K.update_buffer(buf, alpha, (size + 1, x_new, 0.0), kern, rule)
        aj, xj = alpha[1], pts[0]
        kjj = kern(xj, xj)
        best = math.inf
        for r in range(2, size + 1):
            xr = pts[r - 1]
            krj, krr = kern(xr, xj), kern(xr, xr)
            opt = minimize_scalar(lambda d: K.transfer_residual(aj, kjj, krj, krr, d),
                                  bracket=(-1.0, 1.0), tol=1e-12)
            best = min(best, float(opt.fun), K.transfer_residual(aj, kjj, krj, krr, 0.0))
        got = K.transfer_residual(aj, kjj, 0.0, 1.0, 0.0)
        for r in range(2, size + 1):
            delta = nalpha[r] - alpha[r]
            if delta != 0.0:
                xr = pts[r - 1]
                got = K.transfer_residual(aj, kjj, kern(xr, xj), kern(xr, xr), delta)
        res.check(got <= best + tol, (size, got, best))
    return res


def _gram_basis_step(kind: str, lam: float, eta: float, Kb: np.ndarray, c: np.ndarray,
                     t: int, comp: np.ndarray, y: int) -> np.ndarray:
    """Coefficients of f - eta * grad L(f) in the basis of all points, by the chain rule.

    L(f) = lam/2 c^T K c + psi(mu, var) with scores s = K c, margin
    mu = y (s_t - mean s_C) and var = population variance of s_C.
    """
    s = Kb @ c
    sc = s[comp]
    n = comp.size
    m = sc.mean()
    var = float(((sc - m) ** 2).mean())
    mu = y * (s[t] - m)
    b = 1.0 - mu
    if kind == "square":
        d_mu, d_var = -b, 0.5
    else:
        root = math.sqrt(b * b + var)
        d_mu, d_var = -0.5 * (1 + b / root), 0.25 / root
    g = np.zeros_like(c)
    g[t] += d_mu * y
    g[comp] += -d_mu * y / n + d_var * 2.0 * (sc - m) / n
    return c - eta * (lam * c + g)


def gram_basis_update(cases: int = 200, seed: int = 0, tol: float = 1e-9) -> SuiteResult:
    """update_classifier agrees pointwise with an independent chain-rule step."""
    res = SuiteResult("gram_basis_update")
    rng = np.random.default_rng(seed)
    for case in range(cases):
        kind = ("square", "hinge")[case % 2]
        p = int(rng.integers(1, 4))
        kern = K.GaussianKernel(float(2.0 ** rng.uniform(-1, 1)))
        lam = float(2.0 ** rng.uniform(-3, 1))
        model = K.KernelAUC(p, kern, kind, lam, budget=None)
        npos, nneg = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        for i in range(npos + nneg):
            x = rng.standard_normal(p)
            model._insert(model.t, x, model._k_row(x), float(rng.standard_normal()))
            (model.pos_buf if i < npos else model.neg_buf).entries.append((model.t, x))
            model.t += 1
        y = int(rng.choice([-1, 1]))
        x_t = rng.standard_normal(p)
        eta = float(2.0 ** rng.uniform(-4, 0))
        new_alpha, _ = K.update_classifier(model, x_t, y, eta)
        keys = model._keys + [model.t]
        pts = np.vstack([model._X[: model.n_support], x_t])
        Kb = kern.gram(pts, pts)
        c = np.append(model._a[: model.n_support], 0.0)
        comp_keys = (model.neg_buf if y == 1 else model.pos_buf).indices
        comp = np.array([keys.index(k) for k in comp_keys])
        c_ref = _gram_basis_step(kind, lam, eta, Kb, c, len(keys) - 1, comp, y)
        c_new = np.array([new_alpha[k] for k in keys])
        probes = np.vstack([pts, rng.standard_normal((20, p))])
        kp = kern.gram(probes, pts)
        err = float(np.abs(kp @ c_new - kp @ c_ref).max())
        res.check(err <= tol, (kind, err))
    return res


def auc_pairs(cases: int = 1000, seed: int = 0, max_n: int = 500, tol: float = 1e-12) -> SuiteResult:
    """Rank-based AUC equals the explicit pair loop, ties counted 1/2."""
    res = SuiteResult("auc_pairs")
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        n = int(rng.integers(2, max_n + 1))
        y = rng.choice([-1, 1], n)
        y[0], y[1] = 1, -1
        s = rng.integers(0, 20, n).astype(float) if rng.random() < 0.5 else rng.standard_normal(n)
        pos, neg = s[y == 1], s[y == -1]
        diff = pos[:, None] - neg[None, :]
        ref = float(((diff > 0) + 0.5 * (diff == 0)).mean())
        got = auc(s, y).value
        res.check(abs(got - ref) <= tol, (n, got, ref))
    return res


SUITES = {
    "square_identity": lambda: square_identity(),
    "worst_case_bound": lambda: worst_case_bound(trials=1000, ns=(10, 100)),
    "approximation_band": lambda: approximation_band(),
    "gradient_properties": lambda: gradient_properties(norm_cases=2000),
    "moment_recursion": lambda: moment_recursion(cases=30, max_len=300),
    "kernel_norm": lambda: kernel_norm(T=300),
    "eviction_optimality": lambda: eviction_optimality(),
    "gram_basis_update": lambda: gram_basis_update(),
    "auc_pairs": lambda: auc_pairs(cases=300),
}


def run_all(names=None) -> list[SuiteResult]:
    return [SUITES[n]() for n in (names or SUITES)]
