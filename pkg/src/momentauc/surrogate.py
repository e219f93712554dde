"""Pairwise ranking losses expressed through margin mean and variance, with gradients.

``psi_s`` is the pairwise square loss written in terms of the mean ``mu`` and
variance ``sigma2`` of the margins y*w^T(x - x_i); ``psi_m`` is the worst-case
average pairwise hinge loss over all point sets sharing those two moments.
The pairwise helpers and :func:`worst_case_sample` are brute-force references
used to check the closed forms.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import clamp_psd
from .moments import ClassMoments

# sigma^2 at or below this is treated as zero variance (plain hinge).
EPS_SIGMA = 1e-12


class LossKind(enum.Enum):
    SQUARE = "square"
    HINGE = "hinge"

    @classmethod
    def parse(cls, value) -> "LossKind":
        if isinstance(value, cls):
            return value
        aliases = {"s": cls.SQUARE, "square": cls.SQUARE, "psi_s": cls.SQUARE,
                   "m": cls.HINGE, "hinge": cls.HINGE, "psi_m": cls.HINGE}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown loss kind {value!r}") from None


@dataclass(frozen=True)
class SurrogateEval:
    """Intermediate scalars of one psi_M evaluation.

    ``v``, ``cap_phi`` and ``low_phi`` are NaN when ``degenerate`` is set.
    """

    mu: float
    sigma2: float
    v: float
    cap_phi: float
    low_phi: float
    loss: float
    degenerate: bool


def psi_s(mu: float, sigma2: float) -> float:
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    return (1.0 - mu) ** 2 + sigma2


def cap_phi(v: float) -> float:
    s = math.sqrt(1.0 + v * v)
    if v >= 0:
        return 0.5 * (1.0 + v / s)
    # 1 + v/s = 1 / (s (s - v)), without cancellation for v << 0
    return 0.5 / (s * (s - v))


def low_phi(v: float) -> float:
    return 0.5 / math.sqrt(1.0 + v * v)


def _psi_m_value(b: float, sigma2: float, root: float) -> float:
    # 0.5 * (b + sqrt(b^2 + s2)) in a form that never cancels
    if b >= 0:
        return b + sigma2 / (2.0 * (root + b))
    return sigma2 / (2.0 * (root - b))


def psi_m(mu: float, sigma2: float) -> SurrogateEval:
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    b = 1.0 - mu
    if sigma2 <= EPS_SIGMA:
        nan = float("nan")
        return SurrogateEval(mu, sigma2, nan, nan, nan, max(0.0, b), True)
    sigma = math.sqrt(sigma2)
    v = b / sigma
    root = math.sqrt(b * b + sigma2)
    return SurrogateEval(mu, sigma2, v, cap_phi(v), low_phi(v), _psi_m_value(b, sigma2, root), False)


def psi_m_loss(mu: float, sigma2: float) -> float:
    if sigma2 <= EPS_SIGMA:
        return max(0.0, 1.0 - mu)
    b = 1.0 - mu
    return _psi_m_value(b, sigma2, math.sqrt(b * b + sigma2))


def margin_moments(x: np.ndarray, y: int, m: ClassMoments, w: np.ndarray, allow_empty: bool = False):
    """Return (d, mu, sigma2, Sigma w) with d = y (x - mean)."""
    if m.count == 0 and not allow_empty:
        raise ValueError("no opposite-class history to compare against")
    d = y * (x - m.mean)
    sw = m.cov @ w
    sigma2 = clamp_psd(float(w @ sw), float(w @ w), float(np.trace(m.cov)))
    return d, float(w @ d), sigma2, sw


def grad_psi_s(x, y: int, m: ClassMoments, w) -> np.ndarray:
    """(1 - y w^T(x - xbar)) * (-y (x - xbar)) + Sigma w.

    This is the gradient of psi_s / 2; the square-loss learners optimise the
    halved loss so that their updates match this expression.
    """
    d, mu, _, sw = margin_moments(np.asarray(x, float), y, m, np.asarray(w, float))
    return -(1.0 - mu) * d + sw


def grad_psi_m(x, y: int, m: ClassMoments, w) -> np.ndarray:
    """Gradient of psi_M(y w^T(x - xbar), w^T Sigma w) in w.

    At zero variance this falls back to the hinge subgradient, which is 0 at
    the kink.
    """
    d, mu, sigma2, sw = margin_moments(np.asarray(x, float), y, m, np.asarray(w, float))
    return _grad_m(d, mu, sigma2, sw)


def _grad_m(d, mu, sigma2, sw):
    b = 1.0 - mu
    if sigma2 <= EPS_SIGMA:
        return -d if b > 0 else np.zeros_like(d)
    sigma = math.sqrt(sigma2)
    v = b / sigma
    return -cap_phi(v) * d + (low_phi(v) / sigma) * sw


def eval_and_grad(kind: LossKind, x, y, m: ClassMoments, w, allow_empty: bool = False):
    """Loss value and gradient for one round. Square loss is halved."""
    d, mu, sigma2, sw = margin_moments(x, y, m, w, allow_empty)
    if kind is LossKind.SQUARE:
        return 0.5 * psi_s(mu, sigma2), -(1.0 - mu) * d + sw
    return psi_m_loss(mu, sigma2), _grad_m(d, mu, sigma2, sw)


def _pair_margins(x, y, points, w) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise ValueError("need at least one comparison point")
    x = np.asarray(x, dtype=np.float64)
    return y * ((x - pts) @ np.asarray(w, dtype=np.float64))


def pairwise_hinge_avg(x, y: int, points, w) -> float:
    c = _pair_margins(x, y, points, w)
    return float(np.mean(np.maximum(0.0, 1.0 - c)))


def pairwise_square_avg(x, y: int, points, w) -> float:
    c = _pair_margins(x, y, points, w)
    return float(np.mean((1.0 - c) ** 2))


def pairwise_zero_one_avg(x, y: int, points, w) -> float:
    """Fraction of comparison points ranked on the wrong side (strictly)."""
    c = _pair_margins(x, y, points, w)
    return float(np.mean(c < 0))


def average_hinge(c: np.ndarray) -> np.ndarray:
    """Mean of max(0, 1 - c) along the last axis."""
    return np.mean(np.maximum(0.0, 1.0 - c), axis=-1)


def two_level_configuration(n: int, k: int, mu: float, sigma: float) -> np.ndarray:
    """k coordinates at mu - sqrt((n-k)/k) sigma, the rest at mu + sqrt(k/(n-k)) sigma.

    Has mean exactly ``mu`` and population variance ``sigma**2``.
    """
    if not 0 < k < n:
        raise ValueError(f"need 0 < k < n, got k={k}, n={n}")
    c = np.full(n, mu + math.sqrt(k / (n - k)) * sigma)
    c[:k] = mu - math.sqrt((n - k) / k) * sigma
    return c


def extremal_split(n: int, mu: float, sigma: float) -> float:
    """Real-valued maximiser k* = (n/2)(1 + v / sqrt(1 + v^2)), v = (1 - mu)/sigma."""
    v = (1.0 - mu) / sigma
    return 0.5 * n * (1.0 + v / math.sqrt(1.0 + v * v))


def extremal_candidates(n: int, mu: float, sigma: float) -> list[int]:
    ks = extremal_split(n, mu, sigma)
    cands = {min(max(math.floor(ks), 1), n - 1), min(max(math.ceil(ks), 1), n - 1)}
    return sorted(cands)


def extremal_loss(n: int, mu: float, sigma: float) -> float:
    """Best average hinge loss over the floor/ceil two-level configurations."""
    return max(float(average_hinge(two_level_configuration(n, k, mu, sigma)))
               for k in extremal_candidates(n, mu, sigma))


def renormalize(z: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    """Shift and scale each row of ``z`` to mean ``mu`` and variance ``sigma**2``.

    Rows with zero spread come back as NaN; callers resample them.
    """
    centred = z - z.mean(axis=-1, keepdims=True)
    sd = np.sqrt(np.mean(centred ** 2, axis=-1, keepdims=True))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = mu + sigma * centred / sd
    out[(sd == 0).ravel()] = np.nan
    return out


def _draw(rng: np.random.Generator, rows: int, n: int) -> np.ndarray:
    # mix of symmetric, skewed-left and skewed-right shapes
    kind = rng.integers(0, 4)
    if kind == 0:
        return rng.standard_normal((rows, n))
    if kind == 1:
        return -rng.exponential(size=(rows, n))
    if kind == 2:
        return rng.exponential(size=(rows, n))
    return (rng.random((rows, n)) < rng.random()).astype(float) + 1e-3 * rng.standard_normal((rows, n))


def worst_case_sample(n: int, mu: float, sigma: float, trials: int, rng_seed: int,
                      chunk: int = 500) -> float:
    """Largest average hinge loss seen over moment-matched vectors in R^n.

    Draws ``trials`` random vectors renormalised to mean ``mu`` and variance
    ``sigma**2`` and adds the analytic two-level extremal configurations.
    """
    if n < 2 or sigma <= 0 or trials < 1:
        raise ValueError("need n >= 2, sigma > 0, trials >= 1")
    rng = np.random.default_rng(rng_seed)
    best = extremal_loss(n, mu, sigma)
    done = 0
    while done < trials:
        rows = min(chunk, trials - done)
        c = renormalize(_draw(rng, rows, n), mu, sigma)
        bad = np.isnan(c[:, 0])
        while bad.any():
            c[bad] = renormalize(rng.standard_normal((int(bad.sum()), n)), mu, sigma)
            bad = np.isnan(c[:, 0])
        best = max(best, float(average_hinge(c).max()))
        done += rows
    return best
