"""Brownian scaling limit of the annealed fixation probability.

When ``delta * sqrt(N) -> c``, ``N * P_N`` tends to

    g(c) = E[ 1 / int_0^1 exp(sqrt(2) c B_s) ds ].

Conditioning on the endpoint of the Brownian motion reduces every quantity
here to a one-dimensional Gaussian integral of

    phi(x) = x e^{-x} / sinh(x) = 2x / (e^{2x} - 1),

e.g. ``g(c) = E phi(c Z / sqrt 2)`` for standard normal ``Z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from fixlab import _kernels
from fixlab.errors import DomainError
from fixlab.quadrature import QuadratureSpec, gaussian_expectation
from fixlab.rng import block_sizes, check_seed, concat_blocks, map_blocks, stream
from fixlab.stats import Estimate, sample_mean_se

BROWNIAN_TAG = "brownian"


@dataclass(frozen=True)
class LimitValue:
    value: float
    estimated_abs_error: float

    def __post_init__(self):
        if not self.estimated_abs_error >= 0:
            raise ValueError("error estimate must be nonnegative")

    def __float__(self):
        return float(self.value)

    def scaled(self, factor: float) -> "LimitValue":
        return LimitValue(self.value * factor, self.estimated_abs_error * abs(factor))


def phi(x):
    """``x e^{-x} / sinh x`` in the overflow-free form ``2x / (e^{2x} - 1)``; 1 at 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.ones_like(x)
    neg = x < 0
    pos = x > 0
    xn = x[neg]
    out[neg] = 2.0 * xn / np.expm1(2.0 * xn)
    xp = x[pos]
    out[pos] = 2.0 * xp * np.exp(-2.0 * xp) / -np.expm1(-2.0 * xp)
    return out if out.ndim else float(out)


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise DomainError(f"{name} must be positive and finite, got {value}")
    return value


def m2(t: float, quad: Optional[QuadratureSpec] = None) -> LimitValue:
    """``E[1 / int_0^t exp(2 B_s) ds] = t^{-1} E phi(sqrt(t) Z)``."""
    t = _positive("t", t)
    s = math.sqrt(t)
    value, err = gaussian_expectation(lambda z: phi(s * z), quad)
    return LimitValue(value / t, err / t)


def m_alpha(alpha: float, t: float, quad: Optional[QuadratureSpec] = None) -> LimitValue:
    """``E[1 / int_0^t exp(alpha B_s) ds]`` by Brownian scaling onto ``m2``."""
    alpha = _positive("alpha", alpha)
    t = _positive("t", t)
    r = alpha * alpha / 4.0
    return m2(r * t, quad).scaled(r)


def g(c: float, quad: Optional[QuadratureSpec] = None) -> LimitValue:
    """Limit of ``N * P_N`` when ``delta * sqrt(N) -> c``; ``g(0) = 1``."""
    c = float(c)
    if c < 0 or not math.isfinite(c):
        raise DomainError(f"c must be a nonnegative finite number, got {c}")
    if c == 0:
        return LimitValue(1.0, 0.0)
    a = c / math.sqrt(2.0)
    value, err = gaussian_expectation(lambda z: phi(a * z), quad)
    return LimitValue(value, err)


def brownian_mc_g(c: float, paths: int, steps: int, seed: int, jobs: int = 1) -> Estimate:
    """Direct path simulation of ``g(c)``: trapezoid rule on a uniform grid.

    The trapezoid rule biases the estimate by O(1/steps); this is meant as an
    independent cross-check of the quadrature, not a replacement.
    """
    c = float(c)
    if c < 0:
        raise DomainError("c must be nonnegative")
    if int(paths) < 2 or int(steps) < 1:
        raise DomainError("need at least two paths and one step")
    seed = check_seed(seed)
    sigma = math.sqrt(2.0) * c
    sizes = block_sizes(paths)

    def run(b):
        return _kernels.brownian_block(sigma, int(steps), sizes[b], stream(seed, BROWNIAN_TAG, b))

    values = concat_blocks(map_blocks(run, len(sizes), jobs))
    mean, se = sample_mean_se(values)
    return Estimate(mean, se, int(paths), seed)


def y_first_integrand(x, M: float):
    """``E[B_M^- / int_0^M e^{2B_s} ds | B_M = x]``: ``(-x) phi(x) / M`` for ``x <= 0``, else 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x < 0, -x * phi(np.minimum(x, 0.0)) / M, 0.0)
    return out if out.ndim else float(out)


def _cancelling_part(w: np.ndarray) -> np.ndarray:
    """``(w/2)(1 + e^{-w}) - (1 - e^{-w})`` for ``w >= 0``; ~ ``w^3 / 12`` near 0."""
    em = np.expm1(-w)
    direct = 0.5 * w * (2.0 + em) + em
    small = w < 0.5
    if np.any(small):
        ws = w[small]
        series = np.zeros_like(ws)
        term = ws * ws / 2.0  # w^j / j! at j = 2
        for j in range(3, 24):
            term = term * ws / j
            series += (-1) ** (j + 1) * (j - 2) / 2.0 * term
        direct = direct.copy()
        direct[small] = series
    return direct


def y_second_integrand(x, M: float):
    """``E[(B_M^-)^2 / (int_0^M e^{2B_s} ds)^2 | B_M = x]``.

    The conditional second moment of the reciprocal functional given the
    endpoint is ``e^{-2x}(x^2 sinh x + M x cosh x - M sinh x) / (M^2 sinh^3 x)``.
    With ``u = -x > 0`` and ``s = 1 - e^{-2u}`` the exponentials cancel to

        4 u^2 (u^2 s + M f(2u)) / (M^2 s^3),  f(w) = (w/2)(1 + e^{-w}) - (1 - e^{-w}),

    which neither overflows for large ``u`` nor cancels for small ``u``.
    """
    x = np.asarray(x, dtype=np.float64)
    u = np.maximum(-x, 0.0)
    out = np.zeros_like(u)
    pos = u > 0
    up = u[pos]
    s = -np.expm1(-2.0 * up)
    out[pos] = 4.0 * up * up * (up * up * s + M * _cancelling_part(2.0 * up)) / (M * M * s**3)
    return out if out.ndim else float(out)


def y_first_moment(M: float, quad: Optional[QuadratureSpec] = None) -> LimitValue:
    """``E[B_M^- / int_0^M exp(2 B_s) ds]``, which tends to 1."""
    M = _positive("M", M)
    s = math.sqrt(M)
    value, err = gaussian_expectation(lambda z: y_first_integrand(s * z, M), quad, negative_only=True)
    return LimitValue(value, err)


def y_second_moment(M: float, quad: Optional[QuadratureSpec] = None) -> LimitValue:
    """``E[(B_M^- / int_0^M exp(2 B_s) ds)^2]``, asymptotic to ``4 sqrt(2/pi) sqrt(M)``."""
    M = _positive("M", M)
    s = math.sqrt(M)
    value, err = gaussian_expectation(lambda z: y_second_integrand(s * z, M), quad, negative_only=True)
    return LimitValue(value, err)


def convexity_h(x):
    """``x + 1 + (x - 1) e^{2x}``; has the sign of ``x``, which makes ``phi`` convex."""
    x = np.asarray(x, dtype=np.float64)
    out = x + 1.0 + (x - 1.0) * np.exp(2.0 * x)
    return out if out.ndim else float(out)


class Prediction(NamedTuple):
    """Predicted fixation probability for fixed ``delta``.

    ``crude`` and ``refined`` are on the probability scale; the ``*_scaled``
    fields multiply both by ``sqrt(pi N)``, the vertical axis on which the
    refined curve tends to ``delta``.
    """

    crude: float
    refined: float
    crude_scaled: float
    refined_scaled: float


def better_prediction(n: int, delta: float, quad: Optional[QuadratureSpec] = None) -> Prediction:
    """``delta / sqrt(pi N)`` against ``g(delta sqrt N) / N``."""
    n = int(n)
    if n < 1:
        raise DomainError("n must be positive")
    delta = float(delta)
    if delta < 0:
        raise DomainError("delta must be nonnegative")
    gv = g(delta * math.sqrt(n), quad).value
    crude = delta / math.sqrt(math.pi * n)
    refined = gv / n
    k = math.sqrt(math.pi * n)
    return Prediction(crude, refined, crude * k, refined * k)
