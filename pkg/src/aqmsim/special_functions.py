"""Beta-distribution CDF evaluation and (mean, std) parameterization.

The drop curves in this package are regularized incomplete beta
functions.  Configuration works in terms of the distribution's mean and
standard deviation rather than the raw shape pair, so this module also
provides the exact conversion between the two parameterizations.

The CDF is evaluated with the continued-fraction expansion (modified
Lentz iteration), switching to the tail symmetry past the crossover
point so the fraction always converges quickly.  Inputs are strict:
this module never clamps, callers do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "BetaShape",
    "BetaMoments",
    "ConvergenceError",
    "regularized_incomplete_beta",
    "moments_to_shape",
    "shape_to_moments",
    "sigma_from_scale",
    "beta_cdf_by_moments",
]

_MAX_ITERATIONS = 500
_RELATIVE_TOL = 1e-12
_TINY = 1e-300  # underflow floor for Lentz denominators


class ConvergenceError(ArithmeticError):
    """The continued fraction did not converge within the iteration cap."""


@dataclass(frozen=True)
class BetaShape:
    """Beta distribution shape pair; both entries must be positive and finite."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError(f"alpha must be a positive finite number, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError(f"beta must be a positive finite number, got {self.beta}")


@dataclass(frozen=True)
class BetaMoments:
    """Mean and standard deviation of a beta distribution.

    Feasible pairs satisfy 0 < mean < 1 and 0 < std < sqrt(mean*(1-mean)).
    The upper bound is rejected even at equality: no beta distribution
    attains it.
    """

    mean: float
    std: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and 0.0 < self.mean < 1.0):
            raise ValueError(f"mean must lie strictly inside (0, 1), got {self.mean}")
        bound = math.sqrt(self.mean * (1.0 - self.mean))
        if not (math.isfinite(self.std) and 0.0 < self.std < bound):
            raise ValueError(
                f"std must lie strictly inside (0, {bound:.6g}) for mean={self.mean}, "
                f"got {self.std}"
            )

    @property
    def variance(self) -> float:
        return self.std * self.std


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the continued fraction in the standard
    # series for I_x(a, b).  Only called with x below the symmetry
    # crossover, where the fraction converges fastest.
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITERATIONS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _RELATIVE_TOL:
            return h
    raise ConvergenceError(
        f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )


def regularized_incomplete_beta(z: float, shape: BetaShape) -> float:
    """CDF of the beta distribution with the given shape, evaluated at z.

    Strictly increasing in z, with value 0 at z=0 and 1 at z=1.  Raises
    ValueError for z outside [0, 1]; callers are responsible for any
    clamping they need.
    """
    if not (math.isfinite(z) and 0.0 <= z <= 1.0):
        raise ValueError(f"z must lie in [0, 1], got {z}")
    if z == 0.0:
        return 0.0
    if z == 1.0:
        return 1.0
    a, b = shape.alpha, shape.beta
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(z) + b * math.log1p(-z)
    )
    front = math.exp(log_front)
    if z < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, z) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - z) / b


def moments_to_shape(moments: BetaMoments) -> BetaShape:
    """Invert the beta mean/variance formulas into the shape pair.

    The returned shape reproduces the requested moments exactly (up to
    rounding): mean = a/(a+b) and variance = ab/((a+b)^2 (a+b+1)).
    """
    m = moments.mean
    common = m * (1.0 - m) / moments.variance - 1.0
    return BetaShape(alpha=m * common, beta=(1.0 - m) * common)


def shape_to_moments(shape: BetaShape) -> BetaMoments:
    """Forward beta moment formulas; inverse of :func:`moments_to_shape`."""
    a, b = shape.alpha, shape.beta
    s = a + b
    variance = a * b / (s * s * (s + 1.0))
    return BetaMoments(mean=a / s, std=math.sqrt(variance))


def sigma_from_scale(scale: float, mean: float) -> float:
    """Standard deviation at a fraction ``scale`` of the feasible maximum.

    For a mean in (0, 1) the feasible stds are (0, sqrt(mean*(1-mean)));
    expressing the choice as a fraction spares callers the bound
    computation and keeps the result always feasible.  ``scale`` must
    lie strictly inside (0, 1).
    """
    if not (math.isfinite(scale) and 0.0 < scale < 1.0):
        raise ValueError(f"scale must lie strictly inside (0, 1), got {scale}")
    if not (math.isfinite(mean) and 0.0 < mean < 1.0):
        raise ValueError(f"mean must lie strictly inside (0, 1), got {mean}")
    return scale * math.sqrt(mean * (1.0 - mean))


def beta_cdf_by_moments(z: float, moments: BetaMoments) -> float:
    """CDF evaluated at the shape matching the given moments."""
    return regularized_incomplete_beta(z, moments_to_shape(moments))
