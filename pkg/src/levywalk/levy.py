"""Jump measures, their cutoff quantities, and exact jump-size sampling.

Three concrete measure families are provided:

* :class:`ExponentialTails` -- finite activity, two-sided exponential density.
* :class:`SingularTempered` -- infinite activity: a power core ``|z|^-(1+alpha)``
  on ``0 < |z| <= 1`` glued to exponential tails beyond ``|z| = 1``.
* :class:`TemperedStable` -- classical tempered stable density
  ``C exp(-lambda |z|) |z|^-(1+alpha)``.

For a cutoff ``eps`` the module computes the quartet consumed by the chain
engine: the jump intensity above the cutoff, the compensator drift over
``eps <= |z| <= 1``, and the second moment of the discarded small jumps
(variance of the substituted diffusion).  Jump sizes above the cutoff are
sampled by exact piecewise inversion of the quantile function, so a jump is
a pure function of a single uniform variate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "ExponentialTails",
    "SingularTempered",
    "TemperedStable",
    "LevyMeasureSpec",
    "CutoffQuantities",
    "intensity",
    "drift_compensator",
    "small_jump_covariance",
    "third_moment_tail",
    "cutoff_quantities",
    "sample_jump",
    "jump_quantile_table",
    "density",
    "quadrature_oracle",
]


@dataclass(frozen=True)
class ExponentialTails:
    """Density ``c_minus * exp(-mu |z|)`` for ``z < 0`` and ``c_plus * exp(-mu |z|)`` for ``z > 0``."""

    c_plus: float
    c_minus: float
    mu: float

    def __post_init__(self):
        _check_weights(self.c_plus, self.c_minus)
        if not self.mu > 0:
            raise ValueError("mu must be strictly positive")


@dataclass(frozen=True)
class SingularTempered:
    """Power core ``c |z|^-(alpha+1)`` on ``0 < |z| <= 1``, tails ``c * exp(-mu(|z|-1))`` beyond.

    The measure has infinite activity (and infinite variation for
    ``alpha >= 1``); ``c_plus != c_minus`` makes it asymmetric.
    """

    c_plus: float
    c_minus: float
    mu: float
    alpha: float

    def __post_init__(self):
        _check_weights(self.c_plus, self.c_minus)
        if not self.mu > 0:
            raise ValueError("mu must be strictly positive")
        if not 0.0 < self.alpha < 2.0:
            raise ValueError("alpha must lie strictly inside (0, 2)")


@dataclass(frozen=True)
class TemperedStable:
    """Density ``c_pm * exp(-lambda_pm |z|) / |z|^(1+alpha)`` on each half line."""

    c_plus: float
    c_minus: float
    lambda_plus: float
    lambda_minus: float
    alpha: float

    def __post_init__(self):
        _check_weights(self.c_plus, self.c_minus)
        if not (self.lambda_plus > 0 and self.lambda_minus > 0):
            raise ValueError("tempering rates must be strictly positive")
        if not 0.0 < self.alpha < 2.0:
            raise ValueError("alpha must lie strictly inside (0, 2)")


LevyMeasureSpec = Union[ExponentialTails, SingularTempered, TemperedStable]


def _check_weights(c_plus: float, c_minus: float) -> None:
    if c_plus < 0 or c_minus < 0:
        raise ValueError("side weights must be nonnegative")
    if c_plus == 0 and c_minus == 0:
        raise ValueError("at least one side weight must be positive")


def is_symmetric(spec: LevyMeasureSpec) -> bool:
    if isinstance(spec, TemperedStable):
        return spec.c_plus == spec.c_minus and spec.lambda_plus == spec.lambda_minus
    return spec.c_plus == spec.c_minus


@dataclass(frozen=True)
class CutoffQuantities:
    """The cutoff-derived quartet consumed by every chain step.

    ``lambda_eps`` is the intensity of jumps above the cutoff, ``gamma_eps``
    the compensator drift over ``eps <= |z| <= 1``, ``b_eps`` the second
    moment of jumps below the cutoff and ``beta_eps`` its square root (the
    volatility of the substituted diffusion).
    """

    eps: float
    lambda_eps: float
    gamma_eps: float
    b_eps: float
    beta_eps: float


def _gammainc(s: float, lo: float, hi: float) -> float:
    # mpmath handles negative shape parameters, which scipy does not
    import mpmath

    return float(mpmath.gammainc(s, a=lo, b=hi))


def intensity(spec: LevyMeasureSpec, eps: float) -> float:
    """Total mass of jumps larger than ``eps``: ``integral_{|z|>eps} nu(dz)``.

    ``eps = 0`` is allowed only for the finite-activity
    :class:`ExponentialTails` measure; for the infinite-activity variants it
    raises a ``ValueError`` signalling infinite intensity.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if isinstance(spec, ExponentialTails):
        return (spec.c_plus + spec.c_minus) * math.exp(-spec.mu * eps) / spec.mu
    if eps == 0.0:
        raise ValueError("intensity is infinite at eps = 0 for this measure")
    if isinstance(spec, SingularTempered):
        tot = spec.c_plus + spec.c_minus
        if eps <= 1.0:
            return tot * (1.0 / spec.mu + (eps**-spec.alpha - 1.0) / spec.alpha)
        return tot * math.exp(-spec.mu * (eps - 1.0)) / spec.mu
    if isinstance(spec, TemperedStable):
        a = spec.alpha
        return spec.c_plus * spec.lambda_plus**a * _gammainc(-a, spec.lambda_plus * eps, math.inf) + (
            spec.c_minus * spec.lambda_minus**a * _gammainc(-a, spec.lambda_minus * eps, math.inf)
        )
    raise TypeError(f"unknown measure spec {type(spec)!r}")


def drift_compensator(spec: LevyMeasureSpec, eps: float) -> float:
    """Compensator drift ``integral_{eps <= |z| <= 1} z nu(dz)``.

    Requires ``0 < eps <= 1``: the compensation region is empty by
    convention beyond 1 and extrapolating silently would change the
    scheme's drift.  The ``alpha = 1`` case of the power core uses the
    logarithmic antiderivative.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError("drift compensator requires 0 < eps <= 1")
    diff = spec.c_plus - spec.c_minus
    if diff == 0.0 and not isinstance(spec, TemperedStable):
        return 0.0
    if isinstance(spec, ExponentialTails):
        mu = spec.mu
        return diff * (
            math.exp(-mu * eps) * (1.0 + mu * eps) - math.exp(-mu) * (1.0 + mu)
        ) / mu**2
    if isinstance(spec, SingularTempered):
        a = spec.alpha
        if a == 1.0:
            return diff * math.log(1.0 / eps)
        return diff * (1.0 - eps ** (1.0 - a)) / (1.0 - a)
    if isinstance(spec, TemperedStable):
        a = spec.alpha

        def side(c, lam):
            return c * lam ** (a - 1.0) * _gammainc(1.0 - a, lam * eps, lam)

        return side(spec.c_plus, spec.lambda_plus) - side(spec.c_minus, spec.lambda_minus)
    raise TypeError(f"unknown measure spec {type(spec)!r}")


def small_jump_covariance(spec: LevyMeasureSpec, eps: float) -> tuple[float, float]:
    """Second moment ``B_eps = integral_{|z|<eps} z^2 nu(dz)`` and its root."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0.0:
        return 0.0, 0.0
    tot = spec.c_plus + spec.c_minus
    if isinstance(spec, ExponentialTails):
        mu = spec.mu
        me = mu * eps
        b = tot * (2.0 - math.exp(-me) * (me * me + 2.0 * me + 2.0)) / mu**3
    elif isinstance(spec, SingularTempered):
        a = spec.alpha
        b = tot * min(eps, 1.0) ** (2.0 - a) / (2.0 - a)
        if eps > 1.0:
            b += tot * _exp_tail_moment(spec.mu, 2, eps)
    elif isinstance(spec, TemperedStable):
        a = spec.alpha
        b = spec.c_plus * spec.lambda_plus ** (a - 2.0) * _gammainc(2.0 - a, 0.0, spec.lambda_plus * eps)
        b += spec.c_minus * spec.lambda_minus ** (a - 2.0) * _gammainc(2.0 - a, 0.0, spec.lambda_minus * eps)
    else:
        raise TypeError(f"unknown measure spec {type(spec)!r}")
    return b, math.sqrt(b)


def third_moment_tail(spec: LevyMeasureSpec, eps: float) -> float:
    """Small-jump third absolute moment ``integral_{|z|<=eps} |z|^3 nu(dz)``.

    For power-core measures this scales as ``eps^(3-alpha)`` and controls
    the bias of replacing small jumps by a diffusion.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0.0:
        return 0.0
    tot = spec.c_plus + spec.c_minus
    if isinstance(spec, ExponentialTails):
        mu = spec.mu
        me = mu * eps
        return tot * (6.0 - math.exp(-me) * (me**3 + 3.0 * me * me + 6.0 * me + 6.0)) / mu**4
    if isinstance(spec, SingularTempered):
        a = spec.alpha
        out = tot * min(eps, 1.0) ** (3.0 - a) / (3.0 - a)
        if eps > 1.0:
            out += tot * _exp_tail_moment(spec.mu, 3, eps)
        return out
    if isinstance(spec, TemperedStable):
        a = spec.alpha
        out = spec.c_plus * spec.lambda_plus ** (a - 3.0) * _gammainc(3.0 - a, 0.0, spec.lambda_plus * eps)
        out += spec.c_minus * spec.lambda_minus ** (a - 3.0) * _gammainc(3.0 - a, 0.0, spec.lambda_minus * eps)
        return out
    raise TypeError(f"unknown measure spec {type(spec)!r}")


def _exp_tail_moment(mu: float, n: int, eps: float) -> float:
    # integral_1^eps z^n exp(-mu (z-1)) dz for one tail side, eps > 1
    def anti(z):
        # -exp(-mu(z-1)) * sum_k n!/(n-k)! z^(n-k) / mu^(k+1)
        s = 0.0
        fact = 1.0
        for k in range(n + 1):
            s += fact * z ** (n - k) / mu ** (k + 1)
            fact *= n - k
        return -math.exp(-mu * (z - 1.0)) * s

    return anti(eps) - anti(1.0)


def cutoff_quantities(spec: LevyMeasureSpec, eps: float) -> CutoffQuantities:
    """Bundle the cutoff quartet for a measure.

    At ``eps = 0`` (finite-activity measure, nothing is cut) no jumps are
    replaced and nothing is compensated: the drift and diffusion corrections
    are identically zero and jumps are sampled from the bare normalized
    measure.
    """
    lam = intensity(spec, eps)
    if eps == 0.0:
        return CutoffQuantities(eps=0.0, lambda_eps=lam, gamma_eps=0.0, b_eps=0.0, beta_eps=0.0)
    gamma = drift_compensator(spec, eps)
    b, beta = small_jump_covariance(spec, eps)
    return CutoffQuantities(eps=eps, lambda_eps=lam, gamma_eps=gamma, b_eps=b, beta_eps=beta)


# ---------------------------------------------------------------------------
# Jump-size sampling: exact piecewise inversion of the quantile function.
# ---------------------------------------------------------------------------

# Packed quantile tables, shared with the compiled kernels.  Layout
# (float64, length 10):
#   [0] kind: 0 = exponential tails, 1 = singular tempered
#   [1] eps   [2] mu
#   kind 0: [3] F_neg (CDF mass of the negative side)
#   kind 1: [3] alpha [4] F1 [5] F2 [6] F3
#           [7] lam*alpha/c_minus [8] lam*alpha/c_plus [9] 1/alpha
TABLE_LEN = 10
KIND_EXP_TAILS = 0
KIND_SINGULAR = 1


def jump_quantile_table(spec: LevyMeasureSpec, eps: float) -> np.ndarray:
    """Precomputed constants turning one uniform into one jump size."""
    table = np.zeros(TABLE_LEN)
    if isinstance(spec, ExponentialTails):
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        table[0] = KIND_EXP_TAILS
        table[1] = eps
        table[2] = spec.mu
        table[3] = spec.c_minus / (spec.c_plus + spec.c_minus)
        return table
    if isinstance(spec, SingularTempered):
        if not 0.0 < eps <= 1.0:
            raise ValueError("jump sampling for this measure requires 0 < eps <= 1")
        a = spec.alpha
        m1 = spec.c_minus / spec.mu
        m2 = spec.c_minus * (eps**-a - 1.0) / a
        m3 = spec.c_plus * (eps**-a - 1.0) / a
        m4 = spec.c_plus / spec.mu
        lam = m1 + m2 + m3 + m4
        table[0] = KIND_SINGULAR
        table[1] = eps
        table[2] = spec.mu
        table[3] = a
        table[4] = m1 / lam
        table[5] = (m1 + m2) / lam
        table[6] = (m1 + m2 + m3) / lam
        table[7] = lam * a / spec.c_minus if spec.c_minus > 0 else 0.0
        table[8] = lam * a / spec.c_plus if spec.c_plus > 0 else 0.0
        table[9] = 1.0 / a
        return table
    raise NotImplementedError(
        "exact quantile inversion is only available for the piecewise "
        "exponential/power measures; use a piecewise variant for simulation"
    )


def sample_jump(spec: LevyMeasureSpec, eps: float, u) -> np.ndarray | float:
    """Jump size above the cutoff from a uniform variate, by CDF inversion.

    The map is the true quantile function of the normalized restricted
    density, hence monotone in ``u`` and antisymmetric about ``u = 1/2``
    for symmetric measures.  Always returns sizes with ``|J| > eps``.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise ValueError("uniform variate must lie strictly inside (0, 1)")
    table = jump_quantile_table(spec, eps)
    out = _quantile_from_table(table, np.atleast_1d(u_arr))
    if np.ndim(u) == 0:
        return float(out[0])
    return out


def _quantile_from_table(table: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    eps, mu = table[1], table[2]
    if table[0] == KIND_EXP_TAILS:
        f_neg = table[3]
        neg = u < f_neg
        out[neg] = -(eps - np.log(u[neg] / f_neg) / mu)
        pos = ~neg
        out[pos] = eps - np.log((1.0 - u[pos]) / (1.0 - f_neg)) / mu
        return out
    alpha = table[3]
    f1, f2, f3 = table[4], table[5], table[6]
    a_neg, a_pos = table[7], table[8]
    inv_alpha = table[9]
    m = u < f1
    out[m] = -(1.0 - np.log(u[m] / f1) / mu)
    m = (u >= f1) & (u < f2)
    out[m] = -((1.0 + (u[m] - f1) * a_neg) ** -inv_alpha)
    m = (u >= f2) & (u < f3)
    out[m] = (1.0 + (f3 - u[m]) * a_pos) ** -inv_alpha
    m = u >= f3
    out[m] = 1.0 - np.log((1.0 - u[m]) / (1.0 - f3)) / mu
    return out


def quantile_scalar(table: np.ndarray, u: float) -> float:
    """Scalar twin of :func:`sample_jump`, written against ``math``.

    Used by the reference chain so that its arithmetic matches the compiled
    kernel operation for operation.
    """
    eps, mu = table[1], table[2]
    if table[0] == KIND_EXP_TAILS:
        f_neg = table[3]
        if u < f_neg:
            return -(eps - math.log(u / f_neg) / mu)
        return eps - math.log((1.0 - u) / (1.0 - f_neg)) / mu
    f1, f2, f3 = table[4], table[5], table[6]
    if u < f1:
        return -(1.0 - math.log(u / f1) / mu)
    if u < f2:
        return -((1.0 + (u - f1) * table[7]) ** -table[9])
    if u < f3:
        return (1.0 + (f3 - u) * table[8]) ** -table[9]
    return 1.0 - math.log((1.0 - u) / (1.0 - f3)) / mu


# ---------------------------------------------------------------------------
# Quadrature oracle: independent numerical integration against the measure.
# ---------------------------------------------------------------------------


def density(spec: LevyMeasureSpec, z) -> np.ndarray:
    """Pointwise density of the measure (vectorized; infinite at 0 for power cores)."""
    z = np.asarray(z, dtype=np.float64)
    az = np.abs(z)
    if isinstance(spec, ExponentialTails):
        side = np.where(z > 0, spec.c_plus, spec.c_minus)
        return np.where(z == 0, 0.0, side * np.exp(-spec.mu * az))
    if isinstance(spec, SingularTempered):
        side = np.where(z > 0, spec.c_plus, spec.c_minus)
        with np.errstate(divide="ignore"):
            core = az ** -(spec.alpha + 1.0)
        tail = np.exp(-spec.mu * (az - 1.0))
        return side * np.where(az <= 1.0, core, tail)
    if isinstance(spec, TemperedStable):
        side = np.where(z > 0, spec.c_plus, spec.c_minus)
        lam = np.where(z > 0, spec.lambda_plus, spec.lambda_minus)
        with np.errstate(divide="ignore"):
            return side * np.exp(-lam * az) * az ** -(spec.alpha + 1.0)
    raise TypeError(f"unknown measure spec {type(spec)!r}")


def _piece_breaks(spec: LevyMeasureSpec) -> tuple[float, ...]:
    if isinstance(spec, SingularTempered):
        return (1.0,)
    return ()


def quadrature_oracle(
    spec: LevyMeasureSpec,
    integrand: Callable[[float], float],
    lower: float,
    upper: float,
    rel_tol: float = 1e-10,
) -> float:
    """Adaptive quadrature of ``integrand(z)`` against the measure over ``lower <= |z| <= upper``.

    This is the validation oracle for every closed form in this module; it
    never runs on the simulation hot path.  The caller must keep a
    neighborhood of zero out of the region unless the integrand is
    ``O(z^2)`` there.

    Raises
    ------
    RuntimeError
        If the integrator cannot reach the requested relative tolerance.
    """
    from scipy.integrate import quad

    if not 0.0 <= lower < upper:
        raise ValueError("need 0 <= lower < upper")
    cuts = sorted({lower, upper} | {b for b in _piece_breaks(spec) if lower < b < upper})
    total = 0.0
    for sign in (1.0, -1.0):
        weight = spec.c_plus if sign > 0 else spec.c_minus
        if weight == 0.0:
            continue
        for a, b in zip(cuts[:-1], cuts[1:]):

            def f(t, _s=sign):
                return integrand(_s * t) * float(density(spec, _s * t))

            val, err = quad(f, a, b, epsabs=0.0, epsrel=rel_tol * 1e-2, limit=400)
            if err > rel_tol * max(abs(val), 1e-300) and err > 1e-13:
                raise RuntimeError(
                    f"quadrature did not converge on [{a}, {b}] (value {val}, error {err})"
                )
            total += val
    return total
