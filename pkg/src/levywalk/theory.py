"""Error and cost model of the restricted jump-adapted scheme.

All quantities are profiles: they carry the full dependence on the cutoff
``eps`` and the step cap ``h`` but drop unknown multiplicative constants, so
consumers compare ratios and log-log slopes rather than absolute values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .levy import LevyMeasureSpec, cutoff_quantities, third_moment_tail

__all__ = ["BiasProfile", "bias_profile", "steps_bound", "optimal_h", "cost"]


@dataclass(frozen=True)
class BiasProfile:
    """Additive components of the weak-error profile (up to constants).

    ``term_restricted`` is the accumulated one-step error of the restricted
    jump-adapted Euler scheme, ``term_boundary`` the final-step overshoot
    contribution, and ``term_smalljump`` the bias of replacing jumps below
    the cutoff by a diffusion.
    """

    term_restricted: float
    term_boundary: float
    term_smalljump: float

    @property
    def total(self) -> float:
        return self.term_restricted + self.term_boundary + self.term_smalljump


def bias_profile(spec: LevyMeasureSpec, eps: float, h: float) -> BiasProfile:
    """Evaluate the three error terms for a measure at cutoff ``eps`` and cap ``h``.

    For symmetric measures the compensator vanishes and the ``1 + gamma^2``
    prefactor of the restricted term is exactly 1.
    """
    if eps <= 0 or h <= 0:
        raise ValueError("eps and h must be strictly positive")
    cut = cutoff_quantities(spec, eps)
    lam, gamma = cut.lambda_eps, cut.gamma_eps
    lh = lam * h
    emlh = math.exp(-lh)
    restricted = (1.0 + gamma * gamma) * (1.0 / lam - h * emlh / (1.0 - emlh))
    boundary = (1.0 - emlh) / lam
    return BiasProfile(
        term_restricted=restricted,
        term_boundary=boundary,
        term_smalljump=third_moment_tail(spec, eps),
    )


def steps_bound(lambda_eps: float, h: float, horizon: float) -> float:
    """Upper bound on the expected number of chain steps per trajectory."""
    if lambda_eps <= 0 or h <= 0 or horizon <= 0:
        raise ValueError("arguments must be strictly positive")
    return horizon * lambda_eps / -math.expm1(-lambda_eps * h) + 1.0


def optimal_h(eps: float, alpha: float, horizon: float) -> float:
    """Cost-optimal step cap for a power core of index ``alpha``.

    For ``alpha > 1`` restricting the jump-adapted steps pays off and the
    optimal cap is ``eps^(1+alpha)``; for ``alpha <= 1`` the cap is best
    left inactive, realized as one full horizon.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie strictly inside (0, 2)")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie strictly inside (0, 1)")
    if horizon <= 0:
        raise ValueError("horizon must be strictly positive")
    if alpha > 1.0:
        return eps ** (1.0 + alpha)
    return horizon


def cost(lambda_eps: float, h: float) -> float:
    """Expected steps per unit time, ``lambda / (1 - exp(-lambda h))``.

    Monotone decreasing in ``h``; tends to ``lambda`` for large ``lambda h``
    (pure jump-adapted stepping) and to ``1/h`` for small ``lambda h``.
    """
    if lambda_eps <= 0 or h <= 0:
        raise ValueError("arguments must be strictly positive")
    return lambda_eps / -math.expm1(-lambda_eps * h)
