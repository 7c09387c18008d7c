"""Problem definitions: coefficients, domains, boundary data.

A :class:`PideProblem` bundles everything the chain engine needs about one
parabolic integro-differential problem: the differential coefficients, the
jump scaling, the boundary/terminal data on the complement of the space-time
cylinder, the spatial domain and the jump measure.

Two benchmark problems with known closed-form solutions are built in (one
finite-activity, one with a singular power-core measure), plus a
constant-coefficient factory used for exponential-jump market models and
in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .levy import ExponentialTails, LevyMeasureSpec, SingularTempered

__all__ = [
    "Ball",
    "WholeSpace",
    "Domain",
    "contains",
    "PideProblem",
    "KernelCoeffs",
    "nonsingular_problem",
    "singular_problem",
    "constant_coefficient_problem",
]


@dataclass(frozen=True)
class Ball:
    """Open ball ``|x - center| < radius``; the strict inequality defines the domain."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if not self.radius > 0:
            raise ValueError("radius must be strictly positive")


@dataclass(frozen=True)
class WholeSpace:
    """No spatial boundary: walks stop on the time horizon only."""


Domain = Union[Ball, WholeSpace]


def contains(domain: Domain, x) -> bool | np.ndarray:
    """Membership in the open set; vectorized over leading axes of ``x``."""
    if isinstance(domain, WholeSpace):
        x = np.asarray(x)
        if x.ndim <= 1:
            return True
        return np.ones(x.shape[:-1], dtype=bool)
    diff = np.asarray(x, dtype=np.float64) - domain.center
    dist2 = np.sum(diff * diff, axis=-1)
    inside = dist2 < domain.radius * domain.radius
    if np.ndim(inside) == 0:
        return bool(inside)
    return inside


# Kernel kinds understood by the compiled batch engine.
KERNEL_CONST = 0
KERNEL_POLY = 1


@dataclass(frozen=True)
class KernelCoeffs:
    """Packed coefficient description for the compiled batch engine.

    ``kind = KERNEL_CONST``: pack is ``[b(d) | sigma(d*d row-major) | F(d) | c | g]``.
    ``kind = KERNEL_POLY``: pack is ``[T, f, k3, k2, k1, k0]`` for the built-in
    polynomial benchmark family (diagonal diffusion, cubic source blocks).
    """

    kind: int
    pack: np.ndarray


class ScalarCoeffs:
    """Scalar coefficient evaluators used by the reference (per-chain) engine.

    All callbacks receive a float time and a float tuple/list state.  The
    built-in problems supply closures written against ``math`` so that the
    reference engine reproduces the compiled kernel bit for bit.
    """

    def __init__(self, drift, sigma_xi, jump_vec, c, g):
        self.drift = drift          # (t, x) -> list[d]
        self.sigma_xi = sigma_xi    # (t, x, xi) -> list[d], the product sigma @ xi
        self.jump_vec = jump_vec    # (t, x) -> list[d]
        self.c = c                  # (t, x) -> float
        self.g = g                  # (t, x) -> float


@dataclass
class PideProblem:
    """One Dirichlet or Cauchy problem for the jump-diffusion generator.

    The vectorized callbacks accept ``t`` of shape ``()`` or ``(n,)`` and
    ``x`` of shape ``(d,)`` or ``(n, d)`` and broadcast accordingly; they are
    the public surface used for payoffs, diagnostics and tests.  ``c_max``
    must bound ``coeff_c`` on the closed cylinder; it caps the multiplicative
    functional on every simulated path.
    """

    dim: int
    t0: float
    T: float
    coeff_a: Callable
    coeff_sigma: Callable
    coeff_b: Callable
    coeff_c: Callable
    coeff_g: Callable
    coeff_F: Callable
    boundary_phi: Callable
    domain: Domain
    measure: LevyMeasureSpec
    exact_solution: Optional[Callable] = None
    c_max: float = 0.0
    kernel: Optional[KernelCoeffs] = None
    _scalar: Optional[ScalarCoeffs] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.T > self.t0:
            raise ValueError("need T > t0")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")

    @property
    def horizon(self) -> float:
        return self.T - self.t0

    def scalar_coeffs(self) -> ScalarCoeffs:
        if self._scalar is not None:
            return self._scalar
        return _wrap_vector_coeffs(self)


def _wrap_vector_coeffs(problem: PideProblem) -> ScalarCoeffs:
    # generic fallback: route scalar evaluations through the vectorized callbacks
    def drift(t, x):
        return np.asarray(problem.coeff_b(t, np.asarray(x)), dtype=float).tolist()

    def sigma_xi(t, x, xi):
        sig = np.asarray(problem.coeff_sigma(t, np.asarray(x)), dtype=float)
        return (sig @ np.asarray(xi)).tolist()

    def jump_vec(t, x):
        return np.asarray(problem.coeff_F(t, np.asarray(x)), dtype=float).tolist()

    return ScalarCoeffs(
        drift=drift,
        sigma_xi=sigma_xi,
        jump_vec=jump_vec,
        c=lambda t, x: float(problem.coeff_c(t, np.asarray(x))),
        g=lambda t, x: float(problem.coeff_g(t, np.asarray(x))),
    )


# ---------------------------------------------------------------------------
# Built-in benchmark family: d = 3, open unit ball, diagonal diffusion with
# a11 = 1.21 - x2^2 - x3^2, zero drift, jump scaling F = (f, f, f), c = 0,
# and a polynomial source chosen so the solution is
#     u(t, x) = (1 - exp(-(T - t)) / 2) * (1.21 - x1^4 - x2^4).
# ---------------------------------------------------------------------------


def _poly_source_constants(variant: str, c_plus, c_minus, mu, f, alpha) -> tuple[float, float, float, float]:
    """Constants of the cubic/quadratic/linear/constant source blocks.

    They equal ``(4 f^1, 6 f^2, 4 f^3, 2 f^4)`` times the matching moments of
    the jump measure (first moment taken over the whole line for the
    finite-activity variant, over ``|z| > 1`` for the singular one).
    """
    diff, tot = c_plus - c_minus, c_plus + c_minus
    if variant == "nonsingular":
        k3 = diff * 4.0 * f / mu**2
        k2 = tot * 12.0 * f**2 / mu**3
        k1 = diff * 24.0 * f**3 / mu**4
        k0 = tot * 48.0 * f**4 / mu**5
    else:
        k3 = diff * f * (4.0 / mu + 4.0 / mu**2)
        k2 = tot * f**2 * (6.0 / (2.0 - alpha) + 6.0 / mu + 12.0 / mu**2 + 12.0 / mu**3)
        k1 = diff * f**3 * (
            4.0 / (3.0 - alpha) + 4.0 / mu + 12.0 / mu**2 + 24.0 / mu**3 + 24.0 / mu**4
        )
        k0 = tot * f**4 * (
            2.0 / (4.0 - alpha) + 2.0 / mu + 8.0 / mu**2 + 24.0 / mu**3 + 48.0 / mu**4 + 48.0 / mu**5
        )
    return k3, k2, k1, k0


def _poly_problem(measure, f: float, T: float, t0: float, ks) -> PideProblem:
    k3, k2, k1, k0 = ks

    def coeff_a(t, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(x.shape[:-1] + (3, 3))
        out[..., 0, 0] = 1.21 - x[..., 1] * x[..., 1] - x[..., 2] * x[..., 2]
        out[..., 1, 1] = 1.0
        out[..., 2, 2] = 1.0
        return out

    def coeff_sigma(t, x):
        out = coeff_a(t, x)
        out[..., 0, 0] = np.sqrt(out[..., 0, 0])
        return out

    def coeff_b(t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.zeros(x.shape[:-1] + (3,))

    def coeff_c(t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.zeros(np.broadcast_shapes(np.shape(t), x.shape[:-1]))

    def coeff_F(t, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(x.shape[:-1] + (3,))
        out[...] = f
        return out

    def coeff_g(t, x):
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        x1sq, x2sq = x1 * x1, x2 * x2
        E = np.exp(t - T)
        w = 1.0 - 0.5 * E
        out = 0.5 * E * (1.21 - x1sq * x1sq - x2sq * x2sq)
        out = out + 6.0 * w * (x1sq * (1.21 - x2sq - x3 * x3) + x2sq)
        out = out + w * (
            k3 * (x1sq * x1 + x2sq * x2) + k2 * (x1sq + x2sq) + k1 * (x1 + x2) + k0
        )
        return out

    def solution(t, x):
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        x1sq = x[..., 0] * x[..., 0]
        x2sq = x[..., 1] * x[..., 1]
        return (1.0 - 0.5 * np.exp(t - T)) * (1.21 - x1sq * x1sq - x2sq * x2sq)

    # scalar twins of the evaluations on the chain hot path, written against
    # math.* so they match the compiled kernel bit for bit
    def s_sigma_xi(t, x, xi):
        s11 = math.sqrt(1.21 - x[1] * x[1] - x[2] * x[2])
        return [s11 * xi[0], xi[1], xi[2]]

    def s_g(t, x):
        x1, x2, x3 = x
        x1sq, x2sq = x1 * x1, x2 * x2
        E = math.exp(t - T)
        w = 1.0 - 0.5 * E
        out = 0.5 * E * (1.21 - x1sq * x1sq - x2sq * x2sq)
        out += 6.0 * w * (x1sq * (1.21 - x2sq - x3 * x3) + x2sq)
        out += w * (k3 * (x1sq * x1 + x2sq * x2) + k2 * (x1sq + x2sq) + k1 * (x1 + x2) + k0)
        return out

    scalar = ScalarCoeffs(
        drift=lambda t, x: [0.0, 0.0, 0.0],
        sigma_xi=s_sigma_xi,
        jump_vec=lambda t, x: [f, f, f],
        c=lambda t, x: 0.0,
        g=s_g,
    )
    pack = np.array([T, f, k3, k2, k1, k0], dtype=np.float64)
    return PideProblem(
        dim=3,
        t0=t0,
        T=T,
        coeff_a=coeff_a,
        coeff_sigma=coeff_sigma,
        coeff_b=coeff_b,
        coeff_c=coeff_c,
        coeff_g=coeff_g,
        coeff_F=coeff_F,
        boundary_phi=solution,
        domain=Ball(np.zeros(3), 1.0),
        measure=measure,
        exact_solution=solution,
        c_max=0.0,
        kernel=KernelCoeffs(kind=KERNEL_POLY, pack=pack),
        _scalar=scalar,
    )


def nonsingular_problem(
    f: float = 0.1,
    c_plus: float = 30.0,
    c_minus: float = 1.0,
    mu: float = 3.0,
    T: float = 1.0,
    t0: float = 0.0,
) -> PideProblem:
    """Benchmark problem with the finite-activity exponential-tail measure.

    The closed-form solution is attached as ``exact_solution``; the boundary
    function is its restriction to the complement of the cylinder.  The jump
    part of this problem's generator carries no compensation (the measure is
    finite and the source was built accordingly), so the problem is meant to
    be simulated with ``eps = 0``, where the cutoff quartet degenerates to
    ``(lambda_0, 0, 0, 0)``.
    """
    measure = ExponentialTails(c_plus=c_plus, c_minus=c_minus, mu=mu)
    ks = _poly_source_constants("nonsingular", c_plus, c_minus, mu, f, None)
    return _poly_problem(measure, f, T, t0, ks)


def singular_problem(
    f: float = 0.2,
    c_plus: float = 0.1,
    c_minus: float = 1.0,
    mu: float = 3.0,
    alpha: float = 0.5,
    T: float = 1.0,
    t0: float = 0.0,
) -> PideProblem:
    """Benchmark problem with the singular power-core measure.

    Same differential coefficients, domain, boundary data and solution as
    :func:`nonsingular_problem`; the source carries the extra
    ``alpha``-dependent moment blocks of the singular measure, whose jump
    integral is compensated over ``|z| <= 1``.
    """
    measure = SingularTempered(c_plus=c_plus, c_minus=c_minus, mu=mu, alpha=alpha)
    ks = _poly_source_constants("singular", c_plus, c_minus, mu, f, alpha)
    return _poly_problem(measure, f, T, t0, ks)


def constant_coefficient_problem(
    dim: int,
    t0: float,
    T: float,
    b,
    sigma,
    F,
    measure: LevyMeasureSpec,
    boundary_phi: Callable,
    domain: Optional[Domain] = None,
    c: float = 0.0,
    g: float = 0.0,
    exact_solution: Optional[Callable] = None,
) -> PideProblem:
    """Problem with constant drift/diffusion/jump coefficients.

    Covers exponential-jump market models (Cauchy mode) and degenerate test
    problems.  ``b`` and ``F`` are length-``dim`` vectors, ``sigma`` a
    ``dim x dim`` matrix; ``c`` and ``g`` constants.
    """
    b = np.asarray(b, dtype=np.float64).reshape(dim)
    sigma = np.asarray(sigma, dtype=np.float64).reshape(dim, dim)
    F = np.asarray(F, dtype=np.float64).reshape(dim)
    a_mat = sigma @ sigma.T

    def coeff_a(t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(a_mat, x.shape[:-1] + (dim, dim)).copy()

    def coeff_sigma(t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(sigma, x.shape[:-1] + (dim, dim)).copy()

    def coeff_b(t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(b, x.shape[:-1] + (dim,)).copy()

    def coeff_F(t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(F, x.shape[:-1] + (dim,)).copy()

    def coeff_c(t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.full(np.broadcast_shapes(np.shape(t), x.shape[:-1]), c)

    def coeff_g(t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.full(np.broadcast_shapes(np.shape(t), x.shape[:-1]), g)

    b_list = b.tolist()
    F_list = F.tolist()
    sig_rows = sigma.tolist()

    def s_sigma_xi(t, x, xi):
        out = []
        for i in range(dim):
            row = sig_rows[i]
            acc = 0.0
            for j in range(dim):
                acc += row[j] * xi[j]
            out.append(acc)
        return out

    scalar = ScalarCoeffs(
        drift=lambda t, x: list(b_list),
        sigma_xi=s_sigma_xi,
        jump_vec=lambda t, x: list(F_list),
        c=lambda t, x: c,
        g=lambda t, x: g,
    )
    pack = np.concatenate([b, sigma.reshape(-1), F, [c, g]]).astype(np.float64)
    return PideProblem(
        dim=dim,
        t0=t0,
        T=T,
        coeff_a=coeff_a,
        coeff_sigma=coeff_sigma,
        coeff_b=coeff_b,
        coeff_c=coeff_c,
        coeff_g=coeff_g,
        coeff_F=coeff_F,
        boundary_phi=boundary_phi,
        domain=domain if domain is not None else WholeSpace(),
        measure=measure,
        exact_solution=exact_solution,
        c_max=c,
        kernel=KernelCoeffs(kind=KERNEL_CONST, pack=pack),
        _scalar=scalar,
    )
