"""Bifurcation direction for separable cubic-type nonlinearities.

For b(x, lam, u1..u4) = sum_j beta_j(x, lam, u_j) with vanishing value and
second u-derivative at the origin, the delay curvature along the branch is

    d2tau := d^2/d eps^2 tau(eps) at eps = 0
           = -(1 / (4 rho)) * Re( (1/sigma) * I3 ),
    I3 := int ( (B1 + B2 e^{-i tau0} + i B3) |u0|^2 u0 + B4 |u0'|^2 u0' )
             * conj(u*) dx,

where B_j(x) is the third u_j-derivative of beta_j at the origin. The
prefactor -1/(4 rho) is validated in the test suite against direct
continuation of the branch and against two hand-derived Poincare-Lindstedt
expansions; the coefficient +3/(8 rho) that circulates in the literature
for this family overstates the curvature by a factor -3/2 and is kept
available as `tau_curvature_literature` for comparison.

The sign of rho * d2tau distinguishes supercritical from subcritical
branches; for hyperbolic problems the usual link from direction to orbital
stability is unproven, so the indicator is reported with a caveat.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotSeparable, QuadraticTermPresent, RhoZero
from .model import LinearizedCoeffs, ProblemSpec
from .quadrature import integral

STABILITY_CAVEAT = (
    "direction indicator only: for hyperbolic wave equations no rigorous "
    "proof links bifurcation direction to orbital stability")

_UVARS = ("u1", "u2", "u3", "u4")
_CHECK_SAMPLES = 64


@dataclass(frozen=True)
class CubicCoeffs:
    """Third derivatives of the separable nonlinearity pieces at the origin."""

    beta1: np.ndarray
    beta2: np.ndarray
    beta3: np.ndarray
    beta4: np.ndarray

    def stack(self):
        return (self.beta1, self.beta2, self.beta3, self.beta4)


@dataclass(frozen=True)
class DirectionResult:
    d2tau: float
    d2tau_literature: float
    rho: float
    supercritical: bool
    indicator: float        # sign(rho * d2tau)
    caveat: str = STABILITY_CAVEAT


def check_structure(spec: ProblemSpec, grid) -> CubicCoeffs:
    """Verify the separable cubic shape and sample the cubic coefficients.

    Separability: all mixed second partials of b in distinct u-arguments
    must vanish at randomly sampled (x, u) points. No quadratic terms:
    the pure second u_j-derivatives must vanish at u = 0. Both checks are
    sampled, not proven. grid is the node array the coefficients are
    sampled on (a LinearizedCoeffs.x works).
    """
    grid = np.asarray(grid, dtype=float)
    rng = np.random.default_rng(20240831)
    xs = rng.uniform(0.0, 1.0, _CHECK_SAMPLES)
    us = rng.uniform(-0.5, 0.5, (_CHECK_SAMPLES, 4))
    env = {"x": xs, "lambda": 0.0}
    for j, u in enumerate(_UVARS):
        env[u] = us[:, j]
    for i in range(4):
        for j in range(i + 1, 4):
            mixed = spec.b.diff(_UVARS[i]).diff(_UVARS[j])
            vals = np.broadcast_to(mixed.eval(env), xs.shape)
            if np.max(np.abs(vals)) > 1e-10:
                raise NotSeparable(
                    f"mixed partial in ({_UVARS[i]}, {_UVARS[j]}) is nonzero; "
                    "the direction formula needs b = sum of beta_j(x, lambda, u_j)")
    env0 = {"x": grid, "lambda": 0.0}
    for u in _UVARS:
        env0[u] = 0.0
    for j, u in enumerate(_UVARS):
        quad = np.broadcast_to(spec.b.diff(u, 2).eval(env0), grid.shape)
        if np.max(np.abs(quad)) > 1e-10:
            raise QuadraticTermPresent(
                f"second derivative in {u} at the origin is nonzero")
    cubics = [np.broadcast_to(spec.b.diff(u, 3).eval(env0), grid.shape).astype(float)
              for u in _UVARS]
    return CubicCoeffs(*cubics)


def cubic_pairing(u0, u0_prime, u_star, tau0, cubic: CubicCoeffs, h) -> complex:
    """The projection integral I3 of the cubic resonance term on the adjoint."""
    b1c, b2c, b3c, b4c = cubic.stack()
    ed = np.exp(-1j * tau0)
    core = ((b1c + b2c * ed + 1j * b3c) * np.abs(u0) ** 2 * u0
            + b4c * np.abs(u0_prime) ** 2 * u0_prime)
    return complex(integral(core * np.conj(u_star), h))


def tau_curvature(u0, u0_prime, u_star, sigma, rho, tau0, cubic, h) -> float:
    """Delay curvature along the branch (validated prefactor -1/(4 rho))."""
    if rho == 0.0:
        raise RhoZero("direction undefined at rho = 0")
    pairing = cubic_pairing(u0, u0_prime, u_star, tau0, cubic, h)
    return float(-(pairing / sigma).real / (4.0 * rho))


def tau_curvature_literature(u0, u0_prime, u_star, sigma, rho, tau0, cubic, h) -> float:
    """Same projection with the published +3/(8 rho) prefactor (for comparison)."""
    if rho == 0.0:
        raise RhoZero("direction undefined at rho = 0")
    pairing = cubic_pairing(u0, u0_prime, u_star, tau0, cubic, h)
    return float(3.0 * (pairing / sigma).real / (8.0 * rho))


def worked_example_curvature(coeffs: LinearizedCoeffs, cubic: CubicCoeffs,
                             sigma, rho) -> float:
    """Closed-form curvature for the constant-speed benchmark family.

    Valid only when a is constant, b3 = b6 = 0, b4 = b5 = c(x), beta4 = 0
    and the eigenfunctions are taken as sin(pi x / 2) (so sigma, rho must
    come from that same convention). Uses the published +3/(8 rho)
    prefactor; it is the algebraic rearrangement of
    tau_curvature_literature for this family and the pair is cross-checked
    in the tests.
    """
    x, h = coeffs.x, coeffs.h
    a0n, b30n = coeffs.nodes("a0"), coeffs.nodes("b30")
    b40n, b50n, b60n = coeffs.nodes("b40"), coeffs.nodes("b50"), coeffs.nodes("b60")
    if (np.max(np.abs(coeffs.nodes("a0x"))) > 1e-12
            or np.max(np.abs(b30n)) > 1e-12 or np.max(np.abs(b60n)) > 1e-12
            or np.max(np.abs(b40n - b50n)) > 1e-12):
        raise NotSeparable("closed form needs constant a, b3 = b6 = 0, b4 = b5")
    if np.max(np.abs(cubic.beta4)) > 1e-12:
        raise NotSeparable("closed form needs beta4 = 0")
    s2 = np.sin(np.pi * x / 2.0) ** 2
    s4 = s2 * s2
    c = b40n
    S = integral(c * s2, h)
    W = integral((2.0 - np.pi / 2.0 * c) * s2, h)
    P1 = integral(cubic.beta1 * s4, h)
    P2 = integral(cubic.beta2 * s4, h)
    P3 = integral(cubic.beta3 * s4, h)
    return float(3.0 * (-S * P1 + W * (P3 - P2)) / (8.0 * rho * abs(sigma) ** 2))


def compute_direction(cert, cubic: CubicCoeffs) -> DirectionResult:
    """Direction data from a certificate (normalized adjoint convention)."""
    if cert.eigenpair is None or cert.adjoint is None:
        raise RhoZero("certificate lacks eigen data; cannot evaluate direction")
    if abs(cert.rho) == 0.0 or not np.isfinite(cert.rho):
        raise RhoZero("crossing speed rho vanished; direction undefined")
    eig, adj, coeffs = cert.eigenpair, cert.adjoint, cert.coeffs
    d2 = tau_curvature(eig.u0, eig.u0_prime, adj.u_star, cert.sigma, cert.rho,
                       cert.tau0, cubic, coeffs.h)
    d2_lit = tau_curvature_literature(eig.u0, eig.u0_prime, adj.u_star,
                                      cert.sigma, cert.rho, cert.tau0, cubic,
                                      coeffs.h)
    indicator = float(np.sign(cert.rho * d2))
    return DirectionResult(d2tau=d2, d2tau_literature=d2_lit, rho=cert.rho,
                           supercritical=indicator > 0, indicator=indicator)
