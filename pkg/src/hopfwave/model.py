"""Problem definition and derived coefficient fields.

Holds the wave-equation data (a, b) and produces everything the rest of
the toolkit consumes: the linearization coefficients b_3..b_6 at a given
parameter value and at 0, the characteristic combinations b_1, b_2, the
transport kernels c_1, c_2, A, and the Fredholm integral.

Conventions (x from 0 to 1, uniform grid):
    b_j(x, lam) = d b / d u_{j-2} at (x, lam, 0, 0, 0, 0), j = 3..6
    b_1 = (-a_x + b_5 + b_6/a) / 2
    b_2 = ( a_x + b_5 - b_6/a) / 2
    A(x, xi)  = integral_xi^x  dz / a(z)
    c_1(x, xi) = exp( integral_x^xi b_1/a dz )   (note the orientation)
    c_2(x, xi) = exp( integral_xi^x b_2/a dz )
so c_1(x,x) = c_2(x,x) = 1 and A(x,x) = 0 exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exprlang
from .errors import SpecInvalid
from .quadrature import cubic_interp, cumulative_integral, integral

_UVARS = ("u1", "u2", "u3", "u4")
_POSITIVITY_SAMPLES = 1024
_POSITIVITY_MARGIN = 1e-10


def _sampled_env(x, lam):
    env = {"x": x, "lambda": lam}
    for u in _UVARS:
        env[u] = 0.0
    return env


@dataclass(frozen=True)
class ProblemSpec:
    """Wave-equation data: wave speed a(x, lambda) and nonlinearity b.

    b may arrive either as one joint expression in (x, lambda, u1..u4) or as
    a list of four single-argument pieces beta_j(x, lambda, u_j); in the
    latter case the joint b is their sum.
    """

    a: exprlang.Expr
    b: exprlang.Expr
    betas: tuple | None = None
    lam: float = 0.0
    delay_sign_allowed: bool = True

    @classmethod
    def from_expressions(cls, a, b=None, betas=None, lam=0.0, delay_sign_allowed=True):
        if isinstance(a, str):
            a = exprlang.parse(a)
        if betas is not None:
            if b is not None:
                raise SpecInvalid("give either b or beta, not both")
            if len(betas) != 4:
                raise SpecInvalid("beta must list exactly 4 expressions")
            betas = tuple(exprlang.parse(s) if isinstance(s, str) else s for s in betas)
            for j, beta in enumerate(betas):
                extra = exprlang.free_variables(beta) - {"x", "lambda", _UVARS[j]}
                if extra:
                    raise SpecInvalid(
                        f"beta[{j}] may only depend on x, lambda, {_UVARS[j]}; "
                        f"found {sorted(extra)}")
            b = betas[0]
            for beta in betas[1:]:
                b = exprlang.add(b, beta)
        elif b is None:
            raise SpecInvalid("problem needs b or beta")
        elif isinstance(b, str):
            b = exprlang.parse(b)
        spec = cls(a=a, b=b, betas=betas, lam=float(lam),
                   delay_sign_allowed=bool(delay_sign_allowed))
        spec.validate()
        return spec

    def validate(self):
        """Sampled hard checks: a > 0 and b(x, lam, 0,0,0,0) = 0."""
        x = np.linspace(0.0, 1.0, _POSITIVITY_SAMPLES)
        for lam in {self.lam, 0.0}:
            a_vals = np.broadcast_to(self.a.eval(_sampled_env(x, lam)), x.shape)
            if np.min(a_vals) <= _POSITIVITY_MARGIN:
                raise SpecInvalid(
                    f"a(x, {lam}) must be positive; min sampled value "
                    f"{np.min(a_vals):.3e}")
            b_vals = np.broadcast_to(self.b.eval(_sampled_env(x, lam)), x.shape)
            if np.max(np.abs(b_vals)) > 1e-12:
                raise SpecInvalid(
                    f"b(x, {lam}, 0,0,0,0) must vanish; max sampled value "
                    f"{np.max(np.abs(b_vals)):.3e}")


@dataclass(frozen=True)
class LinearizedCoeffs:
    """Sampled coefficient fields on a uniform grid.

    Arrays live on the refined grid xx (nodes plus midpoints, 2M+1 points)
    so the fixed-step RK4 shooting can evaluate at half steps; the public
    node views slice every other point. Fields with suffix 0 are at
    lambda = 0; the rest at the stored lam.
    """

    lam: float
    M: int
    xx: np.ndarray
    a: np.ndarray
    ax: np.ndarray
    axx: np.ndarray
    b3: np.ndarray
    b4: np.ndarray
    b5: np.ndarray
    b6: np.ndarray
    b6x: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    a0: np.ndarray
    a0x: np.ndarray
    a0xx: np.ndarray
    b30: np.ndarray
    b40: np.ndarray
    b50: np.ndarray
    b60: np.ndarray
    b60x: np.ndarray
    b10: np.ndarray
    b20: np.ndarray

    @property
    def x(self):
        """Node grid (M+1 points)."""
        return self.xx[::2]

    @property
    def h(self):
        return 1.0 / self.M

    def nodes(self, name):
        """Node-grid view of a refined-grid array field."""
        return getattr(self, name)[::2]


def linearize(spec: ProblemSpec, lam: float, M: int) -> LinearizedCoeffs:
    """Sample a, its derivatives, and all linearization coefficients.

    The b_j come from exact expression derivatives evaluated at
    (x, lam, 0, 0, 0, 0); nothing is finite-differenced.
    """
    if M < 16:
        raise ValueError("M must be at least 16")
    xx = np.linspace(0.0, 1.0, 2 * M + 1)

    def fields(at_lam):
        env = _sampled_env(xx, at_lam)
        a = np.broadcast_to(spec.a.eval(env), xx.shape).astype(float)
        ax = np.broadcast_to(spec.a.diff("x").eval(env), xx.shape).astype(float)
        axx = np.broadcast_to(spec.a.diff("x", 2).eval(env), xx.shape).astype(float)
        bj = [np.broadcast_to(spec.b.diff(u).eval(env), xx.shape).astype(float)
              for u in _UVARS]
        b6x = np.broadcast_to(
            spec.b.diff("u4").diff("x").eval(env), xx.shape).astype(float)
        b1 = 0.5 * (-ax + bj[2] + bj[3] / a)
        b2 = 0.5 * (ax + bj[2] - bj[3] / a)
        return a, ax, axx, bj, b6x, b1, b2

    a, ax, axx, bj, b6x, b1, b2 = fields(lam)
    a0, a0x, a0xx, bj0, b60x, b10, b20 = fields(0.0)
    return LinearizedCoeffs(
        lam=float(lam), M=M, xx=xx,
        a=a, ax=ax, axx=axx,
        b3=bj[0], b4=bj[1], b5=bj[2], b6=bj[3], b6x=b6x, b1=b1, b2=b2,
        a0=a0, a0x=a0x, a0xx=a0xx,
        b30=bj0[0], b40=bj0[1], b50=bj0[2], b60=bj0[3], b60x=b60x,
        b10=b10, b20=b20,
    )


@dataclass(frozen=True)
class CharKernels:
    """Transport kernels backed by cumulative quadrature tables.

    F, logE1, logE2 are antiderivatives of 1/a, b1/a, b2/a on the refined
    grid; arbitrary-point queries interpolate them with cubics, so the
    kernel error is O(M^-4).
    """

    xx: np.ndarray
    F: np.ndarray
    logE1: np.ndarray
    logE2: np.ndarray

    @property
    def hh(self):
        return self.xx[1] - self.xx[0]

    def _at(self, table, x):
        return cubic_interp(table, 0.0, self.hh, x)

    def A(self, x, xi):
        return self._at(self.F, x) - self._at(self.F, xi)

    def c1(self, x, xi):
        return np.exp(self._at(self.logE1, xi) - self._at(self.logE1, x))

    def c2(self, x, xi):
        return np.exp(self._at(self.logE2, x) - self._at(self.logE2, xi))

    # node-grid tables for the harmonic operators
    @property
    def F_nodes(self):
        return self.F[::2]

    @property
    def logE1_nodes(self):
        return self.logE1[::2]

    @property
    def logE2_nodes(self):
        return self.logE2[::2]


def kernels(coeffs: LinearizedCoeffs) -> CharKernels:
    """Build the cumulative tables behind c1, c2, A at coeffs.lam."""
    hh = coeffs.xx[1] - coeffs.xx[0]
    F = cumulative_integral(1.0 / coeffs.a, hh)
    logE1 = cumulative_integral(coeffs.b1 / coeffs.a, hh)
    logE2 = cumulative_integral(coeffs.b2 / coeffs.a, hh)
    return CharKernels(xx=coeffs.xx, F=F, logE1=logE1, logE2=logE2)


def fredholm_integral(coeffs: LinearizedCoeffs) -> float:
    """integral of b5^0 / a_0 over [0, 1]; nonzero keeps small divisors away."""
    hh = coeffs.xx[1] - coeffs.xx[0]
    return float(integral(coeffs.b50 / coeffs.a0, hh))
