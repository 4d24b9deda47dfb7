"""Time-periodic orbits of the transported system by harmonic balance.

The wave problem, rewritten along characteristics, becomes the fixed-point
system v = C(omega, lam) v + D(omega, lam) B(v, omega, tau, lam) for the
2-component field v(t, x), 2pi-periodic in scaled time. Fields are held as
truncated Fourier series in t (harmonics 0..N, negatives by conjugation)
with values on a uniform x-grid; time shifts by omega * A(x, xi) then act
as exact per-harmonic phase factors, and the integral operators reduce to
cumulative quadrature thanks to the multiplicative structure of the
kernels.

The nonlinear operator B is evaluated pseudo-spectrally on 4N+1 equispaced
times, which de-aliases cubic products exactly. Newton treats the stacked
harmonic coefficients plus (omega, tau) as unknowns, with an amplitude
projection on the critical mode and a phase condition closing the system.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import JacobianSingular, NoConvergence
from .model import LinearizedCoeffs, ProblemSpec, kernels, linearize
from .quadrature import cumulative_integral, integral


# ---------------------------------------------------------------------------
# Fourier-in-time field

@dataclass
class FourierField:
    """Truncated Fourier representation v(t, x) = sum_k vhat_k(x) e^{ikt}.

    coef has shape (N+1, 2, M+1): harmonic index 0..N, component, node.
    Negative harmonics are the conjugates (the represented field is real);
    the k = 0 slice is kept real.
    """

    coef: np.ndarray

    @classmethod
    def zeros(cls, N, M):
        return cls(np.zeros((N + 1, 2, M + 1), dtype=complex))

    @property
    def N(self):
        return self.coef.shape[0] - 1

    @property
    def M(self):
        return self.coef.shape[2] - 1

    def copy(self):
        return FourierField(self.coef.copy())

    def enforce_symmetry(self):
        self.coef[0] = self.coef[0].real
        return self

    def max_abs(self):
        return float(np.max(np.abs(self.coef)))

    def synthesize(self, times):
        """Real field values, shape (len(times), 2, M+1)."""
        ks = np.arange(self.N + 1)
        w = np.where(ks == 0, 1.0, 2.0)
        phases = np.exp(1j * np.outer(times, ks)) * w  # (T, N+1)
        flat = self.coef.reshape(self.N + 1, -1)
        vals = (phases @ flat).real
        return vals.reshape(len(times), 2, self.M + 1)

    @classmethod
    def analyze(cls, values, N):
        """Harmonics 0..N of equispaced samples over one period.

        values: (T, 2, M+1) with T >= 2N+1; content above T-N-1 aliases,
        so callers supply enough samples for their nonlinearity degree.
        """
        T = values.shape[0]
        t = 2.0 * np.pi * np.arange(T) / T
        ks = np.arange(N + 1)
        proj = np.exp(-1j * np.outer(ks, t)) / T  # (N+1, T)
        flat = values.reshape(T, -1)
        coef = (proj @ flat).reshape(N + 1, 2, values.shape[2])
        out = cls(coef)
        return out.enforce_symmetry()

    def time_shifted(self, phi):
        """Field t -> v(t + phi, x) (harmonic k picks up e^{ik phi})."""
        ks = np.arange(self.N + 1)
        return FourierField(self.coef * np.exp(1j * phi * ks)[:, None, None])

    # real packing for the Newton unknown vector -----------------------------
    def flatten(self):
        parts = [self.coef[0].real.ravel()]
        for k in range(1, self.N + 1):
            parts.append(self.coef[k].real.ravel())
            parts.append(self.coef[k].imag.ravel())
        return np.concatenate(parts)

    @classmethod
    def unflatten(cls, vec, N, M):
        blk = 2 * (M + 1)
        coef = np.empty((N + 1, 2, M + 1), dtype=complex)
        coef[0] = vec[:blk].reshape(2, M + 1)
        off = blk
        for k in range(1, N + 1):
            re = vec[off:off + blk].reshape(2, M + 1)
            im = vec[off + blk:off + 2 * blk].reshape(2, M + 1)
            coef[k] = re + 1j * im
            off += 2 * blk
        return cls(coef)


def inner_product(v: FourierField, w: FourierField, h) -> float:
    """Time-averaged L2 pairing (1/2pi) int int sum_j v_j w_j dx dt."""
    total = integral(np.sum(v.coef[0].real * w.coef[0].real, axis=0), h)
    for k in range(1, v.N + 1):
        total += 2.0 * integral(
            np.sum(v.coef[k] * np.conj(w.coef[k]), axis=0), h).real
    return float(total)


# ---------------------------------------------------------------------------
# operator context: everything apply_* needs at a fixed lambda

@dataclass(frozen=True)
class OperatorContext:
    spec: ProblemSpec
    coeffs: LinearizedCoeffs
    lam: float
    x: np.ndarray
    h: float
    a: np.ndarray
    ax: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    b4: np.ndarray
    F: np.ndarray      # antiderivative of 1/a on nodes
    E1: np.ndarray     # exp of antiderivative of b1/a
    E2: np.ndarray


def operator_context(spec: ProblemSpec, lam: float, M: int) -> OperatorContext:
    coeffs = linearize(spec, lam, M)
    kern = kernels(coeffs)
    return OperatorContext(
        spec=spec, coeffs=coeffs, lam=float(lam),
        x=coeffs.x, h=coeffs.h,
        a=coeffs.nodes("a"), ax=coeffs.nodes("ax"),
        b1=coeffs.nodes("b1"), b2=coeffs.nodes("b2"),
        b3=coeffs.nodes("b3"), b4=coeffs.nodes("b4"),
        F=kern.F_nodes, E1=np.exp(kern.logE1_nodes), E2=np.exp(kern.logE2_nodes))


def apply_C(v: FourierField, omega: float, ctx: OperatorContext) -> FourierField:
    """Boundary-transport part: values carried along characteristics from
    the opposite edge, with per-harmonic phase factors for the time shift."""
    ks = np.arange(v.N + 1)[:, None]
    phase = np.exp(1j * omega * ks * ctx.F[None, :])        # e^{ik w F(x)}
    out = np.empty_like(v.coef)
    out[:, 0, :] = -(1.0 / ctx.E1)[None, :] * phase * v.coef[:, 1, 0][:, None]
    tail_phase = np.exp(-1j * omega * ks * (ctx.F[None, :] - ctx.F[-1]))
    out[:, 1, :] = (ctx.E2 / ctx.E2[-1])[None, :] * tail_phase * v.coef[:, 0, -1][:, None]
    return FourierField(out).enforce_symmetry()


def apply_D(f: FourierField, omega: float, ctx: OperatorContext) -> FourierField:
    """Interior-transport part: characteristic integrals of a source field.

    The kernels factorize (c's are ratios of one antiderivative table, the
    shift phases split likewise), so each harmonic costs one cumulative
    quadrature per component. Both components carry a minus sign: it drops
    out of the telescoping along either characteristic family, and the
    critical mode is a fixed point of C + D(J+K) only with this sign
    (enforced by the kernel tests).
    """
    ks = np.arange(f.N + 1)[:, None]
    ph = np.exp(1j * omega * ks * ctx.F[None, :])            # (N+1, M+1)
    g1 = ctx.E1[None, :] / ph * f.coef[:, 0, :] / ctx.a[None, :]
    cum1 = cumulative_integral(g1, ctx.h)
    out = np.empty_like(f.coef)
    out[:, 0, :] = -(ph / ctx.E1[None, :]) * cum1
    g2 = ph / ctx.E2[None, :] * f.coef[:, 1, :] / ctx.a[None, :]
    cum2 = cumulative_integral(g2, ctx.h)
    out[:, 1, :] = -(ctx.E2[None, :] / ph) * (cum2[:, -1][:, None] - cum2)
    return FourierField(out).enforce_symmetry()


def apply_JK(v: FourierField, omega: float, tau: float,
             ctx: OperatorContext) -> FourierField:
    """Linearization of B at v = 0: partial-integral part plus the
    off-diagonal pointwise part. Used for cross-checks and basin probes."""
    ks = np.arange(v.N + 1)
    J = 0.5 * cumulative_integral((v.coef[:, 0, :] - v.coef[:, 1, :]) / ctx.a[None, :],
                                  ctx.h)
    mix = (ctx.b3[None, :] + ctx.b4[None, :]
           * np.exp(-1j * omega * tau * ks)[:, None]) * J
    out = np.empty_like(v.coef)
    out[:, 0, :] = mix + ctx.b2[None, :] * v.coef[:, 1, :]
    out[:, 1, :] = mix + ctx.b1[None, :] * v.coef[:, 0, :]
    return FourierField(out).enforce_symmetry()


def apply_B(v: FourierField, omega: float, tau: float,
            ctx: OperatorContext) -> FourierField:
    """Full nonlinear source, pseudo-spectral with a cubic de-aliasing margin.

    Steps: cumulative x-quadrature gives the displacement harmonics, the
    delay becomes a phase factor, all fields are synthesized on 4N+1
    times, the coefficient expression is evaluated pointwise, and the
    result is analyzed back to harmonics 0..N.
    """
    N, M = v.N, v.M
    ks = np.arange(N + 1)
    Jhat = 0.5 * cumulative_integral(
        (v.coef[:, 0, :] - v.coef[:, 1, :]) / ctx.a[None, :], ctx.h)
    Jdel = Jhat * np.exp(-1j * omega * tau * ks)[:, None]

    T = 4 * N + 1
    t = 2.0 * np.pi * np.arange(T) / T
    w = np.where(ks == 0, 1.0, 2.0)
    phases = np.exp(1j * np.outer(t, ks)) * w                # (T, N+1)

    def synth(hats):
        return (phases @ hats).real                          # (T, M+1)

    v1 = synth(v.coef[:, 0, :])
    v2 = synth(v.coef[:, 1, :])
    u1 = synth(Jhat)
    u2 = synth(Jdel)
    u3 = 0.5 * (v1 + v2)
    u4 = 0.5 * (v1 - v2) / ctx.a[None, :]
    env = {"x": ctx.x[None, :], "lambda": ctx.lam,
           "u1": u1, "u2": u2, "u3": u3, "u4": u4}
    bvals = np.broadcast_to(ctx.spec.b.eval(env), v1.shape)
    Bfull = bvals - 0.5 * ctx.ax[None, :] * (v1 - v2)
    vals = np.stack([Bfull - ctx.b1[None, :] * v1,
                     Bfull - ctx.b2[None, :] * v2], axis=1)  # (T, 2, M+1)
    return FourierField.analyze(vals, N)


# ---------------------------------------------------------------------------
# orbits, constraints, Newton

@dataclass
class PeriodicOrbit:
    v: FourierField
    omega: float
    tau: float
    eps: float
    lam: float
    residual_norm: float = np.inf


@dataclass(frozen=True)
class ModeBasis:
    """Critical-mode data pinned to the solve grid: the first-harmonic
    profile v0(x) used by the amplitude and phase constraints."""

    v0: np.ndarray      # (2, M+1) complex
    nrm: float          # <v0^1, v0^1> = int sum|v0_j|^2 dx / 2
    tau0: float

    def projection(self, v: FourierField, h) -> complex:
        return complex(integral(np.sum(v.coef[1] * np.conj(self.v0), axis=0), h))


def mode_basis(cert, ctx: OperatorContext) -> ModeBasis:
    """Interpolate the certificate eigenpair onto the solve grid.

    The certificate grid must be a refinement of the solve grid (node sets
    nest when M_cert is a multiple of M_solve).
    """
    Mc, Ms = cert.coeffs.M, ctx.coeffs.M
    if Mc % Ms != 0:
        raise ValueError("certificate grid must refine the solve grid")
    stride = Mc // Ms
    u0 = cert.eigenpair.u0[::stride]
    u0p = cert.eigenpair.u0_prime[::stride]
    a0 = cert.coeffs.nodes("a0")[::stride]
    v0 = np.stack([1j * u0 + a0 * u0p, 1j * u0 - a0 * u0p])
    nrm = 0.5 * float(integral(np.sum(np.abs(v0) ** 2, axis=0), ctx.h))
    return ModeBasis(v0=v0, nrm=nrm, tau0=cert.tau0)


def predictor(cert, eps, N, ctx: OperatorContext) -> PeriodicOrbit:
    """Tangent-space initial guess: pure first harmonic along the critical
    mode at amplitude eps, with omega = 1 and tau at the critical delay."""
    basis = mode_basis(cert, ctx)
    v = FourierField.zeros(N, ctx.coeffs.M)
    v.coef[1] = 0.5 * eps * basis.v0
    return PeriodicOrbit(v=v, omega=1.0, tau=basis.tau0, eps=eps, lam=ctx.lam)


def residual(orbit: PeriodicOrbit, ctx: OperatorContext,
             basis: ModeBasis) -> np.ndarray:
    """Stacked fixed-point residual plus the amplitude and phase rows."""
    v = orbit.v
    Bv = apply_B(v, orbit.omega, orbit.tau, ctx)
    lhs = v.coef - apply_C(v, orbit.omega, ctx).coef \
        - apply_D(Bv, orbit.omega, ctx).coef
    proj = basis.projection(v, ctx.h)
    rows = np.array([proj.real / basis.nrm - orbit.eps,
                     proj.imag / basis.nrm])
    return np.concatenate([FourierField(lhs).enforce_symmetry().flatten(), rows])


@dataclass
class SolverOptions:
    tol_orbit: float = 1e-9
    newton_target: float = 1e-11
    max_iter: int = 30
    max_jacobians: int = 4
    fd_step: float = 1e-7
    rank_rcond: float = 1e-12


def _pack(orbit):
    return np.concatenate([orbit.v.flatten(), [orbit.omega, orbit.tau]])


def _unpack(z, N, M, eps, lam):
    v = FourierField.unflatten(z[:-2], N, M)
    return PeriodicOrbit(v=v, omega=float(z[-2]), tau=float(z[-1]),
                         eps=eps, lam=lam)


def newton_solve(guess: PeriodicOrbit, eps: float, ctx: OperatorContext,
                 basis: ModeBasis, opts: SolverOptions = None) -> PeriodicOrbit:
    """Damped Newton with a dense finite-difference Jacobian.

    The Jacobian is built columnwise by forward differences, rank-checked
    once (rank deficiency raises JacobianSingular: a resonance or a failed
    certificate), then LU-factored and reused chord-style until progress
    stalls. Unknowns are the packed real harmonics plus (omega, tau).
    """
    opts = opts or SolverOptions()
    N, M = guess.v.N, guess.v.M
    z = _pack(replace(guess, eps=eps))

    def res(zv):
        return residual(_unpack(zv, N, M, eps, ctx.lam), ctx, basis)

    r = res(z)
    rn = float(np.max(np.abs(r)))
    if eps == 0.0 and guess.v.max_abs() == 0.0 and rn <= opts.tol_orbit:
        # the trivial orbit; at the bifurcation point itself the Jacobian
        # is legitimately singular, so skip the uniqueness check
        out = _unpack(z, N, M, eps, ctx.lam)
        out.residual_norm = rn
        return out
    n_jac = 0
    lu = None
    for it in range(opts.max_iter):
        # the rank check below doubles as the local-uniqueness certificate,
        # so the first Jacobian is built even if the guess already meets
        # the tolerance
        if rn <= opts.newton_target and n_jac > 0:
            break
        if lu is None:
            if n_jac >= opts.max_jacobians:
                break
            J = np.empty((len(r), len(z)))
            for j in range(len(z)):
                dz = opts.fd_step * (1.0 + abs(z[j]))
                zp = z.copy()
                zp[j] += dz
                J[:, j] = (res(zp) - r) / dz
            n_jac += 1
            _, _, rank = scipy.linalg.lstsq(J, -r, cond=opts.rank_rcond,
                                            lapack_driver="gelsy")[:3]
            if rank < len(z):
                raise JacobianSingular(
                    f"Newton matrix rank {rank} < {len(z)}; "
                    "resonant mode or failed certificate")
            lu = scipy.linalg.lu_factor(J)
        if rn <= opts.newton_target:
            break
        step = scipy.linalg.lu_solve(lu, -r)
        t = 1.0
        improved = False
        for _ in range(12):
            z_new = z + t * step
            r_new = res(z_new)
            rn_new = float(np.max(np.abs(r_new)))
            if rn_new < rn:
                improved = True
                break
            t *= 0.5
        if not improved:
            lu = None   # stale Jacobian; rebuild
            continue
        slow = rn_new > 0.5 * rn
        z, r, rn = z_new, r_new, rn_new
        if slow and t < 1.0:
            lu = None
    if rn > opts.tol_orbit:
        raise NoConvergence(
            f"orbit residual {rn:.3e} above {opts.tol_orbit:.1e} "
            f"after {opts.max_iter} iterations",
            last_good=None)
    out = _unpack(z, N, M, eps, ctx.lam)
    out.residual_norm = rn
    return out


@dataclass
class BranchResult:
    orbits: list
    fit_tau_curvature: float
    fit_tau_slope: float
    fit_omega_curvature: float
    fit_omega_slope: float


def _fit_slope_curvature(eps, values, base):
    """Least squares of value - base = s*eps + (c/2)*eps^2 on given points."""
    eps = np.asarray(eps, dtype=float)
    A = np.vstack([eps, eps ** 2 / 2.0]).T
    sol, *_ = np.linalg.lstsq(A, np.asarray(values) - base, rcond=None)
    return float(sol[1]), float(sol[0])


def continue_branch(cert, eps_grid, ctx: OperatorContext, N: int,
                    opts: SolverOptions = None) -> BranchResult:
    """March the orbit family over increasing eps, Newton from the previous
    point, then fit the delay and frequency laws on the three smallest eps."""
    opts = opts or SolverOptions()
    eps_grid = list(eps_grid)
    if len(eps_grid) < 3 or any(e <= 0 for e in eps_grid) \
            or any(b <= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps_grid must be at least 3 increasing positive values")
    basis = mode_basis(cert, ctx)
    orbits = []
    guess = predictor(cert, eps_grid[0], N, ctx)
    for eps in eps_grid:
        try:
            orbit = newton_solve(guess, eps, ctx, basis, opts)
        except NoConvergence as err:
            err.last_good = orbits[-1].eps if orbits else None
            raise
        orbits.append(orbit)
        guess = orbit
    smallest = orbits[:3]
    taus = [o.tau for o in smallest]
    omegas = [o.omega for o in smallest]
    epss = [o.eps for o in smallest]
    if ctx.lam == 0.0:
        tau_c, tau_s = _fit_slope_curvature(epss, taus, cert.tau0)
        om_c, om_s = _fit_slope_curvature(epss, omegas, 1.0)
    else:
        # the branch root moves with lambda: include a free intercept
        A = np.vstack([np.ones(3), epss, np.square(epss) / 2.0]).T
        tsol = np.linalg.solve(A, np.array(taus))
        osol = np.linalg.solve(A, np.array(omegas))
        tau_s, tau_c = float(tsol[1]), float(tsol[2])
        om_s, om_c = float(osol[1]), float(osol[2])
    return BranchResult(orbits=orbits, fit_tau_curvature=tau_c,
                        fit_tau_slope=tau_s, fit_omega_curvature=om_c,
                        fit_omega_slope=om_s)


# ---------------------------------------------------------------------------
# reconstruction and verification in the original variables

@dataclass
class ReconstructedField:
    times: np.ndarray
    x: np.ndarray
    u: np.ndarray        # (T, M+1)
    u_t: np.ndarray      # dt in scaled time
    u_x: np.ndarray
    u_hat: np.ndarray    # harmonics of u, (N+1, M+1)


def reconstruct_u(orbit: PeriodicOrbit, ctx: OperatorContext,
                  n_times: int = None) -> ReconstructedField:
    """Displacement field from the transported components.

    u is the characteristic integral of (v1 - v2) / (2a); its time and
    space derivatives come from the pointwise identities
    omega u_t = (v1 + v2)/2 and u_x = (v1 - v2)/(2a).
    """
    v = orbit.v
    N = v.N
    T = n_times or (4 * N + 1)
    t = 2.0 * np.pi * np.arange(T) / T
    u_hat = 0.5 * cumulative_integral(
        (v.coef[:, 0, :] - v.coef[:, 1, :]) / ctx.a[None, :], ctx.h)
    ks = np.arange(N + 1)
    w = np.where(ks == 0, 1.0, 2.0)
    phases = np.exp(1j * np.outer(t, ks)) * w
    u = (phases @ u_hat).real
    vals = v.synthesize(t)
    u_t = 0.5 * (vals[:, 0, :] + vals[:, 1, :]) / orbit.omega
    u_x = 0.5 * (vals[:, 0, :] - vals[:, 1, :]) / ctx.a[None, :]
    return ReconstructedField(times=t, x=ctx.x, u=u, u_t=u_t, u_x=u_x,
                              u_hat=u_hat)


def pde_residual_check(orbit: PeriodicOrbit, ctx: OperatorContext) -> float:
    """Max-norm of the second-order equation on interior collocation points.

    Time derivatives and the delay are spectral in the harmonics of the
    reconstructed u; space derivatives use centered 4th-order differences,
    making this check independent of the characteristic formulation.
    """
    rec = reconstruct_u(orbit, ctx)
    N = orbit.v.N
    T = len(rec.times)
    ks = np.arange(N + 1)
    w = np.where(ks == 0, 1.0, 2.0)
    phases = np.exp(1j * np.outer(rec.times, ks)) * w
    u_tt = (phases @ (-(ks ** 2)[:, None] * rec.u_hat)).real
    u_del = (phases @ (np.exp(-1j * orbit.omega * orbit.tau * ks)[:, None]
                       * rec.u_hat)).real
    u_t = (phases @ (1j * ks[:, None] * rec.u_hat)).real
    h = ctx.h
    u = rec.u
    u_x = (-u[:, 4:] + 8 * u[:, 3:-1] - 8 * u[:, 1:-3] + u[:, :-4]) / (12 * h)
    u_xx = (-u[:, 4:] + 16 * u[:, 3:-1] - 30 * u[:, 2:-2]
            + 16 * u[:, 1:-3] - u[:, :-4]) / (12 * h * h)
    sl = slice(2, u.shape[1] - 2)
    env = {"x": ctx.x[None, sl], "lambda": ctx.lam,
           "u1": u[:, sl], "u2": u_del[:, sl],
           "u3": orbit.omega * u_t[:, sl], "u4": u_x}
    bvals = np.broadcast_to(ctx.spec.b.eval(env), u_xx.shape)
    res = (orbit.omega ** 2 * u_tt[:, sl]
           - ctx.a[None, sl] ** 2 * u_xx - bvals)
    return float(np.max(np.abs(res)))
