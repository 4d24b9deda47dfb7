import numpy as np
import pytest

from hopfwave import eigen
from hopfwave.errors import ResidualAboveTolerance, RhoZero
from hopfwave.model import ProblemSpec, linearize
from hopfwave.quadrature import integral

from conftest import sin_convention

TAU0 = np.pi / 2


@pytest.fixture(scope="module")
def co_up(spec_cubic_up):
    return linearize(spec_cubic_up, 0.0, 256)


def characteristic_root_crossing_speed(c):
    """Independent oracle for the crossing speed of the constant-speed
    benchmark with b4 = b5 = c: Newton on the mode-1 characteristic
    equation mu^2 - c*mu - c*e^{-mu tau} + 1 = 0, differenced in tau."""
    def root(tau):
        mu = 1j
        for _ in range(60):
            h = mu * mu - c * mu - c * np.exp(-mu * tau) + 1
            hp = 2 * mu - c + c * tau * np.exp(-mu * tau)
            mu = mu - h / hp
        return mu
    d = 1e-6
    return (root(TAU0 + d).real - root(TAU0 - d).real) / (2 * d)


def test_shoot_benchmark(co_up):
    res = eigen.shoot_evp(1j, TAU0, co_up)
    assert abs(res.D) < 1e-8
    x = co_up.x
    assert np.max(np.abs(res.u - (2 / np.pi) * np.sin(np.pi * x / 2))) < 1e-9


def test_shoot_no_delay_constant():
    spec = ProblemSpec.from_expressions(a="2/pi", b="0*u1")
    co = linearize(spec, 0.0, 256)
    res = eigen.shoot_evp(1j, 0.7, co)
    assert abs(res.D) < 1e-9          # cos(pi/2) = 0, delay term absent
    spec1 = ProblemSpec.from_expressions(a="1", b="0*u1")
    co1 = linearize(spec1, 0.0, 64)
    res1 = eigen.shoot_evp(0.0, 0.7, co1)
    assert res1.D == pytest.approx(1.0, abs=1e-12)   # u'' = 0 -> u = x
    assert np.max(np.abs(res1.u - co1.x)) < 1e-12


def test_characteristic_symmetries(co_up):
    rng = np.random.default_rng(3)
    for tau in rng.uniform(0.5, 3.0, 4):
        D = eigen.shoot_evp(1j, tau, co_up).D
        assert eigen.shoot_evp(-1j, tau, co_up).D == pytest.approx(np.conj(D), rel=1e-12)
        assert eigen.shoot_evp(1j, tau + 2 * np.pi, co_up).D == pytest.approx(D, rel=1e-12)


def test_characteristic_holomorphy(co_up):
    # Cauchy-Riemann by finite differences of the shooting mismatch
    h = 1e-6
    for mu in (1j, 0.3 + 1.2j):
        d_re = (eigen.shoot_evp(mu + h, TAU0, co_up).D
                - eigen.shoot_evp(mu - h, TAU0, co_up).D) / (2 * h)
        d_im = (eigen.shoot_evp(mu + 1j * h, TAU0, co_up).D
                - eigen.shoot_evp(mu - 1j * h, TAU0, co_up).D) / (2 * h)
        assert d_im == pytest.approx(1j * d_re, rel=1e-5, abs=1e-5)


def test_find_tau0(co_up):
    tau0 = eigen.find_tau0(1.4, co_up)
    assert tau0 == pytest.approx(TAU0, abs=1e-8)
    shifted = eigen.find_tau0(1.4 + 2 * np.pi, co_up)
    assert shifted == pytest.approx(TAU0 + 2 * np.pi, abs=1e-8)
    assert eigen.shoot_evp(1j, shifted, co_up).D == pytest.approx(
        eigen.shoot_evp(1j, tau0, co_up).D, abs=1e-10)


def test_find_tau0_no_delay_dependence():
    # without a delay term the mismatch cannot be driven to zero
    spec = ProblemSpec.from_expressions(a="1", b="-u3")
    co = linearize(spec, 0.0, 64)
    with pytest.raises(ResidualAboveTolerance):
        eigen.find_tau0(1.0, co)


def test_a2_scan_detects_steady_resonance(co_up):
    # at c = +1 the constant-speed benchmark has a genuine steady-state
    # resonance: mu = 0 satisfies the same ODE as the critical mode
    scan = eigen.check_A2(TAU0, 10, co_up)
    by_k = dict(scan)
    assert set(by_k) == {0} | {s * k for k in range(2, 11) for s in (1, -1)}
    assert by_k[0] < 1e-8
    others = [d for k, d in scan if k != 0]
    assert min(others) > 1e-6


def test_a2_scan_clean_for_damped_benchmark(spec_cubic_down):
    co = linearize(spec_cubic_down, 0.0, 256)
    scan = eigen.check_A2(TAU0, 50, co)
    assert min(d for _, d in scan) > 1e-6


def test_a2_scan_flags_odd_modes_of_transport_problem():
    spec = ProblemSpec.from_expressions(a="2/pi", b="0*u1")
    co = linearize(spec, 0.0, 256)
    scan = eigen.check_A2(1.3, 5, co)
    by_k = dict(scan)
    assert by_k[3] < 1e-6 and by_k[-3] < 1e-6
    assert by_k[0] == pytest.approx(1.0, abs=1e-9)   # u'' = 0 case: D = u'(1) = 1
    assert by_k[2] > 1e-3 and by_k[4] > 1e-3


def test_adjoint_benchmark(co_up):
    adj = eigen.solve_adjoint(TAU0, co_up)
    x = co_up.x
    target = (2 / np.pi) * np.sin(np.pi * x / 2)
    assert np.max(np.abs(adj.u_star - target)) < 1e-9
    a1 = co_up.a0[-1]
    robin = a1 * a1 * adj.u_star_prime[-1]
    assert abs(robin) < 1e-7
    # transported adjoint: closed form for this configuration
    U_expected = (-1 + 1j) * np.cos(np.pi * x / 2) * (2 / np.pi)
    assert np.max(np.abs(adj.U_star - U_expected)) < 1e-9
    # independent quadrature of the defining expression on a fine grid
    xf = np.linspace(0, 1, 4001)
    uf = (2 / np.pi) * np.sin(np.pi * xf / 2)
    tail = np.array([np.trapezoid(np.exp(1j * TAU0) * uf[i:], xf[i:])
                     for i in range(0, 4001, 250)])
    a0 = 2 / np.pi
    oracle = -a0 * np.cos(np.pi * xf[::250] / 2) + tail / a0
    probe = np.interp(xf[::250], x, adj.U_star.real) \
        + 1j * np.interp(xf[::250], x, adj.U_star.imag)
    assert np.max(np.abs(probe - oracle)) < 1e-6


def test_adjoint_tail_free_case():
    # b3 = b4 = 0 -> no tail integral in the transported adjoint; the pure
    # transport problem keeps the adjoint Robin row valid at any tau
    spec = ProblemSpec.from_expressions(a="2/pi", b="0*u1")
    co = linearize(spec, 0.0, 256)
    adj = eigen.solve_adjoint(0.9, co)
    an, axn, b6n = co.nodes("a0"), co.nodes("a0x"), co.nodes("b60")
    direct = (b6n / an - 2 * axn) * adj.u_star - an * adj.u_star_prime
    assert np.max(np.abs(adj.U_star - direct)) < 1e-12


def test_sigma_rho_benchmark(cert_up):
    data = sin_convention(cert_up)
    assert data.sigma == pytest.approx(-0.5 + 1j * (1 - np.pi / 4), abs=1e-7)
    # crossing speed against the characteristic-root oracle; note the
    # value is +0.84444, not the -1.68888 closed form sometimes quoted
    # for this example (see the acceptance module)
    rho_oracle = characteristic_root_crossing_speed(1.0)
    assert data.rho == pytest.approx(rho_oracle, abs=1e-8)
    assert data.rho == pytest.approx(0.8444406888, abs=1e-9)


def test_sigma_rho_damped_benchmark(cert_down):
    rho_oracle = characteristic_root_crossing_speed(-1.0)
    assert cert_down.rho == pytest.approx(rho_oracle, abs=1e-8)
    assert cert_down.rho == pytest.approx(1 / (1 + (2 + np.pi / 2) ** 2), abs=1e-9)


def test_rho_zero_without_delay_term():
    spec = ProblemSpec.from_expressions(a="2/pi", b="0*u1")
    co = linearize(spec, 0.0, 128)
    shot = eigen.shoot_evp(1j, 1.0, co)
    eig = eigen.Eigenpair(mu=1j, tau=1.0, u0=shot.u, u0_prime=shot.u_prime)
    adj = eigen.solve_adjoint(1.0, co)
    with pytest.raises(RhoZero):
        eigen.compute_sigma_rho(eig, adj, co)


def test_normalize(cert_up):
    co = cert_up.coeffs
    assert cert_up.sigma == pytest.approx(1.0 + 0.0j, abs=1e-10)
    # rho invariant under the normalization (not just its sign)
    eig, adj = cert_up.eigenpair, cert_up.adjoint
    sigma2, rho2 = eigen.compute_sigma_rho(eig, adj, co)
    assert rho2 == pytest.approx(cert_up.rho, rel=1e-12)
    # u0 untouched by normalization: still the unit-slope shooting solution
    assert eig.u0_prime[0] == pytest.approx(1.0 + 0.0j, abs=1e-12)


def test_certificate_flags(cert_up, cert_down):
    assert cert_down.flags["pass"] is True
    assert cert_down.low_confidence is False
    # c = +1: everything passes except the steady resonance
    assert cert_up.flags["a1"] and cert_up.flags["a3_rho"] and cert_up.flags["fredholm"]
    assert cert_up.flags["a2"] is False
    assert cert_up.flags["pass"] is False


def test_certificate_failure_modes():
    no_fred = ProblemSpec.from_expressions(a="2/pi", b="-u2")
    cert = eigen.certify(no_fred, 1.4, M=64, K_max=3)
    assert cert.flags["fredholm"] is False
    resonant = ProblemSpec.from_expressions(a="2/pi", b="0*u1")
    cert = eigen.certify(resonant, 1.4, M=128, K_max=4)
    assert cert.flags["a1"] is True         # D vanishes identically in tau
    assert cert.flags["a3_rho"] is False
    assert cert.flags["a2"] is False
    assert cert.flags["pass"] is False
