"""Command-line front end: config ingestion, dispatch, machine-readable output.

Problem files are single JSON documents:

    {
      "a": "2/pi",
      "b": "u1^3/6 + u2 + u3",          // or "beta": [e1, e2, e3, e4]
      "lambda": 0.0,                     // optional, default 0
      "tau_guess": 1.4,
      "solver": { "N": 8, "M": 256, "M_solve": 64, "K_max": 50,
                  "eps_grid": [...], "tol_eig": 1e-8, "tol_resonance": 1e-6,
                  "tol_rho": 1e-8, "tol_orbit": 1e-9, "max_iter": 30 }
    }

Unknown keys are rejected. Outputs are UTF-8 JSON (complex numbers as
[re, im] pairs) and CSV with a header row and LF line endings. Every
command is deterministic given the file and the seed, which is recorded
in the output.

Exit codes: 0 ok, 2 input error, 3 certification failure, 4 structure
error, 5 continuation convergence failure, 6 simulation error.
"""
from __future__ import annotations

import argparse
import json
import sys
from types import SimpleNamespace

import numpy as np

from . import direction as direction_mod
from . import eigen, periodic, timedomain
from .errors import (HopfwaveError, NegativeDelayUnsupported, NoConvergence,
                     NoOscillationDetected, NotSeparable, ParseError,
                     QuadraticTermPresent, RhoZero, SpecInvalid)
from .model import ProblemSpec

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CERTIFICATION = 3
EXIT_STRUCTURE = 4
EXIT_CONVERGENCE = 5
EXIT_SIMULATION = 6

_SOLVER_DEFAULTS = {
    "N": 8, "M": 256, "M_solve": 64, "K_max": 50,
    "eps_grid": [0.005, 0.01, 0.015, 0.02, 0.03, 0.04, 0.05],
    "tol_eig": eigen.TOL_EIG, "tol_resonance": eigen.TOL_RESONANCE,
    "tol_rho": eigen.TOL_RHO, "tol_orbit": 1e-9, "max_iter": 30,
}
_TOP_KEYS = {"a", "b", "beta", "lambda", "tau_guess", "solver"}


class ConfigError(SpecInvalid):
    pass


def load_problem(path):
    """Parse and validate a problem file into (ProblemSpec, settings)."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    if "a" not in doc or "tau_guess" not in doc:
        raise ConfigError(f"{path}: 'a' and 'tau_guess' are required")
    solver = dict(_SOLVER_DEFAULTS)
    extra = doc.get("solver", {})
    if not isinstance(extra, dict):
        raise ConfigError(f"{path}: 'solver' must be an object")
    unknown = set(extra) - set(_SOLVER_DEFAULTS)
    if unknown:
        raise ConfigError(f"{path}: unknown solver keys {sorted(unknown)}")
    solver.update(extra)
    eps = solver["eps_grid"]
    if (not isinstance(eps, list) or len(eps) < 3
            or any(e <= 0 for e in eps)
            or any(b <= a for a, b in zip(eps, eps[1:]))):
        raise ConfigError(
            f"{path}: eps_grid must be at least 3 increasing positive values")
    try:
        spec = ProblemSpec.from_expressions(
            a=doc["a"], b=doc.get("b"), betas=doc.get("beta"),
            lam=doc.get("lambda", 0.0))
    except (ParseError, SpecInvalid) as err:
        raise ConfigError(f"{path}: {err}") from err
    settings = SimpleNamespace(tau_guess=float(doc["tau_guess"]), **solver)
    return spec, settings


# ---------------------------------------------------------------------------
# JSON encoding: complex as [re, im]

def _c(z):
    z = complex(z)
    return [z.real, z.imag]


def _carr(arr):
    return [_c(z) for z in np.asarray(arr).ravel()]


def _rarr(arr):
    return [float(v) for v in np.asarray(arr).ravel()]


def certificate_document(cert: eigen.HopfCertificate) -> dict:
    doc = {
        "tau0": cert.tau0,
        "sigma": _c(cert.sigma),
        "sigma_raw": _c(cert.sigma_raw),
        "rho": cert.rho,
        "fredholm": cert.fredholm,
        "flags": dict(cert.flags),
        "a2_scan": [[int(k), float(d)] for k, d in cert.a2_scan],
        "low_confidence": bool(cert.low_confidence),
        "seed": cert.seed,
    }
    if cert.eigenpair is not None:
        doc["grid"] = _rarr(cert.coeffs.x)
        doc["u0"] = _carr(cert.eigenpair.u0)
        doc["u0_prime"] = _carr(cert.eigenpair.u0_prime)
    if cert.adjoint is not None:
        doc["u_star"] = _carr(cert.adjoint.u_star)
        doc["u_star_prime"] = _carr(cert.adjoint.u_star_prime)
        doc["U_star"] = _carr(cert.adjoint.U_star)
    return doc


def _complex_array(pairs):
    arr = np.asarray(pairs, dtype=float)
    return arr[:, 0] + 1j * arr[:, 1]


def direction_from_document(doc: dict, spec: ProblemSpec) -> dict:
    """Re-run the direction evaluation from a serialized certificate.

    Reproduces the in-memory values exactly (floats round-trip through
    JSON), which the round-trip test pins at 1e-12.
    """
    grid = np.asarray(doc["grid"], dtype=float)
    cubic = direction_mod.check_structure(spec, grid)
    u0 = _complex_array(doc["u0"])
    u0p = _complex_array(doc["u0_prime"])
    ustar = _complex_array(doc["u_star"])
    sigma = complex(*doc["sigma"])
    rho = float(doc["rho"])
    tau0 = float(doc["tau0"])
    h = grid[1] - grid[0]
    d2 = direction_mod.tau_curvature(u0, u0p, ustar, sigma, rho, tau0, cubic, h)
    d2_lit = direction_mod.tau_curvature_literature(
        u0, u0p, ustar, sigma, rho, tau0, cubic, h)
    return {"d2tau": d2, "d2tau_literature": d2_lit,
            "indicator": float(np.sign(rho * d2)),
            "supercritical": bool(rho * d2 > 0),
            "caveat": direction_mod.STABILITY_CAVEAT}


def direction_document(result: direction_mod.DirectionResult) -> dict:
    return {"d2tau": result.d2tau, "d2tau_literature": result.d2tau_literature,
            "indicator": result.indicator, "supercritical": result.supercritical,
            "caveat": result.caveat}


def orbit_document(orbit: periodic.PeriodicOrbit) -> dict:
    """Snapshot of one orbit: scalars plus harmonic coefficients as
    [re, im] pairs indexed [harmonic][component][node]."""
    coef = orbit.v.coef
    return {
        "eps": orbit.eps, "omega": orbit.omega, "tau": orbit.tau,
        "lambda": orbit.lam, "residual_norm": orbit.residual_norm,
        "N": orbit.v.N, "M": orbit.v.M,
        "coefficients": [[[_c(z) for z in comp] for comp in harm]
                         for harm in coef],
    }


def _write_json(path, doc):
    text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_certificate(args):
    spec, settings = load_problem(args.file)
    cert = eigen.certify(spec, settings.tau_guess, M=settings.M,
                         K_max=settings.K_max, seed=args.seed,
                         tol_eig=settings.tol_eig,
                         tol_resonance=settings.tol_resonance,
                         tol_rho=settings.tol_rho)
    doc = certificate_document(cert)
    if args.out:
        _write_json(args.out, doc)
    else:
        print(json.dumps(doc, indent=2))
    return EXIT_OK if cert.passed else EXIT_CERTIFICATION


def cmd_direction(args):
    spec, settings = load_problem(args.file)
    cert = eigen.certify(spec, settings.tau_guess, M=settings.M,
                         K_max=settings.K_max, seed=args.seed,
                         tol_eig=settings.tol_eig,
                         tol_resonance=settings.tol_resonance,
                         tol_rho=settings.tol_rho)
    doc = certificate_document(cert)
    try:
        cubic = direction_mod.check_structure(spec, cert.coeffs.x)
        result = direction_mod.compute_direction(cert, cubic)
    except (NotSeparable, QuadraticTermPresent) as err:
        doc["direction_error"] = str(err)
        if args.out:
            _write_json(args.out, doc)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_STRUCTURE
    except RhoZero as err:
        doc["direction_error"] = str(err)
        if args.out:
            _write_json(args.out, doc)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CERTIFICATION
    doc["direction"] = direction_document(result)
    if args.out:
        _write_json(args.out, doc)
    else:
        print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_branch(args):
    spec, settings = load_problem(args.file)
    cert = eigen.certify(spec, settings.tau_guess, M=settings.M,
                         K_max=settings.K_max, seed=args.seed,
                         tol_eig=settings.tol_eig,
                         tol_resonance=settings.tol_resonance,
                         tol_rho=settings.tol_rho)
    if cert.eigenpair is None or cert.adjoint is None:
        print("error: no certified critical mode; cannot continue a branch",
              file=sys.stderr)
        return EXIT_CERTIFICATION
    ctx = periodic.operator_context(spec, spec.lam, settings.M_solve)
    opts = periodic.SolverOptions(tol_orbit=settings.tol_orbit,
                                  max_iter=settings.max_iter)
    summary = {"seed": args.seed, "certificate": certificate_document(cert)}
    try:
        cubic = direction_mod.check_structure(spec, cert.coeffs.x)
        dres = direction_mod.compute_direction(cert, cubic)
        summary["direction"] = direction_document(dres)
        d2tau_formula = dres.d2tau
    except HopfwaveError as err:
        summary["direction_error"] = str(err)
        d2tau_formula = None
    try:
        branch = periodic.continue_branch(cert, settings.eps_grid, ctx,
                                          settings.N, opts)
    except NoConvergence as err:
        summary["error"] = str(err)
        summary["last_good_eps"] = err.last_good
        if args.out:
            _write_json(args.out, summary)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONVERGENCE
    rows = [(o.eps, o.omega, o.tau, o.residual_norm) for o in branch.orbits]
    pde_res = [periodic.pde_residual_check(o, ctx) for o in branch.orbits]
    summary.update({
        "eps": [o.eps for o in branch.orbits],
        "omega": [o.omega for o in branch.orbits],
        "tau": [o.tau for o in branch.orbits],
        "residual_norm": [o.residual_norm for o in branch.orbits],
        "pde_residual": pde_res,
        "fit_tau_curvature": branch.fit_tau_curvature,
        "fit_tau_slope": branch.fit_tau_slope,
        "fit_omega_curvature": branch.fit_omega_curvature,
        "fit_omega_slope": branch.fit_omega_slope,
    })
    if d2tau_formula is not None:
        summary["direction_d2tau"] = d2tau_formula
        summary["relative_gap"] = abs(
            branch.fit_tau_curvature - d2tau_formula) / abs(d2tau_formula)
    if args.out:
        _write_json(args.out, summary)
        stem = args.out.rsplit(".", 1)[0]
        _write_csv(stem + ".csv", ["eps", "omega", "tau", "residual_norm"], rows)
        _write_json(stem + "_orbits.json",
                    {"orbits": [orbit_document(o) for o in branch.orbits]})
    else:
        print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_simulate(args):
    spec, settings = load_problem(args.file)
    if args.tau is None:
        print("error: simulate needs --tau", file=sys.stderr)
        return EXIT_INPUT
    T_end = args.T if args.T is not None else 200.0
    try:
        sim = timedomain.Simulator(spec, args.tau, M=settings.M)
        # deterministic small kick along the half-sine profile; the
        # transient is discarded by run_to_orbit anyway
        kick = 0.01 * np.sin(np.pi * sim.x / 2.0)
        state = sim.initial_state(v1=kick, v2=kick)
        period, ts, ys, _ = timedomain.run_to_orbit(
            spec, args.tau, T_end, initial=state, sim=sim)
    except (NegativeDelayUnsupported, NoOscillationDetected) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SIMULATION
    summary = {"tau": args.tau, "T_end": T_end, "period_estimate": period,
               "amplitude": float(np.max(np.abs(ys))), "seed": args.seed}
    if args.out:
        _write_json(args.out, summary)
        csv_path = args.out.rsplit(".", 1)[0] + ".csv"
        _write_csv(csv_path, ["t", "u_probe"], zip(ts, ys))
    else:
        print(json.dumps(summary, indent=2))
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hopfwave",
        description="Hopf certification, direction, and branch continuation "
                    "for damped delayed 1D wave equations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("certificate", cmd_certificate),
                     ("direction", cmd_direction),
                     ("branch", cmd_branch),
                     ("simulate", cmd_simulate)):
        p = sub.add_parser(name)
        p.add_argument("file")
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=0)
        if name == "simulate":
            p.add_argument("--tau", type=float, default=None)
            p.add_argument("--T", type=float, default=None)
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, SpecInvalid, ParseError, FileNotFoundError,
            ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
