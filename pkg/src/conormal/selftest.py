"""Shipped fixtures run by ``conormal selftest``."""

from __future__ import annotations

import time

import numpy as np

from . import boundary as bmod
from .hamiltonian import integrate_flow
from .index_theorem import oscillator_family, sweep_report, verify_index_theorem
from .lagrangian import fenchel_dual, fenchel_inequality_check, round_trip_error
from .maslov import LagrangianPath, conley_zehnder, maslov_index
from .morse_complex import EXPECTED_BETTI, build_complex
from .presets import free_lagrangian, harmonic_hamiltonian, pendulum_lagrangian, random_em_lagrangian
from .symplectic import LagrangianFrame, verify_conormal_identity

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"


def _rotation():
    path = LagrangianPath.from_csv(FIXTURES / "rotation.csv")
    mu = maslov_index(path, LagrangianFrame.vertical(1))
    return mu == -1, f"mu = {mu}"


def _cz():
    w = 1.0
    g = lambda t: np.array([[np.cos(w * t), np.sin(w * t) / w], [-w * np.sin(w * t), np.cos(w * t)]])
    mu = conley_zehnder(g)
    return mu == 1, f"CZ = {mu}"


def _oscillator():
    rows = sweep_report(oscillator_family([1, 2, 4, 7], "dirichlet")) + sweep_report(
        oscillator_family([1, 2, 4, 7], "neumann")
    )
    got = [r.morse_index for r in rows]
    ok = got == [0, 0, 1, 2, 1, 1, 2, 3] and all(r.passed for r in rows)
    return ok, f"indices {got}"


def _free_torus():
    lag = free_lagrangian(1, periods=np.array([1.0]))
    flow = integrate_flow(fenchel_dual(lag), [0.0, 1.0])
    rep = verify_index_theorem(lag, bmod.diagonal(1, [1.0]), flow, label="free torus")
    return rep.passed and rep.nullity_h == 1 and rep.mu_q.twice_value == 1, f"mu_Q = {rep.mu_q}, nu = {rep.nullity_h}"


def _symplecticity():
    flow = integrate_flow(harmonic_hamiltonian(7.0), [0.3, -0.2])
    err = flow.symplecticity()
    return err <= 1e-8, f"max |M^T J M - J| = {err:.2e}"


def _fenchel():
    rng = np.random.default_rng(0)
    lag = random_em_lagrangian(2, rng)
    err = round_trip_error(lag, rng, samples=50)
    flow = integrate_flow(fenchel_dual(lag), [0.1, -0.1, 0.2, 0.0])
    margin = fenchel_inequality_check(lag, flow.times, flow.q, flow.p).margin
    return err <= 1e-10 and abs(margin) <= 1e-8, f"round trip {err:.1e}, margin {margin:.1e}"


def _pendulum_complex():
    lag = pendulum_lagrangian(0.1)
    inst = build_complex(lag, "diagonal", 0)
    return inst.betti == EXPECTED_BETTI["diagonal"] and inst.boundary_squared_zero(), f"betti {inst.betti}"


def _conormal_identity():
    # conormal of the curve R = {(q, sin q)} in R^2, written as a graph over (q, p)
    pts = [(q, p) for q, p in np.random.default_rng(1).normal(size=(20, 2))]
    res = verify_conormal_identity(lambda q, p: np.sin(q), lambda q, p: -p * np.cos(q), pts, 1, 2)
    bad = verify_conormal_identity(lambda q, p: np.zeros(1), lambda q, p: np.full(1, 0.5), pts, 1, 2)
    return res <= 1e-9 and bad >= 0.1, f"residual {res:.1e}, violating fixture {bad:.2f}"


CHECKS = [
    ("rotation convention", _rotation),
    ("Conley-Zehnder oscillator", _cz),
    ("oscillator index table", _oscillator),
    ("free particle torus (half-integer)", _free_torus),
    ("monodromy symplecticity", _symplecticity),
    ("Fenchel round trip", _fenchel),
    ("pendulum Morse complex", _pendulum_complex),
    ("conormal identity", _conormal_identity),
]


def run_selftest(verbose: bool = False):
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing fixture is a failed fixture
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail} ({time.perf_counter() - t0:.1f}s)")
    return results
