import csv
import io

import numpy as np
import pytest

from conormal import boundary as bmod
from conormal.hamiltonian import integrate_flow
from conormal.index_theorem import (
    IndexTheoremError,
    index_jumps,
    oscillator_family,
    reports_to_csv,
    sweep_report,
    verify_index_theorem,
    zero_orbit,
)
from conormal.lagrangian import ElectromagneticLagrangian
from conormal.presets import (
    free_hamiltonian,
    free_lagrangian,
    harmonic_lagrangian,
    magnetic_lagrangian,
    random_em_lagrangian,
    random_linear_subspace,
)


def test_oscillator_dirichlet_example():
    L = harmonic_lagrangian(4.0)
    rep = verify_index_theorem(L, bmod.dirichlet([0.0], [0.0]), zero_orbit(L))
    assert rep.passed and not rep.refined
    assert rep.morse_index == 1 and rep.nullity_h == 0 and rep.mu_q == 1
    assert rep.theorem_delta == 0 and rep.corollary_delta == 0


def test_free_torus_is_half_integer():
    L = free_lagrangian(1, periods=[1.0])
    flow = integrate_flow(free_hamiltonian(1, periods=[1.0]), [0.0, 1.0])
    rep = verify_index_theorem(L, bmod.diagonal(1, [1.0]), flow)
    assert rep.passed
    assert rep.nullity_h == rep.nullity_eigen == rep.nullity_crossing == 1
    assert rep.morse_index == 0 and rep.mu_q.twice_value == 1


@pytest.mark.parametrize(
    "w, bnd, want",
    [
        (np.pi, bmod.dirichlet([0.0], [0.0]), (0, 1, 1)),
        (2 * np.pi, bmod.neumann(1), (2, 1, 5)),
        (2 * np.pi, bmod.diagonal(1), (1, 2, 4)),
    ],
    ids=["dirichlet-pi", "neumann-2pi", "periodic-2pi"],
)
def test_resonant_oscillators(w, bnd, want):
    # conjugate points exactly at t = 1: the half-weighted endpoint terms carry the theorem
    L = harmonic_lagrangian(w)
    rep = verify_index_theorem(L, bnd, zero_orbit(L))
    assert rep.passed
    assert (rep.morse_index, rep.nullity_h, rep.mu_q.twice_value) == want


def test_random_instances():
    rng = np.random.default_rng(21)
    for i in range(6):
        n = 1 + i % 2
        L = random_em_lagrangian(n, rng)
        bnd = bmod.from_subspace(random_linear_subspace(2 * n, rng))
        rep = verify_index_theorem(L, bnd, zero_orbit(L), label=f"r{i}")
        assert rep.passed, rep.row()
        # mu^Q is an integer exactly when the orbit is nondegenerate
        assert rep.mu_q.is_integer() == (rep.nullity_h % 2 == 0)


def test_magnetic_example():
    L = magnetic_lagrangian(2.0, 3.5)
    rep = verify_index_theorem(L, bmod.dirichlet([0.0, 0.0], [0.0, 0.0]), zero_orbit(L))
    assert rep.passed


def test_non_legendre_orbit_is_rejected():
    # the rest point with p = 0 meets the Neumann condition, but D_vL = alpha != 0 there
    L = ElectromagneticLagrangian(1, lambda t, q: np.eye(1), lambda t, q: np.array([0.5]), lambda t, q: 0.0,
                                  metric_constant=True)
    wrong = integrate_flow(free_hamiltonian(), [0.0, 0.0])
    with pytest.raises(IndexTheoremError):
        verify_index_theorem(L, bmod.neumann(1), wrong)


def test_sweep_tables():
    for boundary, want in (("dirichlet", [0, 0, 1, 2]), ("neumann", [1, 1, 2, 3])):
        reports = sweep_report(oscillator_family([1, 2, 4, 7], boundary))
        assert [r.morse_index for r in reports] == want
        assert all(r.passed for r in reports)


def test_index_jumps_at_pi():
    omegas = [2.8, 3.0, 3.1, 3.2, 3.4]
    reports = sweep_report(oscillator_family(omegas, "dirichlet"))
    assert index_jumps(omegas, reports) == [(3.1, 3.2, 1)]


def test_csv_report():
    reports = sweep_report(oscillator_family([1, 4], "neumann"))
    rows = list(csv.DictReader(io.StringIO(reports_to_csv(reports))))
    assert [r["i_eigen"] for r in rows] == ["1", "2"]
    assert rows[1]["mu_Q_twice"] == "4" and rows[1]["mu_Q"] == "2"
    assert rows[0]["shift"] == "1/2" and rows[0]["pass"] == "True"
    assert reports_to_csv([]) == ""
    doc = reports[1].to_json()
    assert doc["mu_Q"] == {"twice_value": 4, "value": "2"}
