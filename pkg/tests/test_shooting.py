import json

import numpy as np
import pytest

from conormal import boundary as bmod
from conormal.hamiltonian import integrate_flow
from conormal.presets import (
    free_hamiltonian,
    hamiltonian_of,
    harmonic_hamiltonian,
    pendulum_lagrangian,
    random_linear_subspace,
    random_quadratic_hamiltonian,
)
from conormal.shooting import SolverOptions, enumerate_below_action, orbits_to_json, solve_nonlocal_bvp
from conormal.symplectic import SubspaceSpec

FEW = SolverOptions(seeds=16)


def assert_solves(orbit, bnd, tol=1e-9):
    n = orbit.flow.n
    x0, x1 = orbit.flow.x0, orbit.flow.x1
    assert orbit.residual <= tol and orbit.conormal_residual <= tol
    if bnd.codim:
        assert np.max(np.abs(bnd.c(x0[:n], x1[:n]))) <= tol
    dc = bnd.dc(x0[:n], x1[:n])
    cov = np.concatenate([x0[n:], -x1[n:]])
    assert np.max(np.abs(cov - dc.T @ orbit.multiplier)) <= tol


@pytest.mark.parametrize("bnd", [bmod.dirichlet([0.0], [0.0]), bmod.neumann(1)], ids=["dirichlet", "neumann"])
def test_oscillator_solution_is_unique(bnd):
    orbits = solve_nonlocal_bvp(harmonic_hamiltonian(4.0), bnd, opts=FEW)
    assert len(orbits) == 1
    assert np.max(np.abs(orbits[0].flow.states)) <= 1e-9
    assert not orbits[0].degenerate and orbits[0].nullity == 0
    assert orbits.attempted == 16 and orbits.converged + orbits.diverged == 16
    assert_solves(orbits[0], bnd)


def test_free_torus_family_is_flagged_degenerate():
    sys = free_hamiltonian(1, periods=[1.0])
    for m in (1, 2):
        bnd = bmod.diagonal(1, [float(m)])
        orbits = solve_nonlocal_bvp(sys, bnd, opts=SolverOptions(seeds=8, box=(-3.0, 3.0)))
        assert len(orbits) == 1
        o = orbits[0]
        assert o.degenerate and o.nullity == 1
        assert abs(o.x0[1] - m) <= 1e-9
        assert abs(o.action - m ** 2 / 2) <= 1e-9
        # the representative lies in one fundamental domain
        assert 0.0 <= o.x0[0] < 1.0


def test_affine_problems_have_one_solution():
    rng = np.random.default_rng(0)
    for i in range(4):
        n = 1 + i % 2
        sys = random_quadratic_hamiltonian(n, rng)
        bnd = bmod.from_subspace(random_linear_subspace(2 * n, rng), rng.normal(size=2 * n))
        orbits = solve_nonlocal_bvp(sys, bnd, opts=SolverOptions(seeds=6))
        assert len(orbits) == 1
        assert_solves(orbits[0], bnd)


def test_product_boundary_matches_local_conditions():
    rng = np.random.default_rng(1)
    sys = random_quadratic_hamiltonian(2, rng)
    v0, v1 = random_linear_subspace(2, rng), SubspaceSpec(np.array([[1.0], [1.0]]))
    a0, a1 = rng.normal(size=2), rng.normal(size=2)
    bnd = bmod.product(v0, v1, a0, a1)
    o = solve_nonlocal_bvp(sys, bnd, seeds=np.zeros((1, 4)))[0]
    q0, p0, q1, p1 = o.flow.x0[:2], o.flow.x0[2:], o.flow.x1[:2], o.flow.x1[2:]
    # x(0) in N*Q0 and x(1) in N*Q1
    for q, a, v, p in ((q0, a0, v0, p0), (q1, a1, v1, p1)):
        assert np.all(np.abs(v.complement().basis.T @ (q - a)) <= 1e-9)
        if v.dim:
            assert np.max(np.abs(p @ v.basis)) <= 1e-9


def test_orbits_reintegrate():
    sys = hamiltonian_of(pendulum_lagrangian())
    bnd = bmod.diagonal(1)
    orbits = solve_nonlocal_bvp(sys, bnd, opts=SolverOptions(seeds=32))
    assert len(orbits) == 2
    assert [o.index for o in orbits] == [0, 1] and all(o.nullity == 0 for o in orbits)
    assert orbits[0].action < orbits[1].action
    for o in orbits:
        again = integrate_flow(sys, o.x0, step=1e-3)
        assert np.max(np.abs(again.x1 - o.flow.x1)) <= 1e-8
        assert_solves(o, bnd)


def test_enumerate_below_action():
    sys = hamiltonian_of(pendulum_lagrangian())
    bnd = bmod.diagonal(1)
    opts = SolverOptions(seeds=32)
    assert enumerate_below_action(sys, bnd, -1.0, opts) == []
    low = enumerate_below_action(sys, bnd, 0.0, opts)
    assert len(low) == 1 and low[0].index == 0
    assert low.attempted == 32


def test_explicit_seeds_and_json():
    bnd = bmod.dirichlet([0.0], [0.0])
    orbits = solve_nonlocal_bvp(harmonic_hamiltonian(4.0), bnd, seeds=[[0.0, 0.3], [0.0, -0.2]])
    assert len(orbits) == 1 and orbits.attempted == 2
    doc = json.loads(orbits_to_json(orbits))
    entry = doc["orbits"][0]
    assert entry["index"] == {"twice_value": 2, "value": "1"}
    assert entry["nullity"] == 0 and entry["degenerate"] is False
    assert set(entry) >= {"action", "q0", "p0", "q1", "p1", "residuals", "multiplier"}
    assert doc["multistart"]["attempted"] == 2 and doc["multistart"]["box"] == []


def test_json_is_deterministic():
    sys = harmonic_hamiltonian(2.0)
    bnd = bmod.neumann(1)
    a = orbits_to_json(solve_nonlocal_bvp(sys, bnd, opts=SolverOptions(seeds=8, seed=3)))
    b = orbits_to_json(solve_nonlocal_bvp(sys, bnd, opts=SolverOptions(seeds=8, seed=3)))
    assert a == b
