import numpy as np
import pytest

from conormal.morse_complex import (
    EXPECTED_BETTI,
    ComplexInstance,
    DegenerateCriticalPoint,
    DiscreteAction,
    MorseComplexError,
    build_complex,
    find_critical_points,
    gradient_flow,
    homology,
    rank_mod2,
)
from conormal.presets import double_well_lagrangian, free_lagrangian, magnetic_lagrangian, pendulum_lagrangian


def test_rank_mod2():
    assert rank_mod2(np.zeros((2, 3))) == 0
    assert rank_mod2([[1, 1], [1, 1]]) == 1
    # rank 2 over Q but 1 over Z/2
    assert rank_mod2([[1, 1], [1, -1]]) == 1
    assert rank_mod2([[2, 0], [0, 3]]) == 1
    assert rank_mod2(np.eye(4, dtype=int)) == 4
    assert rank_mod2([[1, 1, 0], [0, 1, 1], [1, 0, 1]]) == 2


def test_homology_from_boundary():
    inst = ComplexInstance("synthetic", 0, [])
    inst.generators = [type("G", (), {"index": k})() for k in (0, 0, 1)]
    inst.boundary = {1: np.array([[1], [1]])}
    assert homology(inst) == {0: 1, 1: 0}
    inst.boundary = {1: np.array([[0], [0]])}
    assert homology(inst) == {0: 2, 1: 1}


def test_double_well_boundary_is_nonzero():
    inst = build_complex(double_well_lagrangian(), "dirichlet")
    assert [g.index for g in inst.generators] == [0, 0, 1]
    assert inst.boundary[1].tolist() == [[1], [1]]
    assert inst.betti == {0: 1, 1: 0}
    # the two shots from the saddle end at different minima
    assert sorted(t for _, t in inst.connections) == [0, 1]
    assert inst.action_filtration() and inst.morse_inequalities()


def test_pendulum_boundary_vanishes_on_the_circle():
    inst = build_complex(pendulum_lagrangian(), "diagonal", 0)
    assert [g.index for g in inst.generators] == [0, 1]
    assert inst.boundary[1].tolist() == [[0]]
    assert inst.connections == [(1, 0), (1, 0)]
    assert inst.betti == EXPECTED_BETTI["diagonal"]
    for g in inst.generators:
        assert g.residual <= 1e-9 and g.eigen_index == g.index


def test_dirichlet_classes_have_one_minimum():
    for m in (-1, 1):
        inst = build_complex(pendulum_lagrangian(), "dirichlet", m)
        assert len(inst.generators) == 1 and inst.generators[0].index == 0
        assert inst.boundary == {} and inst.betti == {0: 1}


def test_free_lagrangian_is_rejected():
    S = DiscreteAction(free_lagrangian(1, periods=[1.0]), "diagonal", 1, nodes=32)
    with pytest.raises(DegenerateCriticalPoint):
        find_critical_points(S, starts=4, cross_check=False)


def test_unsupported_components_are_rejected():
    with pytest.raises(MorseComplexError):
        DiscreteAction(magnetic_lagrangian(), "diagonal")
    with pytest.raises(MorseComplexError):
        DiscreteAction(pendulum_lagrangian(), "neumann", 1)
    with pytest.raises(MorseComplexError):
        DiscreteAction(double_well_lagrangian(), "dirichlet", 1)


def test_gradient_flow():
    S = DiscreteAction(pendulum_lagrangian(), "diagonal", 0)
    gens = find_critical_points(S, starts=8, cross_check=False)
    low, saddle = gens
    traj = gradient_flow(S, low.u + 1e-3 * np.sin(np.pi * S.times[: S.dof]))
    assert traj.converged and S.distance(traj.points[-1], low.u) <= 1e-6
    e = saddle.unstable[:, 0] / S.norm(saddle.unstable[:, 0])
    for sgn in (1, -1):
        traj = gradient_flow(S, saddle.u + sgn * 1e-4 * e)
        assert traj.converged and np.all(np.diff(traj.actions) < 0)
        assert S.distance(traj.points[-1], low.u) <= 1e-5
