import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conormal.symplectic import (
    HalfInteger,
    LagrangianFrame,
    SubspaceSpec,
    SymplecticError,
    SymplecticMap,
    apply_C,
    conormal_frame,
    conormal_transport,
    decompose_sp_v,
    diagonal_subspace,
    graph_frame,
    involution_matrix,
    product_frame,
    random_symplectic,
    subspace_distance,
    symplectic_product,
    verify_conormal_identity,
)


def span(*cols):
    return np.array(cols, float).T


# ---------------------------------------------------------------- half integers


def test_half_integer_arithmetic_is_exact():
    a = HalfInteger(1)
    assert str(a) == "1/2" and a.value == 0.5
    assert a + a == 1 and (a + a).is_integer()
    assert str(HalfInteger(-3)) == "-3/2"
    assert HalfInteger.of(2) == HalfInteger(4)
    assert -a == HalfInteger(-1)
    assert a.to_json() == {"twice_value": 1, "value": "1/2"}
    with pytest.raises(ValueError):
        HalfInteger.of(0.25)
    with pytest.raises(ValueError):
        int(a)


# ---------------------------------------------------------------- symplectic product


def test_symplectic_product_examples():
    assert symplectic_product([1.0, 0.0], [0.0, 1.0]) == -1
    xi = np.array([1, 0, 0, 2.0])
    eta = np.array([0, 1, 3, 0.0])
    assert symplectic_product(xi, eta) == -1
    assert symplectic_product(xi, xi) == 0
    with pytest.raises(SymplecticError):
        symplectic_product([1.0, 0.0], [1.0, 0.0, 0.0, 0.0])


def test_C_is_anti_symplectic():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        c = involution_matrix(n)
        for _ in range(20):
            xi, eta = rng.normal(size=(2, 2 * n))
            assert abs(symplectic_product(c @ xi, c @ eta) + symplectic_product(xi, eta)) <= 1e-14


# ---------------------------------------------------------------- frames


def test_conormal_frame_examples():
    assert conormal_frame(SubspaceSpec.zero(2)).same_subspace(LagrangianFrame.vertical(2))
    assert conormal_frame(SubspaceSpec.full(2)).same_subspace(LagrangianFrame.horizontal(2))
    f = conormal_frame(SubspaceSpec(span([1, 1])))
    want = span([1, 1, 0, 0], [0, 0, 1, -1])
    assert subspace_distance(f.columns, want) <= 1e-12


def test_apply_C_examples():
    rng = np.random.default_rng(1)
    for n in (1, 2, 3):
        for k in range(n + 1):
            v = SubspaceSpec(rng.normal(size=(n, k))) if k else SubspaceSpec.zero(n)
            f = conormal_frame(v)
            assert apply_C(f).same_subspace(f, 1e-12)
    assert apply_C(LagrangianFrame.vertical(2)).same_subspace(LagrangianFrame.vertical(2))
    flipped = apply_C(LagrangianFrame(span([1, 1])))
    assert flipped.same_subspace(LagrangianFrame(span([1, -1])))


def test_non_lagrangian_frame_rejected():
    with pytest.raises(SymplecticError):
        LagrangianFrame(span([1, 0, 0, 1], [0, 1, 0, 0]))
    with pytest.raises(SymplecticError):
        LagrangianFrame(np.zeros((2, 1)))
    with pytest.raises(SymplecticError):
        SubspaceSpec(span([1, 0], [2, 0]))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 3), seed=st.integers(0, 10_000))
def test_frames_from_operations_are_lagrangian(n, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, n + 1))
    v = SubspaceSpec(rng.normal(size=(n, k))) if k else SubspaceSpec.zero(n)
    g = random_symplectic(n, rng)
    frames = [conormal_frame(v), apply_C(conormal_frame(v)), graph_frame(g), graph_frame(g, "left"),
              SymplecticMap(g).apply(conormal_frame(v)),
              product_frame(conormal_frame(v), LagrangianFrame.vertical(n))]
    for f in frames:
        assert f.isotropy_residual() <= 1e-10
        assert np.linalg.matrix_rank(f.columns) == f.n
        # C is an involution on subspaces
        assert apply_C(apply_C(f)).distance(f) <= 1e-12


# ---------------------------------------------------------------- Sp_v


def test_decompose_examples():
    shear, block = decompose_sp_v(np.eye(2))
    assert np.allclose(shear.matrix, np.eye(2)) and np.allclose(block.matrix, np.eye(2))
    b = np.array([[2.0, 0.0], [3.0, 0.5]])
    shear, block = decompose_sp_v(b)
    # the lower-left shear entry is beta alpha = 3 * (1/2)
    assert np.allclose(shear.matrix, [[1.0, 0.0], [1.5, 1.0]])
    assert np.allclose(block.matrix, np.diag([2.0, 0.5]))
    assert np.linalg.norm(shear.matrix @ block.matrix - b) <= 1e-12
    with pytest.raises(SymplecticError):
        decompose_sp_v(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_decompose_reconstructs_random_vertical_preserving_maps():
    rng = np.random.default_rng(2)
    for n in (1, 2, 3):
        for _ in range(20):
            a = rng.normal(size=(n, n)) + 2 * np.eye(n)
            s = rng.normal(size=(n, n))
            s = s + s.T
            z = np.zeros((n, n))
            b = np.block([[np.eye(n), z], [s, np.eye(n)]]) @ np.block([[a, z], [z, np.linalg.inv(a).T]])
            shear, block = decompose_sp_v(b)
            assert np.linalg.norm(shear.matrix @ block.matrix - b) <= 1e-10
            assert np.allclose(shear.matrix[:n, :n], np.eye(n))
            assert np.allclose(block.matrix[n:, :n], 0)


def test_conormal_transport():
    rng = np.random.default_rng(3)
    v = SubspaceSpec(span([1, 0]))
    assert conormal_transport(np.eye(2), v).distance(v) <= 1e-12
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert conormal_transport(rot, v).distance(SubspaceSpec(span([0, 1]))) <= 1e-12
    full = SubspaceSpec.full(3)
    assert conormal_transport(rng.normal(size=(3, 3)), full).dim == 3
    for n in (1, 2, 3, 4):
        for _ in range(10):
            alpha = rng.normal(size=(n, n)) + 2 * np.eye(n)
            k = int(rng.integers(0, n + 1))
            v = SubspaceSpec(rng.normal(size=(n, k))) if k else SubspaceSpec.zero(n)
            z = np.zeros((n, n))
            d = np.block([[np.linalg.inv(alpha), z], [z, alpha.T]])
            moved = LagrangianFrame(d @ conormal_frame(v).columns)
            assert moved.distance(conormal_frame(conormal_transport(alpha, v))) <= 1e-10


# ---------------------------------------------------------------- graphs


def test_graph_of_C_is_conormal_of_diagonal():
    for n in (1, 2):
        g = graph_frame(np.eye(2 * n))
        assert g.same_subspace(conormal_frame(diagonal_subspace(n)), 1e-12)


def test_graph_left_and_right_related_by_C_product():
    rng = np.random.default_rng(4)
    for n in (1, 2):
        g = random_symplectic(n, rng)
        c2 = involution_matrix(2 * n)
        # graf(GC) = (C x C) graf(CG), and C x C is the involution of T*R^{2n}
        right = graph_frame(g, "right")
        left = graph_frame(g, "left")
        assert LagrangianFrame(c2 @ left.columns).same_subspace(right, 1e-10)


def test_graph_of_block_map():
    g = np.diag([2.0, 0.5])
    f = graph_frame(g)
    assert f.isotropy_residual() <= 1e-12
    # column xi = (1, 0): (xi, G C xi) = ((1, 2), (0, 0)) in product coordinates
    assert f.intersection_dim(LagrangianFrame(span([1, 2, 0, 0], [0, 0, 1, -0.5]))) == 2


def test_symplectic_map_validation():
    with pytest.raises(SymplecticError):
        SymplecticMap(np.diag([2.0, 2.0]))
    m = SymplecticMap(random_symplectic(2, np.random.default_rng(5)))
    assert np.allclose((m @ m.inverse()).matrix, np.eye(4))


# ---------------------------------------------------------------- conormal identity


def test_conormal_identity_examples():
    pts = [(np.array([q]), np.array([p])) for q, p in np.random.default_rng(6).normal(size=(10, 2))]
    zero = verify_conormal_identity(lambda q, p: np.array([3.0]), lambda q, p: np.zeros(1), pts, 1, 2)
    assert zero == 0
    gen = verify_conormal_identity(lambda q, p: q ** 3, lambda q, p: -3 * q ** 2 * p, pts, 1, 2,
                                   dq_map=lambda q, p: 3 * q ** 2)
    assert gen <= 1e-12
    bad = verify_conormal_identity(lambda q, p: np.zeros(1), lambda q, p: np.array([-0.7]), pts, 1, 2)
    assert abs(bad - 0.7) <= 1e-15
    with pytest.raises(SymplecticError):
        verify_conormal_identity(lambda q, p: q, lambda q, p: q, [(np.zeros(2), np.zeros(1))], 1, 2)
