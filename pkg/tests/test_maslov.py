import numpy as np
import pytest

from conormal.maslov import (
    DegenerateEndpointError,
    EmptyIntersectionError,
    LagrangianPath,
    conley_zehnder,
    crossing_form,
    detect_crossings,
    maslov_index,
    maslov_index_pair,
    maslov_report,
)
from conormal.symplectic import LagrangianFrame, SubspaceSpec, conormal_frame
from oracles import random_path, spectral_maslov


def rotation(phi, interval=(0.0, np.pi)):
    return LagrangianPath(lambda t: np.array([[np.cos(phi(t))], [np.sin(phi(t))]]), interval)


ROT = rotation(lambda t: t)
VERT = LagrangianFrame.vertical(1)
HORIZ = LagrangianFrame.horizontal(1)


def oscillator(w):
    return lambda t: np.array([[np.cos(w * t), np.sin(w * t)], [-np.sin(w * t), np.cos(w * t)]])


# ---------------------------------------------------------------- crossing form


def test_rotation_crossing_form():
    c = crossing_form(ROT, VERT, np.pi / 2)
    assert c.dim == 1 and c.signature == -1 and c.regular
    assert abs(c.form[0, 0] + 1) <= 1e-6


def test_shear_crossing_form_sign():
    # with omega(xi, eta) = p.q' - p'.q the form on span{(1, 0)} is d/ds (-s) = -1
    shear = LagrangianPath(lambda t: np.array([[1.0], [t]]), (-1.0, 1.0))
    c = crossing_form(shear, HORIZ, 0.0)
    assert c.signature == -1 and abs(c.form[0, 0] + 1) <= 1e-6


def test_crossing_form_requires_intersection():
    with pytest.raises(EmptyIntersectionError):
        crossing_form(ROT, VERT, 0.3)


# ---------------------------------------------------------------- detection and index


def test_detect_crossings():
    found = detect_crossings(ROT, VERT)
    assert len(found) == 1 and abs(found[0].t - np.pi / 2) <= 1e-9
    assert detect_crossings(LagrangianPath.constant(HORIZ), VERT) == []
    ends = detect_crossings(rotation(lambda t: t, (np.pi / 2, np.pi)), VERT)
    assert len(ends) == 1 and ends[0].endpoint == "start" and ends[0].weight_twice == -1


def test_rotation_index_and_endpoint_halves():
    assert maslov_index(ROT, VERT) == -1
    assert maslov_index(rotation(lambda t: t, (np.pi / 2, np.pi)), VERT).twice_value == -1
    assert maslov_index(rotation(lambda t: t, (0.0, np.pi / 2)), VERT).twice_value == -1
    assert maslov_index(rotation(lambda t: -t), VERT) == 1
    assert maslov_index(rotation(lambda t: 3 * t), VERT) == -3
    assert maslov_index(LagrangianPath.constant(HORIZ), VERT) == 0


def test_conormal_paths_have_index_zero():
    v = lambda t: np.array([np.cos(t), np.sin(t)])
    path = LagrangianPath(
        lambda t: conormal_frame(SubspaceSpec(v(t))).columns, (0.0, 2 * np.pi)
    )
    target = conormal_frame(SubspaceSpec(np.array([1.0, 0.0])))
    rep = maslov_report(path, LagrangianPath.constant(target, path.interval))
    assert rep.index == 0


def test_pair_with_constant_second_path():
    rng = np.random.default_rng(1)
    for n in (1, 2):
        lam = random_path(n, rng)
        frame = LagrangianFrame(random_path(n, rng).raw(0.3))
        assert maslov_index_pair(lam, LagrangianPath.constant(frame)) == maslov_index(lam, frame)


def test_non_regular_crossing_uses_perturbation():
    cubic = rotation(lambda t: np.pi / 2 + (t - 0.5) ** 3, (0.0, 1.0))
    rep = maslov_report(cubic, LagrangianPath.constant(VERT))
    assert rep.perturbed and rep.index == -1 and rep.notes
    # a tangency on a grid node is non-regular; between nodes it is invisible, and either way the index is 0
    touch = rotation(lambda t: np.pi / 2 + (t - 0.5) ** 2, (0.0, 1.0))
    rep = maslov_report(touch, LagrangianPath.constant(VERT), grid=257)
    assert rep.perturbed and rep.index == 0
    assert maslov_index(touch, VERT, grid=256) == 0


def test_fast_turn_inside_one_cell_is_resolved():
    # a half-turn of width 1e-4 sits between coarse grid nodes
    w = 1e-4
    fast = rotation(lambda t: np.arctan((t - 0.6131) / w) + np.pi / 2, (0.0, 1.0))
    assert maslov_index(fast, VERT, grid=64) == -1


# ---------------------------------------------------------------- oracle and axioms


def test_against_spectral_oracle():
    rng = np.random.default_rng(11)
    seen = set()
    for i in range(24):
        n = 1 + i % 3
        lam, nu = random_path(n, rng), random_path(n, rng)
        mu = maslov_index_pair(lam, nu)
        assert mu.twice_value == spectral_maslov(lam.raw, nu.raw, 0.0, 1.0, samples=3001)
        seen.add(mu.twice_value)
    assert len(seen) >= 3


def test_homotopy_with_fixed_endpoints():
    rng = np.random.default_rng(12)
    for n in (1, 2):
        lam = random_path(n, rng)
        nu = LagrangianFrame(random_path(n, rng).raw(0.0))
        s = rng.normal(size=(n, n))
        s = s + s.T
        base = maslov_index(lam, nu)

        def deformed(k):
            def raw(t):
                d, p = np.linalg.eigh(k * t * (1 - t) * s)
                u = (p * np.exp(1j * d)) @ p.T
                z = lam.raw(t)
                w = u @ (z[:n] + 1j * z[n:])
                return np.vstack([w.real, w.imag])

            return LagrangianPath(raw, lam.interval)

        for k in (0.5, 2.0):
            assert maslov_index(deformed(k), nu) == base


# ---------------------------------------------------------------- Conley-Zehnder


def test_conley_zehnder_rotations():
    assert conley_zehnder(oscillator(np.pi)) == 1
    assert conley_zehnder(oscillator(1.0)) == 1
    assert conley_zehnder(oscillator(3 * np.pi)) == 3
    assert conley_zehnder(oscillator(-1.0)) == -1
    with pytest.raises(DegenerateEndpointError):
        conley_zehnder(lambda t: np.eye(2))
    with pytest.raises(ValueError):
        conley_zehnder(lambda t: 2 * np.eye(2))


# ---------------------------------------------------------------- serialisation


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    lam = random_path(2, rng)
    f = tmp_path / "path.csv"
    lam.to_csv(f, np.linspace(0, 1, 401))
    back = LagrangianPath.from_csv(f)
    nu = LagrangianFrame(random_path(2, rng).raw(0.0))
    assert maslov_index(back, nu) == maslov_index(lam, nu)
    bad = tmp_path / "bad.csv"
    bad.write_text("t,a\n0,1\n1,x\n")
    with pytest.raises(ValueError):
        LagrangianPath.from_csv(bad)
