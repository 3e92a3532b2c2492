"""Named systems used by the CLI, the self-test and the test suite."""

from __future__ import annotations

import numpy as np

from .hamiltonian import HamiltonianSystem
from .lagrangian import ElectromagneticLagrangian, fenchel_dual

TWO_PI = 2 * np.pi


# ---------------------------------------------------------------- Hamiltonians


def free_hamiltonian(n: int = 1, periods=None) -> HamiltonianSystem:
    return HamiltonianSystem(
        n,
        lambda t, q, p: 0.5 * p @ p,
        lambda t, q, p: (np.zeros(n), p),
        lambda t, q, p: np.block([[np.zeros((n, n)), np.zeros((n, n))], [np.zeros((n, n)), np.eye(n)]]),
        periods,
        name="free",
    )


def zero_hamiltonian(n: int = 1) -> HamiltonianSystem:
    z = np.zeros(2 * n)
    return HamiltonianSystem(
        n, lambda t, q, p: 0.0, lambda t, q, p: (z[:n], z[n:]), lambda t, q, p: np.zeros((2 * n, 2 * n)), name="zero"
    )


def harmonic_hamiltonian(omega: float, n: int = 1) -> HamiltonianSystem:
    w2 = omega * omega
    hess = np.diag(np.concatenate([np.full(n, w2), np.ones(n)]))
    return HamiltonianSystem(
        n,
        lambda t, q, p: 0.5 * (p @ p + w2 * q @ q),
        lambda t, q, p: (w2 * q, p),
        lambda t, q, p: hess,
        name="harmonic",
        params={"omega": omega},
    )


def quadratic_hamiltonian(s_fn, b_fn=None, n: int | None = None, name="quadratic") -> HamiltonianSystem:
    """H = 1/2 x^T S(t) x + b(t) . x for symmetric S(t)."""
    n = n or np.asarray(s_fn(0.0)).shape[0] // 2
    b_fn = b_fn or (lambda t: np.zeros(2 * n))

    def h(t, q, p):
        x = np.concatenate([q, p])
        return 0.5 * x @ s_fn(t) @ x + b_fn(t) @ x

    def g(t, q, p):
        x = np.concatenate([q, p])
        y = s_fn(t) @ x + b_fn(t)
        return y[:n], y[n:]

    return HamiltonianSystem(n, h, g, lambda t, q, p: s_fn(t), name=name)


def random_quadratic_hamiltonian(n: int, rng: np.random.Generator, scale: float = 1.5,
                                 linear_term: bool = True) -> HamiltonianSystem:
    """Time-dependent quadratic H with an optional affine term."""
    mats = []
    for _ in range(2):
        m = rng.normal(scale=scale, size=(2 * n, 2 * n))
        mats.append(0.5 * (m + m.T))
    bs = [rng.normal(size=2 * n) if linear_term else np.zeros(2 * n) for _ in range(2)]
    s_fn = lambda t: mats[0] + t * mats[1]
    b_fn = lambda t: bs[0] + t * bs[1]
    return quadratic_hamiltonian(s_fn, b_fn, n, name="random-quadratic")


# ---------------------------------------------------------------- Lagrangians


def _const(value):
    return lambda t, q: value


def free_lagrangian(n: int = 1, periods=None, mass: float = 1.0) -> ElectromagneticLagrangian:
    z = np.zeros(n)
    return ElectromagneticLagrangian(
        n, _const(mass * np.eye(n)), _const(z), lambda t, q: 0.0,
        dalpha=_const(np.zeros((n, n))), d2alpha=_const(np.zeros((n, n, n))),
        dV=_const(z), d2V=_const(np.zeros((n, n))),
        metric_constant=True, periods=periods, name="free", params={"mass": mass},
    )


def harmonic_lagrangian(omega: float, n: int = 1) -> ElectromagneticLagrangian:
    """L = v^2 / 2 - omega^2 q^2 / 2; its Fenchel dual is the harmonic oscillator."""
    w2 = omega * omega
    z = np.zeros(n)
    return ElectromagneticLagrangian(
        n, _const(np.eye(n)), _const(z), lambda t, q: 0.5 * w2 * q @ q,
        dalpha=_const(np.zeros((n, n))), d2alpha=_const(np.zeros((n, n, n))),
        dV=lambda t, q: w2 * q, d2V=_const(w2 * np.eye(n)),
        metric_constant=True, name="harmonic", params={"omega": omega},
    )


def pendulum_lagrangian(eps: float = 0.1, phase: float = 1.0, period: float = 1.0) -> ElectromagneticLagrangian:
    """L = v^2/2 - eps cos(2 pi q / P + phase sin 2 pi t) on the circle R / P Z."""
    k = TWO_PI / period

    def arg(t, q):
        return k * q[0] + phase * np.sin(TWO_PI * t)

    return ElectromagneticLagrangian(
        1, _const(np.eye(1)), _const(np.zeros(1)),
        lambda t, q: eps * np.cos(arg(t, q)),
        dalpha=_const(np.zeros((1, 1))), d2alpha=_const(np.zeros((1, 1, 1))),
        dV=lambda t, q: np.array([-eps * k * np.sin(arg(t, q))]),
        d2V=lambda t, q: np.array([[-eps * k * k * np.cos(arg(t, q))]]),
        metric_constant=True, periods=np.array([period]), name="pendulum",
        params={"eps": eps, "phase": phase, "period": period},
    )


def magnetic_lagrangian(b: float = 1.0, omega: float = 0.0) -> ElectromagneticLagrangian:
    """Planar charge in a uniform field: alpha = b/2 (-q2, q1), V = omega^2 |q|^2 / 2."""
    rot = 0.5 * b * np.array([[0.0, -1.0], [1.0, 0.0]])
    w2 = omega * omega
    return ElectromagneticLagrangian(
        2, _const(np.eye(2)), lambda t, q: rot @ q, lambda t, q: 0.5 * w2 * q @ q,
        dalpha=_const(rot), d2alpha=_const(np.zeros((2, 2, 2))),
        dV=lambda t, q: w2 * q, d2V=_const(w2 * np.eye(2)),
        metric_constant=True, name="magnetic", params={"b": b, "omega": omega},
    )


def polynomial_lagrangian(coefficients) -> ElectromagneticLagrangian:
    """n = 1, A = 1, alpha = 0, V(q) = sum_k c_k q^k."""
    c = np.polynomial.Polynomial(np.asarray(coefficients, float))
    dc, d2c = c.deriv(), c.deriv(2)
    return ElectromagneticLagrangian(
        1, _const(np.eye(1)), _const(np.zeros(1)), lambda t, q: float(c(q[0])),
        dalpha=_const(np.zeros((1, 1))), d2alpha=_const(np.zeros((1, 1, 1))),
        dV=lambda t, q: np.array([dc(q[0])]), d2V=lambda t, q: np.array([[d2c(q[0])]]),
        metric_constant=True, name="polynomial", params={"coefficients": list(map(float, coefficients))},
    )


def double_well_lagrangian(kappa: float = 5.0) -> ElectromagneticLagrangian:
    """L = v^2/2 - kappa (q^2 - 1)^2: q = 0 is a hilltop whose Dirichlet index is 1
    for pi^2 < 4 kappa < 4 pi^2."""
    lag = polynomial_lagrangian([-kappa, 0.0, 2 * kappa, 0.0, -kappa])
    # V = -kappa (q^2 - 1)^2 so that L = v^2/2 - V has the hill at q = 0
    lag.name = "double-well"
    lag.params = {"kappa": kappa}
    return lag


def random_em_lagrangian(n: int, rng: np.random.Generator, strength: float = 1.0,
                         metric_varies: bool = True) -> ElectromagneticLagrangian:
    """A random time-dependent electromagnetic Lagrangian for which q = 0 is an
    extremal for every linear boundary condition: alpha(t, 0) = 0, dV(t, 0) = 0.

    alpha_i = sum_j B_ij(t) q_j + beta_i q_i^2,  V = q^T K(t) q / 2 + kappa |q|^4 / 4,
    A = A0 + t A1 + diag(a_i sin q_i)  (kept positive definite).
    """
    def sym(m):
        return 0.5 * (m + m.T)

    a0 = rng.normal(size=(n, n))
    a0 = a0 @ a0.T / n + np.eye(n)
    a1 = 0.3 * sym(rng.normal(size=(n, n)))
    lo = np.linalg.eigvalsh(a0)[0] - np.abs(np.linalg.eigvalsh(a1)).max()
    if lo < 0.5:
        a0 = a0 + (0.5 - lo) * np.eye(n)
    amp = 0.2 * rng.uniform(-1, 1, size=n) if metric_varies else np.zeros(n)
    b0, b1 = (strength * rng.normal(size=(n, n)) for _ in range(2))
    beta = 0.5 * rng.normal(size=n)
    k0, k1 = (strength * 10.0 * sym(rng.normal(size=(n, n))) for _ in range(2))
    kappa = abs(rng.normal())

    def A(t, q):
        return a0 + t * a1 + np.diag(amp * np.sin(q))

    def dA(t, q):
        out = np.zeros((n, n, n))
        idx = np.arange(n)
        out[idx, idx, idx] = amp * np.cos(q)
        return out

    def d2A(t, q):
        out = np.zeros((n, n, n, n))
        idx = np.arange(n)
        out[idx, idx, idx, idx] = -amp * np.sin(q)
        return out

    def alpha(t, q):
        return (b0 + t * b1) @ q + beta * q * q

    def dalpha(t, q):
        return b0 + t * b1 + np.diag(2 * beta * q)

    def d2alpha(t, q):
        out = np.zeros((n, n, n))
        idx = np.arange(n)
        out[idx, idx, idx] = 2 * beta
        return out

    def V(t, q):
        return 0.5 * q @ (k0 + t * k1) @ q + 0.25 * kappa * (q @ q) ** 2

    def dV(t, q):
        return (k0 + t * k1) @ q + kappa * (q @ q) * q

    def d2V(t, q):
        return k0 + t * k1 + kappa * ((q @ q) * np.eye(n) + 2 * np.outer(q, q))

    return ElectromagneticLagrangian(
        n, A, alpha, V, dA=dA, d2A=d2A, dalpha=dalpha, d2alpha=d2alpha, dV=dV, d2V=d2V,
        metric_constant=not metric_varies, name="random-em",
    )


def random_linear_subspace(m: int, rng: np.random.Generator, dim: int | None = None):
    from .symplectic import SubspaceSpec

    dim = int(rng.integers(0, m + 1)) if dim is None else dim
    if dim == 0:
        return SubspaceSpec.zero(m)
    return SubspaceSpec(rng.normal(size=(m, dim)))


HAMILTONIAN_PRESETS = {
    "free": free_hamiltonian,
    "harmonic": harmonic_hamiltonian,
    "zero": zero_hamiltonian,
}

LAGRANGIAN_PRESETS = {
    "free": free_lagrangian,
    "harmonic": harmonic_lagrangian,
    "pendulum": pendulum_lagrangian,
    "magnetic": magnetic_lagrangian,
    "polynomial": polynomial_lagrangian,
    "double-well": double_well_lagrangian,
}


def hamiltonian_of(lag: ElectromagneticLagrangian) -> HamiltonianSystem:
    return fenchel_dual(lag)
