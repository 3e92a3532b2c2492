"""Electromagnetic Lagrangians, Fenchel duality, actions and Morse indices.

L(t, q, v) = 1/2 <A(t,q) v, v> + <alpha(t,q), v> - V(t, q).

Paths are sampled on a uniform grid and treated with the midpoint rule:
the discrete action is sum_k h L(t_k+1/2, (q_k + q_k+1)/2, (q_k+1 - q_k)/h).
Implicit midpoint orbits of the dual Hamiltonian are exact critical points
of this discrete action, so residuals of solver orbits sit at round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .boundary import BoundaryViolation, NonlocalBoundary
from .hamiltonian import FlowResult, HamiltonianSystem, _nullity_from_monodromy
from .maslov import LagrangianPath, MaslovError, _pair_crossings
from .symplectic import SubspaceSpec, conormal_frame, involution_matrix

FD_STEP = 1e-5
GAUSS_S = np.array([0.5 - 0.5 / math.sqrt(3), 0.5 + 0.5 / math.sqrt(3)])


class LagrangianError(ValueError):
    pass


class MorseIndexError(RuntimeError):
    pass


def _fd(fn, q, h=FD_STEP):
    """Central-difference derivative of fn along each coordinate, stacked last."""
    cols = []
    for k in range(q.size):
        e = np.zeros_like(q)
        e[k] = h
        cols.append((np.asarray(fn(q + e), float) - np.asarray(fn(q - e), float)) / (2 * h))
    return np.stack(cols, axis=-1)


@dataclass
class ElectromagneticLagrangian:
    """Derivative conventions: dA[i, j, k] = d A_ij / d q_k, dalpha[i, j] = d alpha_i / d q_j,
    d2alpha[i, j, k] = d^2 alpha_i / d q_j d q_k. Missing ones use central differences.
    ``metric_constant`` declares A independent of q.
    """

    n: int
    A: Callable[[float, np.ndarray], np.ndarray]
    alpha: Callable[[float, np.ndarray], np.ndarray]
    V: Callable[[float, np.ndarray], float]
    dA: Callable | None = None
    d2A: Callable | None = None
    dalpha: Callable | None = None
    d2alpha: Callable | None = None
    dV: Callable | None = None
    d2V: Callable | None = None
    metric_constant: bool = False
    periods: np.ndarray | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    positivity_floor: float = 1e-8

    # derivative accessors

    def metric(self, t, q) -> np.ndarray:
        return np.asarray(self.A(t, q), float).reshape(self.n, self.n)

    def covector(self, t, q) -> np.ndarray:
        return np.asarray(self.alpha(t, q), float).reshape(self.n)

    def potential(self, t, q) -> float:
        return float(self.V(t, q))

    def metric_d(self, t, q) -> np.ndarray:
        if self.metric_constant:
            return np.zeros((self.n,) * 3)
        if self.dA is not None:
            return np.asarray(self.dA(t, q), float)
        return _fd(lambda y: self.metric(t, y), q)

    def metric_d2(self, t, q) -> np.ndarray:
        if self.metric_constant:
            return np.zeros((self.n,) * 4)
        if self.d2A is not None:
            return np.asarray(self.d2A(t, q), float)
        return _fd(lambda y: self.metric_d(t, y), q)

    def covector_d(self, t, q) -> np.ndarray:
        if self.dalpha is not None:
            return np.asarray(self.dalpha(t, q), float).reshape(self.n, self.n)
        return _fd(lambda y: self.covector(t, y), q)

    def covector_d2(self, t, q) -> np.ndarray:
        if self.d2alpha is not None:
            return np.asarray(self.d2alpha(t, q), float)
        return _fd(lambda y: self.covector_d(t, y), q)

    def potential_d(self, t, q) -> np.ndarray:
        if self.dV is not None:
            return np.asarray(self.dV(t, q), float).reshape(self.n)
        return _fd(lambda y: np.atleast_1d(self.potential(t, y)), q)[0]

    def potential_d2(self, t, q) -> np.ndarray:
        if self.d2V is not None:
            return np.asarray(self.d2V(t, q), float).reshape(self.n, self.n)
        return _fd(lambda y: self.potential_d(t, y), q)

    # L and its derivatives

    def __call__(self, t, q, v) -> float:
        q = np.asarray(q, float)
        v = np.asarray(v, float)
        return float(0.5 * v @ self.metric(t, q) @ v + self.covector(t, q) @ v - self.potential(t, q))

    def L_v(self, t, q, v) -> np.ndarray:
        return self.metric(t, q) @ v + self.covector(t, q)

    def L_q(self, t, q, v) -> np.ndarray:
        da = self.metric_d(t, q)
        return 0.5 * np.einsum("i,ijk,j->k", v, da, v) + self.covector_d(t, q).T @ v - self.potential_d(t, q)

    def L_vv(self, t, q, v) -> np.ndarray:
        return self.metric(t, q)

    def L_vq(self, t, q, v) -> np.ndarray:
        """[i, k] = d^2 L / d v_i d q_k."""
        return np.einsum("ijk,j->ik", self.metric_d(t, q), v) + self.covector_d(t, q)

    def L_qq(self, t, q, v) -> np.ndarray:
        out = -self.potential_d2(t, q) + np.einsum("i,ijk->jk", v, self.covector_d2(t, q))
        if not self.metric_constant:
            out = out + 0.5 * np.einsum("i,ijkl,j->kl", v, self.metric_d2(t, q), v)
        return 0.5 * (out + out.T)

    def check_positive(self, t, q) -> float:
        a = self.metric(t, q)
        if np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
            raise LagrangianError("A(t,q) is not symmetric")
        low = float(np.linalg.eigvalsh(a)[0])
        if low < self.positivity_floor:
            raise LagrangianError(f"A(t,q) is not positive definite (smallest eigenvalue {low:.3g})")
        return low


# ---------------------------------------------------------------- duality


def fenchel_dual(L: ElectromagneticLagrangian) -> HamiltonianSystem:
    """H = 1/2 <A^{-1}(p - alpha), p - alpha> + V in closed form."""
    n = L.n

    def parts(t, q, p):
        a = L.metric(t, q)
        w = p - L.covector(t, q)
        try:
            u = np.linalg.solve(a, w)
        except np.linalg.LinAlgError:
            raise LagrangianError("singular A(t,q) in Fenchel dual") from None
        return a, w, u

    def hval(t, q, p):
        _, w, u = parts(t, q, p)
        return 0.5 * w @ u + L.potential(t, q)

    def hgrad(t, q, p):
        _, _, u = parts(t, q, p)
        gq = -L.covector_d(t, q).T @ u + L.potential_d(t, q)
        if not L.metric_constant:
            gq = gq - 0.5 * np.einsum("i,ijk,j->k", u, L.metric_d(t, q), u)
        return gq, u

    def hhess(t, q, p):
        a, _, u = parts(t, q, p)
        ainv = np.linalg.inv(a)
        da = L.covector_d(t, q)
        hpp = ainv
        if L.metric_constant:
            hpq = -ainv @ da
            hqq = da.T @ ainv @ da - np.einsum("i,ijk->jk", u, L.covector_d2(t, q)) + L.potential_d2(t, q)
        else:
            hpq = -ainv @ (da + np.einsum("ijk,j->ik", L.metric_d(t, q), u))
            hqq = _fd(lambda y: hgrad(t, y, p)[0], q)
            hqq = 0.5 * (hqq + hqq.T)
        return np.block([[hqq, hpq.T], [hpq, hpp]])

    return HamiltonianSystem(n, hval, hgrad, hhess, L.periods, name=f"dual[{L.name}]", params=dict(L.params))


def legendre_map(L: ElectromagneticLagrangian, t, q, v):
    """(t, q, v) -> (t, q, A v + alpha)."""
    q = np.asarray(q, float)
    return t, q, L.L_v(t, q, np.asarray(v, float))


def inverse_legendre(L: ElectromagneticLagrangian, t, q, p) -> np.ndarray:
    q = np.asarray(q, float)
    return np.linalg.solve(L.metric(t, q), np.asarray(p, float) - L.covector(t, q))


def numeric_fenchel(sys: HamiltonianSystem, t, q, v, tol: float = 1e-14, max_iter: int = 50) -> float:
    """sup_p (p.v - H(t,q,p)) by Newton on dH/dp = v, using only H and its derivatives."""
    n = sys.n
    q = np.asarray(q, float)
    v = np.asarray(v, float)
    p = np.zeros(n)
    for _ in range(max_iter):
        x = np.concatenate([q, p])
        g = sys.gradient(t, x)[n:] - v
        hpp = sys.hessian(t, x)[n:, n:]
        dp = np.linalg.solve(hpp, g)
        p = p - dp
        if np.max(np.abs(dp)) <= tol * max(1.0, np.max(np.abs(p))):
            break
    return float(p @ v - sys.value(t, np.concatenate([q, p])))


def round_trip_error(L: ElectromagneticLagrangian, rng: np.random.Generator, samples: int = 100,
                     scale: float = 1.0) -> float:
    """Largest |L - (L*)*| over random (t, q, v), with the second transform done numerically."""
    h = fenchel_dual(L)
    worst = 0.0
    for _ in range(samples):
        t = rng.uniform()
        q = rng.normal(scale=scale, size=L.n)
        v = rng.normal(scale=scale, size=L.n)
        lv = L(t, q, v)
        worst = max(worst, abs(lv - numeric_fenchel(h, t, q, v)) / max(1.0, abs(lv)))
    return worst


@dataclass
class GrowthConstants:
    h0: float
    h1: float
    h2: float


def growth_constants(L: ElectromagneticLagrangian, rng: np.random.Generator, samples: int = 200,
                     scale: float = 3.0) -> GrowthConstants:
    """Fitted constants for DH[p d/dp] - H >= h0 |p|^2 - h1 and the gradient bounds,
    from random samples (a report, not a proof)."""
    h = fenchel_dual(L)
    n = L.n
    pts = []
    floor = np.inf
    for _ in range(samples):
        t = rng.uniform()
        q = rng.normal(scale=scale, size=n)
        p = rng.normal(scale=scale, size=n)
        x = np.concatenate([q, p])
        g = h.gradient(t, x)
        lhs = p @ g[n:] - h.value(t, x)
        pts.append((p @ p, lhs, np.linalg.norm(g[:n]), np.linalg.norm(g[n:]), np.linalg.norm(p)))
        floor = min(floor, np.linalg.eigvalsh(np.linalg.inv(L.metric(t, q)))[0])
    h0 = 0.25 * float(floor)
    h1 = max(0.0, max(h0 * pp - lhs for pp, lhs, *_ in pts))
    h2 = max(max(gq / (1 + pp), gp / (1 + np_)) for pp, _, gq, gp, np_ in pts)
    return GrowthConstants(h0, float(h1), float(h2))


# ---------------------------------------------------------------- paths


@dataclass
class CriticalPath:
    """A sampled path on a uniform grid, optionally with its momenta."""

    times: np.ndarray
    nodes: np.ndarray  # (N+1, n)
    momenta: np.ndarray | None = None
    residual: float | None = None
    action: float | None = None
    morse_index: int | None = None
    nullity: int | None = None

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    @classmethod
    def from_flow(cls, flow: FlowResult) -> "CriticalPath":
        return cls(flow.times.copy(), flow.q.copy(), flow.p.copy())

    @classmethod
    def from_function(cls, fn, n_steps: int = 1000) -> "CriticalPath":
        times = np.linspace(0.0, 1.0, n_steps + 1)
        nodes = np.array([np.atleast_1d(fn(t)) for t in times], float)
        return cls(times, nodes)

    def midpoints(self):
        h = np.diff(self.times)
        qm = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        v = np.diff(self.nodes, axis=0) / h[:, None]
        tm = 0.5 * (self.times[1:] + self.times[:-1])
        return tm, qm, v, h

    def at(self, t: np.ndarray):
        """Piecewise-linear position and velocity at times t."""
        t = np.asarray(t, float)
        k = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        h = self.times[k + 1] - self.times[k]
        s = (t - self.times[k]) / h
        q = (1 - s)[:, None] * self.nodes[k] + s[:, None] * self.nodes[k + 1]
        v = (self.nodes[k + 1] - self.nodes[k]) / h[:, None]
        return q, v


def _discrete_momenta(L, path: CriticalPath):
    tm, qm, v, h = path.midpoints()
    lv = np.array([L.L_v(t, q, w) for t, q, w in zip(tm, qm, v)])
    lq = np.array([L.L_q(t, q, w) for t, q, w in zip(tm, qm, v)])
    return lv, lq, h


def euler_lagrange_residual(L: ElectromagneticLagrangian, path: CriticalPath) -> float:
    """Max norm of the discrete Euler-Lagrange equations at interior nodes."""
    lv, lq, h = _discrete_momenta(L, path)
    if len(h) < 2:
        return 0.0
    hk = 0.5 * (h[1:] + h[:-1])
    r = (lv[:-1] - lv[1:]) / hk[:, None] + 0.5 * (lq[:-1] * (h[:-1] / hk)[:, None] + lq[1:] * (h[1:] / hk)[:, None])
    return float(np.max(np.abs(r)))


def endpoint_momenta(L: ElectromagneticLagrangian, path: CriticalPath):
    """Discrete D_vL at t = 0 and t = 1."""
    lv, lq, h = _discrete_momenta(L, path)
    return lv[0] - 0.5 * h[0] * lq[0], lv[-1] + 0.5 * h[-1] * lq[-1]


def natural_bc_residual(L: ElectromagneticLagrangian, path: CriticalPath, bnd: NonlocalBoundary,
                        tol: float = 1e-6) -> float:
    q0, q1 = path.nodes[0], path.nodes[-1]
    r = bnd.constraint_residual(q0, q1)
    if r > tol:
        raise BoundaryViolation(f"path endpoints violate the constraint (|c| = {r:.2e})")
    p0, p1 = endpoint_momenta(L, path)
    return bnd.conormal_residual(q0, p0, q1, p1)


def action_lagrangian(L: ElectromagneticLagrangian, path: CriticalPath) -> float:
    tm, qm, v, h = path.midpoints()
    return float(sum(hk * L(t, q, w) for t, q, w, hk in zip(tm, qm, v, h)))


@dataclass
class FenchelMargin:
    margin: float
    pointwise_min: float
    legendre_related: bool


def fenchel_inequality_check(L: ElectromagneticLagrangian, times, q, p, tol: float = 1e-8) -> FenchelMargin:
    """S_L(q) - A_H(q, p) for a sampled phase path, by the midpoint rule.

    The momentum on each cell is the average of the endpoint samples; the
    pair is Legendre related when these match D_vL(q_mid, v) on every cell.
    """
    h_sys = fenchel_dual(L)
    times = np.asarray(times, float)
    q = np.asarray(q, float).reshape(len(times), -1)
    p = np.asarray(p, float).reshape(len(times), -1)
    hs = np.diff(times)
    qm = 0.5 * (q[1:] + q[:-1])
    pm = 0.5 * (p[1:] + p[:-1])
    v = np.diff(q, axis=0) / hs[:, None]
    tm = 0.5 * (times[1:] + times[:-1])
    local = np.array([
        L(t, a, w) - b @ w + h_sys.value(t, np.concatenate([a, b])) for t, a, b, w in zip(tm, qm, pm, v)
    ])
    margin = float(hs @ local)
    return FenchelMargin(margin, float(local.min()), bool(abs(margin) <= tol))


# ---------------------------------------------------------------- second variation


@dataclass
class SecondVariation:
    stiffness: np.ndarray  # d^2 S restricted to the constrained space
    mass: np.ndarray  # W^{1,2} Gram matrix on the same space
    l2_mass: np.ndarray
    elements: int
    constraint_basis: np.ndarray  # (n (N+1), n (N-1) + dim W)

    @property
    def mesh_size(self) -> float:
        return 1.0 / self.elements

    @property
    def dim(self) -> int:
        return self.stiffness.shape[0]


def _element_coefficients(L, path: CriticalPath, elements: int):
    """P = L_vv, R = L_vq, S = L_qq at 2-point Gauss nodes of each element."""
    h = 1.0 / elements
    tg = (np.arange(elements)[:, None] + GAUSS_S[None, :]).ravel() * h
    qg, vg = path.at(tg)
    n = path.n
    P = np.empty((tg.size, n, n))
    R = np.empty_like(P)
    S = np.empty_like(P)
    for i, (t, q, v) in enumerate(zip(tg, qg, vg)):
        P[i] = L.L_vv(t, q, v)
        R[i] = L.L_vq(t, q, v)
        S[i] = L.L_qq(t, q, v)
    return h, P.reshape(elements, 2, n, n), R.reshape(elements, 2, n, n), S.reshape(elements, 2, n, n)


def _assemble(h, P, R, S, n):
    elements = P.shape[0]
    size = n * (elements + 1)
    K = np.zeros((size, size))
    phi = np.stack([1 - GAUSS_S, GAUSS_S], axis=1)  # [g, a]
    dphi = np.array([-1.0, 1.0]) / h
    for a in range(2):
        for b in range(2):
            blk = 0.5 * h * (
                dphi[a] * dphi[b] * P.sum(axis=1)
                + dphi[a] * np.einsum("g,egij->eij", phi[:, b], R)
                + dphi[b] * np.einsum("g,egji->eij", phi[:, a], R)
                + np.einsum("g,egij->eij", phi[:, a] * phi[:, b], S)
            )
            for e in range(elements):
                i0, j0 = (e + a) * n, (e + b) * n
                K[i0 : i0 + n, j0 : j0 + n] += blk[e]
    return K


def _constraint_basis(n: int, elements: int, w: SubspaceSpec) -> np.ndarray:
    size = n * (elements + 1)
    interior = n * (elements - 1)
    T = np.zeros((size, interior + w.dim))
    T[n : n + interior, :interior] = np.eye(interior)
    T[:n, interior:] = w.basis[:n]
    T[size - n :, interior:] = w.basis[n:]
    return T


def second_variation(L, path: CriticalPath, bnd: NonlocalBoundary, elements: int) -> SecondVariation:
    n = path.n
    w = bnd.tangent_at(path.nodes[0], path.nodes[-1])
    h, P, R, S = _element_coefficients(L, path, elements)
    K = _assemble(h, P, R, S, n)
    eye = np.broadcast_to(np.eye(n), P.shape)
    zero = np.zeros_like(P)
    M = _assemble(h, eye, zero, eye, n)
    M2 = _assemble(h, zero, zero, eye, n)
    T = _constraint_basis(n, elements, w)
    sym = lambda m: 0.5 * (m + m.T)
    return SecondVariation(sym(T.T @ K @ T), sym(T.T @ M @ T), sym(T.T @ M2 @ T), elements, T)


@dataclass
class MorseCount:
    index: int
    nullity: int
    elements: int = 0
    margin: float = math.inf  # distance of the nonzero spectrum from the zero band
    history: list = field(default_factory=list)
    shift: float | None = None
    crossings: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.index, self.nullity))


def _spectrum(sv: SecondVariation) -> np.ndarray:
    return scipy.linalg.eigh(sv.stiffness, sv.mass, eigvals_only=True)


def _count(ev: np.ndarray, zero_tol: float, scale: float):
    band = zero_tol * scale
    neg = int(np.sum(ev < -band))
    nul = int(np.sum(np.abs(ev) <= band))
    rest = np.abs(ev[np.abs(ev) > band])
    margin = float(rest.min()) if rest.size else math.inf
    return neg, nul, margin


def _extrapolated(coarse: np.ndarray, fine: np.ndarray, window: int) -> np.ndarray:
    """Richardson limits of the lowest eigenvalues from meshes N and 2N.

    Piecewise-linear elements approximate the k-th eigenvalue from above with
    an O(h^2) error, so position k matches position k and (4 fine - coarse) / 3
    removes the leading term. Without this a conjugate point sitting exactly
    at t = 1 shows up as a positive eigenvalue of size h^2.
    """
    m = min(len(coarse), len(fine), int(np.sum(fine < 0)) + window)
    return (4.0 * fine[:m] - coarse[:m]) / 3.0


def morse_index_eigen(
    L: ElectromagneticLagrangian,
    path: CriticalPath,
    bnd: NonlocalBoundary,
    mesh: int = 64,
    max_elements: int = 1024,
    zero_tol: float = 1e-7,
) -> MorseCount:
    """Negative and zero eigenvalue counts of the constrained second variation
    relative to the W^{1,2} product.

    The mesh is doubled until the counts agree on three consecutive meshes.
    Counts on a mesh use the eigenvalues extrapolated from it and the previous
    mesh, so the zero band sees the limit spectrum rather than its O(h^2)
    discretization.
    """
    history = []
    elements = mesh
    window = 2 * path.n + 2
    prev = None
    while True:
        ev = _spectrum(second_variation(L, path, bnd, elements))
        scale = max(1.0, float(np.max(np.abs(ev))))
        if prev is None:
            neg, nul, margin = _count(ev, zero_tol, scale)
        else:
            neg, nul, margin = _count(_extrapolated(prev, ev, window), zero_tol, scale)
        prev = ev
        history.append((elements, neg, nul, margin))
        if len(history) >= 3 and len({(h[1], h[2]) for h in history[-2:]}) == 1:
            return MorseCount(neg, nul, elements, margin, history)
        if elements * 2 > max_elements:
            raise MorseIndexError(
                "Morse index count did not stabilize: "
                + ", ".join(f"N={e}: i={i}, nu={v}, margin={m:.2e}" for e, i, v, m in history)
            )
        elements *= 2


# ---------------------------------------------------------------- crossing count


def _midpoint_jacobians(L, path: CriticalPath):
    """Jacobian of X_H at the Legendre image of each cell midpoint."""
    sys = fenchel_dual(L)
    tm, qm, v, h = path.midpoints()
    n = path.n
    out = np.empty((len(tm), 2 * n, 2 * n))
    for k, (t, q, w) in enumerate(zip(tm, qm, v)):
        p = L.L_v(t, q, w)
        out[k] = sys.jacobian(t, np.concatenate([q, p]))
    return out, h


def _family_monodromy(jac: np.ndarray, h: np.ndarray, mus: np.ndarray, shift: float) -> np.ndarray:
    """Phi(mu, 1) for each mu, with A(mu) = A - mu * shift * [[0, 0], [I, 0]]."""
    mus = np.atleast_1d(np.asarray(mus, float))
    n2 = jac.shape[1]
    n = n2 // 2
    eye = np.eye(n2)
    e = np.zeros((n2, n2))
    e[n:, :n] = -np.eye(n)
    phi = np.broadcast_to(eye, (mus.size, n2, n2)).copy()
    pert = mus[:, None, None] * shift * e
    for a, hk in zip(jac, h):
        am = a[None] + pert
        phi = np.linalg.solve(eye - 0.5 * hk * am, (eye + 0.5 * hk * am) @ phi)
    return phi


def _family_graphs(phis: np.ndarray) -> np.ndarray:
    n = phis.shape[1] // 2
    gc = phis @ involution_matrix(n)
    eye = np.broadcast_to(np.eye(2 * n), gc.shape)
    return np.concatenate([eye[:, :n], gc[:, :n], eye[:, n:], gc[:, n:]], axis=1)


def choose_shift(sv: SecondVariation, start: float = 1.0, max_doublings: int = 40) -> float:
    """Smallest c = start * 2^k with d^2 S + c (L^2 mass) positive definite, with margin."""
    c = start
    low = float(scipy.linalg.eigh(sv.stiffness, sv.l2_mass, eigvals_only=True)[0])
    for _ in range(max_doublings):
        if low + c >= 0.5 * c:
            return c
        c *= 2
    raise MorseIndexError("no admissible shift found")


def morse_index_crossing(
    L: ElectromagneticLagrangian,
    path: CriticalPath,
    bnd: NonlocalBoundary,
    c: float | None = None,
    grid: int = 512,
    check_elements: int = 128,
) -> MorseCount:
    """Morse index as the count of mu in (-1, 0) at which the linearized problem
    with H_qq shifted by mu c has nontrivial solutions, weighted by dimension;
    the nullity is the intersection dimension at mu = 0."""
    sv = second_variation(L, path, bnd, check_elements)
    if c is None:
        c = choose_shift(sv)
    else:
        low = float(scipy.linalg.eigh(sv.stiffness + c * sv.l2_mass, sv.l2_mass, eigvals_only=True)[0])
        if low <= 0:
            raise MorseIndexError(f"shift c={c} does not make the shifted second variation positive definite")
    jac, h = _midpoint_jacobians(L, path)
    w = bnd.tangent_at(path.nodes[0], path.nodes[-1])
    target = conormal_frame(w).columns

    def batch(mus):
        return _family_graphs(_family_monodromy(jac, h, mus, c))

    lam = LagrangianPath(lambda mu: batch(np.array([mu]))[0], (-1.0, 0.0), batch=batch, name="mu-family")
    nu = LagrangianPath.constant(target, (-1.0, 0.0))
    crossings, degenerate = _pair_crossings(lam, nu, grid=grid, time_tol=1e-9)
    if any(cr.endpoint == "start" for cr in crossings):
        raise MorseIndexError("the mu = -1 problem has a nontrivial solution; shift too small")
    interior = [cr for cr in crossings if cr.endpoint is None]
    bad = [cr for cr in interior if not cr.regular]
    if bad:
        raise MorseIndexError(f"non-regular crossing in the mu-family at mu={bad[0].t:.9g}")
    index = int(sum(cr.dim for cr in interior))
    nullity = _nullity_from_monodromy(_family_monodromy(jac, h, [0.0], c)[0], w)
    return MorseCount(index, nullity, shift=c, crossings=crossings)


def crossing_forms_definite(count: MorseCount) -> bool:
    """True when every interior mu-crossing form is definite of one common sign."""
    signs = set()
    for cr in count.crossings:
        if cr.endpoint is None:
            if abs(cr.signature) != cr.dim:
                return False
            signs.add(int(np.sign(cr.signature)))
    return len(signs) <= 1
