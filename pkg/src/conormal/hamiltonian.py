"""Hamiltonian flows on T*R^n and flat tori, with the linearized flow.

States are stacked x = (q, p). The integrator is the implicit midpoint rule;
the variational equation is advanced with the Cayley transform of the
Jacobian at the same midpoint, which is exactly the derivative of the
discrete flow map and therefore exactly symplectic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .boundary import NonlocalBoundary, BoundaryViolation
from .maslov import LagrangianPath, maslov_report
from .symplectic import (
    HalfInteger,
    LagrangianFrame,
    SubspaceSpec,
    conormal_frame,
    diagonal_subspace,
    involution_matrix,
    omega_matrix,
)

FD_STEP = 1e-5
SYMPLECTIC_TOL = 1e-8
NULLITY_TOL = 1e-8
# eigenangles of the pair are twice the principal angles, and a principal
# angle below sqrt(NULLITY_TOL) counts as an intersection
END_TOL = 2 * math.sqrt(NULLITY_TOL)


class IntegrationError(RuntimeError):
    pass


def _fd_gradient(fn, x, h=FD_STEP):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def _fd_jacobian(fn, x, h=FD_STEP):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


@dataclass
class HamiltonianSystem:
    """H(t, q, p) with optional analytic derivatives.

    ``grad(t, q, p)`` returns (dH/dq, dH/dp); ``hess(t, q, p)`` returns the full
    symmetric 2n x 2n Hessian in (q, p) order. Missing derivatives fall back
    to central differences. ``periods`` marks a flat torus base.
    """

    n: int
    H: Callable[[float, np.ndarray, np.ndarray], float]
    grad: Callable | None = None
    hess: Callable | None = None
    periods: np.ndarray | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.periods is not None:
            self.periods = np.broadcast_to(np.asarray(self.periods, float), (self.n,)).copy()

    def value(self, t, x) -> float:
        x = np.asarray(x, float)
        return float(self.H(t, x[: self.n], x[self.n :]))

    def gradient(self, t, x) -> np.ndarray:
        x = np.asarray(x, float)
        n = self.n
        if self.grad is not None:
            gq, gp = self.grad(t, x[:n], x[n:])
            return np.concatenate([np.atleast_1d(gq), np.atleast_1d(gp)]).astype(float)
        return _fd_gradient(lambda y: self.value(t, y), x)

    def hessian(self, t, x) -> np.ndarray:
        x = np.asarray(x, float)
        if self.hess is not None:
            return np.asarray(self.hess(t, x[: self.n], x[self.n :]), float).reshape(2 * self.n, 2 * self.n)
        s = _fd_jacobian(lambda y: self.gradient(t, y), x)
        return 0.5 * (s + s.T)

    def vector_field(self, t, x) -> np.ndarray:
        g = self.gradient(t, x)
        return np.concatenate([g[self.n :], -g[: self.n]])

    def jacobian(self, t, x) -> np.ndarray:
        """Derivative of the vector field, K S with K = [[0, I], [-I, 0]]."""
        s = self.hessian(t, x)
        n = self.n
        return np.vstack([s[n:], -s[:n]])

    def gradient_error(self, rng: np.random.Generator, samples: int = 20, scale: float = 1.0) -> float:
        """Largest relative mismatch between grad and central differences of H."""
        worst = 0.0
        for _ in range(samples):
            t = rng.uniform()
            x = rng.normal(scale=scale, size=2 * self.n)
            g = self.gradient(t, x)
            fd = _fd_gradient(lambda y: self.value(t, y), x)
            worst = max(worst, float(np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(fd)))))
        return worst


def hamiltonian_vector_field(sys: HamiltonianSystem, t, x) -> np.ndarray:
    return sys.vector_field(t, np.asarray(x, float))


@dataclass
class FlowResult:
    times: np.ndarray  # (N+1,)
    states: np.ndarray  # (N+1, 2n)
    monodromy: np.ndarray | None  # (N+1, 2n, 2n)
    mid_jacobians: np.ndarray | None  # (N, 2n, 2n)
    iterations: int = 0
    max_correction: float = 0.0
    system: HamiltonianSystem | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.states.shape[1] // 2

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]

    @property
    def x1(self) -> np.ndarray:
        return self.states[-1]

    @property
    def q(self) -> np.ndarray:
        return self.states[:, : self.n]

    @property
    def p(self) -> np.ndarray:
        return self.states[:, self.n :]

    @property
    def final_monodromy(self) -> np.ndarray:
        return self.monodromy[-1]

    def symplecticity(self) -> float:
        """max over samples of the Frobenius norm of M^T J M - J."""
        j = omega_matrix(self.n)
        defect = np.swapaxes(self.monodromy, 1, 2) @ j @ self.monodromy - j
        return float(np.max(np.linalg.norm(defect, axis=(1, 2))))

    def dynamics_residual(self) -> float:
        """Largest defect of the midpoint equations along the stored samples."""
        sys = self.system
        worst = 0.0
        for k in range(len(self.times) - 1):
            h = self.times[k + 1] - self.times[k]
            mid = 0.5 * (self.states[k] + self.states[k + 1])
            f = sys.vector_field(0.5 * (self.times[k] + self.times[k + 1]), mid)
            worst = max(worst, float(np.max(np.abs(self.states[k + 1] - self.states[k] - h * f))))
        return worst

    def graph_path(self) -> LagrangianPath:
        """t -> graf(G(t) C) with G the monodromy, interpolated by cubic splines."""
        return _graph_path_from_samples(self.times, self.monodromy)

    def transported_path(self, v0: SubspaceSpec) -> LagrangianPath:
        """t -> G(t) N*V0."""
        frame = conormal_frame(v0).columns
        return LagrangianPath.from_samples(self.times, self.monodromy @ frame)

    def to_csv(self, filename) -> None:
        n = self.n
        with open(filename, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["t"] + [f"q{i}" for i in range(n)] + [f"p{i}" for i in range(n)]
            if self.monodromy is not None:
                header += [f"M{i}_{j}" for i in range(2 * n) for j in range(2 * n)]
            w.writerow(header)
            for k, t in enumerate(self.times):
                row = [t, *self.states[k]]
                if self.monodromy is not None:
                    row += list(self.monodromy[k].ravel())
                w.writerow([repr(float(v)) for v in row])


def _graph_path_from_samples(times, mats) -> LagrangianPath:
    n = mats.shape[1] // 2
    c = involution_matrix(n)
    gc = mats @ c
    # product coordinates ((a, c), (b, d)) for the column (xi, G C xi)
    eye = np.broadcast_to(np.eye(2 * n), gc.shape)
    frames = np.concatenate([eye[:, :n], gc[:, :n], eye[:, n:], gc[:, n:]], axis=1)
    return LagrangianPath.from_samples(times, frames)


def uniform_grid(step: float = 1e-3, t0: float = 0.0, t1: float = 1.0) -> np.ndarray:
    m = max(1, int(math.ceil((t1 - t0) / step - 1e-9)))
    return np.linspace(t0, t1, m + 1)


def cayley(a: np.ndarray, h: float) -> np.ndarray:
    eye = np.eye(a.shape[-1])
    return np.linalg.solve(eye - 0.5 * h * a, eye + 0.5 * h * a)


def integrate_flow(
    sys: HamiltonianSystem,
    x0,
    grid=None,
    step: float = 1e-3,
    variational: bool = True,
    tol: float = 1e-13,
    max_iter: int = 60,
) -> FlowResult:
    """Implicit midpoint flow on ``grid`` (default: uniform on [0, 1] with ``step``)."""
    times = uniform_grid(step) if grid is None else np.asarray(grid, float)
    n2 = 2 * sys.n
    x = np.asarray(x0, float).reshape(n2).copy()
    states = np.empty((len(times), n2))
    states[0] = x
    mids = np.empty((len(times) - 1, n2, n2)) if variational else None
    mono = None
    if variational:
        mono = np.empty((len(times), n2, n2))
        mono[0] = np.eye(n2)
    total_iter = 0
    worst = 0.0
    eye = np.eye(n2)
    for k in range(len(times) - 1):
        h = times[k + 1] - times[k]
        tm = 0.5 * (times[k] + times[k + 1])
        f0 = sys.vector_field(tm, x)
        y = x + h * f0
        converged = False
        # fixed point first, Newton if it stalls
        for it in range(max_iter):
            y_new = x + h * sys.vector_field(tm, 0.5 * (x + y))
            corr = float(np.max(np.abs(y_new - y)))
            y = y_new
            total_iter += 1
            if corr <= tol * max(1.0, float(np.max(np.abs(y)))):
                converged = True
                break
            if it >= 8 and corr > 1e-3:
                break
        if not converged:
            for _ in range(max_iter):
                mid = 0.5 * (x + y)
                res = y - x - h * sys.vector_field(tm, mid)
                jac = eye - 0.5 * h * sys.jacobian(tm, mid)
                dy = np.linalg.solve(jac, res)
                y = y - dy
                total_iter += 1
                corr = float(np.max(np.abs(dy)))
                if corr <= tol * max(1.0, float(np.max(np.abs(y)))):
                    converged = True
                    break
        if not converged or not np.all(np.isfinite(y)):
            raise IntegrationError(f"implicit midpoint step failed at t={times[k]:.6g} (h={h:.3g})")
        worst = max(worst, corr)
        if variational:
            a = sys.jacobian(tm, 0.5 * (x + y))
            mids[k] = a
            mono[k + 1] = np.linalg.solve(eye - 0.5 * h * a, (eye + 0.5 * h * a) @ mono[k])
        x = y
        states[k + 1] = x
    out = FlowResult(times, states, mono, mids, total_iter, worst, sys)
    if variational:
        scale = max(1.0, float(np.max(np.linalg.norm(mono, axis=(1, 2)))) ** 2)
        err = out.symplecticity()
        if err > SYMPLECTIC_TOL * scale:
            raise IntegrationError(f"monodromy lost symplecticity: {err:.2e}")
    return out


def flow_endpoint(sys: HamiltonianSystem, x0, grid=None, step=1e-3) -> np.ndarray:
    return integrate_flow(sys, x0, grid, step, variational=False).x1


# ---------------------------------------------------------------- indices


def _check_boundary(flow: FlowResult, bnd: NonlocalBoundary, tol: float):
    n = flow.n
    bnd.check(flow.x0[:n], flow.x0[n:], flow.x1[:n], flow.x1[n:], tol)


def _intersection_dim(a: np.ndarray, b: np.ndarray, tol: float = NULLITY_TOL) -> int:
    """dim(span a ∩ span b) for two full-rank frames: principal angles below sqrt(tol)."""
    qa = np.linalg.qr(a)[0]
    qb = np.linalg.qr(b)[0]
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    angles = np.arccos(np.clip(s, -1.0, 1.0))
    return int(np.sum(angles <= math.sqrt(tol)))


def nullity_nonlocal(flow: FlowResult, bnd: NonlocalBoundary, tol: float = NULLITY_TOL, bc_tol: float = 1e-6) -> int:
    """dim of {(xi, C G(1) xi)} ∩ N*W in T*R^{2n}."""
    _check_boundary(flow, bnd, bc_tol)
    n = flow.n
    w = bnd.tangent_at(flow.x0[:n], flow.x1[:n])
    return _nullity_from_monodromy(flow.final_monodromy, w, tol)


def _nullity_from_monodromy(g: np.ndarray, w: SubspaceSpec, tol: float = NULLITY_TOL) -> int:
    n = g.shape[0] // 2
    c = involution_matrix(n)
    cg = c @ g
    eye = np.eye(2 * n)
    graph = np.concatenate([eye[:n], cg[:n], eye[n:], cg[n:]], axis=0)
    target = conormal_frame(w).columns
    return _intersection_dim(graph, target, tol)


@dataclass
class IndexResult:
    index: HalfInteger
    nullity: int
    maslov_part: HalfInteger
    shift: HalfInteger
    perturbed: bool = False
    lift: dict = field(default_factory=dict)


def maslov_index_nonlocal_report(
    flow: FlowResult, bnd: NonlocalBoundary, grid: int = 256, bc_tol: float = 1e-6
) -> IndexResult:
    _check_boundary(flow, bnd, bc_tol)
    n = flow.n
    w = bnd.tangent_at(flow.x0[:n], flow.x1[:n])
    target = conormal_frame(w)
    rep = maslov_report(flow.graph_path(), LagrangianPath.constant(target), grid=grid, end_tol=END_TOL)
    shift = HalfInteger(bnd.dim - n)
    nul = _nullity_from_monodromy(flow.final_monodromy, w)
    lift = {"kind": bnd.kind, **({"shift": bnd.params["shift"]} if "shift" in bnd.params else {})}
    return IndexResult(rep.index + shift, nul, rep.index, shift, rep.perturbed, lift)


def maslov_index_nonlocal(flow: FlowResult, bnd: NonlocalBoundary, **kw) -> HalfInteger:
    """mu(graf G C, N*W) + (dim Q - n)/2 along an orbit satisfying the boundary condition."""
    return maslov_index_nonlocal_report(flow, bnd, **kw).index


def maslov_index_local(flow: FlowResult, v0: SubspaceSpec, v1: SubspaceSpec, grid: int = 256) -> HalfInteger:
    """mu(G N*V0, N*V1) + (dim V0 + dim V1 - n)/2."""
    path = flow.transported_path(v0)
    target = LagrangianPath.constant(conormal_frame(v1))
    rep = maslov_report(path, target, grid=grid, end_tol=END_TOL)
    return rep.index + HalfInteger(v0.dim + v1.dim - flow.n)


def nullity_local(flow: FlowResult, v0: SubspaceSpec, v1: SubspaceSpec, tol: float = NULLITY_TOL) -> int:
    moved = flow.final_monodromy @ conormal_frame(v0).columns
    return _intersection_dim(moved, conormal_frame(v1).columns, tol)


# ---------------------------------------------------------------- reduction


@dataclass
class Reduction:
    system: HamiltonianSystem
    q_conormal: SubspaceSpec  # W, tangent of Q
    delta_conormal: SubspaceSpec  # diagonal of R^n x R^n

    def initial_state(self, flow: FlowResult) -> np.ndarray:
        """y(0) = (x(0), C x(1)) in the coordinates (q1, q2, p1, p2)."""
        n = flow.n
        x0, x1 = flow.x0, flow.x1
        return np.concatenate([x0[:n], x1[:n], x0[n:], -x1[n:]])


def reduce_to_local(sys: HamiltonianSystem, bnd: NonlocalBoundary, at=None) -> Reduction:
    """K(t, y1, y2) = H(t/2, y1)/2 + H(1 - t/2, C y2)/2 on T*R^{2n}.

    ``at`` = (q0, q1) fixes where the tangent space W of Q is taken; by
    default the origin.
    """
    n = sys.n

    def split(q, p):
        return q[:n], q[n:], p[:n], p[n:]

    def kval(t, q, p):
        q1, q2, p1, p2 = split(q, p)
        return 0.5 * sys.H(t / 2, q1, p1) + 0.5 * sys.H(1 - t / 2, q2, -p2)

    def kgrad(t, q, p):
        q1, q2, p1, p2 = split(q, p)
        g1 = sys.gradient(t / 2, np.concatenate([q1, p1]))
        g2 = sys.gradient(1 - t / 2, np.concatenate([q2, -p2]))
        gq = 0.5 * np.concatenate([g1[:n], g2[:n]])
        gp = 0.5 * np.concatenate([g1[n:], -g2[n:]])
        return gq, gp

    def khess(t, q, p):
        q1, q2, p1, p2 = split(q, p)
        s1 = sys.hessian(t / 2, np.concatenate([q1, p1]))
        s2 = sys.hessian(1 - t / 2, np.concatenate([q2, -p2]))
        flip = np.diag(np.concatenate([np.ones(n), -np.ones(n)]))
        s2 = flip @ s2 @ flip
        out = np.zeros((4 * n, 4 * n))
        i1 = np.r_[0:n, 2 * n : 3 * n]
        i2 = np.r_[n : 2 * n, 3 * n : 4 * n]
        out[np.ix_(i1, i1)] = 0.5 * s1
        out[np.ix_(i2, i2)] = 0.5 * s2
        return out

    periods = None if sys.periods is None else np.concatenate([sys.periods, sys.periods])
    ksys = HamiltonianSystem(2 * n, kval, kgrad, khess, periods, name=f"K[{sys.name}]")
    q0, q1 = (np.zeros(n), np.zeros(n)) if at is None else at
    return Reduction(ksys, bnd.tangent_at(q0, q1), diagonal_subspace(n))


def reduced_indices(red: Reduction, flow: FlowResult, step: float | None = None) -> tuple[HalfInteger, int]:
    """(mu^{Q,Delta}(y), nu^{Q,Delta}(y)) computed on the reduced local problem."""
    grid = flow.times if step is None else None
    yflow = integrate_flow(red.system, red.initial_state(flow), grid=grid, step=step or 1e-3)
    mu = maslov_index_local(yflow, red.q_conormal, red.delta_conormal)
    nu = nullity_local(yflow, red.q_conormal, red.delta_conormal)
    return mu, nu


# ---------------------------------------------------------------- action


def action_hamiltonian(flow: FlowResult, sys: HamiltonianSystem | None = None) -> float:
    """Midpoint quadrature of the integral of p dq - H dt."""
    sys = sys or flow.system
    n = flow.n
    x = flow.states
    t = flow.times
    total = 0.0
    for k in range(len(t) - 1):
        mid = 0.5 * (x[k] + x[k + 1])
        h = t[k + 1] - t[k]
        total += float(mid[n:] @ (x[k + 1, :n] - x[k, :n])) - h * sys.value(0.5 * (t[k] + t[k + 1]), mid)
    return total


# ---------------------------------------------------------------- gauge


def gauge_transformed_index(flow: FlowResult, bnd: NonlocalBoundary, gauge: Callable[[float], np.ndarray],
                            grid: int = 256) -> HalfInteger:
    """Index of t -> graf(B(t) G(t) B(0)^{-1} C) for a gauge B(t) in Sp_v.

    The target is N*W moved by the same endpoint map as the path; for B(0) and
    B(1) fixing the conormal frames this is N*W itself, and the result must
    equal maslov_index_nonlocal.
    """
    n = flow.n
    bs = np.stack([gauge(t) for t in flow.times])
    b0inv = np.linalg.inv(bs[0])
    mats = bs @ flow.monodromy @ b0inv
    path = _graph_path_from_samples(flow.times, mats)
    w = bnd.tangent_at(flow.x0[:n], flow.x1[:n])
    c = involution_matrix(n)
    # the image of N*W under (x, y) -> (B0 x, C B1 C y) in product coordinates
    # (x, y) -> (C B0 C x, B1 y) maps graf(G C) onto graf(B1 G B0^{-1} C)
    big = np.zeros((4 * n, 4 * n))
    m0, m1 = c @ bs[0] @ c, bs[-1]
    qi = [np.r_[0:n], np.r_[n : 2 * n]]
    pi = [np.r_[2 * n : 3 * n], np.r_[3 * n : 4 * n]]
    for f, m in enumerate((m0, m1)):
        rows = np.concatenate([qi[f], pi[f]])
        big[np.ix_(rows, rows)] = m
    target = LagrangianFrame(big @ conormal_frame(w).columns)
    rep = maslov_report(path, LagrangianPath.constant(target), grid=grid, end_tol=END_TOL)
    return rep.index + HalfInteger(bnd.dim - n)
