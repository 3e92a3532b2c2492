"""Morse complex of the discretized action on path spaces of the circle (and line).

Paths are piecewise linear with N cells; the action is the midpoint sum
S(q) = sum_k h L(t_k+1/2, (q_k + q_k+1)/2, (q_k+1 - q_k)/h). Boundary
coefficients are in Z/2: connecting trajectories are counted by shooting
along the two unstable directions of each index-1 generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import boundary as bmod
from .lagrangian import CriticalPath, ElectromagneticLagrangian, morse_index_eigen

KINDS = ("diagonal", "dirichlet", "neumann")


class MorseComplexError(RuntimeError):
    pass


class DegenerateCriticalPoint(MorseComplexError):
    pass


class DiscreteAction:
    """The action restricted to one component of the discretized path space.

    kind: "diagonal" (q_N = q_0 + m P), "dirichlet" (q_0 = a, q_N = b + m P) or
    "neumann" (free ends). The free coordinates u map to nodes q = T u + s.
    """

    def __init__(self, L: ElectromagneticLagrangian, kind: str, winding: int = 0, nodes: int = 64,
                 endpoints=(0.0, 0.0)):
        if L.n != 1:
            raise MorseComplexError("the Morse complex is implemented for one-dimensional bases")
        if kind not in KINDS:
            raise MorseComplexError(f"unknown boundary kind {kind!r}")
        self.L = L
        self.kind = kind
        self.winding = int(winding)
        self.N = int(nodes)
        self.h = 1.0 / self.N
        self.period = None if L.periods is None else float(L.periods[0])
        self.endpoints = tuple(float(e) for e in endpoints)
        self.times = np.linspace(0.0, 1.0, self.N + 1)
        self.tm = 0.5 * (self.times[1:] + self.times[:-1])
        lift = self.winding * (self.period or 0.0)
        if self.winding and self.period is None:
            raise MorseComplexError("winding classes need a periodic base")
        N = self.N
        shift = np.zeros(N + 1)
        if kind == "diagonal":
            T = np.zeros((N + 1, N))
            T[:N, :N] = np.eye(N)
            T[N, 0] = 1.0
            shift[N] = lift
        elif kind == "dirichlet":
            T = np.zeros((N + 1, N - 1))
            T[1:N, :] = np.eye(N - 1)
            shift[0] = self.endpoints[0]
            shift[N] = self.endpoints[1] + lift
        else:
            if self.winding:
                raise MorseComplexError("the free-endpoint path space has a single component")
            T = np.eye(N + 1)
        self.T = T
        self.shift = shift
        self.translation_invariant = kind != "dirichlet" and self.period is not None
        stiff = np.zeros((N + 1, N + 1))
        mass = np.zeros((N + 1, N + 1))
        for k in range(N):
            idx = np.ix_([k, k + 1], [k, k + 1])
            stiff[idx] += np.array([[1.0, -1.0], [-1.0, 1.0]]) / self.h
            mass[idx] += np.array([[2.0, 1.0], [1.0, 2.0]]) * self.h / 6
        self.metric = T.T @ (stiff + mass) @ T
        self._metric_chol = scipy.linalg.cho_factor(self.metric)

    @property
    def dof(self) -> int:
        return self.T.shape[1]

    def boundary(self) -> bmod.NonlocalBoundary:
        lift = self.winding * (self.period or 0.0)
        if self.kind == "diagonal":
            return bmod.diagonal(1, [lift])
        if self.kind == "dirichlet":
            return bmod.dirichlet([self.endpoints[0]], [self.endpoints[1] + lift])
        return bmod.neumann(1)

    def nodes(self, u) -> np.ndarray:
        return self.T @ u + self.shift

    def coords(self, q) -> np.ndarray:
        return np.linalg.lstsq(self.T, np.asarray(q, float) - self.shift, rcond=None)[0]

    def _cells(self, u):
        q = self.nodes(u)
        return 0.5 * (q[1:] + q[:-1]), np.diff(q) / self.h

    def value(self, u) -> float:
        qm, v = self._cells(u)
        L = self.L
        return float(self.h * sum(L(t, np.array([a]), np.array([b])) for t, a, b in zip(self.tm, qm, v)))

    def gradient(self, u) -> np.ndarray:
        qm, v = self._cells(u)
        L = self.L
        lq = np.array([L.L_q(t, np.array([a]), np.array([b]))[0] for t, a, b in zip(self.tm, qm, v)])
        lv = np.array([L.L_v(t, np.array([a]), np.array([b]))[0] for t, a, b in zip(self.tm, qm, v)])
        g = np.zeros(self.N + 1)
        g[:-1] += 0.5 * self.h * lq - lv
        g[1:] += 0.5 * self.h * lq + lv
        return self.T.T @ g

    def hessian(self, u) -> np.ndarray:
        qm, v = self._cells(u)
        L = self.L
        full = np.zeros((self.N + 1, self.N + 1))
        c = np.array([0.5, 0.5])
        d = np.array([-1.0, 1.0]) / self.h
        for k, (t, a, b) in enumerate(zip(self.tm, qm, v)):
            qa, vb = np.array([a]), np.array([b])
            lqq = L.L_qq(t, qa, vb)[0, 0]
            lvq = L.L_vq(t, qa, vb)[0, 0]
            lvv = L.L_vv(t, qa, vb)[0, 0]
            loc = self.h * (np.outer(c, c) * lqq + (np.outer(c, d) + np.outer(d, c)) * lvq + np.outer(d, d) * lvv)
            full[k : k + 2, k : k + 2] += loc
        return self.T.T @ full @ self.T

    def residual(self, u) -> float:
        """Max norm of the gradient divided by h, the discrete Euler-Lagrange defect."""
        return float(np.max(np.abs(self.gradient(u)))) / self.h

    def metric_gradient(self, u) -> np.ndarray:
        """W^{1,2} Riesz representative of dS."""
        return scipy.linalg.cho_solve(self._metric_chol, self.gradient(u))

    def norm(self, u) -> float:
        return float(math.sqrt(u @ self.metric @ u))

    def canonical(self, u) -> np.ndarray:
        """Representative modulo deck translations q -> q + k P."""
        if not self.translation_invariant:
            return np.array(u, float)
        q = self.nodes(u)
        k = math.floor(q[0] / self.period + 1e-12)
        return self.coords(q - k * self.period)

    def distance(self, u, w) -> float:
        d = float(np.max(np.abs(self.canonical(u) - self.canonical(w))))
        if self.translation_invariant:
            p = self.period
            for k in (-1, 1):
                shifted = self.coords(self.nodes(self.canonical(w)) + k * p)
                d = min(d, float(np.max(np.abs(self.canonical(u) - shifted))))
        return d


@dataclass
class Generator:
    u: np.ndarray
    action: float
    index: int
    nullity: int
    residual: float
    path: CriticalPath
    unstable: np.ndarray  # (dof, index) W^{1,2}-orthonormal unstable directions
    eigen_index: int | None = None  # cross-check from the continuous second variation


def _newton(S: DiscreteAction, u, tol=1e-9, max_iter=60):
    for _ in range(max_iter):
        r = S.residual(u)
        if r <= tol:
            return u, r, True
        g = S.gradient(u)
        hmat = S.hessian(u)
        try:
            du = np.linalg.solve(hmat, -g)
        except np.linalg.LinAlgError:
            du = np.linalg.lstsq(hmat, -g, rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            un = u + lam * du
            if S.residual(un) < r:
                break
            lam *= 0.5
        u = un
        if not np.all(np.isfinite(u)):
            return u, math.inf, False
    r = S.residual(u)
    return u, r, r <= tol


def _spectrum(S: DiscreteAction, u):
    hmat = S.hessian(u)
    ev, vec = scipy.linalg.eigh(hmat, S.metric)
    return ev, vec


def classify(S: DiscreteAction, u, zero_tol: float = 1e-6, cross_check: bool = True) -> Generator:
    ev, vec = _spectrum(S, u)
    scale = max(1.0, float(np.max(np.abs(ev))))
    nul = int(np.sum(np.abs(ev) <= zero_tol * scale))
    idx = int(np.sum(ev < -zero_tol * scale))
    path = CriticalPath(S.times.copy(), S.nodes(u)[:, None])
    path.action = S.value(u)
    path.residual = S.residual(u)
    path.morse_index, path.nullity = idx, nul
    gen = Generator(np.array(u), path.action, idx, nul, path.residual, path, vec[:, :idx])
    if cross_check and nul == 0:
        gen.eigen_index = morse_index_eigen(S.L, path, S.boundary(), mesh=S.N, max_elements=4 * S.N).index
    return gen


def find_critical_points(S: DiscreteAction, starts: int = 24, seed: int = 0, tol: float = 1e-9,
                         merge_tol: float = 1e-6, reject_degenerate: bool = True,
                         cross_check: bool = True) -> list[Generator]:
    """Multistart Newton on dS = 0; seeds are c + (linear lift) + random low modes."""
    rng = np.random.default_rng(seed)
    period = S.period or 2.0
    found: list[Generator] = []
    base = S.nodes(np.zeros(S.dof))
    for j in range(starts):
        c = (j + rng.uniform()) / starts * period
        modes = sum(rng.normal(scale=0.2 / k) * np.sin(k * np.pi * S.times) for k in range(1, 4))
        if S.kind == "dirichlet":
            start = base + modes * (0.5 + period)
        else:
            lift = S.winding * (S.period or 0.0)
            start = c + lift * S.times + modes
        u0 = S.coords(start)
        u, r, ok = _newton(S, u0, tol)
        if not ok:
            continue
        u = S.canonical(u)
        if any(S.distance(u, g.u) < merge_tol for g in found):
            continue
        gen = classify(S, u, cross_check=cross_check)
        if gen.nullity and reject_degenerate:
            raise DegenerateCriticalPoint(
                f"degenerate critical point (nullity {gen.nullity}, action {gen.action:.6g}); "
                "the action is not a Morse function on this component"
            )
        found.append(gen)
    found.sort(key=lambda g: (g.index, g.action))
    return found


@dataclass
class Trajectory:
    points: list
    actions: list
    residual: float
    converged: bool


def gradient_flow(S: DiscreteAction, u0, tol: float = 1e-7, max_steps: int = 20000) -> Trajectory:
    """Negative W^{1,2}-gradient descent with Armijo steps; actions strictly decrease."""
    u = np.array(u0, float)
    f = S.value(u)
    pts, acts = [u.copy()], [f]
    tau = 0.5
    for _ in range(max_steps):
        g = S.gradient(u)
        r = float(np.max(np.abs(g))) / S.h
        if r <= tol:
            return Trajectory(pts, acts, r, True)
        d = scipy.linalg.cho_solve(S._metric_chol, g)
        slope = float(g @ d)
        while True:
            un = u - tau * d
            fn = S.value(un)
            if fn <= f - 1e-4 * tau * slope and fn < f:
                break
            tau *= 0.5
            if tau < 1e-14:
                return Trajectory(pts, acts, r, False)
        u, f = un, fn
        pts.append(u.copy())
        acts.append(f)
        tau = min(2.0 * tau, 2.0)
    return Trajectory(pts, acts, S.residual(u), False)


@dataclass
class ComplexInstance:
    kind: str
    winding: int
    generators: list[Generator]
    boundary: dict = field(default_factory=dict)  # k -> Z/2 matrix (gens of index k-1) x (gens of index k)
    connections: list = field(default_factory=list)  # (from, to) generator indices per shot
    betti: dict = field(default_factory=dict)
    metric: str = "W^{1,2}: int u'w' + uw on piecewise-linear paths"

    def by_index(self, k: int) -> list[int]:
        return [i for i, g in enumerate(self.generators) if g.index == k]

    @property
    def max_index(self) -> int:
        return max((g.index for g in self.generators), default=-1)

    def boundary_squared_zero(self) -> bool:
        for k in range(2, self.max_index + 1):
            if k in self.boundary and k - 1 in self.boundary:
                if np.any((self.boundary[k - 1] @ self.boundary[k]) % 2):
                    return False
        return True

    def morse_inequalities(self) -> bool:
        return all(len(self.by_index(k)) >= b for k, b in self.betti.items())

    def action_filtration(self) -> bool:
        for k, mat in self.boundary.items():
            lower, upper = self.by_index(k - 1), self.by_index(k)
            for i, j in zip(*np.nonzero(mat)):
                if not self.generators[lower[i]].action < self.generators[upper[j]].action:
                    return False
        return True

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "winding": self.winding,
            "generators": [
                {"index": g.index, "nullity": g.nullity, "action": g.action, "residual": g.residual,
                 "q0": float(g.path.nodes[0, 0])}
                for g in self.generators
            ],
            "boundary": {str(k): m.astype(int).tolist() for k, m in sorted(self.boundary.items())},
            "betti": {str(k): b for k, b in sorted(self.betti.items())},
            "boundary_squared_zero": self.boundary_squared_zero(),
            "morse_inequalities": self.morse_inequalities(),
        }


def rank_mod2(mat: np.ndarray) -> int:
    a = (np.asarray(mat, dtype=np.int64) % 2).copy()
    rank = 0
    rows, cols = a.shape
    for c in range(cols):
        piv = next((r for r in range(rank, rows) if a[r, c]), None)
        if piv is None:
            continue
        a[[rank, piv]] = a[[piv, rank]]
        for r in range(rows):
            if r != rank and a[r, c]:
                a[r] ^= a[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _nearest(S: DiscreteAction, u, gens: list[Generator], tol: float) -> int:
    d = [S.distance(u, g.u) for g in gens]
    order = np.argsort(d)
    if d[order[0]] > tol:
        raise MorseComplexError(f"trajectory limit is not a known generator (distance {d[order[0]]:.2e})")
    if len(d) > 1 and d[order[1]] <= tol:
        raise MorseComplexError("ambiguous trajectory limit")
    return int(order[0])


def boundary_operator(S: DiscreteAction, gens: list[Generator], delta: float = 1e-4,
                      match_tol: float = 1e-5) -> tuple[dict, list]:
    """Z/2 boundary from shooting along +-delta times the unstable direction of index-1 points."""
    if any(g.index >= 2 for g in gens):
        raise MorseComplexError("generators of index >= 2 need unstable manifolds of dimension >= 2")
    upper = [i for i, g in enumerate(gens) if g.index == 1]
    lower = [i for i, g in enumerate(gens) if g.index == 0]
    mat = np.zeros((len(lower), len(upper)), dtype=np.int64)
    connections = []
    for j, gi in enumerate(upper):
        g = gens[gi]
        e = g.unstable[:, 0] / S.norm(g.unstable[:, 0])
        for sgn in (1.0, -1.0):
            for attempt in range(2):
                traj = gradient_flow(S, g.u + sgn * delta * e, tol=1e-7 if attempt == 0 else 1e-9)
                if not traj.converged:
                    raise MorseComplexError("gradient flow did not converge")
                limit, _, ok = _newton(S, traj.points[-1])
                try:
                    target = _nearest(S, limit, [gens[i] for i in lower], match_tol)
                    break
                except MorseComplexError:
                    if attempt == 1:
                        raise
            mat[target, j] ^= 1
            connections.append((gi, lower[target]))
    return ({1: mat} if upper else {}), connections


def homology(inst: ComplexInstance) -> dict:
    betti = {}
    for k in range(0, inst.max_index + 1):
        dim = len(inst.by_index(k))
        rk_out = rank_mod2(inst.boundary[k]) if k in inst.boundary and inst.boundary[k].size else 0
        rk_in = rank_mod2(inst.boundary[k + 1]) if k + 1 in inst.boundary and inst.boundary[k + 1].size else 0
        betti[k] = dim - rk_out - rk_in
    return betti


def build_complex(L: ElectromagneticLagrangian, kind: str, winding: int = 0, nodes: int = 64,
                  endpoints=(0.0, 0.0), starts: int = 24, seed: int = 0, cross_check: bool = True) -> ComplexInstance:
    S = DiscreteAction(L, kind, winding, nodes, endpoints)
    gens = find_critical_points(S, starts=starts, seed=seed, cross_check=cross_check)
    if not gens:
        raise MorseComplexError("no critical points found")
    bd, conns = boundary_operator(S, gens)
    inst = ComplexInstance(kind, winding, gens, bd, conns)
    if not inst.boundary_squared_zero():
        raise MorseComplexError("boundary operator does not square to zero")
    inst.betti = homology(inst)
    return inst


EXPECTED_BETTI = {"diagonal": {0: 1, 1: 1}, "dirichlet": {0: 1}, "neumann": {0: 1, 1: 1}}
