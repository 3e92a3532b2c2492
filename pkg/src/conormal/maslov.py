"""Relative Maslov index of Lagrangian paths by crossing forms.

Crossings of a pair (lambda(t), nu(t)) are located by tracking the eigenvalues
of the unitary  W(t) = V V^T,  V = U_nu(t)^* U_lambda(t),  where U is the unitary
matrix X + iY of an orthonormal frame. The multiplicity of the eigenvalue 1 of
W(t) is dim(lambda(t) ∩ nu(t)), so crossings are the times at which a tracked
eigenangle passes through a multiple of 2 pi. The sign of each crossing is
taken from the crossing form itself, never from the eigenvalue motion.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import linear_sum_assignment

from .symplectic import (
    HalfInteger,
    LagrangianFrame,
    SymplecticError,
    graph_columns,
    involution_matrix,
    omega_matrix,
    orthonormal_frame,
    product_coordinates,
)

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


class MaslovError(RuntimeError):
    pass


class NonRegularCrossingError(MaslovError):
    def __init__(self, t: float, message: str = ""):
        super().__init__(message or f"non-regular crossing at t={t:.12g}")
        self.t = t


class EmptyIntersectionError(MaslovError):
    pass


class DegenerateEndpointError(MaslovError):
    def __init__(self, nullity: int):
        super().__init__(f"degenerate endpoint: intersection of dimension {nullity}")
        self.nullity = nullity


class LagrangianPath:
    """A C^1 path of Lagrangian subspaces on [a, b], given by raw (not necessarily
    orthonormal) 2n x n frames.

    ``derivative`` is an optional exact derivative of the raw frame; without it,
    derivatives are taken by Richardson-extrapolated finite differences.
    ``batch`` optionally evaluates many times at once, returning (m, 2n, n).
    """

    fd_step = 1e-5

    def __init__(
        self,
        frame_fn: Callable[[float], np.ndarray],
        interval: tuple[float, float] = (0.0, 1.0),
        derivative: Callable[[float], np.ndarray] | None = None,
        batch: Callable[[np.ndarray], np.ndarray] | None = None,
        name: str = "",
    ):
        self._frame_fn = frame_fn
        self.interval = (float(interval[0]), float(interval[1]))
        if not self.interval[0] < self.interval[1]:
            raise ValueError(f"empty interval {interval}")
        self._derivative = derivative
        self._batch = batch
        self.name = name
        self.n = np.asarray(frame_fn(self.interval[0])).shape[1]

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    def raw(self, t: float) -> np.ndarray:
        return np.asarray(self._frame_fn(float(t)), dtype=float)

    def raw_many(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self._batch is not None:
            return np.asarray(self._batch(ts), dtype=float)
        return np.stack([self.raw(t) for t in ts])

    def frame(self, t: float) -> LagrangianFrame:
        return LagrangianFrame(self.raw(t), isotropy_tol=1e-8)

    def derivative(self, t: float) -> np.ndarray:
        if self._derivative is not None:
            return np.asarray(self._derivative(float(t)), dtype=float)
        return _fd_derivative(self.raw, float(t), self.a, self.b, self.fd_step)

    @classmethod
    def constant(cls, frame, interval=(0.0, 1.0)) -> "LagrangianPath":
        cols = frame.columns if isinstance(frame, LagrangianFrame) else np.asarray(frame, dtype=float)
        zero = np.zeros_like(cols)
        path = cls(lambda t: cols, interval, derivative=lambda t: zero, name="constant")
        path._batch = lambda ts: np.broadcast_to(cols, (len(ts),) + cols.shape)
        path.is_constant = True
        return path

    is_constant = False

    @classmethod
    def from_samples(cls, times, frames, derivatives=None) -> "LagrangianPath":
        """Interpolate dense samples (cubic Hermite with derivatives, else cubic spline)."""
        times = np.asarray(times, dtype=float)
        frames = np.asarray(frames, dtype=float)
        if derivatives is not None:
            spline = CubicHermiteSpline(times, frames, np.asarray(derivatives, dtype=float), axis=0)
        else:
            spline = CubicSpline(times, frames, axis=0)
        dspline = spline.derivative()
        return cls(
            spline, (times[0], times[-1]), derivative=dspline, batch=spline, name="samples"
        )

    def restrict(self, a: float, b: float) -> "LagrangianPath":
        if a < self.a - 1e-14 or b > self.b + 1e-14:
            raise ValueError("restriction outside the path interval")
        return LagrangianPath(self._frame_fn, (a, b), self._derivative, self._batch, self.name)

    def transformed(self, matrix, dmatrix=None) -> "LagrangianPath":
        """t -> A(t) lambda(t) for a constant matrix or a matrix-valued function."""
        if callable(matrix):
            afn = matrix
            if dmatrix is None:
                dfn = lambda t: _fd_derivative(afn, t, self.a, self.b, self.fd_step)
            else:
                dfn = dmatrix
        else:
            const = np.asarray(matrix, dtype=float)
            afn = lambda t: const
            dfn = lambda t: np.zeros_like(const)
        raw, der = self.raw, self.derivative
        batch = None
        if not callable(matrix) and self._batch is not None:
            batch = lambda ts: const @ self.raw_many(ts)
        return LagrangianPath(
            lambda t: afn(t) @ raw(t),
            self.interval,
            derivative=lambda t: dfn(t) @ raw(t) + afn(t) @ der(t),
            batch=batch,
            name=f"A.{self.name}",
        )

    def apply_C(self) -> "LagrangianPath":
        c = involution_matrix(self.n)
        out = self.transformed(c)
        out.is_constant = self.is_constant
        return out

    def to_csv(self, filename, times: Sequence[float]) -> None:
        with open(filename, "w", newline="") as fh:
            writer = csv.writer(fh)
            n = self.n
            writer.writerow(["t"] + [f"z{i}_{j}" for i in range(2 * n) for j in range(n)])
            for t in times:
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in self.raw(t).ravel()])

    @classmethod
    def from_csv(cls, filename) -> "LagrangianPath":
        """Read a sample table: t followed by the 2n x n frame entries row-major."""
        rows = []
        with open(filename, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    if lineno == 1:
                        continue
                    raise ValueError(f"{filename}:{lineno}: non-numeric entry") from None
        data = np.asarray(rows)
        entries = data.shape[1] - 1
        n = int(round(np.sqrt(entries / 2)))
        if 2 * n * n != entries:
            raise ValueError(f"{filename}: {entries} frame entries is not 2n^2")
        return cls.from_samples(data[:, 0], data[:, 1:].reshape(-1, 2 * n, n))


def _fd_derivative(fn, t, a, b, h):
    """Richardson-extrapolated finite difference, one-sided near the ends."""
    span = b - a
    h = min(h, span / 8)
    if t - 2 * h >= a - 1e-15 and t + 2 * h <= b + 1e-15:
        d1 = (fn(t + h) - fn(t - h)) / (2 * h)
        d2 = (fn(t + h / 2) - fn(t - h / 2)) / h
        return (4 * d2 - d1) / 3
    sgn = 1.0 if t - 2 * h < a else -1.0
    def one_sided(s):
        return sgn * (-3 * fn(t) + 4 * fn(t + sgn * s) - fn(t + 2 * sgn * s)) / (2 * s)
    return (4 * one_sided(h / 2) - one_sided(h)) / 3


@dataclass
class Crossing:
    t: float
    intersection_basis: np.ndarray
    form: np.ndarray
    signature: int
    regular: bool
    endpoint: Literal["start", "end", None] = None
    persistent: bool = False

    @property
    def dim(self) -> int:
        return self.intersection_basis.shape[1]

    @property
    def weight_twice(self) -> int:
        """Twice the contribution to the index."""
        return self.signature if self.endpoint else 2 * self.signature


@dataclass
class MaslovReport:
    index: HalfInteger
    crossings: list[Crossing]
    perturbed: bool = False
    epsilon: float | None = None
    notes: list[str] = field(default_factory=list)


def _unitaries(raw: np.ndarray) -> np.ndarray:
    q = orthonormal_frame(raw)
    n = raw.shape[-1]
    return q[..., :n, :] + 1j * q[..., n:, :]


def _eigenangles(u_lam: np.ndarray, u_nu: np.ndarray) -> np.ndarray:
    v = np.conj(np.swapaxes(u_nu, -1, -2)) @ u_lam
    w = v @ np.swapaxes(v, -1, -2)
    return np.angle(np.linalg.eigvals(w))


def _wrap(x):
    return (x + np.pi) % TWO_PI - np.pi


class _PairTracker:
    """Eigenangle branches of W(t) on an adaptively refined grid.

    A cell is bisected when a branch moves more than ``max_step`` across it, or
    when the lifted change disagrees with the trapezoid rule applied to the
    branch velocities at its ends. The second test catches a full turn that
    happens inside one cell, which the angles alone cannot see.
    """

    def __init__(self, lam: LagrangianPath, nu: LagrangianPath, a: float, b: float, grid: int,
                 max_step: float = 0.3, max_mismatch: float = 1e-2, max_nodes: int = 20000):
        self.lam, self.nu = lam, nu
        self.a, self.b = a, b
        self.delta = 1e-7 * (b - a)
        ts = np.linspace(a, b, max(grid, 3))
        angles, rates = self._angles_and_rates(ts)
        min_width = 1e-7 * (b - a)
        while True:
            theta, steps, perm = self._lift(angles)
            dt = np.diff(ts)
            r = np.take_along_axis(rates, perm, axis=1)
            predicted = 0.5 * dt[:, None] * (r[:-1] + r[1:])
            mismatch = np.max(np.abs(np.diff(theta, axis=0) - predicted), axis=1)
            bad = np.nonzero(((steps > max_step) | (mismatch > max_mismatch)) & (dt > min_width))[0]
            if bad.size == 0 or ts.size + bad.size > max_nodes:
                break
            mids = 0.5 * (ts[bad] + ts[bad + 1])
            new_angles, new_rates = self._angles_and_rates(mids)
            ts = np.insert(ts, bad + 1, mids)
            angles = np.insert(angles, bad + 1, new_angles, axis=0)
            rates = np.insert(rates, bad + 1, new_rates, axis=0)
        self.ts = ts
        self.theta = theta

    def _angles(self, ts):
        u_lam = _unitaries(self.lam.raw_many(ts))
        u_nu = _unitaries(self.nu.raw_many(ts))
        return _eigenangles(u_lam, u_nu)

    def _angles_and_rates(self, ts):
        """Angles at ts and their time derivatives by central differences."""
        hi = np.minimum(ts + self.delta, self.b)
        lo = np.maximum(ts - self.delta, self.a)
        m = len(ts)
        all_angles = self._angles(np.concatenate([ts, hi, lo]))
        mid, up, down = all_angles[:m], all_angles[m : 2 * m], all_angles[2 * m :]
        # nearest-neighbour matching is enough over a step of size delta
        rows = np.arange(m)[:, None]
        cu = _wrap(up[:, None, :] - mid[:, :, None])
        cd = _wrap(down[:, None, :] - mid[:, :, None])
        cols = np.arange(mid.shape[1])[None, :]
        du = cu[rows, cols, np.argmin(np.abs(cu), axis=2)]
        dd = cd[rows, cols, np.argmin(np.abs(cd), axis=2)]
        return mid, (du - dd) / (hi - lo)[:, None]

    def angles_at(self, t):
        return self._angles(np.array([t]))[0]

    @staticmethod
    def _lift(angles):
        """Continuous branches; perm[i, k] is the raw index of branch k in row i."""
        m, n = angles.shape
        diff = _wrap(angles[1:, None, :] - angles[:-1, :, None])  # [i, a, b]: raw b at i+1 minus raw a at i
        match = np.argmin(np.abs(diff), axis=2)
        if n > 1:
            clash = np.nonzero(np.sort(match, axis=1)[:, 1:] == np.sort(match, axis=1)[:, :-1])[0]
            for i in np.unique(clash):
                match[i] = linear_sum_assignment(np.abs(diff[i]))[1]
        perm = np.empty((m, n), dtype=int)
        perm[0] = np.arange(n)
        for i in range(1, m):
            perm[i] = match[i - 1][perm[i - 1]]
        d = diff[np.arange(m - 1)[:, None], perm[:-1], perm[1:]]
        theta = angles[0] + np.vstack([np.zeros((1, n)), np.cumsum(d, axis=0)])
        return theta, np.max(np.abs(d), axis=1), perm


def _pair_frames(lam: LagrangianPath, nu: LagrangianPath, t: float):
    return lam.raw(t), nu.raw(t)


def _crossing_at(lam, nu, t, k, endpoint, zero_band) -> Crossing:
    """Crossing form of the pair at t on the k-dimensional intersection."""
    zl, zn = _pair_frames(lam, nu, t)
    n = zl.shape[1]
    j = omega_matrix(n)
    ql = orthonormal_frame(zl)
    qn = orthonormal_frame(zn)
    _, s, vh = np.linalg.svd(qn.T @ j @ ql)
    a = vh[n - k :].T
    xi = ql @ a
    al = np.linalg.lstsq(zl, xi, rcond=None)[0]
    form = xi.T @ j @ (lam.derivative(t) @ al)
    if not getattr(nu, "is_constant", False):
        an = np.linalg.lstsq(zn, xi, rcond=None)[0]
        form = form - xi.T @ j @ (nu.derivative(t) @ an)
    form = 0.5 * (form + form.T)
    ev = np.linalg.eigvalsh(form)
    # the form is invariant under rescaling the frames, so an absolute floor is meaningful
    scale = max(1.0, float(np.max(np.abs(ev)))) if ev.size else 1.0
    nonzero = np.abs(ev) > zero_band * scale
    signature = int(np.sum(ev[nonzero] > 0) - np.sum(ev[nonzero] < 0))
    return Crossing(
        t=t,
        intersection_basis=xi,
        form=form,
        signature=signature,
        regular=bool(np.all(nonzero)),
        endpoint=endpoint,
    )


def _pair_crossings(lam, nu, grid=256, atol=1e-9, time_tol=1e-10, zero_band=1e-8, end_tol=None):
    a, b = lam.a, lam.b
    tr = _PairTracker(lam, nu, a, b, grid)
    ts, theta = tr.ts, tr.theta
    m, n = theta.shape
    k_near = np.round(theta / TWO_PI)
    gap = np.abs(theta - TWO_PI * k_near)
    on_zero = gap <= atol
    if end_tol is not None:
        # endpoint intersections are decided with the caller's nullity tolerance
        on_zero[[0, -1]] |= gap[[0, -1]] <= end_tol
    events = []  # (t, endpoint, persistent)
    for jb in range(n):
        i = 0
        while i < m:
            if on_zero[i, jb]:
                i1 = i
                while i1 + 1 < m and on_zero[i1 + 1, jb]:
                    i1 += 1
                if i1 > i:
                    events.append((ts[i], None, True))
                else:
                    endpoint = "start" if i == 0 else ("end" if i == m - 1 else None)
                    events.append((ts[i], endpoint, False))
                i = i1 + 1
                continue
            if i + 1 < m and not on_zero[i + 1, jb]:
                fl, fr = np.floor(theta[i, jb] / TWO_PI), np.floor(theta[i + 1, jb] / TWO_PI)
                if abs(fr - fl) > 1:
                    raise MaslovError("eigenangle moved more than a full turn in one cell")
                if fr != fl:
                    target = TWO_PI * max(fl, fr)
                    t_star = _bisect_branch(tr, ts[i], ts[i + 1], theta[i, jb], theta[i + 1, jb],
                                            target, atol, time_tol * (b - a))
                    events.append((t_star, None, False))
            i += 1
    events.sort(key=lambda e: e[0])
    crossings = []
    degenerate = False
    idx = 0
    while idx < len(events):
        group = [events[idx]]
        while idx + 1 < len(events) and events[idx + 1][0] - group[0][0] <= 1e-8 * (b - a):
            idx += 1
            group.append(events[idx])
        idx += 1
        t = float(np.mean([g[0] for g in group]))
        endpoint = next((g[1] for g in group if g[1]), None)
        if endpoint == "start":
            t = a
        elif endpoint == "end":
            t = b
        c = _crossing_at(lam, nu, t, len(group), endpoint, zero_band)
        if any(g[2] for g in group):
            c.persistent = True
            c.regular = False
        degenerate |= not c.regular
        crossings.append(c)
    return crossings, degenerate


def _bisect_branch(tr, tl, trt, thl, thr, target, atol, time_tol):
    while trt - tl > time_tol:
        tm = 0.5 * (tl + trt)
        pred = 0.5 * (thl + thr)
        ang = tr.angles_at(tm)
        lifted = pred + _wrap(ang - pred)
        thm = lifted[np.argmin(np.abs(lifted - pred))]
        if abs(thm - target) <= atol:
            return tm
        if (thm - target) * (thl - target) < 0:
            trt, thr = tm, thm
        else:
            tl, thl = tm, thm
    return 0.5 * (tl + trt)


def _perturbed(lam: LagrangianPath, eps: float) -> LagrangianPath:
    """Endpoint-fixed rotation exp(-i eps rho(t)) of lambda; its crossing form
    contribution eps rho'(t) |xi|^2 is positive where rho increases."""
    a, b = lam.a, lam.b
    n = lam.n
    eye = np.eye(n)
    zero = np.zeros((n, n))
    gen = np.block([[zero, eye], [-eye, zero]])  # (q, p) -> (p, -q)

    def rho(t):
        return 4 * (t - a) * (b - t) / (b - a) ** 2

    def drho(t):
        return 4 * (a + b - 2 * t) / (b - a) ** 2

    def rot(t):
        th = eps * rho(t)
        return np.cos(th) * np.eye(2 * n) + np.sin(th) * gen

    def drot(t):
        th = eps * rho(t)
        return eps * drho(t) * (-np.sin(th) * np.eye(2 * n) + np.cos(th) * gen)

    def batch(ts):
        raws = lam.raw_many(ts)
        th = eps * rho(np.asarray(ts))
        return np.cos(th)[:, None, None] * raws + np.sin(th)[:, None, None] * (gen @ raws)

    return LagrangianPath(
        lambda t: rot(t) @ lam.raw(t),
        lam.interval,
        derivative=lambda t: drot(t) @ lam.raw(t) + rot(t) @ lam.derivative(t),
        batch=batch,
        name=f"perturbed({lam.name})",
    )


def _sum_crossings(crossings) -> HalfInteger:
    return HalfInteger(sum(c.weight_twice for c in crossings))


def maslov_report(
    lam: LagrangianPath,
    nu: LagrangianPath,
    grid: int = 256,
    epsilon: float = 1e-6,
    atol: float = 1e-9,
    zero_band: float = 1e-8,
    end_tol: float | None = None,
) -> MaslovReport:
    """Index of the pair with crossing data.

    ``end_tol`` widens the intersection test at the two endpoints only, so
    that the half-weighted endpoint terms count the same intersection as a
    nullity computed with a tolerance (eigenangles are twice the principal
    angles).
    """
    if lam.interval != nu.interval:
        raise ValueError("paths must share their interval")
    if lam.n != nu.n:
        raise SymplecticError("paths live in different dimensions")
    crossings, degenerate = _pair_crossings(lam, nu, grid, atol, zero_band=zero_band, end_tol=end_tol)
    if not degenerate:
        return MaslovReport(_sum_crossings(crossings), crossings)
    bad = next(c for c in crossings if not c.regular)
    log.info("non-regular crossing at t=%.6g, using perturbation eps=%g", bad.t, epsilon)
    results = []
    for eps in (epsilon, epsilon / 2):
        cr, deg = _pair_crossings(_perturbed(lam, eps), nu, grid, atol, zero_band=zero_band, end_tol=end_tol)
        if deg:
            t_bad = next(c.t for c in cr if not c.regular)
            raise NonRegularCrossingError(t_bad, f"crossing at t={t_bad:.12g} stays non-regular after perturbation")
        results.append((_sum_crossings(cr), cr))
    if results[0][0] != results[1][0]:
        raise NonRegularCrossingError(bad.t, "perturbed indices disagree between eps and eps/2")
    return MaslovReport(
        results[0][0],
        results[0][1],
        perturbed=True,
        epsilon=epsilon,
        notes=[f"non-regular crossing at t={bad.t:.12g}; index from endpoint-fixed perturbation"],
    )


def detect_crossings(path: LagrangianPath, target, grid: int = 256, atol: float = 1e-9) -> list[Crossing]:
    """All crossings of path with a fixed Lagrangian; non-regular ones are flagged, not raised."""
    nu = target if isinstance(target, LagrangianPath) else LagrangianPath.constant(target, path.interval)
    crossings, _ = _pair_crossings(path, nu, grid, atol)
    return crossings


def crossing_form(path: LagrangianPath, target, t: float, tol: float = 1e-7) -> Crossing:
    """Crossing form of path against a fixed Lagrangian at time t."""
    nu = target if isinstance(target, LagrangianPath) else LagrangianPath.constant(target, path.interval)
    zl, zn = path.raw(t), nu.raw(t)
    n = zl.shape[1]
    s = np.linalg.svd(orthonormal_frame(zn).T @ omega_matrix(n) @ orthonormal_frame(zl), compute_uv=False)
    k = int(np.sum(s <= tol))
    if k == 0:
        raise EmptyIntersectionError(f"path is transverse to the target at t={t}")
    endpoint = "start" if t <= path.a else ("end" if t >= path.b else None)
    return _crossing_at(path, nu, t, k, endpoint, 1e-8)


def maslov_index(path: LagrangianPath, target, **kw) -> HalfInteger:
    """Relative index mu(path, target) for a fixed Lagrangian target."""
    nu = target if isinstance(target, LagrangianPath) else LagrangianPath.constant(target, path.interval)
    return maslov_report(path, nu, **kw).index


def maslov_index_pair(path1: LagrangianPath, path2: LagrangianPath, **kw) -> HalfInteger:
    return maslov_report(path1, path2, **kw).index


def graph_path(
    g_fn: Callable[[float], np.ndarray],
    interval=(0.0, 1.0),
    dg_fn: Callable[[float], np.ndarray] | None = None,
    compose_C_on: Literal["left", "right"] = "right",
) -> LagrangianPath:
    """t -> graf(G(t) C) (or graf(C G(t))) as a path in T*R^{2n}."""
    g0 = np.asarray(g_fn(interval[0]))
    n = g0.shape[0] // 2
    c = involution_matrix(n)
    zeros = np.zeros((2 * n, 2 * n))

    def raw(t):
        return graph_columns(np.asarray(g_fn(t)), compose_C_on)

    deriv = None
    if dg_fn is not None:
        def deriv(t):
            dg = np.asarray(dg_fn(t))
            second = dg @ c if compose_C_on == "right" else c @ dg
            return product_coordinates(zeros, second)

    return LagrangianPath(raw, interval, derivative=deriv, name="graph")


def conley_zehnder(
    g_fn: Callable[[float], np.ndarray],
    interval=(0.0, 1.0),
    dg_fn: Callable[[float], np.ndarray] | None = None,
    nullity_tol: float = 1e-8,
    **kw,
) -> HalfInteger:
    """mu(t -> graf(G(t) C), N*Delta) for a symplectic path with G(0) = I."""
    g0 = np.asarray(g_fn(interval[0]))
    n = g0.shape[0] // 2
    if np.max(np.abs(g0 - np.eye(2 * n))) > 1e-10:
        raise ValueError("Conley-Zehnder index needs G(0) = identity")
    g1 = np.asarray(g_fn(interval[1]))
    s = np.linalg.svd(g1 - np.eye(2 * n), compute_uv=False)
    nullity = int(np.sum(s <= nullity_tol * max(1.0, np.linalg.norm(g1))))
    if nullity:
        raise DegenerateEndpointError(nullity)
    from .symplectic import conormal_frame, diagonal_subspace

    target = conormal_frame(diagonal_subspace(n))
    return maslov_index(graph_path(g_fn, interval, dg_fn), target, **kw)
