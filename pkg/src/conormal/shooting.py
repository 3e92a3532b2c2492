"""Multistart Newton shooting for the non-local conormal boundary value problem.

Unknowns z = (q0, p0, m). With x(1) = phi(x0) the equations are

    c(q0, q1) = 0,        (p0, -p1) - Dc(q0, q1)^T m = 0,

a square system of size 2n + codim Q. Seeds are solved with a coarse step
first; distinct coarse roots are then polished with the production step.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .boundary import NonlocalBoundary
from .hamiltonian import (
    FlowResult,
    HamiltonianSystem,
    IntegrationError,
    action_hamiltonian,
    integrate_flow,
    maslov_index_nonlocal_report,
)
from .symplectic import HalfInteger

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    step: float = 1e-3
    coarse_step: float = 1e-2
    tol: float = 1e-9
    coarse_tol: float = 1e-7
    max_iter: int = 40
    seeds: int | None = None  # default 64 * 2n
    box: tuple = (-2.0, 2.0)  # bounds for (q0, p0), scalars or arrays of length 2n
    merge_tol: float = 1e-6
    seed: int = 0
    degenerate_tol: float = 1e-8
    compute_index: bool = True
    index_grid: int = 256


@dataclass
class Orbit:
    flow: FlowResult
    residual: float
    conormal_residual: float
    action: float
    index: HalfInteger | None
    nullity: int | None
    multiplier: np.ndarray
    degenerate: bool = False

    @property
    def x0(self) -> np.ndarray:
        return self.flow.x0

    def to_json(self) -> dict:
        n = self.flow.n
        return {
            "action": self.action,
            "index": None if self.index is None else self.index.to_json(),
            "nullity": self.nullity,
            "degenerate": self.degenerate,
            "q0": self.flow.x0[:n].tolist(),
            "p0": self.flow.x0[n:].tolist(),
            "q1": self.flow.x1[:n].tolist(),
            "p1": self.flow.x1[n:].tolist(),
            "multiplier": self.multiplier.tolist(),
            "residuals": {"constraint": self.residual, "conormal": self.conormal_residual},
        }


class OrbitList(list):
    """Orbits sorted by action, with multistart statistics."""

    attempted: int = 0
    converged: int = 0
    diverged: int = 0
    box: tuple = ()


def _residual(sys, bnd, z, step, variational):
    n = sys.n
    x0 = z[: 2 * n]
    m = z[2 * n :]
    flow = integrate_flow(sys, x0, step=step, variational=variational)
    q0, p0 = x0[:n], x0[n:]
    q1, p1 = flow.x1[:n], flow.x1[n:]
    dc = bnd.dc(q0, q1)
    f = np.concatenate([bnd.c(q0, q1), np.concatenate([p0, -p1]) - dc.T @ m])
    return f, flow, dc


def _jacobian(sys, bnd, z, flow, dc):
    n = sys.n
    k = bnd.codim
    g = flow.final_monodromy
    q0, q1 = flow.x0[:n], flow.x1[:n]
    m = z[2 * n :]
    # d(q0, q1)/dx0
    dq = np.vstack([np.hstack([np.eye(n), np.zeros((n, n))]), g[:n]])
    dcov = np.vstack([np.hstack([np.zeros((n, n)), np.eye(n)]), -g[n:]])
    jac = np.zeros((2 * n + k, 2 * n + k))
    jac[:k, : 2 * n] = dc @ dq
    curv = np.zeros((2 * n, 2 * n))
    if k:
        # derivative of Dc^T m with respect to (q0, q1); zero for linear constraints
        y = np.concatenate([q0, q1])
        h = 1e-6
        for i in range(2 * n):
            e = np.zeros(2 * n)
            e[i] = h
            plus = bnd.dc((y + e)[:n], (y + e)[n:]).T @ m
            minus = bnd.dc((y - e)[:n], (y - e)[n:]).T @ m
            curv[:, i] = (plus - minus) / (2 * h)
    jac[k:, : 2 * n] = dcov - curv @ dq
    jac[k:, 2 * n :] = -dc.T
    return jac


def _newton(sys, bnd, z, step, tol, max_iter):
    """Damped Newton with Armijo backtracking; returns (z, flow, dc, |F|, jac, ok)."""
    f, flow, dc = _residual(sys, bnd, z, step, True)
    norm = float(np.max(np.abs(f)))
    jac = None
    for _ in range(max_iter):
        jac = _jacobian(sys, bnd, z, flow, dc)
        if norm <= tol:
            return z, flow, dc, norm, jac, True
        try:
            dz = np.linalg.solve(jac, -f)
            if not np.all(np.isfinite(dz)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            dz = np.linalg.lstsq(jac, -f, rcond=None)[0]
        phi0 = 0.5 * float(f @ f)
        lam = 1.0
        accepted = False
        while lam >= 1e-4:
            zt = z + lam * dz
            try:
                ft, flow_t, dc_t = _residual(sys, bnd, zt, step, True)
            except IntegrationError:
                lam *= 0.5
                continue
            if 0.5 * float(ft @ ft) <= (1 - 1e-4 * lam) * phi0 or float(np.max(np.abs(ft))) <= tol:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return z, flow, dc, norm, jac, False
        z, f, flow, dc = zt, ft, flow_t, dc_t
        norm = float(np.max(np.abs(f)))
    ok = norm <= tol
    if ok:
        jac = _jacobian(sys, bnd, z, flow, dc)
    return z, flow, dc, norm, jac, ok


def _canonical(x0, sys, bnd):
    """Initial point modulo the lattice when the problem is translation invariant."""
    n = sys.n
    x = np.array(x0, float)
    if sys.periods is not None and bnd.translation_invariant:
        x[:n] = np.mod(x[:n], sys.periods)
        x[:n][np.isclose(x[:n], sys.periods, atol=1e-9)] = 0.0
    return x


def _seed_points(sys, bnd, opts: SolverOptions):
    n = sys.n
    count = opts.seeds if opts.seeds is not None else 64 * 2 * n
    lo = np.broadcast_to(np.asarray(opts.box[0], float), (2 * n,)).copy()
    hi = np.broadcast_to(np.asarray(opts.box[1], float), (2 * n,)).copy()
    if sys.periods is not None:
        lo[:n], hi[:n] = 0.0, sys.periods
    sampler = qmc.Sobol(d=2 * n, scramble=True, seed=opts.seed)
    m = 2 ** max(0, math.ceil(math.log2(max(count, 1))))
    pts = qmc.scale(sampler.random(m), lo, hi)[:count]
    return pts, (lo, hi)


def _initial_multiplier(sys, bnd, x0, step):
    n = sys.n
    try:
        x1 = integrate_flow(sys, x0, step=step, variational=False).x1
    except IntegrationError:
        return None
    dc = bnd.dc(x0[:n], x1[:n])
    if bnd.codim == 0:
        return np.zeros(0)
    return np.linalg.lstsq(dc.T, np.concatenate([x0[n:], -x1[n:]]), rcond=None)[0]


def make_orbit(sys, bnd, flow: FlowResult, multiplier, jac=None, opts: SolverOptions | None = None) -> Orbit:
    opts = opts or SolverOptions()
    n = sys.n
    q0, p0, q1, p1 = flow.x0[:n], flow.x0[n:], flow.x1[:n], flow.x1[n:]
    res = bnd.constraint_residual(q0, q1)
    cres = bnd.conormal_residual(q0, p0, q1, p1)
    degenerate = False
    if jac is not None:
        s = np.linalg.svd(jac, compute_uv=False)
        degenerate = bool(s[-1] <= opts.degenerate_tol * max(1.0, s[0]))
    index = nullity = None
    if opts.compute_index:
        rep = maslov_index_nonlocal_report(flow, bnd, grid=opts.index_grid, bc_tol=1e-6)
        index, nullity = rep.index, rep.nullity
        degenerate = degenerate or nullity > 0
    return Orbit(flow, res, cres, action_hamiltonian(flow, sys), index, nullity, np.asarray(multiplier), degenerate)


def _same(a: Orbit, b: Orbit, sys, bnd, tol) -> bool:
    xa, xb = _canonical(a.x0, sys, bnd), _canonical(b.x0, sys, bnd)
    if np.max(np.abs(xa - xb)) < tol:
        return True
    if sys.periods is not None and bnd.translation_invariant:
        n = sys.n
        d = np.abs(xa[:n] - xb[:n])
        d = np.minimum(d, sys.periods - d)
        if np.max(d) < tol and np.max(np.abs(xa[n:] - xb[n:])) < tol:
            return True
    # members of one degenerate family are merged by action and momentum
    if a.degenerate and b.degenerate and abs(a.action - b.action) < tol:
        n = sys.n
        return bool(np.max(np.abs(a.x0[n:] - b.x0[n:])) < tol and a.index == b.index)
    return False


def solve_nonlocal_bvp(sys: HamiltonianSystem, bnd: NonlocalBoundary, seeds=None,
                       opts: SolverOptions | None = None) -> OrbitList:
    """All orbits found from the seeds (default: a scrambled Sobol multistart).

    ``seeds`` are initial points x0 = (q0, p0), one per row.
    """
    opts = opts or SolverOptions()
    n = sys.n
    if seeds is None:
        pts, box = _seed_points(sys, bnd, opts)
    else:
        pts = np.atleast_2d(np.asarray(seeds, float))
        box = ()
    out = OrbitList()
    out.box = tuple(np.asarray(b).tolist() for b in box)
    coarse_roots: list[np.ndarray] = []
    for x0 in pts:
        out.attempted += 1
        m0 = _initial_multiplier(sys, bnd, x0, opts.coarse_step)
        if m0 is None:
            out.diverged += 1
            continue
        z = np.concatenate([x0, m0])
        try:
            z, flow, dc, norm, jac, ok = _newton(sys, bnd, z, opts.coarse_step, opts.coarse_tol, opts.max_iter)
        except (IntegrationError, np.linalg.LinAlgError, FloatingPointError):
            ok = False
        if not ok:
            out.diverged += 1
            continue
        zc = _canonical(z[: 2 * n], sys, bnd)
        if any(np.max(np.abs(zc - r)) < 1e-4 for r in coarse_roots):
            out.converged += 1
            continue
        coarse_roots.append(zc)
        try:
            z, flow, dc, norm, jac, ok = _newton(sys, bnd, z, opts.step, opts.tol, opts.max_iter)
        except (IntegrationError, np.linalg.LinAlgError):
            ok = False
        if not ok:
            out.diverged += 1
            continue
        out.converged += 1
        if sys.periods is not None and bnd.translation_invariant:
            # H is periodic, so the deck-translated orbit is an orbit too
            k = np.floor(flow.x0[:n] / sys.periods + 1e-12)
            flow.states[:, :n] -= k * sys.periods
        orbit = make_orbit(sys, bnd, flow, z[2 * n :], jac, opts)
        if not any(_same(orbit, o, sys, bnd, opts.merge_tol) for o in out):
            out.append(orbit)
    out.sort(key=lambda o: o.action)
    return out


def enumerate_below_action(sys: HamiltonianSystem, bnd: NonlocalBoundary, level: float,
                           opts: SolverOptions | None = None, seeds=None) -> OrbitList:
    """Orbits with action below ``level`` among those the multistart finds."""
    found = solve_nonlocal_bvp(sys, bnd, seeds, opts)
    out = OrbitList(o for o in found if o.action < level)
    out.attempted, out.converged, out.diverged, out.box = found.attempted, found.converged, found.diverged, found.box
    return out


def orbits_to_json(orbits: OrbitList) -> str:
    doc = {
        "orbits": [o.to_json() for o in orbits],
        "multistart": {
            "attempted": orbits.attempted,
            "converged": orbits.converged,
            "diverged": orbits.diverged,
            "box": list(orbits.box),
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)
