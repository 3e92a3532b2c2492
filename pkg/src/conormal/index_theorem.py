"""End-to-end check of the Morse index theorem for non-local conormal conditions:

    nu^Q(x) = nu^Q(gamma),
    i^Q(gamma) = mu(lambda, N*W) + (dim Q - n)/2 - nu/2,
    mu^Q(x) = i^Q(gamma) + nu/2,

with the Hamiltonian side from the monodromy of the orbit and the Lagrangian
side from two independent Morse index computations.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .boundary import NonlocalBoundary
from .hamiltonian import FlowResult, integrate_flow, maslov_index_nonlocal_report
from .lagrangian import (
    CriticalPath,
    ElectromagneticLagrangian,
    euler_lagrange_residual,
    fenchel_dual,
    morse_index_crossing,
    morse_index_eigen,
    natural_bc_residual,
)
from .symplectic import HalfInteger

log = logging.getLogger(__name__)


class IndexTheoremError(RuntimeError):
    pass


@dataclass
class IndexReport:
    label: str
    n: int
    dim_q: int
    morse_index_eigen: int
    morse_index_crossing: int
    nullity_eigen: int
    nullity_crossing: int
    maslov_part: HalfInteger  # mu(lambda, N*W)
    mu_q: HalfInteger  # mu^Q(x)
    nullity_h: int  # nu^Q(x)
    legendre_residual: float
    el_residual: float
    bc_residual: float
    shift_c: float | None = None
    refined: bool = False
    notes: list = field(default_factory=list)

    @property
    def shift(self) -> HalfInteger:
        return HalfInteger(self.dim_q - self.n)

    @property
    def morse_index(self) -> int:
        return self.morse_index_eigen

    @property
    def nullity_match(self) -> bool:
        return self.nullity_h == self.nullity_eigen == self.nullity_crossing

    @property
    def algorithms_agree(self) -> bool:
        return self.morse_index_eigen == self.morse_index_crossing

    @property
    def theorem_delta(self) -> HalfInteger:
        """i - (mu(lambda, N*W) + (dim Q - n)/2 - nu/2), exact."""
        return HalfInteger.of(self.morse_index) - (self.maslov_part + self.shift - HalfInteger(self.nullity_h))

    @property
    def corollary_delta(self) -> HalfInteger:
        """mu^Q(x) - (i + nu/2), exact."""
        return self.mu_q - (HalfInteger.of(self.morse_index) + HalfInteger(self.nullity_h))

    @property
    def passed(self) -> bool:
        return (
            self.nullity_match
            and self.algorithms_agree
            and self.theorem_delta == 0
            and self.corollary_delta == 0
        )

    def row(self) -> dict:
        return {
            "label": self.label,
            "n": self.n,
            "dim_Q": self.dim_q,
            "i_eigen": self.morse_index_eigen,
            "i_crossing": self.morse_index_crossing,
            "nu_eigen": self.nullity_eigen,
            "nu_crossing": self.nullity_crossing,
            "nu_H": self.nullity_h,
            "mu_lambda_twice": self.maslov_part.twice_value,
            "mu_lambda": str(self.maslov_part),
            "mu_Q_twice": self.mu_q.twice_value,
            "mu_Q": str(self.mu_q),
            "shift": str(self.shift),
            "theorem_delta_twice": self.theorem_delta.twice_value,
            "corollary_delta_twice": self.corollary_delta.twice_value,
            "legendre_residual": f"{self.legendre_residual:.3e}",
            "el_residual": f"{self.el_residual:.3e}",
            "bc_residual": f"{self.bc_residual:.3e}",
            "c": self.shift_c,
            "refined": self.refined,
            "pass": self.passed,
        }

    def to_json(self) -> dict:
        out = self.row()
        out["mu_lambda"] = self.maslov_part.to_json()
        out["mu_Q"] = self.mu_q.to_json()
        return out


def legendre_residual(L: ElectromagneticLagrangian, flow: FlowResult) -> float:
    """Max |p_mid - D_vL(q_mid, v)| over the cells of an orbit."""
    path = CriticalPath.from_flow(flow)
    tm, qm, v, _ = path.midpoints()
    pm = 0.5 * (flow.p[1:] + flow.p[:-1])
    return float(max(np.max(np.abs(p - L.L_v(t, q, w))) for t, q, w, p in zip(tm, qm, v, pm)))


def _evaluate(L, bnd, flow, label, mesh, grid, mu_grid) -> IndexReport:
    lres = legendre_residual(L, flow)
    if lres > 1e-8:
        raise IndexTheoremError(f"orbit is not the Legendre image of its projection (residual {lres:.2e})")
    ham = maslov_index_nonlocal_report(flow, bnd, grid=grid)
    gamma = CriticalPath.from_flow(flow)
    eig = morse_index_eigen(L, gamma, bnd, mesh=mesh)
    cross = morse_index_crossing(L, gamma, bnd, grid=mu_grid)
    return IndexReport(
        label=label,
        n=flow.n,
        dim_q=bnd.dim,
        morse_index_eigen=eig.index,
        morse_index_crossing=cross.index,
        nullity_eigen=eig.nullity,
        nullity_crossing=cross.nullity,
        maslov_part=ham.maslov_part,
        mu_q=ham.index,
        nullity_h=ham.nullity,
        legendre_residual=lres,
        el_residual=euler_lagrange_residual(L, gamma),
        bc_residual=natural_bc_residual(L, gamma, bnd),
        shift_c=cross.shift,
    )


def verify_index_theorem(L: ElectromagneticLagrangian, bnd: NonlocalBoundary, orbit, label: str = "",
                         mesh: int = 64, grid: int = 256, mu_grid: int = 512) -> IndexReport:
    """Compare both sides of the index theorem on one orbit (an Orbit or FlowResult).

    A failed equality is retried once with a finer mesh, a finer mu-grid and
    half the integration step before it is reported.
    """
    flow = orbit.flow if hasattr(orbit, "flow") else orbit
    report = _evaluate(L, bnd, flow, label, mesh, grid, mu_grid)
    if report.passed:
        return report
    log.info("index theorem check failed for %s; refining once", label or "orbit")
    step = 0.5 * float(np.min(np.diff(flow.times)))
    fine = integrate_flow(fenchel_dual(L), flow.x0, step=step)
    refined = _evaluate(L, bnd, fine, label, 2 * mesh, 2 * grid, 2 * mu_grid)
    refined.refined = True
    refined.notes.append(
        f"first pass: i_eigen={report.morse_index_eigen}, i_crossing={report.morse_index_crossing}, "
        f"mu_Q={report.mu_q}, nu={report.nullity_h}/{report.nullity_eigen}/{report.nullity_crossing}"
    )
    return refined


def zero_orbit(L: ElectromagneticLagrangian, step: float = 1e-3) -> FlowResult:
    """Orbit of the dual Hamiltonian through the origin with p = alpha(0, 0)."""
    n = L.n
    x0 = np.concatenate([np.zeros(n), L.covector(0.0, np.zeros(n))])
    return integrate_flow(fenchel_dual(L), x0, step=step)


def sweep_report(family) -> list[IndexReport]:
    """``family`` yields (label, L, bnd, orbit) tuples; reports are returned in order."""
    return [verify_index_theorem(L, bnd, orbit, label=label) for label, L, bnd, orbit in family]


def oscillator_family(omegas, boundary: str):
    from . import boundary as bmod
    from .presets import harmonic_lagrangian

    for w in omegas:
        L = harmonic_lagrangian(float(w))
        bnd = bmod.dirichlet([0.0], [0.0]) if boundary == "dirichlet" else bmod.neumann(1)
        yield f"omega={w:g} {boundary}", L, bnd, zero_orbit(L)


def reports_to_csv(reports: list[IndexReport]) -> str:
    buf = io.StringIO()
    if not reports:
        return ""
    writer = csv.DictWriter(buf, fieldnames=list(reports[0].row()), lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()


def index_jumps(params, reports: list[IndexReport]) -> list[tuple[float, float, int]]:
    """(p_left, p_right, jump) for consecutive parameters where the Morse index changes."""
    out = []
    for (a, ra), (b, rb) in zip(zip(params, reports), zip(params[1:], reports[1:])):
        if rb.morse_index != ra.morse_index:
            out.append((a, b, rb.morse_index - ra.morse_index))
    return out
