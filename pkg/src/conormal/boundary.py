"""Submanifolds Q of R^n x R^n given as regular level sets, with presets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .symplectic import SubspaceSpec, diagonal_subspace


class BoundaryViolation(ValueError):
    pass


@dataclass
class NonlocalBoundary:
    """Q = {(q0, q1) : c(q0, q1) = 0} with c: R^n x R^n -> R^{2n - dim Q}.

    ``jacobian`` returns the (codim, 2n) matrix Dc. ``translation_invariant``
    marks constraints unchanged by (q0, q1) -> (q0 + k, q1 + k) for lattice
    vectors k, which lets torus solutions be compared modulo the lattice.
    """

    n: int
    constraint: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dim: int
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    translation_invariant: bool = False

    @property
    def codim(self) -> int:
        return 2 * self.n - self.dim

    def c(self, q0, q1) -> np.ndarray:
        return np.asarray(self.constraint(np.asarray(q0, float), np.asarray(q1, float)), float).reshape(self.codim)

    def dc(self, q0, q1) -> np.ndarray:
        jac = np.asarray(self.jacobian(np.asarray(q0, float), np.asarray(q1, float)), float)
        return jac.reshape(self.codim, 2 * self.n)

    def tangent_at(self, q0, q1) -> SubspaceSpec:
        """W = ker Dc(q0, q1) as a subspace of R^{2n}."""
        jac = self.dc(q0, q1)
        if self.codim == 0:
            return SubspaceSpec.full(2 * self.n)
        u, s, vh = np.linalg.svd(jac)
        if s[-1] <= 1e-10 * max(1.0, s[0]):
            raise BoundaryViolation("Dc is not of full rank; Q is not a regular level set here")
        if self.dim == 0:
            return SubspaceSpec.zero(2 * self.n)
        return SubspaceSpec(vh[self.codim :].T)

    def constraint_residual(self, q0, q1) -> float:
        r = self.c(q0, q1)
        return float(np.max(np.abs(r))) if r.size else 0.0

    def conormal_residual(self, q0, p0, q1, p1) -> float:
        """Largest |(p0, -p1) . w| over an orthonormal basis of W."""
        w = self.tangent_at(q0, q1).basis
        if w.shape[1] == 0:
            return 0.0
        cov = np.concatenate([np.asarray(p0, float), -np.asarray(p1, float)])
        return float(np.max(np.abs(cov @ w)))

    def check(self, q0, p0, q1, p1, tol: float = 1e-6) -> None:
        r1 = self.constraint_residual(q0, q1)
        r2 = self.conormal_residual(q0, p0, q1, p1)
        if r1 > tol or r2 > tol:
            raise BoundaryViolation(f"boundary condition violated: |c| = {r1:.2e}, conormal = {r2:.2e}")


def linear(matrix, offset=None, kind="linear", params=None, translation_invariant=False) -> NonlocalBoundary:
    """Q = {x in R^{2n} : C x = d} for a full-rank C."""
    cmat = np.atleast_2d(np.asarray(matrix, float))
    codim, two_n = cmat.shape
    if cmat.size == 0:
        raise ValueError("use neumann() for codimension zero")
    d = np.zeros(codim) if offset is None else np.asarray(offset, float).reshape(codim)
    if np.linalg.matrix_rank(cmat) != codim:
        raise ValueError("constraint matrix must have full row rank")
    n = two_n // 2
    return NonlocalBoundary(
        n,
        lambda q0, q1: cmat @ np.concatenate([q0, q1]) - d,
        lambda q0, q1: cmat,
        two_n - codim,
        kind,
        dict(params or {}, matrix=cmat.tolist(), offset=d.tolist()),
        translation_invariant,
    )


def dirichlet(q0, q1) -> NonlocalBoundary:
    """Q = {(q0, q1)}: both endpoints fixed."""
    q0 = np.atleast_1d(np.asarray(q0, float))
    q1 = np.atleast_1d(np.asarray(q1, float))
    n = q0.size
    b = linear(np.eye(2 * n), np.concatenate([q0, q1]), "dirichlet", {"q0": q0.tolist(), "q1": q1.tolist()})
    return b


def neumann(n: int) -> NonlocalBoundary:
    """Q = R^n x R^n: free endpoints, p(0) = p(1) = 0."""
    return NonlocalBoundary(
        n,
        lambda q0, q1: np.zeros(0),
        lambda q0, q1: np.zeros((0, 2 * n)),
        2 * n,
        "neumann",
        {},
        translation_invariant=True,
    )


def diagonal(n: int, shift=None) -> NonlocalBoundary:
    """Q = {q1 = q0 + shift}; shift = winding * periods lifts the torus diagonal."""
    s = np.zeros(n) if shift is None else np.atleast_1d(np.asarray(shift, float))
    cmat = np.hstack([-np.eye(n), np.eye(n)])
    return linear(cmat, s, "diagonal", {"shift": s.tolist()}, translation_invariant=True)


def product(v0: SubspaceSpec, v1: SubspaceSpec, a0=None, a1=None) -> NonlocalBoundary:
    """Q = (a0 + V0) x (a1 + V1), the local problem x(0) in N*Q0, x(1) in N*Q1."""
    n = v0.ambient
    a0 = np.zeros(n) if a0 is None else np.asarray(a0, float)
    a1 = np.zeros(n) if a1 is None else np.asarray(a1, float)
    c0 = v0.complement().basis.T
    c1 = v1.complement().basis.T
    rows = []
    offs = []
    if c0.shape[0]:
        rows.append(np.hstack([c0, np.zeros((c0.shape[0], n))]))
        offs.append(c0 @ a0)
    if c1.shape[0]:
        rows.append(np.hstack([np.zeros((c1.shape[0], n)), c1]))
        offs.append(c1 @ a1)
    params = {"V0": v0.basis.tolist(), "V1": v1.basis.tolist(), "a0": a0.tolist(), "a1": a1.tolist()}
    if not rows:
        b = neumann(n)
        b.kind, b.params = "product", params
        return b
    return linear(np.vstack(rows), np.concatenate(offs), "product", params)


def figure_eight(k: int) -> NonlocalBoundary:
    """M = O x O with O = R^k, Q = {(o, o, o, o)} in M x M."""
    n = 2 * k
    eye = np.eye(k)
    z = np.zeros((k, k))
    # unknowns ordered (x0a, x0b, x1a, x1b)
    cmat = np.vstack([
        np.hstack([eye, -eye, z, z]),
        np.hstack([eye, z, -eye, z]),
        np.hstack([eye, z, z, -eye]),
    ])
    return linear(cmat, None, "figure8", {"k": k}, translation_invariant=True)


def from_subspace(w: SubspaceSpec, point=None) -> NonlocalBoundary:
    """The affine Q = point + W for a linear W in R^{2n}."""
    two_n = w.ambient
    if w.dim == two_n:
        return neumann(two_n // 2)
    comp = w.complement().basis.T
    x = np.zeros(two_n) if point is None else np.asarray(point, float)
    return linear(comp, comp @ x, "linear")


def tangent_diagonal(n: int) -> SubspaceSpec:
    return diagonal_subspace(n)
