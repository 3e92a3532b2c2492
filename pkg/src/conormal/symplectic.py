"""Linear symplectic algebra on T*R^n = R^n x (R^n)*.

Vectors are stored in stacked order ``(q, p)``. The symplectic form is

    omega(xi, eta) = p_1 . q_2 - p_2 . q_1 = xi^T J eta,   J = [[0, -I], [I, 0]].

On T*R^{2n} = T*R^n x T*R^n coordinates are ordered ((q1, q2), (p1, p2)), which
makes omega on the product the direct sum of the two factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import total_ordering
from typing import Callable, Literal

import numpy as np
import scipy.linalg

RANK_TOL = 1e-8
ISOTROPY_TOL = 1e-10
SYMPLECTIC_TOL = 1e-8


class SymplecticError(ValueError):
    """Raised when input violates a linear-algebraic invariant."""


def omega_matrix(n: int) -> np.ndarray:
    """Matrix of the standard symplectic form on T*R^n."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def involution_matrix(n: int) -> np.ndarray:
    """Matrix of C(q, p) = (q, -p)."""
    return np.diag(np.concatenate([np.ones(n), -np.ones(n)]))


@total_ordering
@dataclass(frozen=True)
class HalfInteger:
    """Exact half-integer, stored as twice its value."""

    twice_value: int

    def __post_init__(self):
        object.__setattr__(self, "twice_value", int(self.twice_value))

    @classmethod
    def of(cls, value) -> "HalfInteger":
        if isinstance(value, HalfInteger):
            return value
        twice = 2 * value
        if isinstance(value, float) and twice != round(twice):
            raise ValueError(f"{value} is not a half-integer")
        return cls(int(round(twice)))

    @property
    def value(self) -> float:
        return self.twice_value / 2

    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __add__(self, other):
        other = HalfInteger.of(other)
        return HalfInteger(self.twice_value + other.twice_value)

    __radd__ = __add__

    def __sub__(self, other):
        other = HalfInteger.of(other)
        return HalfInteger(self.twice_value - other.twice_value)

    def __rsub__(self, other):
        return HalfInteger.of(other) - self

    def __neg__(self):
        return HalfInteger(-self.twice_value)

    def __eq__(self, other):
        try:
            other = HalfInteger.of(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.twice_value == other.twice_value

    def __lt__(self, other):
        return self.twice_value < HalfInteger.of(other).twice_value

    def __hash__(self):
        return hash(("HalfInteger", self.twice_value))

    def __int__(self):
        if not self.is_integer():
            raise ValueError(f"{self} is not an integer")
        return self.twice_value // 2

    def __str__(self):
        if self.is_integer():
            return str(self.twice_value // 2)
        return f"{self.twice_value}/2"

    def __repr__(self):
        return f"HalfInteger({self})"

    def to_json(self) -> dict:
        return {"twice_value": self.twice_value, "value": str(self)}


@dataclass(frozen=True)
class PhaseVector:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape or q.ndim != 1:
            raise SymplecticError(f"q and p must be vectors of equal length, got {q.shape}, {p.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_stacked(cls, x) -> "PhaseVector":
        x = np.asarray(x, dtype=float)
        n = x.size // 2
        return cls(x[:n], x[n:])

    @property
    def n(self) -> int:
        return self.q.size

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])


def _as_stacked(v) -> np.ndarray:
    if isinstance(v, PhaseVector):
        return v.stacked()
    return np.asarray(v, dtype=float)


def symplectic_product(xi, eta) -> float:
    """omega_0(xi, eta) = p_1 . q_2 - p_2 . q_1."""
    a = _as_stacked(xi)
    b = _as_stacked(eta)
    if a.shape != b.shape or a.size % 2:
        raise SymplecticError(f"dimension mismatch: {a.shape} vs {b.shape}")
    n = a.size // 2
    return float(a[n:] @ b[:n] - b[n:] @ a[:n])


def orthonormal_frame(columns: np.ndarray) -> np.ndarray:
    """QR orthonormalisation with a positive R diagonal, so smooth inputs give smooth outputs."""
    q, r = np.linalg.qr(columns)
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1)).copy()
    signs[signs == 0] = 1.0
    return q * signs[..., None, :]


def subspace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest principal angle between the column spans of a and b."""
    if a.shape[1] != b.shape[1]:
        return np.pi / 2
    if a.shape[1] == 0:
        return 0.0
    return float(np.max(scipy.linalg.subspace_angles(a, b)))


@dataclass(frozen=True)
class SubspaceSpec:
    """A linear subspace V of R^m given by a basis of shape (m, k)."""

    basis: np.ndarray
    rank_tol: float = RANK_TOL

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if b.shape[1]:
            s = np.linalg.svd(b, compute_uv=False)
            if s[-1] <= self.rank_tol * max(1.0, s[0]):
                raise SymplecticError("subspace basis is rank deficient")
            b = orthonormal_frame(b)
        object.__setattr__(self, "basis", b)

    @classmethod
    def zero(cls, m: int) -> "SubspaceSpec":
        return cls(np.zeros((m, 0)))

    @classmethod
    def full(cls, m: int) -> "SubspaceSpec":
        return cls(np.eye(m))

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def complement(self) -> "SubspaceSpec":
        """Orthogonal complement, identified with the annihilator V^perp."""
        if self.dim == 0:
            return SubspaceSpec.full(self.ambient)
        return SubspaceSpec(scipy.linalg.null_space(self.basis.T))

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def distance(self, other: "SubspaceSpec") -> float:
        return subspace_distance(self.basis, other.basis)


def _isotropy_residual(cols: np.ndarray) -> float:
    n = cols.shape[0] // 2
    m = cols.T @ omega_matrix(n) @ cols
    return float(np.max(np.abs(m))) if m.size else 0.0


@dataclass(frozen=True)
class LagrangianFrame:
    """An n-dimensional Lagrangian subspace of T*R^n, stored with orthonormal columns."""

    columns: np.ndarray
    rank_tol: float = RANK_TOL
    isotropy_tol: float = ISOTROPY_TOL

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2 or cols.shape[0] != 2 * cols.shape[1]:
            raise SymplecticError(f"a Lagrangian frame must be 2n x n, got {cols.shape}")
        s = np.linalg.svd(cols, compute_uv=False)
        if s.size and s[-1] <= self.rank_tol * max(1.0, s[0]):
            raise SymplecticError("frame columns are rank deficient")
        cols = orthonormal_frame(cols)
        res = _isotropy_residual(cols)
        if res > self.isotropy_tol:
            raise SymplecticError(f"frame is not isotropic (residual {res:.2e})")
        object.__setattr__(self, "columns", cols)

    @property
    def n(self) -> int:
        return self.columns.shape[1]

    def unitary(self) -> np.ndarray:
        """The unitary matrix X + iY whose real span is this subspace."""
        return self.columns[: self.n] + 1j * self.columns[self.n :]

    def distance(self, other: "LagrangianFrame") -> float:
        return subspace_distance(self.columns, other.columns)

    def same_subspace(self, other: "LagrangianFrame", tol: float = 1e-8) -> bool:
        return self.distance(other) <= tol

    def intersection_dim(self, other: "LagrangianFrame", tol: float = RANK_TOL) -> int:
        return intersection_dimension(self.columns, other.columns, tol)

    def isotropy_residual(self) -> float:
        return _isotropy_residual(self.columns)

    @classmethod
    def vertical(cls, n: int) -> "LagrangianFrame":
        return cls(np.vstack([np.zeros((n, n)), np.eye(n)]))

    @classmethod
    def horizontal(cls, n: int) -> "LagrangianFrame":
        return cls(np.vstack([np.eye(n), np.zeros((n, n))]))


def intersection_dimension(a: np.ndarray, b: np.ndarray, tol: float = RANK_TOL) -> int:
    """dim(span a ∩ span b) for Lagrangian frames, via the pairing b^T J a."""
    n = a.shape[1]
    qa = orthonormal_frame(a)
    qb = orthonormal_frame(b)
    s = np.linalg.svd(qb.T @ omega_matrix(n) @ qa, compute_uv=False)
    return int(np.sum(s <= tol))


@dataclass(frozen=True)
class SymplecticMap:
    matrix: np.ndarray
    tol: float = SYMPLECTIC_TOL

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise SymplecticError(f"symplectic map must be 2n x 2n, got {m.shape}")
        err = symplecticity_error(m)
        if err > self.tol * max(1.0, np.linalg.norm(m) ** 2):
            raise SymplecticError(f"matrix is not symplectic (|M^T J M - J| = {err:.2e})")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0] // 2

    def __matmul__(self, other: "SymplecticMap") -> "SymplecticMap":
        return SymplecticMap(self.matrix @ other.matrix, self.tol)

    def inverse(self) -> "SymplecticMap":
        j = omega_matrix(self.n)
        return SymplecticMap(-j @ self.matrix.T @ j, self.tol)

    def apply(self, frame: LagrangianFrame) -> LagrangianFrame:
        return LagrangianFrame(self.matrix @ frame.columns)


def symplecticity_error(m: np.ndarray) -> float:
    n = m.shape[0] // 2
    j = omega_matrix(n)
    return float(np.linalg.norm(m.T @ j @ m - j))


def _as_matrix(g) -> np.ndarray:
    return g.matrix if isinstance(g, SymplecticMap) else np.asarray(g, dtype=float)


def conormal_frame(v: SubspaceSpec) -> LagrangianFrame:
    """Frame of N*V = V x V^perp."""
    n = v.ambient
    perp = v.complement()
    if v.dim + perp.dim != n:
        raise SymplecticError("dim V + dim V^perp != n")
    cols = np.zeros((2 * n, n))
    cols[:n, : v.dim] = v.basis
    cols[n:, v.dim :] = perp.basis
    return LagrangianFrame(cols)


def apply_C(frame: LagrangianFrame) -> LagrangianFrame:
    return LagrangianFrame(involution_matrix(frame.n) @ frame.columns)


def decompose_sp_v(b, tol: float = 1e-10) -> tuple[SymplecticMap, SymplecticMap]:
    """Split a vertical-preserving B = [[a^{-1}, 0], [beta, a^T]] into shear @ block.

    shear = [[I, 0], [beta a, I]] with beta a symmetric, block = diag(a^{-1}, a^T).
    """
    m = _as_matrix(b)
    n = m.shape[0] // 2
    scale = max(1.0, np.linalg.norm(m))
    if np.max(np.abs(m[:n, n:])) > tol * scale:
        raise SymplecticError("B does not preserve the vertical subspace")
    alpha = np.linalg.inv(m[:n, :n])
    beta = m[n:, :n]
    ba = beta @ alpha
    if np.max(np.abs(ba - ba.T)) > tol * max(1.0, np.linalg.norm(ba)):
        raise SymplecticError("beta alpha is not symmetric")
    eye = np.eye(n)
    zero = np.zeros((n, n))
    shear = np.block([[eye, zero], [0.5 * (ba + ba.T), eye]])
    block = np.block([[m[:n, :n], zero], [zero, alpha.T]])
    if np.linalg.norm(shear @ block - m) > tol * scale:
        raise SymplecticError("reconstruction failed; B is not symplectic")
    return SymplecticMap(shear), SymplecticMap(block)


def conormal_transport(alpha, v: SubspaceSpec) -> SubspaceSpec:
    """alpha^{-1} V, the subspace with diag(alpha^{-1}, alpha^T) N*V = N*(alpha^{-1} V)."""
    a = np.asarray(alpha, dtype=float)
    if np.linalg.cond(a) > 1 / RANK_TOL:
        raise SymplecticError("alpha is singular")
    if v.dim == 0:
        return SubspaceSpec.zero(v.ambient)
    return SubspaceSpec(np.linalg.solve(a, v.basis))


def product_coordinates(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Interleave stacked (q1, p1), (q2, p2) columns into ((q1, q2), (p1, p2))."""
    n = x1.shape[0] // 2
    return np.concatenate([x1[:n], x2[:n], x1[n:], x2[n:]], axis=0)


def split_coordinates(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of product_coordinates."""
    n = y.shape[0] // 4
    return (
        np.concatenate([y[:n], y[2 * n : 3 * n]], axis=0),
        np.concatenate([y[n : 2 * n], y[3 * n :]], axis=0),
    )


def graph_columns(g: np.ndarray, compose_C_on: Literal["left", "right"] = "right") -> np.ndarray:
    """Raw 4n x 2n frame of graf(G C) (right) or graf(C G) (left) in T*R^{2n}."""
    n = g.shape[0] // 2
    c = involution_matrix(n)
    second = g @ c if compose_C_on == "right" else c @ g
    return product_coordinates(np.eye(2 * n), second)


def graph_frame(g, compose_C_on: Literal["left", "right"] = "right") -> LagrangianFrame:
    m = _as_matrix(g)
    if not isinstance(g, SymplecticMap):
        SymplecticMap(m)
    if compose_C_on not in ("left", "right"):
        raise ValueError("compose_C_on must be 'left' or 'right'")
    return LagrangianFrame(graph_columns(m, compose_C_on))


def product_frame(a: LagrangianFrame, b: LagrangianFrame) -> LagrangianFrame:
    """The product Lagrangian a x b in T*R^{2n}."""
    n1, n2 = a.n, b.n
    cols = np.zeros((2 * (n1 + n2), n1 + n2))
    cols[:n1, :n1] = a.columns[:n1]
    cols[n1 + n2 : 2 * n1 + n2, :n1] = a.columns[n1:]
    cols[n1 : n1 + n2, n1:] = b.columns[:n2]
    cols[2 * n1 + n2 :, n1:] = b.columns[n2:]
    return LagrangianFrame(cols)


def diagonal_subspace(n: int) -> SubspaceSpec:
    """The diagonal Delta of R^n x R^n."""
    return SubspaceSpec(np.vstack([np.eye(n), np.eye(n)]))


def random_symplectic(n: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """exp(J S) for a random symmetric S; used by property tests and fixtures."""
    s = rng.normal(size=(2 * n, 2 * n)) * scale
    s = 0.5 * (s + s.T)
    return scipy.linalg.expm(omega_matrix(n) @ s)


def verify_conormal_identity(
    q_map: Callable,
    p_map: Callable,
    sample_points,
    k: int,
    n: int,
    dq_map: Callable | None = None,
    h: float = 1e-6,
) -> float:
    """Residual of the identity  P_j + sum_h p_h dQ_h/dq_j = 0  on a graph

        L = {(q, Q(q, p), P(q, p), p) : q in R^k, p in (R^k)^perp}

    with q_map(q, p) in R^{n-k}, p_map(q, p) in R^k. It vanishes exactly when the
    Liouville form is zero on the sampled graph. ``dq_map`` returns the
    (n-k) x k Jacobian of Q in q; central differences are used otherwise.
    """
    m = n - k
    worst = 0.0
    for q, p in sample_points:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if q.size != k or p.size != m:
            raise SymplecticError(f"sample point dimensions ({q.size}, {p.size}) != ({k}, {m})")
        pv = np.atleast_1d(np.asarray(p_map(q, p), dtype=float))
        if pv.size != k:
            raise SymplecticError("P map has wrong output dimension")
        if dq_map is not None:
            jac = np.asarray(dq_map(q, p), dtype=float).reshape(m, k)
        else:
            jac = np.zeros((m, k))
            for j in range(k):
                e = np.zeros(k)
                e[j] = h
                jac[:, j] = (np.atleast_1d(q_map(q + e, p)) - np.atleast_1d(q_map(q - e, p))) / (2 * h)
        res = pv + jac.T @ p
        worst = max(worst, float(np.max(np.abs(res))) if res.size else 0.0)
    return worst
