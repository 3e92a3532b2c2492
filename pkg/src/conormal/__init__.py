"""Maslov indices, conormal boundary value problems and the Morse index theorem."""

from .symplectic import HalfInteger, LagrangianFrame, SubspaceSpec, SymplecticMap
from .maslov import LagrangianPath, conley_zehnder, maslov_index, maslov_index_pair
from .hamiltonian import HamiltonianSystem, integrate_flow, maslov_index_nonlocal, nullity_nonlocal
from .boundary import NonlocalBoundary
from .lagrangian import ElectromagneticLagrangian, fenchel_dual, morse_index_crossing, morse_index_eigen
from .index_theorem import verify_index_theorem
from .shooting import solve_nonlocal_bvp

__all__ = [
    "HalfInteger",
    "LagrangianFrame",
    "SubspaceSpec",
    "SymplecticMap",
    "LagrangianPath",
    "conley_zehnder",
    "maslov_index",
    "maslov_index_pair",
    "HamiltonianSystem",
    "integrate_flow",
    "maslov_index_nonlocal",
    "nullity_nonlocal",
    "NonlocalBoundary",
    "ElectromagneticLagrangian",
    "fenchel_dual",
    "morse_index_crossing",
    "morse_index_eigen",
    "verify_index_theorem",
    "solve_nonlocal_bvp",
]
