"""Vector-potential solve on the enclosing box and divergence projection.

The potential lives on the edges of the enclosing grid.  Because the edge
divergence is ``-G^T``, zero normal flux through the outer boundary is built
into the discretization and needs no extra rows.  The gauge-fixed equation

    (C^T C + G G^T) A = C^T B0 + J / (2 K0)

is the exact stationarity condition of the discrete energy in ``A`` for a
given current ``J`` whenever ``G^T J = 0``; a Leray projection removes the
gradient part that a non-conserved current leaves behind.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .fields import GLParams
from .grid import BoxGrid, build_curl, build_gradient


class MagnetostaticsError(RuntimeError):
    pass


@dataclass
class SolveInfo:
    residual: float
    divergence: float
    conservation_defect: float


class MagnetostaticSolver:
    """Factorizations for one enclosing grid, built once and reused."""

    def __init__(self, grid: BoxGrid):
        self.grid = grid
        self.C = build_curl(grid)
        self.G = build_gradient(grid)
        self.H = (self.C.T @ self.C + self.G @ self.G.T).tocsc()
        self._H_lu = None
        self._N_lu = None

    @property
    def H_lu(self):
        if self._H_lu is None:
            self._H_lu = spla.splu(self.H)
        return self._H_lu

    @property
    def N_lu(self):
        if self._N_lu is None:
            # Neumann Laplacian with node 0 pinned
            N = (self.G.T @ self.G).tocsc()
            self._N_lu = spla.splu(N[1:, 1:].tocsc())
        return self._N_lu

    def divergence(self, A: np.ndarray) -> np.ndarray:
        return -(self.G.T @ A)

    def curl(self, A: np.ndarray) -> np.ndarray:
        return self.C @ A

    def leray_project(self, A: np.ndarray) -> np.ndarray:
        """``A - G psi`` with ``G^T G psi = G^T A``, psi of zero mean."""
        A = np.asarray(A, dtype=float)
        if A.shape != (self.grid.n_edges,):
            raise MagnetostaticsError(f"expected {self.grid.n_edges} edge values, got {A.shape}")
        rhs = self.G.T @ A
        compat = abs(rhs.sum()) * self.grid.cell_volume
        if compat > 1e-6 * (1 + np.abs(rhs).sum() * self.grid.cell_volume):
            raise MagnetostaticsError(f"Neumann compatibility violated by {compat:.3e}")
        psi = np.zeros(self.grid.n_nodes)
        psi[1:] = self.N_lu.solve(rhs[1:])
        psi -= psi.mean()
        return A - self.G @ psi

    def solve(self, B0: np.ndarray, current: np.ndarray | None, params: GLParams,
              project: bool = True) -> tuple[np.ndarray, SolveInfo]:
        B0 = np.asarray(B0, dtype=float)
        if B0.shape != (self.grid.n_faces,):
            raise MagnetostaticsError(f"expected {self.grid.n_faces} face values, got {B0.shape}")
        rhs = self.C.T @ B0
        defect = 0.0
        if current is not None:
            current = np.asarray(current, dtype=float)
            rhs = rhs + current / (2.0 * params.K0)
            defect = float(np.abs(self.G.T @ current).max())
        A = self.H_lu.solve(rhs)
        res = float(np.abs(self.H @ A - rhs).max() / max(1.0, np.abs(rhs).max()))
        if not np.isfinite(res) or res > 1e-6:
            raise MagnetostaticsError(f"vector Poisson solve failed, residual {res:.3e}")
        if project:
            A = self.leray_project(A)
        return A, SolveInfo(res, float(np.abs(self.divergence(A)).max()), defect)


def leray_project(grid: BoxGrid, A: np.ndarray) -> np.ndarray:
    return MagnetostaticSolver(grid).leray_project(A)


def solve_vector_potential(grid: BoxGrid, B0, params: GLParams, current=None) -> np.ndarray:
    """One-shot solve; build a ``MagnetostaticSolver`` to reuse factorizations."""
    return MagnetostaticSolver(grid).solve(B0, current, params)[0]


def manufactured_source(solver: MagnetostaticSolver, A_star: np.ndarray) -> np.ndarray:
    """Right-hand side that reproduces a given divergence-free ``A_star``."""
    return solver.H @ A_star
