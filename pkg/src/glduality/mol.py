"""Method of lines for the order-parameter equation with frozen coefficients.

The sample grid is cut into cross-sections orthogonal to a line axis.  With
the coefficients frozen at a snapshot ``(phi_hat, A)``, the discrete equation
on interior line ``n`` reads

    phi_{n+1} - 2 phi_n + phi_{n-1} - K d^2/gamma phi_n + T_n(phi_n) d^2/gamma = 0,

where ``T_n(phi) = lin_n phi + aff_n`` is affine in the unknown line.  Ghost
lines follow the covariant Neumann condition, ``phi_0 = H1 phi_1`` and
``phi_N = H2 phi_{N-1}``.  A forward recursion of cross-section operators, one
terminal solve and a backward substitution give the exact solution of this
block tridiagonal system.

Cross-sections hold at most a few hundred nodes here, so the per-line
operators are dense matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import GLParams
from .grid import BoxGrid, build_covariant_square


class MOLError(RuntimeError):
    pass


@dataclass(frozen=True)
class FrozenCoefficients:
    """Snapshot used to linearize the line equation.

    ``phi_hat`` is a complex node field on the sample grid and ``A`` the
    vector potential on the sample edges.
    """

    phi_hat: np.ndarray
    A: np.ndarray


@dataclass
class LineRecursion:
    """Coefficients of ``phi_n = a_n phi_{n+1} + b_n tau_n + E_n``.

    Lists are indexed by line, entry 0 unused.  ``tau_n = aff_n d^2/gamma``.
    """

    a: list
    b: list
    E: list
    tau: list
    spacing: float
    n_lines: int
    max_norm_a: float = field(default=0.0)


@dataclass(frozen=True)
class _LineFrame:
    """Sample grid permuted so that the line axis comes first."""

    grid: BoxGrid
    section: BoxGrid | None
    axis: int
    order: tuple[int, ...]

    @classmethod
    def make(cls, grid: BoxGrid, axis: int) -> "_LineFrame":
        if not 0 <= axis < grid.dim:
            raise MOLError(f"line axis {axis} out of range for a {grid.dim}-d grid")
        order = (axis,) + tuple(a for a in range(grid.dim) if a != axis)
        g = BoxGrid(tuple(grid.lower[a] for a in order), tuple(grid.cells[a] for a in order), grid.spacing)
        sec = None
        if grid.dim > 1:
            sec = BoxGrid(g.lower[1:], g.cells[1:], g.spacing)
        return cls(g, sec, axis, order)

    def to_frame(self, grid: BoxGrid, phi, A):
        comps = grid.split_edges(np.asarray(A, dtype=float))
        phi_t = np.transpose(np.asarray(phi), self.order)
        comps_t = [np.transpose(comps[a], self.order) for a in self.order]
        return phi_t, comps_t

    def from_frame(self, phi_t):
        return np.transpose(phi_t, np.argsort(self.order))

    @property
    def n_cells(self) -> int:
        return self.grid.cells[0]

    @property
    def section_size(self) -> int:
        return int(np.prod(self.grid.shape[1:]))


def _line_A(comps_t, n):
    """Transverse edge values of cross-section ``n`` as a section edge vector."""
    return np.concatenate([c[n].ravel() for c in comps_t[1:]]) if len(comps_t) > 1 else np.zeros(0)


def boundary_matrices(A_lower, A_upper, params: GLParams, spacing: float):
    """Ghost-line maps ``H1, H2`` from the line-axis potential on the end links.

    Lower face: ``phi_0 = (I + i rho d diag(A.n)) phi_1`` with ``A.n = -A_x``.
    Upper face: ``phi_N = (I + i rho d diag(A.n)) phi_{N-1}`` with ``A.n = A_x``.
    """
    A_lower = np.asarray(A_lower, dtype=float).ravel()
    A_upper = np.asarray(A_upper, dtype=float).ravel()
    c = 1j * params.rho * spacing
    H1 = np.diag(1.0 - c * A_lower)
    H2 = np.diag(1.0 + c * A_upper)
    return H1, H2


class LineAssembler:
    """Per-line pieces of T_n for one frozen snapshot."""

    def __init__(self, grid: BoxGrid, frozen: FrozenCoefficients, params: GLParams, axis: int = 0):
        self.frame = _LineFrame.make(grid, axis)
        phi_hat = np.asarray(frozen.phi_hat, dtype=complex)
        if phi_hat.shape != grid.shape:
            raise MOLError(f"snapshot shape {phi_hat.shape} does not match grid {grid.shape}")
        if np.asarray(frozen.A).shape != (grid.n_edges,):
            raise MOLError("snapshot potential must live on the sample edges")
        self.params = params
        self.d = grid.spacing
        self.phi_t, self.A_t = self.frame.to_frame(grid, phi_hat, frozen.A)
        # forward link phases along the line axis, shape (N, section)
        m = self.frame.section_size
        self.U = np.exp(-1j * params.rho * self.d * self.A_t[0]).reshape(self.frame.n_cells, m)
        self.lines = self.phi_t.reshape(self.frame.n_cells + 1, m)

    @property
    def N(self) -> int:
        return self.frame.n_cells

    def check_line(self, n: int):
        if not 1 <= n <= self.N - 1:
            raise MOLError(f"line index {n} outside 1..{self.N - 1}")

    def lin(self, n: int) -> np.ndarray:
        """Matrix of the phi_n-linear part of T_n."""
        self.check_line(n)
        p = self.params
        if self.frame.section is not None:
            Lp = build_covariant_square(self.frame.section, _line_A(self.A_t, n), p.rho).toarray()
        else:
            Lp = np.zeros((1, 1))
        pot = 2 * p.alpha * (np.abs(self.lines[n]) ** 2 - p.beta)
        return -p.gamma * Lp - np.diag(pot)

    def aff(self, n: int) -> np.ndarray:
        """Snapshot part of T_n: K phi_hat_n - gamma R_x phi_hat."""
        self.check_line(n)
        p = self.params
        U_f, U_b = self.U[n], self.U[n - 1]
        rem = ((1 - U_f) * self.lines[n + 1] + (1 - np.conj(U_b)) * self.lines[n - 1]) / self.d**2
        return p.shift * self.lines[n] - p.gamma * rem

    def boundary(self):
        return boundary_matrices(self.A_t[0][0], self.A_t[0][-1], self.params, self.d)


def assemble_T(n: int, phi_n, grid: BoxGrid, frozen: FrozenCoefficients, params: GLParams, axis: int = 0):
    """Evaluate ``T_n(phi_n)`` for a cross-section field ``phi_n``."""
    asm = LineAssembler(grid, frozen, params, axis)
    v = np.asarray(phi_n, dtype=complex).ravel()
    return asm.lin(n) @ v + asm.aff(n)


def _resolvent(M, n):
    try:
        a = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise MOLError(f"singular resolvent on line {n}") from exc
    if not np.all(np.isfinite(a)):
        raise MOLError(f"singular resolvent on line {n}")
    return a


def forward_sweep(asm: LineAssembler, H1) -> LineRecursion:
    """Eliminate lines 1..N-1 from the bottom up.

    ``M_n = (2 + K d^2/gamma) I - lin_n d^2/gamma`` carries the linear part
    of T_n so that the recursion is exact for the frozen problem:
    ``a_1 = (M_1 - H1)^-1``, ``a_n = (M_n - a_{n-1})^-1``,
    ``b_1 = a_1``, ``b_n = a_n (b_{n-1} + I)``,
    ``E_1 = 0``, ``E_n = a_n b_{n-1} (tau_{n-1} - tau_n) + a_n E_{n-1}``.
    """
    p = asm.params
    d, N = asm.d, asm.N
    m = asm.frame.section_size
    s = d * d / p.gamma
    eye = np.eye(m)
    a, b, E, tau = [None] * N, [None] * N, [None] * N, [None] * N
    prev = np.asarray(H1)
    norms = []
    for n in range(1, N):
        M = (2 + p.shift * s) * eye - s * asm.lin(n)
        a[n] = _resolvent(M - prev, n)
        tau[n] = s * asm.aff(n)
        if n == 1:
            b[n] = a[n].copy()
            E[n] = np.zeros(m, dtype=complex)
        else:
            b[n] = a[n] @ (b[n - 1] + eye)
            E[n] = a[n] @ (b[n - 1] @ (tau[n - 1] - tau[n]) + E[n - 1])
        prev = a[n]
        norms.append(np.linalg.norm(a[n], 2))
    return LineRecursion(a, b, E, tau, d, N - 1, float(max(norms)))


def terminal_solve(rec: LineRecursion, H2) -> np.ndarray:
    """Solve ``(I - a_{N-1} H2) phi_{N-1} = b_{N-1} tau_{N-1} + E_{N-1}``."""
    k = rec.n_lines
    m = rec.a[k].shape[0]
    lhs = np.eye(m) - rec.a[k] @ np.asarray(H2)
    rhs = rec.b[k] @ rec.tau[k] + rec.E[k]
    try:
        return np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise MOLError("singular terminal system") from exc


def backward_substitution(rec: LineRecursion, last, H1, H2) -> np.ndarray:
    """All lines 0..N from the terminal line, ghosts included."""
    k = rec.n_lines
    m = rec.a[k].shape[0]
    out = np.zeros((k + 2, m), dtype=complex)
    out[k] = last
    for n in range(k - 1, 0, -1):
        out[n] = rec.a[n] @ out[n + 1] + rec.b[n] @ rec.tau[n] + rec.E[n]
    out[0] = np.asarray(H1) @ out[1]
    out[k + 1] = np.asarray(H2) @ out[k]
    return out


def line_residuals(lines, asm: LineAssembler) -> np.ndarray:
    """Max-abs residual of the line equation on each interior line."""
    p = asm.params
    s = asm.d**2 / p.gamma
    res = np.zeros(asm.N - 1)
    for n in range(1, asm.N):
        T = asm.lin(n) @ lines[n] + asm.aff(n)
        r = lines[n + 1] - 2 * lines[n] + lines[n - 1] - p.shift * s * lines[n] + s * T
        res[n - 1] = np.abs(r).max()
    return res


@dataclass
class MOLResult:
    phi: np.ndarray
    line_residual: float
    max_norm_a: float


def mol_solve(grid: BoxGrid, frozen: FrozenCoefficients, params: GLParams, axis: int = 0,
              check: bool = False) -> MOLResult:
    """One frozen-coefficient solve on the sample grid."""
    asm = LineAssembler(grid, frozen, params, axis)
    H1, H2 = asm.boundary()
    rec = forward_sweep(asm, H1)
    last = terminal_solve(rec, H2)
    lines = backward_substitution(rec, last, H1, H2)
    res = float(line_residuals(lines, asm).max()) if check else float("nan")
    phi_t = lines.reshape(asm.phi_t.shape)
    return MOLResult(asm.frame.from_frame(phi_t), res, rec.max_norm_a)
