"""Uniform box grids and the finite-difference operators built on them.

Scalars (the order parameter, gauge potentials, scalar-model unknowns) live on
grid nodes.  The vector potential lives on grid edges, one value per link,
which makes the discrete identities ``curl grad = 0`` and ``div curl = 0``
exact and gives a well-posed Neumann problem for gauge projection.  Magnetic
induction lives on faces.

Flattening is C-order everywhere.  Edge vectors are the concatenation of the
x-, y-, (z-) directed edges; face vectors likewise.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

# region tags on the outer grid nodes
INTERIOR = 0
INNER_BOUNDARY = 1
SHELL = 2
OUTER_BOUNDARY = 3


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class BoxGrid:
    """Uniform node lattice on an axis-aligned box.

    ``cells[a]`` intervals of width ``spacing`` along axis ``a`` starting at
    ``lower[a]``; there are ``cells[a] + 1`` nodes per axis.
    """

    lower: tuple[float, ...]
    cells: tuple[int, ...]
    spacing: float

    def __post_init__(self):
        if len(self.lower) != len(self.cells):
            raise GridError("lower and cells must have the same length")
        if not self.spacing > 0:
            raise GridError("spacing must be positive")
        if min(self.cells) < 2:
            raise GridError(f"need at least 3 nodes per axis, got cells={self.cells}")

    @classmethod
    def cube(cls, half_width: float, cells: int, dim: int = 3) -> "BoxGrid":
        return cls((-half_width,) * dim, (cells,) * dim, 2.0 * half_width / cells)

    @classmethod
    def unit_interval_interior(cls, n_interior: int, dim: int = 1) -> "BoxGrid":
        """Grid on [0, 1]^dim with ``n_interior`` unknowns per axis (Dirichlet)."""
        return cls((0.0,) * dim, (n_interior + 1,) * dim, 1.0 / (n_interior + 1))

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cells)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(lo + c * self.spacing for lo, c in zip(self.lower, self.cells))

    def coords(self, axis: int) -> np.ndarray:
        return self.lower[axis] + self.spacing * np.arange(self.shape[axis])

    def mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*(self.coords(a) for a in range(self.dim)), indexing="ij")

    def edge_shape(self, axis: int) -> tuple[int, ...]:
        s = list(self.shape)
        s[axis] -= 1
        return tuple(s)

    def face_shape(self, axis: int) -> tuple[int, ...]:
        s = [c for c in self.cells]
        s[axis] += 1
        return tuple(s)

    @cached_property
    def edge_offsets(self) -> tuple[int, ...]:
        sizes = [int(np.prod(self.edge_shape(a))) for a in range(self.dim)]
        return tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist())

    @property
    def n_edges(self) -> int:
        return self.edge_offsets[-1]

    @cached_property
    def face_offsets(self) -> tuple[int, ...]:
        sizes = [int(np.prod(self.face_shape(a))) for a in range(self.dim)]
        return tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist())

    @property
    def n_faces(self) -> int:
        return self.face_offsets[-1]

    def split_edges(self, values: np.ndarray) -> list[np.ndarray]:
        o = self.edge_offsets
        return [values[o[a]:o[a + 1]].reshape(self.edge_shape(a)) for a in range(self.dim)]

    def join_edges(self, components) -> np.ndarray:
        return np.concatenate([np.asarray(c).ravel() for c in components])

    def split_faces(self, values: np.ndarray) -> list[np.ndarray]:
        o = self.face_offsets
        return [values[o[a]:o[a + 1]].reshape(self.face_shape(a)) for a in range(self.dim)]

    def edge_midpoints(self, axis: int) -> tuple[np.ndarray, ...]:
        axes = []
        for b in range(self.dim):
            c = self.coords(b)
            axes.append(0.5 * (c[1:] + c[:-1]) if b == axis else c)
        return np.meshgrid(*axes, indexing="ij")

    def face_centers(self, axis: int) -> tuple[np.ndarray, ...]:
        axes = []
        for b in range(self.dim):
            c = self.coords(b)
            axes.append(c if b == axis else 0.5 * (c[1:] + c[:-1]))
        return np.meshgrid(*axes, indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for a in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[a] = 0
            mask[tuple(idx)] = True
            idx[a] = -1
            mask[tuple(idx)] = True
        return mask

    def interior_shape(self) -> tuple[int, ...]:
        return tuple(c - 1 for c in self.cells)


@dataclass(frozen=True)
class GLDomain:
    """The sample box (inner) nested in the field box (outer), same spacing.

    ``pad`` cells of vacuum surround the sample on every side.
    """

    inner: BoxGrid
    outer: BoxGrid
    pad: int

    @classmethod
    def build(cls, cells: int = 16, pad: int = 4, half_width: float = 0.5) -> "GLDomain":
        if pad < 1:
            raise GridError("the sample must sit strictly inside the field box (pad >= 1)")
        inner = BoxGrid.cube(half_width, cells)
        outer = BoxGrid(tuple(lo - pad * inner.spacing for lo in inner.lower),
                        tuple(c + 2 * pad for c in inner.cells), inner.spacing)
        return cls(inner, outer, pad)

    @property
    def spacing(self) -> float:
        return self.inner.spacing

    @property
    def inner_slice(self) -> tuple[slice, ...]:
        return tuple(slice(self.pad, self.pad + n) for n in self.inner.shape)

    @cached_property
    def regions(self) -> np.ndarray:
        tags = np.full(self.outer.shape, SHELL, dtype=np.int8)
        tags[self.outer.boundary_mask()] = OUTER_BOUNDARY
        sub = np.where(self.inner.boundary_mask(), INNER_BOUNDARY, INTERIOR).astype(np.int8)
        tags[self.inner_slice] = sub
        return tags

    @cached_property
    def inner_edge_index(self) -> np.ndarray:
        """Outer-edge index of every inner edge, in inner edge order."""
        parts = []
        for a in range(3):
            ids = np.arange(self.outer.edge_offsets[a], self.outer.edge_offsets[a + 1])
            ids = ids.reshape(self.outer.edge_shape(a))
            sl = tuple(slice(self.pad, self.pad + n) for n in self.inner.edge_shape(a))
            parts.append(ids[sl].ravel())
        return np.concatenate(parts)


# ----------------------------------------------------------------------------
# operator assembly


def _axis_op(mat, shape, axis):
    """Apply ``mat`` along ``axis`` of a C-ordered array of the given shape."""
    ops = [sp.identity(n, format="csr") for n in shape]
    ops[axis] = sp.csr_matrix(mat)
    out = ops[0]
    for op in ops[1:]:
        out = sp.kron(out, op, format="csr")
    return out


def forward_difference(n_nodes: int, d: float) -> sp.csr_matrix:
    """(n_nodes - 1) x n_nodes matrix of (u[i+1] - u[i]) / d."""
    e = np.ones(n_nodes - 1) / d
    return sp.diags([-e, e], [0, 1], shape=(n_nodes - 1, n_nodes), format="csr")


def build_gradient(grid: BoxGrid) -> sp.csr_matrix:
    """Nodes -> edges."""
    blocks = []
    for a in range(grid.dim):
        shape = list(grid.shape)
        blocks.append(_axis_op(forward_difference(shape[a], grid.spacing), shape, a))
    return sp.vstack(blocks, format="csr")


def build_div(grid: BoxGrid, on: str = "edges") -> sp.csr_matrix:
    """Discrete divergence.

    ``on="edges"``: edge field -> nodes, the negative adjoint of the gradient.
    Flux through the outer boundary is zero by construction, so this is the
    divergence of a field with vanishing normal trace.
    ``on="faces"``: face field -> cells (3D), the exact partner of ``build_curl``.
    """
    if on == "edges":
        return (-build_gradient(grid).T).tocsr()
    if on == "faces":
        if grid.dim != 3:
            raise GridError("face divergence is only defined in 3D")
        blocks = []
        for a in range(3):
            shape = grid.face_shape(a)
            blocks.append(_axis_op(forward_difference(shape[a], grid.spacing), shape, a))
        return sp.hstack(blocks, format="csr")
    raise GridError(f"unknown divergence location {on!r}")


def build_curl(grid: BoxGrid) -> sp.csr_matrix:
    """Edges -> faces (3D)."""
    if grid.dim != 3:
        raise GridError("curl is only defined in 3D")
    d = grid.spacing

    def deriv(field_axis, along):
        shape = grid.edge_shape(field_axis)
        return _axis_op(forward_difference(shape[along], d), shape, along)

    # (curl A)_a = d_b A_c - d_c A_b with (a, b, c) cyclic
    rows = []
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        blk = [None, None, None]
        blk[c] = deriv(c, b)
        blk[b] = -deriv(b, c)
        blk[a] = sp.csr_matrix((int(np.prod(grid.face_shape(a))), int(np.prod(grid.edge_shape(a)))))
        rows.append(blk)
    return sp.bmat(rows, format="csr")


def build_laplacian(grid: BoxGrid, bc: str = "dirichlet", A=None, rho: float = 0.0) -> sp.csr_matrix:
    """Minus the discrete Laplacian.

    ``dirichlet``: acts on interior nodes only, boundary values are zero.
    ``neumann``: acts on all nodes, natural (zero-flux) boundary rows.
    ``covariant``: ``|grad - i rho A|^2`` with natural boundary rows, see
    :func:`build_covariant_square`.
    """
    if min(grid.cells) < 2:
        raise GridError("grid too small")
    if bc == "dirichlet":
        n = grid.interior_shape()
        out = None
        for a in range(grid.dim):
            m = n[a]
            t = sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1]) / grid.spacing**2
            term = _axis_op(t, n, a)
            out = term if out is None else out + term
        return out.tocsr()
    if bc == "neumann":
        G = build_gradient(grid)
        return (G.T @ G).tocsr()
    if bc == "covariant":
        if A is None:
            raise GridError("covariant boundary condition needs the vector potential")
        return build_covariant_square(grid, A, rho)
    raise GridError(f"unknown boundary condition {bc!r}")


def link_phases(grid: BoxGrid, A: np.ndarray, rho: float) -> np.ndarray:
    """Parallel transporter exp(-i rho d A_e) on every edge."""
    A = np.asarray(A, dtype=float)
    if A.shape != (grid.n_edges,):
        raise GridError(f"vector potential has shape {A.shape}, expected ({grid.n_edges},)")
    return np.exp(-1j * rho * grid.spacing * A)


def edge_endpoints(grid: BoxGrid) -> tuple[np.ndarray, np.ndarray]:
    """Tail and head node index of every edge."""
    ids = np.arange(grid.n_nodes).reshape(grid.shape)
    tails, heads = [], []
    for a in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        tails.append(ids[tuple(lo)].ravel())
        heads.append(ids[tuple(hi)].ravel())
    return np.concatenate(tails), np.concatenate(heads)


def build_covariant_square(grid: BoxGrid, A: np.ndarray, rho: float) -> sp.csr_matrix:
    """Hermitian matrix of the quadratic form sum_e |U_e phi_head - phi_tail|^2 / d^2.

    ``U_e = exp(-i rho d A_e)`` is the link transporter, so the form is exactly
    invariant under discrete gauge transformations and equals the Neumann
    Laplacian when ``A = 0``.
    """
    U = link_phases(grid, A, rho)
    t, h = edge_endpoints(grid)
    inv = 1.0 / grid.spacing**2
    n = grid.n_nodes
    ones = np.full(t.size, inv)
    rows = np.concatenate([t, h, t, h])
    cols = np.concatenate([t, h, h, t])
    vals = np.concatenate([ones, ones, -inv * U, -inv * np.conj(U)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def build_vector_laplacian(grid: BoxGrid) -> sp.csr_matrix:
    """curl^T curl + grad grad^T on edges, minus the Hodge Laplacian of 1-forms."""
    C = build_curl(grid)
    G = build_gradient(grid)
    return (C.T @ C + G @ G.T).tocsr()


def is_symmetric(M, tol: float = 1e-12, trials: int = 3, seed: int = 0) -> bool:
    """Randomized check of <Mu, v> = conj(<Mv, u>)."""
    rng = np.random.default_rng(seed)
    n = M.shape[0]
    for _ in range(trials):
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        lhs = np.vdot(v, M @ u)
        rhs = np.conj(np.vdot(u, M @ v))
        if abs(lhs - rhs) > tol * max(1.0, abs(lhs)):
            return False
    return True
