"""Model parameters, discrete norms and nesting maps between the two grids.

Fields are plain numpy arrays: complex node arrays for the order parameter,
flat real edge vectors for the vector potential, flat real face vectors for
the applied induction, real node arrays for the scalar model.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .grid import BoxGrid, GLDomain, GridError


class ParamError(ValueError):
    pass


@dataclass(frozen=True)
class GLParams:
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    rho: float = 1.0
    K0: float = 1.0
    # shift of the D.C. split; None -> chosen from the amplitude bound
    K: float | None = None
    # amplitude bound ||phi||_inf <= K2; None -> 1.5 * max(||phi||_inf, sqrt(beta))
    K2: float | None = None
    # shift used inside the line recursion; None -> 4 alpha beta
    mol_shift: float | None = None
    tol: float = 1e-7
    max_iter: int = 200
    damping: float = 1.0
    linear_tol: float = 1e-10

    def __post_init__(self):
        bad = [k for k in ("gamma", "alpha", "beta", "rho", "K0") if not getattr(self, k) > 0]
        if bad:
            raise ParamError(f"model constants must be positive: {', '.join(bad)}")
        for k in ("K", "K2"):
            v = getattr(self, k)
            if v is not None and not v > 0:
                raise ParamError(f"{k} must be positive")
        if self.mol_shift is not None and not self.mol_shift >= 0:
            raise ParamError("mol_shift must be non-negative")
        if not 0 < self.damping <= 1:
            raise ParamError("damping must lie in (0, 1]")
        if self.max_iter < 1:
            raise ParamError("max_iter must be >= 1")

    @classmethod
    def gaussian_units(cls, **kw) -> "GLParams":
        """Magnetic weight 1/(8 pi) instead of K0."""
        return cls(K0=1.0 / (8.0 * math.pi), **kw)

    @property
    def shift(self) -> float:
        return 4.0 * self.alpha * self.beta if self.mol_shift is None else self.mol_shift

    def amplitude_bound(self, sup_phi: float = 0.0) -> float:
        if self.K2 is not None:
            return self.K2
        return 1.5 * max(sup_phi, math.sqrt(self.beta))

    def dc_shift(self, sup_phi: float = 0.0) -> float:
        """K, or the smallest power of two meeting both amplitude bounds."""
        if self.K is not None:
            return self.K
        K2 = self.amplitude_bound(sup_phi)
        K = 1.0
        while not self.dc_bounds_hold(K, K2):
            K *= 2.0
        return K

    def dc_bounds_hold(self, K: float, K2: float) -> bool:
        return 1.0 / self.alpha > 8 * K2**2 / K and 1.0 / self.alpha > 32 * K2**2 / K**3

    def replace(self, **kw) -> "GLParams":
        d = asdict(self)
        d.update(kw)
        return GLParams(**d)


def inner(u, v, cell_volume: float) -> float:
    """Real L2 pairing sum Re(conj(u) v) dV (nodal rule)."""
    return float(np.real(np.vdot(np.asarray(u).ravel(), np.asarray(v).ravel())) * cell_volume)


def field_norms(field, cell_volume: float) -> dict:
    m = np.abs(np.asarray(field))
    if not np.all(np.isfinite(m)):
        raise ValueError("field has non-finite values")
    w = cell_volume
    return {
        "L2": float(np.sqrt(np.sum(m**2) * w)),
        "L4": float(np.sum(m**4) * w) ** 0.25,
        "sup": float(m.max()) if m.size else 0.0,
    }


def volume(grid: BoxGrid, dirichlet: bool = False) -> float:
    """Discrete measure: node count times cell volume."""
    n = np.prod(grid.interior_shape()) if dirichlet else grid.n_nodes
    return float(n * grid.cell_volume)


def restrict(field_outer: np.ndarray, domain: GLDomain) -> np.ndarray:
    a = np.asarray(field_outer)
    if a.shape != domain.outer.shape:
        raise GridError(f"expected an outer node field of shape {domain.outer.shape}, got {a.shape}")
    return a[domain.inner_slice].copy()


def extend_by_zero(field_inner: np.ndarray, domain: GLDomain) -> np.ndarray:
    a = np.asarray(field_inner)
    if a.shape != domain.inner.shape:
        raise GridError(f"expected an inner node field of shape {domain.inner.shape}, got {a.shape}")
    out = np.zeros(domain.outer.shape, dtype=a.dtype)
    out[domain.inner_slice] = a
    return out


def restrict_edges(A_outer: np.ndarray, domain: GLDomain) -> np.ndarray:
    return np.asarray(A_outer)[domain.inner_edge_index].copy()


def extend_edges_by_zero(A_inner: np.ndarray, domain: GLDomain) -> np.ndarray:
    A_inner = np.asarray(A_inner)
    out = np.zeros(domain.outer.n_edges, dtype=A_inner.dtype)
    out[domain.inner_edge_index] = A_inner
    return out


def edges_to_nodes(grid: BoxGrid, A: np.ndarray) -> np.ndarray:
    """Average edge values onto nodes; returns shape (dim, *grid.shape)."""
    out = np.zeros((grid.dim,) + grid.shape)
    for a, comp in enumerate(grid.split_edges(np.asarray(A))):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        cnt = np.zeros(grid.shape)
        out[a][tuple(lo)] += comp
        out[a][tuple(hi)] += comp
        cnt[tuple(lo)] += 1
        cnt[tuple(hi)] += 1
        out[a] /= cnt
    return out


def envelope(x, y, z):
    """Smooth bump used for the applied induction; equals 27/512 at the origin."""
    return ((x - 1.5) ** 2 * (y - 1.5) ** 2 * (z - 1.5) ** 2
            * (x + 1.5) * (y + 1.5) * (z + 1.5) / 3.0**6)


def applied_field(grid: BoxGrid, amplitude: float, profile=envelope, direction=(1.0, 1.0, 0.0)) -> np.ndarray:
    """Face samples of ``amplitude * profile(x) * direction`` (3-d grids)."""
    if grid.dim != 3:
        raise GridError("the applied induction is defined on 3-d grids")
    parts = []
    for a in range(3):
        pts = grid.face_centers(a)
        parts.append((amplitude * direction[a] * profile(*pts)).ravel())
    return np.concatenate(parts)
