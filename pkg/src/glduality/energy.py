"""Discrete free energies and their exact gradients.

Every residual here is the gradient of the matching energy with respect to the
nodal (or edge) L2 pairing, so ``<residual, h> * dV`` equals the directional
derivative of the energy along ``h`` up to rounding.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import GLParams, extend_edges_by_zero, restrict_edges
from .grid import BoxGrid, GLDomain, build_covariant_square, build_curl, build_laplacian, edge_endpoints, link_phases


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite values in input field")


def _check_gl(domain, phi, A, B0=None):
    if phi.shape != domain.inner.shape:
        raise ValueError(f"phi has shape {phi.shape}, expected {domain.inner.shape}")
    if A.shape != (domain.outer.n_edges,):
        raise ValueError(f"A has shape {A.shape}, expected ({domain.outer.n_edges},)")
    if B0 is not None and B0.shape != (domain.outer.n_faces,):
        raise ValueError(f"B0 has shape {B0.shape}, expected ({domain.outer.n_faces},)")


def covariant_operator(domain: GLDomain, A: np.ndarray, params: GLParams) -> sp.csr_matrix:
    return build_covariant_square(domain.inner, restrict_edges(A, domain), params.rho)


def gl_energy_terms(domain: GLDomain, phi, A, B0, params: GLParams) -> dict:
    phi = np.asarray(phi, dtype=complex)
    A = np.asarray(A, dtype=float)
    B0 = np.asarray(B0, dtype=float)
    _finite(phi, A, B0)
    _check_gl(domain, phi, A, B0)
    w = domain.inner.cell_volume
    d = domain.spacing
    U = link_phases(domain.inner, restrict_edges(A, domain), params.rho)
    t, h = edge_endpoints(domain.inner)
    p = phi.ravel()
    kin = 0.5 * params.gamma * w * np.sum(np.abs(U * p[h] - p[t]) ** 2) / d**2
    cond = 0.5 * params.alpha * w * np.sum((np.abs(p) ** 2 - params.beta) ** 2)
    curl = build_curl(domain.outer)
    mag = params.K0 * w * np.sum((curl @ A - B0) ** 2)
    return {"kinetic": float(kin), "condensation": float(cond), "magnetic": float(mag)}


def gl_energy(domain: GLDomain, phi, A, B0, params: GLParams) -> float:
    """gamma/2 |(grad - i rho A) phi|^2 + alpha/2 (|phi|^2 - beta)^2 + K0 |curl A - B0|^2."""
    return sum(gl_energy_terms(domain, phi, A, B0, params).values())


def gl_residual_phi(domain: GLDomain, phi, A, params: GLParams, L=None) -> np.ndarray:
    """gamma |grad - i rho A|^2 phi + 2 alpha (|phi|^2 - beta) phi."""
    phi = np.asarray(phi, dtype=complex)
    A = np.asarray(A, dtype=float)
    _check_gl(domain, phi, A)
    if L is None:
        L = covariant_operator(domain, A, params)
    p = phi.ravel()
    r = params.gamma * (L @ p) + 2 * params.alpha * (np.abs(p) ** 2 - params.beta) * p
    return r.reshape(phi.shape)


def compute_supercurrent(domain: GLDomain, phi, A, params: GLParams) -> np.ndarray:
    """Current on the sample links, zero elsewhere (outer edge vector).

    J_e = gamma rho Im(conj(phi_tail) U_e phi_head) / d, which is minus the
    derivative of the kinetic energy with respect to A_e per unit volume.
    Continuum limit: gamma rho Im(conj(phi) grad phi) - gamma rho^2 |phi|^2 A.
    """
    phi = np.asarray(phi, dtype=complex)
    A = np.asarray(A, dtype=float)
    _check_gl(domain, phi, A)
    U = link_phases(domain.inner, restrict_edges(A, domain), params.rho)
    t, h = edge_endpoints(domain.inner)
    p = phi.ravel()
    J = params.gamma * params.rho * np.imag(np.conj(p[t]) * U * p[h]) / domain.spacing
    return extend_edges_by_zero(J, domain)


def gl_residual_A(domain: GLDomain, phi, A, B0, params: GLParams, curl=None) -> np.ndarray:
    """2 K0 curl^T (curl A - B0) - J on edges."""
    A = np.asarray(A, dtype=float)
    B0 = np.asarray(B0, dtype=float)
    _check_gl(domain, np.asarray(phi), A, B0)
    if curl is None:
        curl = build_curl(domain.outer)
    return 2 * params.K0 * (curl.T @ (curl @ A - B0)) - compute_supercurrent(domain, phi, A, params)


def gl_phi_hessian(domain: GLDomain, phi, A, params: GLParams) -> sp.csr_matrix:
    """Second variation in phi as a real symmetric matrix on (Re phi, Im phi)."""
    p = np.asarray(phi, dtype=complex).ravel()
    L = covariant_operator(domain, A, params)
    M = params.gamma * L + sp.diags(2 * params.alpha * (np.abs(p) ** 2 - params.beta))
    a, b = p.real, p.imag
    four = 4 * params.alpha
    blocks = [[M.real + sp.diags(four * a * a), -M.imag + sp.diags(four * a * b)],
              [M.imag + sp.diags(four * a * b), M.real + sp.diags(four * b * b)]]
    return sp.bmat(blocks, format="csr")


# ----------------------------------------------------------------------------
# scalar model on a Dirichlet box


def scalar_energy(grid: BoxGrid, u, f, params: GLParams, L=None) -> float:
    """gamma/2 |grad u|^2 + alpha/2 (u^2 - beta)^2 - <u, f>, u = 0 on the boundary."""
    u = np.asarray(u, dtype=float).ravel()
    f = np.asarray(f, dtype=float).ravel()
    _finite(u, f)
    if L is None:
        L = build_laplacian(grid, "dirichlet")
    if u.size != L.shape[0] or f.size != u.size:
        raise ValueError("u and f must live on the interior nodes of the grid")
    w = grid.cell_volume
    return float(w * (0.5 * params.gamma * u @ (L @ u)
                      + 0.5 * params.alpha * np.sum((u**2 - params.beta) ** 2)
                      - u @ f))


def scalar_residual(grid: BoxGrid, u, f, params: GLParams, L=None) -> np.ndarray:
    """-gamma lap u + 2 alpha (u^2 - beta) u - f."""
    u = np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    if L is None:
        L = build_laplacian(grid, "dirichlet")
    uf = u.ravel()
    r = params.gamma * (L @ uf) + 2 * params.alpha * (uf**2 - params.beta) * uf - f.ravel()
    return r.reshape(u.shape)


def scalar_second_variation(grid: BoxGrid, u, params: GLParams, L=None) -> sp.csr_matrix:
    """-gamma lap + 6 alpha u^2 - 2 alpha beta."""
    if L is None:
        L = build_laplacian(grid, "dirichlet")
    uf = np.asarray(u, dtype=float).ravel()
    return (params.gamma * L + sp.diags(6 * params.alpha * uf**2 - 2 * params.alpha * params.beta)).tocsr()


def newton_scalar(grid: BoxGrid, f, params: GLParams, u0=None, tol: float = 1e-12, max_iter: int = 100):
    """Damped Newton iteration for a critical point of ``scalar_energy``."""
    L = build_laplacian(grid, "dirichlet")
    f = np.asarray(f, dtype=float)
    u = np.zeros(grid.interior_shape()) if u0 is None else np.array(u0, dtype=float)
    for _ in range(max_iter):
        r = scalar_residual(grid, u, f, params, L)
        if np.abs(r).max() <= tol:
            break
        H = scalar_second_variation(grid, u, params, L)
        step = spla.spsolve(H.tocsc(), -r.ravel()).reshape(u.shape)
        e0 = scalar_energy(grid, u, f, params, L)
        t = 1.0
        while t > 1e-8:
            trial = u + t * step
            if scalar_energy(grid, trial, f, params, L) <= e0 + 1e-14 * (1 + abs(e0)):
                break
            t *= 0.5
        u = u + t * step
    return u
