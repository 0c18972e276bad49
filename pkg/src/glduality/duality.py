"""Dual functionals, multiplier candidates and certificates.

The primal energies split as ``J = F - G`` with

    F(u) = 1/2 <(gamma L + K) u, u>                (convex, nonlocal)
    G(u) = K/2 |u|^2 - alpha/2 (|u|^2 - beta)^2 + <u, f>   (local)

and the dual is ``J*(v1, v0) = -F*(v1) + G*(v1, v0)`` where the double well is
replaced by its quadratic representation through ``v0``.  At a critical point
``u0`` the multipliers ``v0 = alpha (|u0|^2 - beta)`` and ``v1 = (gamma L + K) u0``
give ``J*(v1, v0) = J(u0)``.

All pairings carry the cell volume ``w`` so values match the primal energies.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import optimize

from .energy import (
    covariant_operator,
    gl_energy,
    gl_phi_hessian,
    gl_residual_A,
    gl_residual_phi,
    scalar_energy,
    scalar_residual,
    scalar_second_variation,
)
from .fields import GLParams
from .grid import BoxGrid, GLDomain, build_curl, build_gradient, build_laplacian


class CertificateError(ValueError):
    """A precondition of the certificate is not met."""


class GuardError(ValueError):
    """Multiplier outside the region where the dual is defined."""


@dataclass
class DualCertificate:
    v1: np.ndarray = field(repr=False)
    v0: np.ndarray = field(repr=False)
    primal: float
    dual: float
    gap: float
    stationarity_v1: float
    stationarity_v0: float
    e_box: bool
    a_plus: bool | None
    b_plus: bool
    b_plus_min_eig: float
    K: float
    K2: float
    bounds_hold: bool
    residual: float
    v1_agreement: float | None = None
    dual_hessian_min_eig: float | None = None
    fd_coordinates: int = 0

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("v1")
        d.pop("v0")
        return d


def _guard(v0, K):
    den = K - 2.0 * np.asarray(v0)
    bad = np.flatnonzero(~(den > 0))
    if bad.size:
        raise GuardError(f"K - 2 v0 <= 0 at node {int(bad[0])}")
    return den


def e_box(v0, K) -> bool:
    """Pointwise ``-2 v0 + K > K/2``."""
    return bool(np.all(-2.0 * np.asarray(v0) + K > 0.5 * K))


def resolve_K(params: GLParams, sup_u: float, K=None) -> tuple[float, float]:
    K2 = params.amplitude_bound(sup_u)
    if K is None:
        K = params.dc_shift(sup_u)
    return float(K), float(K2)


# ----------------------------------------------------------------------------
# scalar model


class ScalarDual:
    """Dual of the Dirichlet scalar model for a fixed shift ``K``."""

    def __init__(self, grid: BoxGrid, f, params: GLParams, K: float):
        if not K > 0:
            raise ValueError("K must be positive")
        self.grid = grid
        self.params = params
        self.K = float(K)
        self.L = build_laplacian(grid, "dirichlet")
        self.f = np.asarray(f, dtype=float).ravel()
        self.w = grid.cell_volume
        self.P = (params.gamma * self.L + self.K * sp.identity(self.L.shape[0])).tocsc()
        self._lu = spla.splu(self.P)

    def F_star(self, v1) -> float:
        v1 = np.asarray(v1, dtype=float).ravel()
        return 0.5 * self.w * float(v1 @ self._lu.solve(v1))

    def G_star(self, v1, v0) -> float:
        v1 = np.asarray(v1, dtype=float).ravel()
        v0 = np.asarray(v0, dtype=float).ravel()
        den = _guard(v0, self.K)
        a = self.params.alpha
        return self.w * float(0.5 * np.sum((v1 - self.f) ** 2 / den)
                              - np.sum(v0**2) / (2 * a) - self.params.beta * np.sum(v0))

    def __call__(self, v1, v0) -> float:
        return -self.F_star(v1) + self.G_star(v1, v0)

    def multipliers(self, u0):
        u = np.asarray(u0, dtype=float).ravel()
        v0 = self.params.alpha * (u**2 - self.params.beta)
        v1 = self.P @ u
        v1_alt = (self.K - 2 * v0) * u + self.f
        return v1, v0, v1_alt


def scalar_F_star(grid: BoxGrid, v1, params: GLParams, K: float) -> float:
    return ScalarDual(grid, np.zeros(np.asarray(v1).size), params, K).F_star(v1)


def scalar_G_star(grid: BoxGrid, v1, v0, f, params: GLParams, K: float) -> float:
    return ScalarDual(grid, f, params, K).G_star(v1, v0)


def scalar_dual(grid: BoxGrid, v1, v0, f, params: GLParams, K: float) -> float:
    return ScalarDual(grid, f, params, K)(v1, v0)


def fd_gradient_norm(fun, x, w, h=1e-5, coords=None) -> float:
    """Weighted L2 norm of the central-difference gradient of ``fun`` at ``x``.

    Per-coordinate derivatives are divided by ``w`` so the result estimates the
    continuous L2 norm of the variational derivative.
    """
    x = np.array(x, dtype=float)
    idx = range(x.size) if coords is None else coords
    acc = 0.0
    for j in idx:
        old = x[j]
        x[j] = old + h
        fp = fun(x)
        x[j] = old - h
        fm = fun(x)
        x[j] = old
        g = (fp - fm) / (2 * h * w)
        acc += g * g * w
    return float(np.sqrt(acc))


def _fd_coords(n, limit, seed=0):
    if limit is None or n <= limit:
        return None
    return np.sort(np.random.default_rng(seed).choice(n, size=limit, replace=False))


def _n_coords(n, limit):
    return n if limit is None else min(n, limit)


def min_eigenvalue(M, deflate=None, dense_limit: int = 1000) -> float:
    """Smallest eigenvalue of a symmetric matrix, optionally on the complement of ``deflate``."""
    n = M.shape[0]
    if n <= dense_limit:
        D = M.toarray() if sp.issparse(M) else np.asarray(M)
        if deflate is not None:
            B = sla.null_space(np.atleast_2d(deflate))
            D = B.T @ D @ B
        return float(np.linalg.eigvalsh(0.5 * (D + D.T))[0])
    X = np.random.default_rng(0).standard_normal((n, 1))
    Y = None if deflate is None else np.atleast_2d(deflate).T
    vals, _ = spla.lobpcg(M, X, Y=Y, largest=False, tol=1e-9, maxiter=2000)
    return float(vals[0])


def sign_align(u, f) -> np.ndarray:
    """Flip ``u`` where ``u f < 0``; keeps ``|u|`` and never raises the scalar energy."""
    u = np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    return np.where(u * f >= 0, u, -u)


def scalar_H(grid: BoxGrid, u, params: GLParams) -> dict:
    """Diagnostic split of the second variation into a pointwise and an operator part.

    ``surrogate_holds`` is the sufficient condition
    ``6 alpha min u^2 + gamma lambda_min(L) - 2 alpha beta >= 0``.
    """
    L = build_laplacian(grid, "dirichlet")
    lam = min_eigenvalue(L)
    u = np.asarray(u, dtype=float)
    pointwise = np.sqrt(6 * params.alpha) * np.abs(u)
    op = np.sqrt(max(2 * params.alpha * params.beta - params.gamma * lam, 0.0))
    return {
        "pointwise": pointwise,
        "operator": float(op),
        "surrogate_holds": bool(pointwise.min() ** 2 >= op**2),
    }


def certify_scalar(grid: BoxGrid, u0, f, params: GLParams, K=None, residual_tol: float = 1e-9,
                   fd_step: float = 1e-5, fd_limit: int | None = 4000) -> DualCertificate:
    u = np.asarray(u0, dtype=float).ravel()
    f = np.asarray(f, dtype=float).ravel()
    res = float(np.abs(scalar_residual(grid, u, f, params)).max())
    if res > residual_tol:
        raise CertificateError(f"u0 is not critical: residual {res:.3e} > {residual_tol:.1e}")
    K, K2 = resolve_K(params, float(np.abs(u).max(initial=0.0)), K)
    dual = ScalarDual(grid, f, params, K)
    v1, v0, v1_alt = dual.multipliers(u)
    J = scalar_energy(grid, u, f, params)
    Js = dual(v1, v0)
    n = u.size
    w = grid.cell_volume
    s1 = fd_gradient_norm(lambda x: dual(x, v0), v1, w, fd_step, _fd_coords(n, fd_limit))
    s0 = fd_gradient_norm(lambda x: dual(v1, x), v0, w, fd_step, _fd_coords(n, fd_limit, 1))
    lam = min_eigenvalue(scalar_second_variation(grid, u, params))
    return DualCertificate(
        v1=v1, v0=v0, primal=J, dual=Js, gap=abs(J - Js),
        stationarity_v1=s1, stationarity_v0=s0,
        e_box=e_box(v0, K), a_plus=bool(np.all(u * f >= 0)),
        b_plus=lam >= -1e-9, b_plus_min_eig=lam,
        K=K, K2=K2, bounds_hold=params.dc_bounds_hold(K, K2), residual=res,
        v1_agreement=float(np.abs(v1 - v1_alt).max()), fd_coordinates=2 * _n_coords(n, fd_limit),
    )


# ----------------------------------------------------------------------------
# full Ginzburg-Landau model


def _to_real(z):
    z = np.asarray(z).ravel()
    return np.concatenate([z.real, z.imag])


def _to_complex(x):
    n = x.size // 2
    return x[:n] + 1j * x[n:]


class GLDual:
    """Dual of the Ginzburg-Landau energy at fixed vector potential."""

    def __init__(self, domain: GLDomain, A, B0, params: GLParams, K: float):
        if not K > 0:
            raise ValueError("K must be positive")
        self.domain = domain
        self.params = params
        self.K = float(K)
        self.A = np.asarray(A, dtype=float)
        self.B0 = np.asarray(B0, dtype=float)
        self.w = domain.inner.cell_volume
        L = covariant_operator(domain, self.A, params)
        self.P = (params.gamma * L + self.K * sp.identity(L.shape[0])).tocsc()
        self._lu = spla.splu(self.P)
        C = build_curl(domain.outer)
        self.magnetic = params.K0 * self.w * float(np.sum((C @ self.A - self.B0) ** 2))

    def F_star(self, v1) -> float:
        v1 = np.asarray(v1, dtype=complex).ravel()
        return 0.5 * self.w * float(np.real(np.vdot(v1, self._lu.solve(v1))))

    def G_star(self, v1, v0) -> float:
        v1 = np.asarray(v1, dtype=complex).ravel()
        v0 = np.asarray(v0, dtype=float).ravel()
        den = _guard(v0, self.K)
        a = self.params.alpha
        return self.w * float(0.5 * np.sum(np.abs(v1) ** 2 / den)
                              - np.sum(v0**2) / (2 * a) - self.params.beta * np.sum(v0)) + self.magnetic

    def __call__(self, v1, v0) -> float:
        return -self.F_star(v1) + self.G_star(v1, v0)

    def multipliers(self, phi0):
        p = np.asarray(phi0, dtype=complex).ravel()
        v0 = self.params.alpha * (np.abs(p) ** 2 - self.params.beta)
        v1 = (2 * v0 - self.K) * p
        return v1, v0

    def hessian_v1(self, v1, v0) -> np.ndarray:
        """Dense Hessian in ``v1`` (real coordinates) with ``v0`` eliminated, per unit volume."""
        v1 = np.asarray(v1, dtype=complex).ravel()
        v0 = np.asarray(v0, dtype=float).ravel()
        n = v1.size
        k = _guard(v0, self.K)
        Pinv = np.linalg.inv(self.P.toarray())
        R = np.block([[Pinv.real, -Pinv.imag], [Pinv.imag, Pinv.real]])
        J11 = -R + np.diag(np.concatenate([1 / k, 1 / k]))
        x = _to_real(v1)
        kk = np.concatenate([k, k])
        J10 = np.zeros((2 * n, n))
        J10[np.arange(2 * n), np.tile(np.arange(n), 2)] = 2 * x / kk**2
        J00 = 4 * np.abs(v1) ** 2 / k**3 - 1 / self.params.alpha
        return J11 - (J10 / J00) @ J10.T


def gl_F_star(domain: GLDomain, v1, A, params: GLParams, K: float) -> float:
    return GLDual(domain, A, np.zeros(domain.outer.n_faces), params, K).F_star(v1)


def gl_dual(domain: GLDomain, v1, v0, A, B0, params: GLParams, K: float) -> float:
    return GLDual(domain, A, B0, params, K)(v1, v0)


def certify_gl(domain: GLDomain, phi0, A0, B0, params: GLParams, K=None, residual_tol: float = 1e-6,
               fd_step: float = 1e-5, fd_limit: int | None = 3000, hessian_limit: int = 400) -> DualCertificate:
    """Certificate at a computed critical point ``(phi0, A0)``.

    The dual Hessian and the second variation are evaluated on the complement
    of the global phase direction, which is a zero mode of both.
    """
    phi = np.asarray(phi0, dtype=complex)
    A0 = np.asarray(A0, dtype=float)
    B0 = np.asarray(B0, dtype=float)
    rp = float(np.abs(gl_residual_phi(domain, phi, A0, params)).max())
    ra = float(np.abs(gl_residual_A(domain, phi, A0, B0, params)).max())
    res = max(rp, ra)
    if res > residual_tol:
        raise CertificateError(f"(phi0, A0) is not critical: residual {res:.3e} > {residual_tol:.1e}")
    sup = float(np.abs(phi).max())
    K, K2 = resolve_K(params, sup, K)
    if sup > K2:
        raise CertificateError(f"|phi0| = {sup:.4g} exceeds the amplitude bound {K2:.4g}")
    dual = GLDual(domain, A0, B0, params, K)
    v1, v0 = dual.multipliers(phi)
    J = gl_energy(domain, phi, A0, B0, params)
    Js = dual(v1, v0)
    n = v0.size
    w = dual.w
    s1 = fd_gradient_norm(lambda x: dual(_to_complex(x), v0), _to_real(v1), w, fd_step,
                          _fd_coords(2 * n, fd_limit))
    s0 = fd_gradient_norm(lambda x: dual(v1, x), v0, w, fd_step, _fd_coords(n, fd_limit, 1))
    phase = _to_real(1j * phi.ravel())
    lam = min_eigenvalue(gl_phi_hessian(domain, phi, A0, params), deflate=phase)
    hmin = None
    if n <= hessian_limit:
        hmin = min_eigenvalue(dual.hessian_v1(v1, v0), deflate=_to_real(1j * v1))
    return DualCertificate(
        v1=v1, v0=v0, primal=J, dual=Js, gap=abs(J - Js),
        stationarity_v1=s1, stationarity_v0=s0,
        e_box=e_box(v0, K), a_plus=None,
        b_plus=lam >= -1e-9, b_plus_min_eig=lam,
        K=K, K2=K2, bounds_hold=params.dc_bounds_hold(K, K2), residual=res,
        dual_hessian_min_eig=hmin, fd_coordinates=_n_coords(2 * n, fd_limit) + _n_coords(n, fd_limit),
    )


# ----------------------------------------------------------------------------
# difference-of-convex layer for the scalar model


def double_well_conjugate(s, alpha: float, beta: float, K: float):
    """``sup_t { t s - alpha/2 (t^2 - beta)^2 - K/2 t^2 }`` pointwise.

    Stationary points solve ``2 alpha t^3 + (K - 2 alpha beta) t = s``.  All
    real roots are found in closed form and the best one is kept.  Returns
    ``(value, argmax)``.
    """
    s = np.asarray(s, dtype=float)
    p = (K - 2 * alpha * beta) / (2 * alpha)
    q = -s / (2 * alpha)
    disc = q * q / 4 + p**3 / 27
    obj = lambda t: t * s - 0.5 * alpha * (t * t - beta) ** 2 - 0.5 * K * t * t
    with np.errstate(invalid="ignore"):
        r = np.sqrt(np.maximum(disc, 0.0))
        one = np.cbrt(-q / 2 + r) + np.cbrt(-q / 2 - r)
        cands = [one]
        if p < 0:
            m = 2 * np.sqrt(-p / 3)
            arg = np.clip(3 * q / (p * m), -1.0, 1.0)
            th = np.arccos(arg) / 3
            three = [m * np.cos(th - 2 * np.pi * k / 3) for k in range(3)]
            cands = [np.where(disc > 0, one, c) for c in three]
    best_t = cands[0]
    best = obj(best_t)
    for c in cands[1:]:
        v = obj(c)
        take = v > best
        best = np.where(take, v, best)
        best_t = np.where(take, c, best_t)
    # two Newton steps on the stationarity equation
    for _ in range(2):
        g = 2 * alpha * best_t**3 + (K - 2 * alpha * beta) * best_t - s
        dg = 6 * alpha * best_t**2 + K - 2 * alpha * beta
        ok = np.abs(dg) > 1e-12
        best_t = np.where(ok, best_t - np.where(ok, g, 0.0) / np.where(ok, dg, 1.0), best_t)
    val = obj(best_t)
    if not np.all(np.isfinite(val)):
        raise ArithmeticError("cubic root finding failed")
    return val, best_t


class DCScalar:
    """Split ``J(u) = G_K(Lambda u) - F_K(Lambda u) - <u, f>`` with ``Lambda u = (u, grad u)``.

    ``G(y) = gamma/2 |y1|^2 + alpha/2 (y0^2 - beta)^2``, ``G_K = G + K/2 |y|^2``
    and ``F_K = K/2 |y|^2``.  ``G_K`` is convex once ``K >= 2 alpha beta``.
    """

    def __init__(self, grid: BoxGrid, f, params: GLParams, K: float):
        self.grid = grid
        self.params = params
        self.K = float(K)
        self.f = np.asarray(f, dtype=float).ravel()
        self.w = grid.cell_volume
        inner = np.flatnonzero(~grid.boundary_mask().ravel())
        self.D = build_gradient(grid)[:, inner].tocsr()

    def Lam(self, u):
        u = np.asarray(u, dtype=float).ravel()
        return u, self.D @ u

    def Lam_adj(self, y0, y1):
        return np.asarray(y0) + self.D.T @ np.asarray(y1)

    def G_K_star(self, v0, v1) -> float:
        p = self.params
        h, _ = double_well_conjugate(v0, p.alpha, p.beta, self.K)
        return self.w * float(np.sum(h) + np.sum(np.asarray(v1) ** 2) / (2 * (p.gamma + self.K)))

    def F_K_star(self, z0, z1) -> float:
        return self.w * float(np.sum(np.asarray(z0) ** 2) + np.sum(np.asarray(z1) ** 2)) / (2 * self.K)

    def __call__(self, u, v, z) -> float:
        u = np.asarray(u, dtype=float).ravel()
        lag = self.Lam_adj(*v) - self.Lam_adj(*z) - self.f
        return -self.G_K_star(*v) + self.F_K_star(*z) + self.w * float(u @ lag)

    def multipliers(self, u0):
        p = self.params
        y0, y1 = self.Lam(u0)
        v = (2 * p.alpha * (y0**2 - p.beta) * y0 + self.K * y0, (p.gamma + self.K) * y1)
        z = (self.K * y0, self.K * y1)
        return v, z


# ----------------------------------------------------------------------------
# multi-start primal search


@dataclass
class PrimalSearch:
    best: float
    point: object = field(repr=False)
    values: list = field(default_factory=list)


def _lbfgs(fun, x0, maxiter):
    r = optimize.minimize(fun, x0, jac=True, method="L-BFGS-B",
                          options={"maxiter": maxiter, "maxcor": 30, "ftol": 1e-15, "gtol": 1e-11})
    return r.fun, r.x


def scalar_multistart(grid: BoxGrid, f, params: GLParams, n_starts: int = 8, seed: int = 0,
                      maxiter: int = 5000) -> PrimalSearch:
    """Best local minimum of the scalar energy over seeded random starts."""
    L = build_laplacian(grid, "dirichlet")
    f = np.asarray(f, dtype=float).ravel()
    w = grid.cell_volume

    def fun(u):
        return scalar_energy(grid, u, f, params, L), w * scalar_residual(grid, u, f, params, L)

    rng = np.random.default_rng(seed)
    n = f.size
    root = np.sqrt(params.beta)
    starts = [np.zeros(n), np.full(n, root), np.full(n, -root)]
    while len(starts) < n_starts:
        starts.append(root * rng.uniform(-1.5, 1.5, size=n))
    vals, best, point = [], np.inf, None
    for x0 in starts[:n_starts]:
        v, x = _lbfgs(fun, x0, maxiter)
        vals.append(float(v))
        if v < best:
            best, point = float(v), x
    return PrimalSearch(best, point, vals)


def gl_multistart(domain: GLDomain, B0, params: GLParams, n_starts: int = 4, seed: int = 0,
                  maxiter: int = 20000) -> PrimalSearch:
    """Best local minimum of the GL energy in ``(phi, A)`` over seeded random starts."""
    B0 = np.asarray(B0, dtype=float)
    n = domain.inner.n_nodes
    w = domain.inner.cell_volume
    shape = domain.inner.shape
    C = build_curl(domain.outer)

    def fun(x):
        phi = (x[:n] + 1j * x[n:2 * n]).reshape(shape)
        A = x[2 * n:]
        rp = gl_residual_phi(domain, phi, A, params).ravel()
        ra = gl_residual_A(domain, phi, A, B0, params, curl=C)
        g = w * np.concatenate([rp.real, rp.imag, ra])
        return gl_energy(domain, phi, A, B0, params), g

    rng = np.random.default_rng(seed)
    root = np.sqrt(params.beta)
    m = domain.outer.n_edges
    vals, best, point = [], np.inf, None
    for k in range(n_starts):
        amp = root * rng.uniform(0.2, 1.5, size=n)
        theta = rng.uniform(0, 2 * np.pi) + (0.3 * rng.standard_normal(n) if k % 2 else 0.0)
        phi = amp * np.exp(1j * theta)
        x0 = np.concatenate([phi.real, phi.imag, 0.01 * rng.standard_normal(m)])
        v, x = _lbfgs(fun, x0, maxiter)
        vals.append(float(v))
        if v < best:
            best, point = float(v), ((x[:n] + 1j * x[n:2 * n]).reshape(shape), x[2 * n:])
    return PrimalSearch(best, point, vals)
