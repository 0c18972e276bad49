"""Alternating fixed-point loop between the line solver and the potential solve."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .energy import (
    compute_supercurrent,
    gl_energy,
    gl_phi_hessian,
    gl_residual_A,
    gl_residual_phi,
)
from .fields import GLParams, restrict_edges
from .grid import GLDomain
from .magnetostatics import MagnetostaticSolver
from .mol import FrozenCoefficients, mol_solve

TOLERANCE_MET = "tolerance-met"
MAX_ITERS = "max-iters"
DIVERGED = "diverged"


@dataclass
class IterationReport:
    energy: list = field(default_factory=list)
    change_phi: list = field(default_factory=list)
    change_A: list = field(default_factory=list)
    residual_phi: list = field(default_factory=list)
    residual_A: list = field(default_factory=list)
    divergence_A: list = field(default_factory=list)
    wall_time: list = field(default_factory=list, compare=False)
    reason: str = ""
    refine_steps: int = 0

    @property
    def iterations(self) -> int:
        return len(self.change_phi)

    @property
    def converged(self) -> bool:
        return self.reason == TOLERANCE_MET

    def as_dict(self) -> dict:
        d = asdict(self)
        d["iterations"] = self.iterations
        return d


def default_start(params: GLParams, domain: GLDomain, seed: int | None = None, noise: float = 0.0):
    """``phi = sqrt(beta)``, ``A = 0``; with ``noise > 0`` a seeded complex perturbation."""
    phi = np.full(domain.inner.shape, np.sqrt(params.beta), dtype=complex)
    if noise > 0:
        rng = np.random.default_rng(seed)
        phi = phi + noise * (rng.standard_normal(phi.shape) + 1j * rng.standard_normal(phi.shape))
    return phi, np.zeros(domain.outer.n_edges)


class GLSolver:
    """Shared operators for repeated solves on one domain."""

    def __init__(self, domain: GLDomain, axis: int = 0):
        self.domain = domain
        self.axis = axis
        self.magnet = MagnetostaticSolver(domain.outer)

    def residuals(self, phi, A, B0, params):
        rp = gl_residual_phi(self.domain, phi, A, params)
        ra = gl_residual_A(self.domain, phi, A, B0, params, curl=self.magnet.C)
        return float(np.abs(rp).max()), float(np.abs(ra).max())

    def update_A(self, phi, A, B0, params):
        J = compute_supercurrent(self.domain, phi, A, params)
        return self.magnet.solve(B0, J, params)[0]

    def run(self, phi0, A0, B0, params: GLParams, refine: bool = False, refine_tol: float = 1e-10):
        """Iterate until the joint sup-norm change drops below ``params.tol``."""
        dom = self.domain
        phi = np.array(phi0, dtype=complex)
        A = np.array(A0, dtype=float)
        B0 = np.asarray(B0, dtype=float)
        if phi.shape != dom.inner.shape or A.shape != (dom.outer.n_edges,) or B0.shape != (dom.outer.n_faces,):
            raise ValueError("start fields do not match the domain")
        rep = IterationReport()
        e0 = gl_energy(dom, phi, A, B0, params)
        limit = 10.0 * abs(e0) + 1.0
        t0 = time.perf_counter()
        rep.reason = MAX_ITERS
        for _ in range(params.max_iter):
            new = mol_solve(dom.inner, FrozenCoefficients(phi, restrict_edges(A, dom)), params, self.axis).phi
            if params.damping < 1:
                new = (1 - params.damping) * phi + params.damping * new
            A_new = self.update_A(new, A, B0, params)
            dphi = float(np.abs(new - phi).max())
            dA = float(np.abs(A_new - A).max())
            phi, A = new, A_new
            finite = np.all(np.isfinite(phi)) and np.all(np.isfinite(A))
            e = gl_energy(dom, phi, A, B0, params) if finite else float("nan")
            rp, ra = self.residuals(phi, A, B0, params) if finite else (float("nan"),) * 2
            rep.energy.append(e)
            rep.change_phi.append(dphi)
            rep.change_A.append(dA)
            rep.residual_phi.append(rp)
            rep.residual_A.append(ra)
            rep.divergence_A.append(float(np.abs(self.magnet.divergence(A)).max()) if finite else float("nan"))
            rep.wall_time.append(time.perf_counter() - t0)
            if not finite or e > limit:
                rep.reason = DIVERGED
                break
            if max(dphi, dA) <= params.tol:
                rep.reason = TOLERANCE_MET
                break
        if refine and rep.reason != DIVERGED:
            phi, A, steps = self.refine(phi, A, B0, params, tol=refine_tol)
            rep.refine_steps = steps
            rp, ra = self.residuals(phi, A, B0, params)
            rep.residual_phi.append(rp)
            rep.residual_A.append(ra)
            rep.energy.append(gl_energy(dom, phi, A, B0, params))
        return phi, A, rep

    def newton_phi(self, phi, A, params, tol=1e-11, max_iter=20):
        """Newton on the discrete phi-equation with A held fixed."""
        dom = self.domain
        n = phi.size
        for _ in range(max_iter):
            r = gl_residual_phi(dom, phi, A, params).ravel()
            if np.abs(r).max() <= tol:
                break
            H = gl_phi_hessian(dom, phi, A, params)
            # global phase rotation is a symmetry; lift its zero mode
            v = np.concatenate([-phi.imag.ravel(), phi.real.ravel()])
            v /= np.linalg.norm(v)
            op = spla.LinearOperator(H.shape, matvec=lambda x: H @ x + v * (v @ x), dtype=float)
            rhs = -np.concatenate([r.real, r.imag])
            step, info = spla.cg(op, rhs, rtol=1e-13, atol=0.0, maxiter=20 * n)
            phi = phi + (step[:n] + 1j * step[n:]).reshape(phi.shape)
        return phi

    def refine(self, phi, A, B0, params, tol=1e-10, max_iter=50):
        """Alternate Newton in phi and the A solve until both residuals are small."""
        for k in range(1, max_iter + 1):
            phi = self.newton_phi(phi, A, params, tol=0.1 * tol)
            A = self.update_A(phi, A, B0, params)
            rp, ra = self.residuals(phi, A, B0, params)
            if max(rp, ra) <= tol:
                return phi, A, k
        return phi, A, max_iter


def run(phi0, A0, B0, params: GLParams, domain: GLDomain, axis: int = 0, refine: bool = False):
    return GLSolver(domain, axis).run(phi0, A0, B0, params, refine=refine)
