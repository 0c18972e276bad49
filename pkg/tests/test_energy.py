import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_phi
from glduality.energy import (
    compute_supercurrent, gl_energy, gl_energy_terms, gl_phi_hessian, gl_residual_A, gl_residual_phi,
    newton_scalar, scalar_energy, scalar_residual, scalar_second_variation,
)
from glduality.fields import GLParams, applied_field, envelope, extend_edges_by_zero, field_norms
from glduality.grid import BoxGrid, GLDomain, build_gradient


def loop_energy(dom, phi, A, B0, p):
    """Independent triple-loop evaluation of the discrete GL energy."""
    g = dom.inner
    d = g.spacing
    n = g.shape[0]
    Ain = [c for c in g.split_edges(A[dom.inner_edge_index])]
    kin = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for a, (di, dj, dk) in enumerate(((1, 0, 0), (0, 1, 0), (0, 0, 1))):
                    i2, j2, k2 = i + di, j + dj, k + dk
                    if max(i2, j2, k2) >= n:
                        continue
                    U = np.exp(-1j * p.rho * d * Ain[a][i, j, k])
                    kin += abs(U * phi[i2, j2, k2] - phi[i, j, k]) ** 2 / d**2
    cond = np.sum((np.abs(phi) ** 2 - p.beta) ** 2)
    from glduality.grid import build_curl
    mag = np.sum((build_curl(dom.outer) @ A - B0) ** 2)
    w = d**3
    return w * (0.5 * p.gamma * kin + 0.5 * p.alpha * cond) + p.K0 * w * mag


def test_energy_matches_loop_oracle(small_domain, rng):
    dom = small_domain
    p = GLParams(gamma=0.7, alpha=1.3, beta=0.8, rho=1.7, K0=0.6)
    phi = random_phi(rng, dom.inner.shape)
    A = rng.standard_normal(dom.outer.n_edges)
    B0 = rng.standard_normal(dom.outer.n_faces)
    assert gl_energy(dom, phi, A, B0, p) == pytest.approx(loop_energy(dom, phi, A, B0, p), rel=1e-12)


def test_uniform_state_has_zero_energy(small_domain, params):
    dom = small_domain
    phi = np.ones(dom.inner.shape, complex)
    t = gl_energy_terms(dom, phi, np.zeros(dom.outer.n_edges), np.zeros(dom.outer.n_faces), params)
    assert t == {"kinetic": 0.0, "condensation": 0.0, "magnetic": 0.0}
    r = gl_residual_phi(dom, phi, np.zeros(dom.outer.n_edges), params)
    assert np.abs(r).max() == 0


def test_energy_gauge_invariant(small_domain, rng):
    dom = small_domain
    p = GLParams(rho=1.4)
    phi = random_phi(rng, dom.inner.shape)
    A = rng.standard_normal(dom.outer.n_edges)
    B0 = rng.standard_normal(dom.outer.n_faces)
    chi = rng.standard_normal(dom.outer.shape)
    A2 = A + build_gradient(dom.outer) @ chi.ravel()
    phi2 = phi * np.exp(1j * p.rho * chi[dom.inner_slice])
    assert gl_energy(dom, phi2, A2, B0, p) == pytest.approx(gl_energy(dom, phi, A, B0, p), rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_residuals_are_gradients(seed):
    rng = np.random.default_rng(seed)
    dom = GLDomain.build(cells=3, pad=1)
    p = GLParams(gamma=0.9, alpha=1.1, beta=0.7, rho=1.2, K0=0.8)
    phi = random_phi(rng, dom.inner.shape)
    A = rng.standard_normal(dom.outer.n_edges)
    B0 = rng.standard_normal(dom.outer.n_faces)
    w = dom.inner.cell_volume
    h = 1e-6
    dphi = random_phi(rng, phi.shape)
    dA = rng.standard_normal(A.shape)
    fd = (gl_energy(dom, phi + h * dphi, A, B0, p) - gl_energy(dom, phi - h * dphi, A, B0, p)) / (2 * h)
    an = w * np.real(np.vdot(gl_residual_phi(dom, phi, A, p), dphi))
    assert fd == pytest.approx(an, rel=1e-6, abs=1e-9)
    fd = (gl_energy(dom, phi, A + h * dA, B0, p) - gl_energy(dom, phi, A - h * dA, B0, p)) / (2 * h)
    an = w * gl_residual_A(dom, phi, A, B0, p) @ dA
    assert fd == pytest.approx(an, rel=1e-6, abs=1e-9)


def test_phi_hessian_is_jacobian_of_residual(small_domain, rng):
    dom = small_domain
    p = GLParams(rho=0.9)
    phi = random_phi(rng, dom.inner.shape)
    A = rng.standard_normal(dom.outer.n_edges)
    H = gl_phi_hessian(dom, phi, A, p)
    assert abs(H - H.T).max() < 1e-10
    dphi = random_phi(rng, phi.shape)
    h = 1e-6
    dr = ((gl_residual_phi(dom, phi + h * dphi, A, p) - gl_residual_phi(dom, phi - h * dphi, A, p)) / (2 * h)).ravel()
    x = np.concatenate([dphi.real.ravel(), dphi.imag.ravel()])
    assert np.allclose(H @ x, np.concatenate([dr.real, dr.imag]), atol=1e-6)


def test_plane_wave_current():
    # phi = exp(i k x) with A = 0 carries current gamma rho sin(k d)/d along x
    dom = GLDomain.build(cells=6, pad=1)
    p = GLParams(gamma=1.5, rho=0.5)
    k = 2.0
    x = dom.inner.mesh()[0]
    J = compute_supercurrent(dom, np.exp(1j * k * x), np.zeros(dom.outer.n_edges), p)
    Jin = dom.inner.split_edges(J[dom.inner_edge_index])
    d = dom.spacing
    assert np.allclose(Jin[0], p.gamma * p.rho * np.sin(k * d) / d)
    assert np.allclose(Jin[1], 0) and np.allclose(Jin[2], 0)
    outside = np.ones(dom.outer.n_edges, bool)
    outside[dom.inner_edge_index] = False
    assert np.all(J[outside] == 0)


def test_current_vanishes_for_real_field(small_domain, rng):
    dom = small_domain
    J = compute_supercurrent(dom, rng.standard_normal(dom.inner.shape) + 0j,
                             np.zeros(dom.outer.n_edges), GLParams())
    assert np.abs(J).max() == 0


def test_shape_and_finiteness_checks(small_domain, params):
    dom = small_domain
    with pytest.raises(ValueError):
        gl_energy(dom, np.ones((2, 2, 2)), np.zeros(dom.outer.n_edges), np.zeros(dom.outer.n_faces), params)
    phi = np.ones(dom.inner.shape, complex)
    phi[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        gl_energy(dom, phi, np.zeros(dom.outer.n_edges), np.zeros(dom.outer.n_faces), params)


# scalar model

def scalar_loop_energy(u, f, p, d):
    full = np.concatenate([[0.0], u, [0.0]])
    grad = np.sum(np.diff(full) ** 2) / d**2
    return d * (0.5 * p.gamma * grad + 0.5 * p.alpha * np.sum((u**2 - p.beta) ** 2) - np.sum(u * f))


def test_scalar_energy_loop_oracle(rng):
    g = BoxGrid.unit_interval_interior(9)
    p = GLParams(gamma=0.5, alpha=2.0, beta=0.3)
    u, f = rng.standard_normal(9), rng.standard_normal(9)
    assert scalar_energy(g, u, f, p) == pytest.approx(scalar_loop_energy(u, f, p, g.spacing), rel=1e-13)


def test_scalar_zero_state_value(params):
    g = BoxGrid.unit_interval_interior(31)
    assert scalar_energy(g, np.zeros(31), np.zeros(31), params) == pytest.approx(0.5 * 31 / 32)


def test_scalar_residual_and_hessian_fd(rng):
    g = BoxGrid.unit_interval_interior(31)
    p = GLParams()
    u, f, h_dir = rng.standard_normal(31), rng.standard_normal(31), rng.standard_normal(31)
    h = 1e-6
    fd = (scalar_energy(g, u + h * h_dir, f, p) - scalar_energy(g, u - h * h_dir, f, p)) / (2 * h)
    assert fd == pytest.approx(g.cell_volume * scalar_residual(g, u, f, p) @ h_dir, rel=1e-7)
    dr = (scalar_residual(g, u + h * h_dir, f, p) - scalar_residual(g, u - h * h_dir, f, p)) / (2 * h)
    assert np.allclose(scalar_second_variation(g, u, p) @ h_dir, dr, atol=1e-5)


def test_newton_scalar_converges():
    g = BoxGrid.unit_interval_interior(31)
    x = g.coords(0)[1:-1]
    f = 0.1 * np.sin(np.pi * x)
    u = newton_scalar(g, f, GLParams())
    assert np.abs(scalar_residual(g, u, f, GLParams())).max() < 1e-9


def test_envelope_values():
    assert envelope(0.0, 0.0, 0.0) == pytest.approx(27 / 512)
    for c in (1.5, -1.5):
        assert envelope(c, 0.3, 0.2) == 0 and envelope(0.1, c, 0.2) == 0


def test_applied_field_direction():
    g = BoxGrid.cube(0.5, 4)
    B = g.split_faces(applied_field(g, 0.008))
    assert np.all(B[2] == 0) and B[0].max() > 0
    assert np.allclose(B[0], 0.008 * envelope(*g.face_centers(0)))


def test_field_norms_constant():
    n = field_norms(np.full((3, 3), 2.0), 0.5)
    assert n["sup"] == 2 and n["L2"] == pytest.approx(np.sqrt(9 * 4 * 0.5))
    with pytest.raises(ValueError):
        field_norms(np.array([np.inf]), 1.0)


def test_extend_edges_by_zero_roundtrip(small_domain, rng):
    v = rng.standard_normal(small_domain.inner.n_edges)
    full = extend_edges_by_zero(v, small_domain)
    assert np.array_equal(full[small_domain.inner_edge_index], v)
    assert np.count_nonzero(full) == np.count_nonzero(v)
