import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.interpolate import lagrange

from adjhydro import fem
from adjhydro.errors import InvertedElement, SolverDiverged


def make(nx=2, ny=2, Lx=1.0, Ly=1.0, p=2):
    return fem.FESpaces(fem.Mesh(nx, ny, Lx, Ly), p)


def distort(spaces, amp=0.05, seed=0):
    rng = np.random.default_rng(seed)
    X = spaces.kin_coords
    m = spaces.mesh
    # smooth interior map that keeps the boundary in place
    bump = np.sin(np.pi * X[:, 0] / m.Lx) * np.sin(np.pi * X[:, 1] / m.Ly)
    return X + amp * np.column_stack([bump, -0.5 * bump]) * (1 + 0.1 * rng.random(len(X)))[:, None]


# -- basis ------------------------------------------------------------------------

@pytest.mark.parametrize("p", [1, 2, 3])
def test_partition_of_unity(p):
    s = make(p=p)
    np.testing.assert_allclose(s.B.sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(s.D.sum(axis=1), 0.0, atol=1e-13)
    np.testing.assert_allclose(s.Bt.sum(axis=1), 1.0, atol=1e-14)


def test_lagrange_matches_scipy_oracle():
    nodes = fem.lobatto_nodes(4)
    xi = np.linspace(0, 1, 7)
    val, der = fem.lagrange_1d(nodes, xi)
    for a in range(4):
        poly = lagrange(nodes, np.eye(4)[a])
        np.testing.assert_allclose(val[:, a], poly(xi), atol=1e-12)
        np.testing.assert_allclose(der[:, a], poly.deriv()(xi), atol=1e-11)


def test_quadrature_exactness():
    x, w = fem.gauss_legendre(4)
    for k in range(8):
        assert w @ x ** k == pytest.approx(1.0 / (k + 1), abs=1e-15)


def test_constant_field_zero_gradient():
    s = make(3, 2)
    x = distort(s)
    u = np.tile([2.5, -1.0], (s.n_kin_nodes, 1))
    for e, q in [(0, 0), (3, 7), (5, 15)]:
        val, grad = s.eval_fields(u, x, e, q)
        np.testing.assert_allclose(val, [2.5, -1.0], atol=1e-14)
        np.testing.assert_allclose(grad, 0.0, atol=1e-13)


@pytest.mark.parametrize("p", [1, 2])
def test_linear_field_gradient_reproduced(p):
    s = make(3, 2, 2.0, 1.0, p)
    A = np.array([[0.3, -1.2], [2.0, 0.7]])
    x = s.kin_coords
    u = x @ A.T
    for e in range(s.n_elements):
        for q in (0, s.n_quad - 1):
            _, grad = s.eval_fields(u, x, e, q)
            np.testing.assert_allclose(grad, A, atol=1e-13)


def test_quadratic_field_reproduced_on_curved_mesh():
    s = make(2, 2)
    x = distort(s)
    u = (x[:, 0] ** 2 + x[:, 0] * x[:, 1])[:, None]  # not exactly representable on curved map
    X = s.kin_coords
    v = (X[:, 0] ** 2 - 3 * X[:, 0] * X[:, 1] + X[:, 1] ** 2)[:, None]
    # on the reference mesh a Q2 field reproduces any quadratic exactly
    val, G = s.kin_interp(v)
    Xq, _ = s.kin_interp(X)
    exact = Xq[..., 0] ** 2 - 3 * Xq[..., 0] * Xq[..., 1] + Xq[..., 1] ** 2
    np.testing.assert_allclose(val[..., 0], exact, atol=1e-13)
    assert np.all(np.isfinite(s.kin_interp(u)[0]))


def test_eval_fields_matches_per_basis_oracle():
    s = make(2, 2)
    rng = np.random.default_rng(3)
    u = rng.normal(size=(s.n_kin_nodes, 2))
    x = distort(s)
    e, q = 2, 5
    xi = s.quad_points[q]
    nodes = s.kin_nodes_1d
    polys = [lagrange(nodes, np.eye(3)[a]) for a in range(3)]
    val = np.zeros(2)
    dref = np.zeros((2, 2))
    jac = np.zeros((2, 2))
    for j in range(3):
        for i in range(3):
            node = s.kin_conn[e, j * 3 + i]
            phi = polys[i](xi[0]) * polys[j](xi[1])
            dphi = np.array([polys[i].deriv()(xi[0]) * polys[j](xi[1]),
                             polys[i](xi[0]) * polys[j].deriv()(xi[1])])
            val += u[node] * phi
            dref += np.outer(u[node], dphi)
            jac += np.outer(x[node], dphi)
    v, g = s.eval_fields(u, x, e, q)
    np.testing.assert_allclose(v, val, atol=1e-13)
    np.testing.assert_allclose(g, dref @ np.linalg.inv(jac), atol=1e-12)


def test_inverted_element_detected():
    s = make(2, 2)
    x = s.kin_coords.copy()
    x[:, 0] *= -1
    with pytest.raises(InvertedElement):
        s.geometry(x)


def test_dof_counts_and_boundary():
    s = make(4, 3, p=2)
    assert s.n_kin_nodes == 9 * 7
    assert s.n_th_dofs == 12 * 4
    assert len(s.boundary_nodes("left")) == 7
    assert len(s.boundary_nodes("top")) == 9
    with pytest.raises(ValueError):
        s.boundary_nodes("front")


# -- mass operators -------------------------------------------------------------------

def dense_kin_mass(s, rho_det):
    n = s.n_kin_nodes
    M = np.zeros((n, n))
    for e in range(s.n_elements):
        c = s.kin_conn[e]
        for q in range(s.n_quad):
            w = s.quad_weights[q] * rho_det[e, q]
            for a in range(len(c)):
                for b in range(len(c)):
                    M[c[a], c[b]] += w * s.B[q, a] * s.B[q, b]
    return M


def test_total_mass_is_area():
    s = make(3, 2, 2.0, 0.5)
    _, det, _ = s.geometry(s.kin_coords)
    M = fem.kinematic_mass_matrix(s, det)
    one = np.ones(s.n_kin_nodes)
    assert one @ (M @ one) == pytest.approx(1.0, rel=1e-14)
    Me = fem.thermo_mass(s, det)
    assert np.ones(s.n_th_dofs) @ Me.apply(np.ones(s.n_th_dofs)) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("precond", ["jacobi", "lu"])
def test_mass_solve_round_trip(precond):
    s = make(3, 3)
    x = distort(s)
    _, det, _ = s.geometry(x)
    M = fem.kinematic_mass(s, det, precond=precond)
    u = np.random.default_rng(0).normal(size=2 * s.n_kin_nodes)
    w = fem.mass_solve(M, u)
    assert np.linalg.norm(fem.mass_apply(M, w) - u) / np.linalg.norm(u) <= 1e-12
    np.testing.assert_allclose(fem.mass_solve(M, fem.mass_apply(M, u)), u, rtol=1e-9, atol=1e-10)


def test_mass_symmetric_positive_definite():
    s = make(2, 3)
    rng = np.random.default_rng(1)
    _, det, _ = s.geometry(distort(s))
    rho_det = det * (1 + rng.random(det.shape))
    M = fem.kinematic_mass(s, rho_det)
    for _ in range(5):
        u, w = rng.normal(size=(2, M.shape[0]))
        assert u @ M.apply(w) == pytest.approx(w @ M.apply(u), rel=1e-13)
        assert u @ M.apply(u) > 0


def test_mass_random_density_matches_dense_oracle():
    s = make(2, 2)
    rng = np.random.default_rng(2)
    rho_det = 0.5 + rng.random((s.n_elements, s.n_quad))
    Md = dense_kin_mass(s, rho_det)
    np.testing.assert_allclose(fem.kinematic_mass_matrix(s, rho_det).toarray(), Md, atol=1e-15)
    b = rng.normal(size=s.n_kin_nodes)
    M = fem.MassOperator(fem.kinematic_mass_matrix(s, rho_det))
    np.testing.assert_allclose(M.solve(b), np.linalg.solve(Md, b), rtol=1e-9)


def test_constrained_dofs_eliminated():
    s = make(2, 2)
    _, det, _ = s.geometry(s.kin_coords)
    cons = fem.vector_dofs(s.boundary_nodes("left"), 0)
    M = fem.kinematic_mass(s, det, cons)
    w = M.solve(np.ones(M.shape[0]))
    assert np.all(w[cons] == 0.0)


def test_solver_divergence_reported():
    s = make(3, 3)
    _, det, _ = s.geometry(s.kin_coords)
    M = fem.MassOperator(fem.kinematic_mass_matrix(s, det), maxiter=2)
    with pytest.raises(SolverDiverged):
        M.solve(np.random.default_rng(0).normal(size=M.shape[0]))


def test_mass_constant_under_deformation():
    s = make(3, 2)
    _, det0, _ = s.geometry(s.kin_coords)
    rho0 = 1.0 + np.random.default_rng(4).random(det0.shape)
    _, det, _ = s.geometry(distort(s, 0.1))
    rho = rho0 * det0 / det
    m0 = (rho0 * det0) @ s.quad_weights
    m1 = (rho * det) @ s.quad_weights
    np.testing.assert_allclose(m1, m0, rtol=1e-14)


# -- corner force ----------------------------------------------------------------------

def test_zero_stress_zero_loads():
    s = make(2, 2)
    sigma = np.zeros((s.n_elements, s.n_quad, 2, 2))
    v = np.random.default_rng(0).normal(size=(s.n_kin_nodes, 2))
    mom, en = fem.corner_force_apply(s, s.kin_coords, v, sigma)
    assert np.all(mom == 0) and np.all(en == 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_energy_momentum_duality(seed):
    s = make(2, 2)
    rng = np.random.default_rng(seed)
    sigma = rng.normal(size=(s.n_elements, s.n_quad, 2, 2))
    v = rng.normal(size=(s.n_kin_nodes, 2))
    mom, en = fem.corner_force_apply(s, distort(s), v, sigma)
    assert np.sum(v * mom) == pytest.approx(np.sum(en), rel=1e-12, abs=1e-12)


def test_uniform_pressure_single_element_dense_oracle():
    s = fem.FESpaces(fem.Mesh(1, 1, 1.0, 1.0), 2)
    p = 0.7
    sigma = np.broadcast_to(-p * np.eye(2), (1, s.n_quad, 2, 2)).copy()
    mom, en = fem.corner_force_apply(s, s.kin_coords, np.zeros((9, 2)), sigma)
    # oracle: F_i = -p int grad(phi_i) dx by explicit quadrature loop
    nodes = s.kin_nodes_1d
    polys = [lagrange(nodes, np.eye(3)[a]) for a in range(3)]
    xq, wq = fem.gauss_legendre(4)
    ref = np.zeros((9, 2))
    for j in range(3):
        for i in range(3):
            for a, wa in zip(xq, wq):
                for b, wb in zip(xq, wq):
                    ref[j * 3 + i, 0] += wa * wb * polys[i].deriv()(a) * polys[j](b)
                    ref[j * 3 + i, 1] += wa * wb * polys[i](a) * polys[j].deriv()(b)
    np.testing.assert_allclose(mom, -p * ref, atol=1e-14)
    # corner nodes: int d(phi)/dx over the square is -1/6 * (+-1)
    assert mom[0, 0] == pytest.approx(-p * -1.0 / 6.0, abs=1e-14)


# -- force VJP -----------------------------------------------------------------------

def nonlinear_flux(u, L):
    return np.sin(u) + 0.3 * np.einsum("eqcd->eqc", L) * u


def nonlinear_flux_vjp(u, L, fbar):
    trL = np.einsum("eqcd->eqc", L)
    ubar = fbar * (np.cos(u) + 0.3 * trL)
    Lbar = np.broadcast_to((0.3 * fbar * u)[..., None], L.shape).copy()
    return ubar, Lbar


def test_force_vjp_zero_cotangent():
    s = make(2, 1)
    u = np.random.default_rng(0).normal(size=(s.n_kin_nodes, 2))
    ub, xb = fem.force_vjp(s, s.kin_coords, u, np.zeros_like(u), nonlinear_flux, nonlinear_flux_vjp)
    assert np.all(ub == 0) and np.all(xb == 0)


def test_force_vjp_linear_physics_dense_transpose():
    s = make(2, 1)
    c = 1.7
    flux = lambda u, L: c * L
    flux_vjp = lambda u, L, fbar: (np.zeros_like(u), c * fbar)
    x = distort(s, 0.0)
    n = 2 * s.n_kin_nodes
    cols = []
    for i in range(n):
        b = np.zeros(n)
        b[i] = 1.0
        cols.append(fem.force_apply(s, x, b.reshape(-1, 2), flux, test="grad").ravel())
    K = np.column_stack(cols)
    xi = np.random.default_rng(5).normal(size=(s.n_kin_nodes, 2))
    ub, _ = fem.force_vjp(s, x, np.zeros_like(xi), xi, flux, flux_vjp, test="grad")
    np.testing.assert_allclose(ub.ravel(), K.T @ xi.ravel(), atol=1e-13)


@pytest.mark.parametrize("test", ["value", "grad"])
def test_force_vjp_fd_duality(test):
    s = make(2, 2)
    rng = np.random.default_rng(7)
    x = distort(s)
    u = rng.normal(size=(s.n_kin_nodes, 2))
    xi = rng.normal(size=(s.n_kin_nodes, 2))
    if test == "grad":
        flux = lambda u, L: np.broadcast_to(nonlinear_flux(u, L)[..., None], L.shape) * L
        def flux_vjp(u, L, fbar):
            f = nonlinear_flux(u, L)
            g = np.einsum("eqcd,eqcd->eqc", fbar, L)
            ub, Lb = nonlinear_flux_vjp(u, L, g)
            return ub, Lb + f[..., None] * fbar
    else:
        flux, flux_vjp = nonlinear_flux, nonlinear_flux_vjp
    ub, xb = fem.force_vjp(s, x, u, xi, flux, flux_vjp, test=test)
    wu = rng.normal(size=u.shape)
    wx = rng.normal(size=x.shape) * 0.1
    eps = 1e-6
    F = lambda xx, uu: np.sum(xi * fem.force_apply(s, xx, uu, flux, test=test))
    fd_u = (F(x, u + eps * wu) - F(x, u - eps * wu)) / (2 * eps)
    fd_x = (F(x + eps * wx, u) - F(x - eps * wx, u)) / (2 * eps)
    assert fd_u == pytest.approx(np.sum(wu * ub), rel=1e-7)
    assert fd_x == pytest.approx(np.sum(wx * xb), rel=1e-7)


# -- mass inverse VJP -------------------------------------------------------------------

def rho_det_of(s, u, det0):
    uq, _ = s.kin_interp(u[:, None])
    return det0 * (1.0 + 0.3 * uq[..., 0] ** 2)


def drho_det_of(s, u, det0):
    uq, _ = s.kin_interp(u[:, None])
    return (det0 * 0.6 * uq[..., 0])[..., None] * s.B[None, :, :]


def test_mass_inverse_vjp_zero_when_density_fixed():
    s = make(2, 2)
    _, det, _ = s.geometry(s.kin_coords)
    M = fem.MassOperator(fem.kinematic_mass_matrix(s, det))
    rng = np.random.default_rng(0)
    out = fem.mass_inverse_vjp(s, M, rng.normal(size=s.n_kin_nodes), rng.normal(size=s.n_kin_nodes),
                               np.zeros((s.n_elements, s.n_quad, s.n_kin_local)))
    assert np.all(out == 0)


def test_mass_inverse_vjp_one_element_dense_tensor():
    s = fem.FESpaces(fem.Mesh(1, 1), 2)
    _, det0, _ = s.geometry(s.kin_coords)
    rng = np.random.default_rng(1)
    u = rng.normal(size=9)
    M = fem.MassOperator(fem.kinematic_mass_matrix(s, rho_det_of(s, u, det0)))
    xi, eta = rng.normal(size=(2, 9))
    got = fem.mass_inverse_vjp(s, M, xi, eta, drho_det_of(s, u, det0))[0]
    # dense third-order tensor dM_lm/du_j
    uq = s.B @ u
    T = np.einsum("q,q,qj,ql,qm->jlm", s.quad_weights, det0[0] * 0.6 * uq, s.B, s.B, s.B)
    Minv = np.linalg.inv(M.to_dense())
    ref = -np.einsum("l,jlm,m->j", Minv @ xi, T, Minv @ eta)
    np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-12)


def test_mass_inverse_vjp_fd():
    s = make(2, 2)
    _, det0, _ = s.geometry(s.kin_coords)
    rng = np.random.default_rng(2)
    u = rng.normal(size=s.n_kin_nodes)
    xi, eta = rng.random(size=(2, s.n_kin_nodes))
    M = fem.MassOperator(fem.kinematic_mass_matrix(s, rho_det_of(s, u, det0)))
    local = fem.mass_inverse_vjp(s, M, xi, eta, drho_det_of(s, u, det0))
    g = s.gather_matrix @ local.ravel()
    w = rng.normal(size=u.shape)
    eps = 1e-6

    def f(uu):
        Mu = fem.kinematic_mass_matrix(s, rho_det_of(s, uu, det0)).toarray()
        return xi @ np.linalg.solve(Mu, eta)

    fd = (f(u + eps * w) - f(u - eps * w)) / (2 * eps)
    assert fd == pytest.approx(w @ g, rel=1e-6)


def test_heavier_density_shrinks_inverse_action():
    s = make(2, 2)
    _, det0, _ = s.geometry(s.kin_coords)
    b = np.ones(s.n_kin_nodes)
    M = fem.MassOperator(fem.kinematic_mass_matrix(s, det0))
    light = b @ M.solve(b)
    heavy = b @ fem.MassOperator(fem.kinematic_mass_matrix(s, 1.1 * det0)).solve(b)
    assert heavy < light
    # scaling the density by (1 + t): derivative of b.M^{-1}b at t = 0
    dens = np.broadcast_to(det0[..., None], (s.n_elements, s.n_quad, 1))
    g = fem.mass_inverse_vjp(s, M, b, b, dens).sum()
    assert g < 0
    assert g == pytest.approx((heavy - light) / 0.1 * 1.1, rel=1e-12)


def test_vtk_writer(tmp_path):
    s = make(2, 1)
    path = tmp_path / "f.vtk"
    fem.write_vtk(path, s, s.kin_coords, {"v": np.zeros((s.n_kin_nodes, 2)),
                                          "u": np.ones(s.n_kin_nodes)}, {"e": np.arange(2.0)})
    text = path.read_text()
    assert "POINTS 15 double" in text and "CELLS 8 40" in text and "CELL_DATA 8" in text
