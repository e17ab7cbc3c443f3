"""Quadrilateral finite elements on structured 2D meshes.

Continuous order-``p`` Lagrange space for positions and velocities,
discontinuous order ``p-1`` space for specific internal energy, Gauss-Legendre
quadrature, mass operators with iterative inverse action, and partially
assembled force contractions with their vector-Jacobian products.

Array conventions: ``J[e, q, c, d] = dx_c / dxi_d`` on the unit reference
square, reference gradients ``G[e, q, c, d] = du_c / dxi_d``.  Physical
gradients are ``G @ Jinv``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvertedElement, SolverDiverged

BOUNDARY_TAGS = ("left", "right", "bottom", "top")


# -- 1D building blocks ------------------------------------------------------

def gauss_legendre(n):
    """``n``-point Gauss-Legendre rule mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def lobatto_nodes(n):
    """``n`` Gauss-Lobatto-Legendre nodes on [0, 1]; the midpoint when ``n == 1``."""
    if n == 1:
        return np.array([0.5])
    if n == 2:
        return np.array([0.0, 1.0])
    inner = np.polynomial.legendre.Legendre.basis(n - 1).deriv().roots()
    return 0.5 * (np.concatenate([[-1.0], np.sort(inner.real), [1.0]]) + 1.0)


def lagrange_1d(nodes, xi):
    """Values and derivatives of the Lagrange polynomials on ``nodes`` at ``xi``."""
    nodes = np.asarray(nodes, dtype=float)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    n = len(nodes)
    val = np.ones((len(xi), n))
    der = np.zeros((len(xi), n))
    for a in range(n):
        others = [b for b in range(n) if b != a]
        denom = np.prod([nodes[a] - nodes[b] for b in others]) if others else 1.0
        for b in others:
            val[:, a] *= xi - nodes[b]
        for m in others:
            term = np.ones(len(xi))
            for b in others:
                if b != m:
                    term *= xi - nodes[b]
            der[:, a] += term
        val[:, a] /= denom
        der[:, a] /= denom
    return val, der


def tensor_basis(nodes, pts):
    """2D tensor-product basis at points ``pts`` (m, 2).

    Local index ``j * n + i`` pairs node ``i`` along xi_1 with node ``j`` along xi_2.
    Returns values (m, n*n) and reference gradients (m, n*n, 2).
    """
    pts = np.atleast_2d(pts)
    v1, d1 = lagrange_1d(nodes, pts[:, 0])
    v2, d2 = lagrange_1d(nodes, pts[:, 1])
    val = np.einsum("mj,mi->mji", v2, v1).reshape(len(pts), -1)
    gx = np.einsum("mj,mi->mji", v2, d1).reshape(len(pts), -1)
    gy = np.einsum("mj,mi->mji", d2, v1).reshape(len(pts), -1)
    return val, np.stack([gx, gy], axis=-1)


# -- mesh and spaces -----------------------------------------------------------

@dataclass
class Mesh:
    """Structured ``nx`` x ``ny`` quadrilateral mesh of ``[0, Lx] x [0, Ly]``.

    ``warp``, if given, maps logical grid coordinates (N, 2) to initial
    physical positions.  It must keep every boundary of the box on itself;
    tracers and boundary tags are always expressed in logical coordinates.
    """

    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0
    warp: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("mesh needs at least one element per direction")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("mesh extents must be positive")

    @property
    def n_elements(self):
        return self.nx * self.ny

    @cached_property
    def vertices(self):
        xs = np.linspace(0.0, self.Lx, self.nx + 1)
        ys = np.linspace(0.0, self.Ly, self.ny + 1)
        X, Y = np.meshgrid(xs, ys)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def quads(self):
        """Counter-clockwise vertex connectivity, element ``ey * nx + ex``."""
        ex, ey = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        ex, ey = ex.ravel(), ey.ravel()
        w = self.nx + 1
        v0 = ey * w + ex
        return np.column_stack([v0, v0 + 1, v0 + w + 1, v0 + w])

    def element_index(self, ex, ey):
        return ey * self.nx + ex


@dataclass
class FESpaces:
    """Kinematic (continuous Q_p) and thermodynamic (discontinuous Q_{p-1}) spaces."""

    mesh: Mesh
    order: int = 2
    n_quad_1d: int | None = None
    kin_nodes_1d: np.ndarray = field(init=False, repr=False)
    th_nodes_1d: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = self.order
        if p < 1:
            raise ValueError("kinematic order must be >= 1")
        if self.n_quad_1d is None:
            self.n_quad_1d = p + 2
        self.kin_nodes_1d = lobatto_nodes(p + 1)
        self.th_nodes_1d = lobatto_nodes(p)
        xq, wq = gauss_legendre(self.n_quad_1d)
        QX, QY = np.meshgrid(xq, xq)
        self.quad_points = np.column_stack([QX.ravel(), QY.ravel()])
        self.quad_weights = np.outer(wq, wq).ravel()
        self.B, self.D = tensor_basis(self.kin_nodes_1d, self.quad_points)
        self.Bt, self.Dt = tensor_basis(self.th_nodes_1d, self.quad_points)

    # sizes
    @property
    def n_elements(self):
        return self.mesh.n_elements

    @property
    def n_quad(self):
        return len(self.quad_weights)

    @property
    def n_kin_local(self):
        return (self.order + 1) ** 2

    @property
    def n_th_local(self):
        return self.order ** 2

    @property
    def n_kin_nodes(self):
        p, m = self.order, self.mesh
        return (p * m.nx + 1) * (p * m.ny + 1)

    @property
    def n_th_dofs(self):
        return self.n_elements * self.n_th_local

    @cached_property
    def kin_conn(self):
        """Global kinematic node of each element's local node, shape (Ne, (p+1)^2)."""
        p, m = self.order, self.mesh
        W = p * m.nx + 1
        ex, ey = np.meshgrid(np.arange(m.nx), np.arange(m.ny))
        ex, ey = ex.ravel(), ey.ravel()
        i, j = np.meshgrid(np.arange(p + 1), np.arange(p + 1))
        i, j = i.ravel(), j.ravel()
        return (ey[:, None] * p + j[None, :]) * W + ex[:, None] * p + i[None, :]

    @cached_property
    def th_conn(self):
        return np.arange(self.n_th_dofs).reshape(self.n_elements, self.n_th_local)

    @cached_property
    def logical_coords(self):
        """Unwarped grid coordinates of the kinematic nodes, shape (Nk, 2)."""
        m = self.mesh
        gx = np.concatenate([ex * 1.0 + self.kin_nodes_1d[:-1] for ex in range(m.nx)] + [[m.nx]])
        gy = np.concatenate([ey * 1.0 + self.kin_nodes_1d[:-1] for ey in range(m.ny)] + [[m.ny]])
        X, Y = np.meshgrid(gx * m.Lx / m.nx, gy * m.Ly / m.ny)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def kin_coords(self):
        """Reference coordinates X of the kinematic nodes, shape (Nk, 2)."""
        L = self.logical_coords
        if self.mesh.warp is None:
            return L
        return np.asarray(self.mesh.warp(L.copy()), dtype=float).reshape(L.shape)

    @cached_property
    def th_coords(self):
        """Reference coordinates of the thermodynamic dofs, shape (Nt, 2)."""
        val, _ = tensor_basis(self.kin_nodes_1d, self._th_local_points())
        Xe = self.kin_coords[self.kin_conn]
        return np.einsum("ma,eac->emc", val, Xe).reshape(-1, 2)

    def _th_local_points(self):
        n = self.th_nodes_1d
        PX, PY = np.meshgrid(n, n)
        return np.column_stack([PX.ravel(), PY.ravel()])

    def boundary_nodes(self, tag):
        X = self.logical_coords
        m = self.mesh
        tol = 1e-12 * max(m.Lx, m.Ly)
        test = {
            "left": np.abs(X[:, 0]) < tol,
            "right": np.abs(X[:, 0] - m.Lx) < tol,
            "bottom": np.abs(X[:, 1]) < tol,
            "top": np.abs(X[:, 1] - m.Ly) < tol,
        }
        if tag not in test:
            raise ValueError(f"unknown boundary tag {tag!r}")
        return np.flatnonzero(test[tag])

    @cached_property
    def gather_matrix(self):
        """Sparse (Nk, Ne*nloc) matrix summing element-local values into nodes."""
        conn = self.kin_conn.ravel()
        n = len(conn)
        return sp.csr_matrix((np.ones(n), (conn, np.arange(n))),
                             shape=(self.n_kin_nodes, n))

    # -- field evaluation ------------------------------------------------------

    def element_values(self, u):
        """Kinematic coefficients (Nk, c) -> element-local (Ne, nloc, c)."""
        return u[self.kin_conn]

    @cached_property
    def _Dmat(self):
        # (nloc, Nq*2) layout of the reference basis gradients for BLAS contractions
        return np.ascontiguousarray(self.D.transpose(1, 0, 2).reshape(self.n_kin_local, -1))

    def kin_interp(self, u):
        """Values (Ne, Nq, c) and reference gradients (Ne, Nq, c, 2) of a kinematic field."""
        ue = u[self.kin_conn]
        return self.B @ ue, self._ref_grad_local(ue)

    def _ref_grad_local(self, ue):
        ne, _, c = ue.shape
        g = np.swapaxes(ue, 1, 2) @ self._Dmat
        return g.reshape(ne, c, self.n_quad, 2).transpose(0, 2, 1, 3)

    def kin_ref_grad(self, u):
        return self._ref_grad_local(u[self.kin_conn])

    def th_interp(self, e):
        """Values (Ne, Nq) of a thermodynamic field."""
        return e.reshape(self.n_elements, self.n_th_local) @ self.Bt.T

    def scatter_ref_grad(self, Gbar):
        """Adjoint of :meth:`kin_ref_grad`: (Ne, Nq, c, 2) -> (Nk, c)."""
        ne, nq, c, _ = Gbar.shape
        local = Gbar.transpose(0, 2, 1, 3).reshape(ne, c, nq * 2) @ self._Dmat.T
        return self.gather_matrix @ np.swapaxes(local, 1, 2).reshape(-1, c)

    def scatter_values(self, vbar):
        """Adjoint of kinematic value interpolation: (Ne, Nq, c) -> (Nk, c)."""
        local = self.B.T @ vbar
        c = local.shape[-1]
        return self.gather_matrix @ local.reshape(-1, c)

    def th_scatter(self, ebar_q):
        """Adjoint of :meth:`th_interp`: (Ne, Nq) -> (Nt,)."""
        return (ebar_q @ self.Bt).ravel()

    def geometry(self, x):
        """Jacobian, determinant and inverse at every quadrature point for positions ``x``."""
        J = self.kin_ref_grad(x)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(det <= 0) or not np.all(np.isfinite(det)):
            bad = np.unique(np.nonzero(~(det > 0))[0])
            raise InvertedElement(f"non-positive Jacobian in elements {bad[:10].tolist()}")
        Jinv = np.empty_like(J)
        Jinv[..., 0, 0] = J[..., 1, 1] / det
        Jinv[..., 1, 1] = J[..., 0, 0] / det
        Jinv[..., 0, 1] = -J[..., 0, 1] / det
        Jinv[..., 1, 0] = -J[..., 1, 0] / det
        return J, det, Jinv

    def eval_fields(self, u, x, element, q):
        """Value and physical gradient of kinematic field ``u`` at one quadrature point."""
        J, det, Jinv = self.geometry(x)
        ue = u[self.kin_conn[element]]
        value = self.B[q] @ ue
        grad = np.einsum("ad,ac->cd", self.D[q], ue) @ Jinv[element, q]
        return value, grad


def geometry_vjp(J, det, Jinv, det_bar, Jinv_bar):
    """Pull cotangents of ``det J`` and ``J^{-1}`` back to ``J``."""
    Jbar = det_bar[..., None, None] * det[..., None, None] * np.swapaxes(Jinv, -1, -2)
    JinvT = np.swapaxes(Jinv, -1, -2)
    Jbar = Jbar - JinvT @ Jinv_bar @ JinvT
    return Jbar


# -- mass operators ----------------------------------------------------------

def pcg(apply, b, precond, rtol=1e-12, maxiter=1000):
    """Preconditioned conjugate gradients from a zero initial guess.

    ``precond`` is either the operator diagonal (Jacobi) or a callable
    applying an SPD approximation of the inverse.
    """
    if not callable(precond):
        diag = precond
        precond = lambda r: r / diag
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = apply(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rtol * bnorm:
            return x, it
        z = precond(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverDiverged(f"PCG did not reach rtol={rtol} in {maxiter} iterations")


class MassOperator:
    """Symmetric positive-definite mass operator with constrained dofs eliminated.

    Constrained rows and columns are replaced by the identity so that
    ``solve`` returns exact zeros there.  Block-diagonal operators (the
    discontinuous space) are inverted block by block; everything else goes
    through preconditioned CG.  ``precond="jacobi"`` uses the diagonal;
    ``precond="lu"`` uses a sparse factorization of the operator itself, so
    CG converges in one or two sweeps (worth it when the operator is reused
    for thousands of solves, as the time-independent mass matrices are).
    """

    def __init__(self, matrix, constrained=None, blocks=None, rtol=1e-12, maxiter=2000,
                 precond="jacobi"):
        M = sp.csr_matrix(matrix)
        n = M.shape[0]
        self.free = np.ones(n, dtype=bool)
        if constrained is not None and len(constrained):
            self.free[np.asarray(constrained)] = False
            P = sp.diags(self.free.astype(float))
            M = (P @ M @ P + sp.diags((~self.free).astype(float))).tocsr()
        self.matrix = M
        self.diag = M.diagonal()
        self.rtol = rtol
        self.maxiter = maxiter
        self.blocks = None
        self.block_inv = None
        if blocks is not None:
            self.blocks = np.asarray(blocks)
            self.block_inv = np.linalg.inv(self.blocks)
        self.last_iterations = 0
        if precond == "jacobi":
            self.precond = self.diag
        elif precond == "lu":
            self.precond = spla.splu(M.tocsc()).solve
        else:
            raise ValueError(f"unknown preconditioner {precond!r}")

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        return self.matrix @ u

    def solve(self, u):
        u = np.asarray(u, dtype=float)
        if self.block_inv is not None:
            nb, m, _ = self.block_inv.shape
            w = np.einsum("bij,bj->bi", self.block_inv, u.reshape(nb, m)).ravel()
            self.last_iterations = 1
            return w
        b = np.where(self.free, u, 0.0)
        w, self.last_iterations = pcg(self.matrix.__matmul__, b, self.precond, self.rtol, self.maxiter)
        return w

    def to_dense(self):
        return self.matrix.toarray()


def kinematic_mass_matrix(spaces: FESpaces, rho_det):
    """Scalar kinematic mass matrix for density-times-Jacobian ``rho_det`` (Ne, Nq)."""
    wq = spaces.quad_weights
    local = np.einsum("qa,qb,eq->eab", spaces.B, spaces.B, rho_det * wq)
    conn = spaces.kin_conn
    rows = np.repeat(conn, conn.shape[1], axis=1).ravel()
    cols = np.tile(conn, (1, conn.shape[1])).ravel()
    n = spaces.n_kin_nodes
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def vector_dofs(nodes, comp):
    """Flat indices of component ``comp`` at ``nodes`` for (node, comp) ordering."""
    return 2 * np.asarray(nodes) + comp


def kinematic_mass(spaces: FESpaces, rho_det, constrained=None, rtol=1e-12, precond="jacobi"):
    """Vector kinematic mass operator acting on (Nk*2,) arrays in (node, comp) order."""
    Ms = kinematic_mass_matrix(spaces, rho_det)
    M = sp.kron(Ms, sp.identity(2), format="csr")
    return MassOperator(M, constrained=constrained, rtol=rtol, precond=precond)


def thermo_mass_blocks(spaces: FESpaces, rho_det):
    wq = spaces.quad_weights
    return np.einsum("qi,qj,eq->eij", spaces.Bt, spaces.Bt, rho_det * wq)


def thermo_mass(spaces: FESpaces, rho_det):
    blocks = thermo_mass_blocks(spaces, rho_det)
    return MassOperator(sp.block_diag(list(blocks), format="csr"), blocks=blocks)


def mass_apply(M: MassOperator, u):
    return M.apply(u)


def mass_solve(M: MassOperator, u):
    return M.solve(u)


def _values_at_quad(spaces, u, space):
    if space == "th":
        return spaces.th_interp(u)[..., None]
    ncomp = u.size // spaces.n_kin_nodes
    val, _ = spaces.kin_interp(u.reshape(spaces.n_kin_nodes, ncomp))
    return val


def mass_inverse_vjp(spaces: FESpaces, M: MassOperator, xi, eta, drho_det, space="kin"):
    """Cotangent of ``xi . M^{-1} eta`` with respect to the coefficients of a field
    that the density depends on.

    ``drho_det`` (Ne, Nq, nloc) holds ``d(rho det J)/d u_j`` at quadrature
    points for each element-local coefficient of the field.  The product of
    the two solved fields is contracted pointwise; the third-order tensor
    ``dM/du`` is never formed.  Returns element-local cotangents (Ne, nloc).
    """
    a = _values_at_quad(spaces, M.solve(xi), space)
    b = _values_at_quad(spaces, M.solve(eta), space)
    prod = np.einsum("eqc,eqc->eq", a, b)
    return -np.einsum("eqj,eq,q->ej", drho_det, prod, spaces.quad_weights)


# -- force contractions ------------------------------------------------------

def stress_moments(sigma, det, Jinv, wq):
    """``A = w det(J) sigma J^{-T}`` per quadrature point."""
    return (wq * det)[..., None, None] * matmul2(sigma, np.swapaxes(Jinv, -1, -2))


def matmul2(a, b):
    """Batched 2x2 matrix product, written out (faster than stacked ``@`` for tiny blocks)."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    for i in range(2):
        for j in range(2):
            out[..., i, j] = a[..., i, 0] * b[..., 0, j] + a[..., i, 1] * b[..., 1, j]
    return out


def corner_force_apply(spaces: FESpaces, x, v, sigma):
    """Both contractions of the corner-force operator without forming it.

    Returns ``F.1`` as a (Nk, 2) momentum load and ``F^T.v`` as an (Nt,)
    energy load, where ``F_ij = int sigma : grad(phi_i) psi_j``.
    """
    _, det, Jinv = spaces.geometry(x)
    A = stress_moments(sigma, det, Jinv, spaces.quad_weights)
    mom = spaces.scatter_ref_grad(A)
    Gv = spaces.kin_ref_grad(v)
    en = spaces.th_scatter((A * Gv).sum(axis=(-1, -2)))
    return mom, en


def force_apply(spaces: FESpaces, x, u, flux, test="value"):
    """Load ``F_i = int f(u, grad u) . phi_i dx`` (or ``: grad phi_i`` when ``test='grad'``).

    ``flux(u_q, grad_u_q)`` maps (Ne, Nq, c) values and (Ne, Nq, c, 2) physical
    gradients to the integrand: shape (Ne, Nq, c) for value testing or
    (Ne, Nq, c, 2) for gradient testing.
    """
    _, det, Jinv = spaces.geometry(x)
    val, G = spaces.kin_interp(u)
    f = flux(val, G @ Jinv)
    w = spaces.quad_weights * det
    if test == "value":
        return spaces.scatter_values(w[..., None] * f)
    return spaces.scatter_ref_grad(w[..., None, None] * (f @ np.swapaxes(Jinv, -1, -2)))


def force_vjp(spaces: FESpaces, x, u, xi, flux, flux_vjp, test="value"):
    """Cotangents of ``xi . F(x, u)`` with respect to ``u`` and ``x``.

    The discrete cotangent ``xi`` is expanded on the test basis as an adjoint
    field; ``flux_vjp(u_q, grad_u_q, fbar) -> (ubar_q, gradbar_q)`` supplies
    the pointwise physics derivatives.  Returns ``(ubar, xbar)``, each (Nk, c).
    """
    J, det, Jinv = spaces.geometry(x)
    val, G = spaces.kin_interp(u)
    L = G @ Jinv
    f = flux(val, L)
    wq = spaces.quad_weights
    JinvT = np.swapaxes(Jinv, -1, -2)
    if test == "value":
        xi_q, _ = spaces.kin_interp(xi)
        fbar = (wq * det)[..., None] * xi_q
        det_bar = wq * np.einsum("eqc,eqc->eq", f, xi_q)
        Jinv_bar = np.zeros_like(Jinv)
    else:
        Gxi = spaces.kin_ref_grad(xi)
        # integrand w det f : (Gxi Jinv)
        fbar = (wq * det)[..., None, None] * (Gxi @ Jinv)
        det_bar = wq * np.einsum("eqck,eqck->eq", f, Gxi @ Jinv)
        Jinv_bar = (wq * det)[..., None, None] * (np.swapaxes(Gxi, -1, -2) @ f)
    ubar_q, Lbar = flux_vjp(val, L, fbar)
    Gbar = Lbar @ JinvT
    Jinv_bar = Jinv_bar + np.swapaxes(G, -1, -2) @ Lbar
    ubar = spaces.scatter_values(ubar_q) + spaces.scatter_ref_grad(Gbar)
    xbar = spaces.scatter_ref_grad(geometry_vjp(J, det, Jinv, det_bar, Jinv_bar))
    return ubar, xbar


# -- output ------------------------------------------------------------------

def write_vtk(path, spaces: FESpaces, x, point_data=None, cell_data=None, title="adjhydro"):
    """Legacy ASCII VTK: every element split into its p^2 bilinear sub-quads."""
    p = spaces.order
    sub = []
    for e in range(spaces.n_elements):
        c = spaces.kin_conn[e]
        for j in range(p):
            for i in range(p):
                a = j * (p + 1) + i
                sub.append((c[a], c[a + 1], c[a + p + 2], c[a + p + 1], e))
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(x)} double"]
    lines += [f"{px:.17g} {py:.17g} 0" for px, py in x]
    lines.append(f"CELLS {len(sub)} {5 * len(sub)}")
    lines += [f"4 {a} {b} {c} {d}" for a, b, c, d, _ in sub]
    lines.append(f"CELL_TYPES {len(sub)}")
    lines += ["9"] * len(sub)
    if point_data:
        lines.append(f"POINT_DATA {len(x)}")
        for name, arr in point_data.items():
            arr = np.asarray(arr)
            if arr.ndim == 2:
                lines.append(f"VECTORS {name} double")
                lines += [f"{a:.17g} {b:.17g} 0" for a, b in arr]
            else:
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [f"{a:.17g}" for a in arr]
    if cell_data:
        owner = np.array([s[4] for s in sub])
        lines.append(f"CELL_DATA {len(sub)}")
        for name, arr in cell_data.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{a:.17g}" for a in np.asarray(arr)[owner]]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
