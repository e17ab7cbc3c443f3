"""Semi-discrete Lagrangian hydrodynamics on the spaces of :mod:`adjhydro.fem`.

State vector ``y = [x, v, e]`` with positions and velocities in (node, comp)
order and specific internal energy on the discontinuous space::

    dx/dt = v
    M_v dv/dt = -F . 1
    M_e de/dt = F^T . v

with ``F_ij = int sigma : grad(phi_i) psi_j`` and ``sigma = -p I + q``.  Since
``rho det(dx/dxi) = rho0 det(dX/dxi)`` pointwise, both mass matrices are fixed
at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .errors import EosOutOfRange
from .ode_core import DynamicalSystem, Trajectory, INTEGRATORS

EPS_EOS = 1e-6
C2_FLOOR = 1e-10


# -- equation of state -------------------------------------------------------

@dataclass(frozen=True)
class EosParams:
    """Mie-Grüneisen material with a linear Hugoniot ``Us = C0 + s up``."""

    rho0: float
    C0: float = 1.0
    s: float = 1.5
    gamma0: float = 2.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.C0 > 0:
            raise ValueError("C0 must be positive")


def _hugoniot(chi, e, rho0, C0, s, g):
    """Pressure and its first two compression derivatives.

    Returns ``p``, ``P1 = dp/dchi`` and ``P2 = d2p/dchi2`` at fixed ``e``.
    """
    den = 1.0 - s * chi
    if np.any(s * chi >= 1.0 - EPS_EOS):
        raise EosOutOfRange(f"compression beyond EOS validity (max s*chi = {np.max(s * chi):.6g})")
    k = rho0 * C0 ** 2
    a = chi - 0.5 * g * chi ** 2
    da = 1.0 - g * chi
    b = den ** -2
    db = 2.0 * s * den ** -3
    d2b = 6.0 * s ** 2 * den ** -4
    p = k * a * b + rho0 * g * e
    P1 = k * (da * b + a * db)
    P2 = k * (-g * b + 2.0 * da * db + a * d2b)
    return p, P1, P2


def eos_pressure(rho, e, params: EosParams):
    """Pressure ``p(rho, e)`` and its partials ``dp/drho``, ``dp/de``."""
    rho = np.asarray(rho, dtype=float)
    chi = 1.0 - params.rho0 / rho
    p, P1, _ = _hugoniot(chi, np.asarray(e, dtype=float), params.rho0, params.C0,
                         params.s, params.gamma0)
    dp_drho = P1 * params.rho0 / rho ** 2
    dp_de = params.rho0 * params.gamma0 * np.ones_like(p)
    return p, dp_drho, dp_de


def sound_speed(rho, e, params: EosParams):
    """``c = sqrt(max(dp/drho + p dp/de / rho^2, 1e-10))``."""
    p, dp_drho, dp_de = eos_pressure(rho, e, params)
    return np.sqrt(np.maximum(dp_drho + p * dp_de / np.asarray(rho) ** 2, C2_FLOOR))


# -- smoothed switches -------------------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def smooth_heaviside(x, h):
    """``sigmoid(x / h)``: a differentiable step of width ~``h``."""
    return _sigmoid(np.asarray(x, dtype=float) / h)


def silu(z):
    return z * _sigmoid(z)


def soft_abs(x, h):
    """``h (silu(x/h) + silu(-x/h)) = x tanh(x / 2h)``; tends to ``|x|`` for ``|x| >> h``."""
    x = np.asarray(x, dtype=float)
    return x * np.tanh(0.5 * x / h)


@dataclass(frozen=True)
class ViscosityParams:
    gamma1: float = 0.5
    gamma2: float = 2.0
    h_scale: float = 0.2

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("viscosity strengths must be non-negative")
        if not self.h_scale > 0:
            raise ValueError("h_scale must be positive")


def sym(L):
    return 0.5 * (L + np.swapaxes(L, -1, -2))


def viscosity_coefficient(div, rho, c, l, params: ViscosityParams):
    """Scalar ``mu`` with ``q = mu sym(grad v)``.

    ``mu = 0.75 rho l (g1 c + g2 softabs(dv)) sigmoid(-dv / h)`` with velocity
    jump ``dv = tr(grad v) l`` and smoothing width ``h = h_scale c``; the
    switch opens under compression.
    """
    dv = div * l
    h = params.h_scale * c
    switch = _sigmoid(-dv / h)
    return 0.75 * rho * l * (params.gamma1 * c + params.gamma2 * soft_abs(dv, h)) * switch


def artificial_viscosity(grad_v, rho, c, l, params: ViscosityParams):
    """Viscous stress tensor ``q`` for velocity gradients ``grad_v`` (..., d, d)."""
    grad_v = np.asarray(grad_v, dtype=float)
    div = np.trace(grad_v, axis1=-2, axis2=-1)
    mu = viscosity_coefficient(div, rho, c, l, params)
    return np.asarray(mu)[..., None, None] * sym(grad_v)


# -- the semi-discrete problem ---------------------------------------------------

SLIDING = {"left": 0, "right": 0, "bottom": 1, "top": 1}


@dataclass
class Material:
    """Per-quadrature-point material fields, each shaped (Ne, Nq)."""

    rho0: np.ndarray
    C0: np.ndarray
    s: np.ndarray
    gamma0: np.ndarray

    @classmethod
    def uniform(cls, spaces, params: EosParams):
        shape = (spaces.n_elements, spaces.n_quad)
        return cls(*(np.full(shape, float(getattr(params, f)))
                     for f in ("rho0", "C0", "s", "gamma0")))

    @classmethod
    def from_regions(cls, spaces, region_of, params_list, logical=False):
        """``region_of(X) -> int array`` picks an :class:`EosParams` per reference point.

        With ``logical=True`` the points passed to ``region_of`` are the
        unwarped grid coordinates of the quadrature points.
        """
        Xq, _ = spaces.kin_interp(spaces.logical_coords if logical else spaces.kin_coords)
        idx = np.asarray(region_of(Xq.reshape(-1, 2))).reshape(Xq.shape[:2])
        fields = []
        for f in ("rho0", "C0", "s", "gamma0"):
            vals = np.array([getattr(p, f) for p in params_list], dtype=float)
            fields.append(vals[idx])
        return cls(*fields)


class HydroProblem:
    """Fixed data of one Lagrangian hydro run and its right-hand side.

    Parameters
    ----------
    spaces : FESpaces
    material : Material
    visc : ViscosityParams
    sliding : sequence of boundary tags whose normal velocity is held at zero
    precond : mass-solve preconditioner, ``"jacobi"`` or ``"lu"``
    """

    def __init__(self, spaces: fem.FESpaces, material: Material, visc=ViscosityParams(),
                 sliding=("left", "top", "bottom"), precond="lu", rtol=1e-12):
        self.spaces = spaces
        self.material = material
        self.visc = visc
        self.sliding = tuple(sliding)
        X = spaces.kin_coords
        self.X = X
        _, det0, _ = spaces.geometry(X)
        self.det0 = det0
        self.rho_det = material.rho0 * det0
        cons = [fem.vector_dofs(spaces.boundary_nodes(tag), SLIDING[tag]) for tag in self.sliding]
        self.constrained = np.unique(np.concatenate(cons)) if cons else np.array([], dtype=int)
        self.Ms = fem.kinematic_mass_matrix(spaces, self.rho_det)
        self.Mv = fem.kinematic_mass(spaces, self.rho_det, self.constrained, rtol=rtol,
                                     precond=precond)
        self.Me = fem.thermo_mass(spaces, self.rho_det)
        area = det0 @ spaces.quad_weights
        self.l0 = np.repeat((np.sqrt(area) / spaces.order)[:, None], spaces.n_quad, axis=1)
        self.nk = spaces.n_kin_nodes
        self.nt = spaces.n_th_dofs
        self.dim = 4 * self.nk + self.nt

    # -- state layout --------------------------------------------------------

    @property
    def slices(self):
        n = 2 * self.nk
        return slice(0, n), slice(n, 2 * n), slice(2 * n, 2 * n + self.nt)

    def pack(self, x, v, e):
        return np.concatenate([np.ravel(x), np.ravel(v), np.ravel(e)]).astype(float)

    def unpack(self, y):
        sx, sv, se = self.slices
        return y[sx].reshape(-1, 2), y[sv].reshape(-1, 2), y[se]

    def initial_state(self, e0, v0=None):
        v = np.zeros_like(self.X) if v0 is None else np.asarray(v0, dtype=float).reshape(-1, 2)
        v = v.copy()
        v.ravel()[self.constrained] = 0.0
        e0 = np.broadcast_to(np.asarray(e0, dtype=float), (self.nt,))
        return self.pack(self.X, v, e0)

    # -- pointwise physics ---------------------------------------------------

    def quadrature_state(self, y):
        """All quadrature-point intermediates of the stress, as a dict."""
        x, v, e = self.unpack(y)
        sp_ = self.spaces
        mat = self.material
        J, det, Jinv = sp_.geometry(x)
        r = det / self.det0
        rho = mat.rho0 / r
        chi = 1.0 - r
        e_q = sp_.th_interp(e)
        p, P1, P2 = _hugoniot(chi, e_q, mat.rho0, mat.C0, mat.s, mat.gamma0)
        c2_raw = (r ** 2 / mat.rho0) * (P1 + mat.gamma0 * p)
        c2 = np.maximum(c2_raw, C2_FLOOR)
        c = np.sqrt(c2)
        Gv = sp_.kin_ref_grad(v)
        L = fem.matmul2(Gv, Jinv)
        div = L[..., 0, 0] + L[..., 1, 1]
        l = self.l0 * np.sqrt(r)
        mu = viscosity_coefficient(div, rho, c, l, self.visc)
        sigma = mu[..., None, None] * sym(L)
        sigma[..., 0, 0] -= p
        sigma[..., 1, 1] -= p
        return dict(x=x, v=v, e=e, J=J, det=det, Jinv=Jinv, r=r, rho=rho, chi=chi, e_q=e_q,
                    p=p, P1=P1, P2=P2, c2_raw=c2_raw, c=c, Gv=Gv, L=L, div=div, l=l, mu=mu,
                    sigma=sigma)

    def loads(self, qs):
        """Momentum load ``F.1`` (Nk, 2) and energy load ``F^T.v`` (Nt,)."""
        A = fem.stress_moments(qs["sigma"], qs["det"], qs["Jinv"], self.spaces.quad_weights)
        mom = self.spaces.scatter_ref_grad(A)
        en = self.spaces.th_scatter((A * qs["Gv"]).sum(axis=(-1, -2)))
        return mom, en

    def rhs(self, y, t=0.0):
        qs = self.quadrature_state(y)
        mom, en = self.loads(qs)
        dv = -self.Mv.solve(mom.ravel())
        de = self.Me.solve(en)
        return np.concatenate([qs["v"].ravel(), dv, de])

    def system(self, rhs_vjp=None) -> DynamicalSystem:
        if rhs_vjp is None:
            from .adjoint_hydro import hydro_rhs_vjp

            rhs_vjp = lambda y, t, lam: hydro_rhs_vjp(self, y, lam)
        return DynamicalSystem(rhs=self.rhs, rhs_vjp=rhs_vjp, dim=self.dim)

    # -- diagnostics ---------------------------------------------------------

    def cfl_dt(self, y, cfl):
        """``cfl * min l / (c + |v|)`` over all quadrature points."""
        qs = self.quadrature_state(y)
        vq, _ = self.spaces.kin_interp(qs["v"])
        speed = qs["c"] + np.linalg.norm(vq, axis=-1)
        return float(cfl * np.min(qs["l"] / speed))

    def total_energy(self, y):
        _, v, e = self.unpack(y)
        kinetic = 0.5 * float(sum(v[:, c] @ (self.Ms @ v[:, c]) for c in range(2)))
        internal = float(np.sum(self.Me.apply(e)))
        return {"kinetic": kinetic, "internal": internal, "total": kinetic + internal}

    def element_mass(self, y):
        """``int_e rho dx`` per element using the pointwise density."""
        x, _, _ = self.unpack(y)
        _, det, _ = self.spaces.geometry(x)
        rho = self.material.rho0 * self.det0 / det
        return (rho * det) @ self.spaces.quad_weights

    def density(self, y):
        x, _, _ = self.unpack(y)
        _, det, _ = self.spaces.geometry(x)
        return self.material.rho0 * self.det0 / det


# -- time marching -----------------------------------------------------------

@dataclass
class ForwardResult:
    trajectory: Trajectory
    final: np.ndarray
    schedule: list = field(default_factory=list)


def simulate(problem: HydroProblem, y0, T, cfl=0.25, dt=None, schedule=None, integrator="rk4",
             store=None, keep_states=False, callback=None, system=None) -> ForwardResult:
    """March ``y0`` to time ``T``.

    Step sizes come from ``schedule`` when given (replay), else a fixed ``dt``,
    else the CFL estimate at the start of each step.  The last step is clipped
    to land on ``T``.  The realized schedule is returned so an adjoint or a
    perturbed run can replay it exactly.
    """
    step, _ = INTEGRATORS[integrator]
    sys_ = system if system is not None else problem.system(rhs_vjp=lambda y, t, l: None)
    y = np.array(y0, dtype=float, copy=True)
    t = 0.0
    times = [t]
    states = [y] if keep_states else None
    realized = []
    if store is not None:
        store.offer(0, y)
    if callback is not None:
        callback(0, t, y)
    k = 0
    while True:
        if schedule is not None:
            if k >= len(schedule):
                break
            h = schedule[k]
        else:
            if t >= T * (1 - 1e-14):
                break
            h = dt if dt is not None else problem.cfl_dt(y, cfl)
            if t + h > T or T - (t + h) < 1e-12 * T:
                h = T - t
        y = step(sys_, y, t, h)
        t = t + h
        k += 1
        realized.append(h)
        times.append(t)
        if keep_states:
            states.append(y)
        if store is not None:
            store.offer(k, y)
        if callback is not None:
            callback(k, t, y)
    traj = Trajectory(times=times, dt=realized, states=states)
    return ForwardResult(trajectory=traj, final=y, schedule=realized)
