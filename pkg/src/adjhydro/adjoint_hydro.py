"""Reverse mode of the Lagrangian hydro right-hand side, tracers and the RMI objective.

The RHS cotangent is assembled from a single pass over quadrature points.
With ``mu_v = M_v^{-1} lam_v`` and ``mu_e = M_e^{-1} lam_e`` (both mass
operators are symmetric and fixed), the scalar being differentiated is::

    s = lam_x . v + sum_q A : (-grad_ref(mu_v) + mu_e(q) grad_ref(v)),
    A = w det(J) sigma J^{-T}

and everything else is the chain rule through the stress, the EOS and the
geometry, written out by hand below.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from . import fem
from .checkpoint import CheckpointStore
from .errors import TracerOutsideElement
from .hydro import C2_FLOOR, HydroProblem, ForwardResult, simulate, sym, _sigmoid
from .ode_core import ObjectiveSpec, accumulate_gradient, INTEGRATORS


def hydro_rhs_vjp(problem: HydroProblem, y, lam, qs=None):
    """``lam . d rhs / d y`` for the state ``y``; returns a vector shaped like ``y``."""
    sp_ = problem.spaces
    mat = problem.material
    vp = problem.visc
    lam = np.asarray(lam, dtype=float)
    sx, sv, se = problem.slices
    if qs is None:
        qs = problem.quadrature_state(y)
    wq = sp_.quad_weights

    mu_v = problem.Mv.solve(lam[sv]).reshape(-1, 2)
    mu_e = problem.Me.solve(lam[se])
    Gmu = sp_.kin_ref_grad(mu_v)
    mu_eq = sp_.th_interp(mu_e)
    Gv, Jinv, det, sigma = qs["Gv"], qs["Jinv"], qs["det"], qs["sigma"]

    # s = sum A : W
    W = -Gmu + mu_eq[..., None, None] * Gv
    JinvT = np.swapaxes(Jinv, -1, -2)
    wdet = wq * det
    A = wdet[..., None, None] * (sigma @ JinvT)
    Gv_bar = mu_eq[..., None, None] * A
    e_q_bar = np.zeros_like(det)

    sigma_bar = wdet[..., None, None] * (W @ Jinv)
    det_bar = wq * np.einsum("eqcd,eqcd->eq", sigma @ JinvT, W)
    Jinv_bar = wdet[..., None, None] * (np.swapaxes(W, -1, -2) @ sigma)

    # sigma = -p I + mu sym(L)
    L, mu = qs["L"], qs["mu"]
    p_bar = -(sigma_bar[..., 0, 0] + sigma_bar[..., 1, 1])
    mu_bar = np.einsum("eqcd,eqcd->eq", sigma_bar, sym(L))
    L_bar = mu[..., None, None] * sym(sigma_bar)

    # mu = 0.75 rho l (g1 c + g2 sa) S
    rho, l, c, div = qs["rho"], qs["l"], qs["c"], qs["div"]
    h = vp.h_scale * c
    dv = div * l
    z = 0.5 * dv / h
    th = np.tanh(z)
    sech2 = 1.0 - th ** 2
    sa = dv * th
    S = _sigmoid(-dv / h)
    T = vp.gamma1 * c + vp.gamma2 * sa
    K0 = 0.75 * rho * l
    rho_bar = mu_bar * 0.75 * l * T * S
    l_bar = mu_bar * 0.75 * rho * T * S
    c_bar = mu_bar * K0 * S * vp.gamma1
    sa_bar = mu_bar * K0 * S * vp.gamma2
    S_bar = mu_bar * K0 * T
    dS = S * (1.0 - S)
    dv_bar = sa_bar * (th + z * sech2) - S_bar * dS / h
    h_bar = sa_bar * (-2.0 * z ** 2 * sech2) + S_bar * dS * dv / h ** 2
    c_bar = c_bar + vp.h_scale * h_bar
    div_bar = dv_bar * l
    l_bar = l_bar + dv_bar * div
    L_bar[..., 0, 0] += div_bar
    L_bar[..., 1, 1] += div_bar

    # c = sqrt(max(c2, floor)), c2 = r^2/rho0 (P1 + g0 p)
    r, p, P1, P2 = qs["r"], qs["p"], qs["P1"], qs["P2"]
    rho0, g0 = mat.rho0, mat.gamma0
    c2_bar = np.where(qs["c2_raw"] > C2_FLOOR, c_bar / (2.0 * c), 0.0)
    dc2_dr = (2.0 * r / rho0) * (P1 + g0 * p) - (r ** 2 / rho0) * (P2 + g0 * P1)
    dc2_de = r ** 2 * g0 ** 2
    r_bar = c2_bar * dc2_dr
    e_q_bar += c2_bar * dc2_de

    # p(chi = 1 - r, e)
    r_bar += -p_bar * P1
    e_q_bar += p_bar * rho0 * g0
    # rho = rho0 / r, l = l0 sqrt(r)
    r_bar += -rho_bar * rho0 / r ** 2 + l_bar * l / (2.0 * r)
    det_bar = det_bar + r_bar / problem.det0

    # L = Gv Jinv
    Gv_bar = Gv_bar + L_bar @ JinvT
    Jinv_bar = Jinv_bar + np.swapaxes(Gv, -1, -2) @ L_bar

    J_bar = fem.geometry_vjp(qs["J"], det, Jinv, det_bar, Jinv_bar)
    out = np.empty(problem.dim)
    out[sx] = sp_.scatter_ref_grad(J_bar).ravel()
    out[sv] = sp_.scatter_ref_grad(Gv_bar).ravel() + lam[sx]
    out[se] = sp_.th_scatter(e_q_bar)
    return out


def make_system(problem: HydroProblem):
    return problem.system()


# -- tracers -----------------------------------------------------------------

@dataclass
class TracerSet:
    """Material-point probes at fixed logical mesh coordinates ``points`` (k, 2).

    Logical coordinates are the unwarped grid positions; on a mesh without a
    warp they coincide with the reference configuration.
    """

    problem: HydroProblem
    points: np.ndarray

    def __post_init__(self):
        sp_ = self.problem.spaces
        m = sp_.mesh
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.points = P
        tol = 1e-12 * max(m.Lx, m.Ly)
        hx, hy = m.Lx / m.nx, m.Ly / m.ny
        if np.any(P[:, 0] < -tol) or np.any(P[:, 0] > m.Lx + tol) or \
                np.any(P[:, 1] < -tol) or np.any(P[:, 1] > m.Ly + tol):
            raise TracerOutsideElement("tracer lies outside the reference domain")
        ex = np.clip(np.floor(P[:, 0] / hx).astype(int), 0, m.nx - 1)
        ey = np.clip(np.floor(P[:, 1] / hy).astype(int), 0, m.ny - 1)
        xi = np.column_stack([P[:, 0] / hx - ex, P[:, 1] / hy - ey])
        if np.any(xi < -1e-9) or np.any(xi > 1 + 1e-9):
            raise TracerOutsideElement("tracer reference coordinates outside the unit element")
        self.elements = m.element_index(ex, ey)
        self.xi = np.clip(xi, 0.0, 1.0)
        self.kin_w, _ = fem.tensor_basis(sp_.kin_nodes_1d, self.xi)
        self.th_w, _ = fem.tensor_basis(sp_.th_nodes_1d, self.xi)
        self.kin_idx = sp_.kin_conn[self.elements]
        self.th_idx = sp_.th_conn[self.elements]

    def __len__(self):
        return len(self.points)

    def eval(self, y):
        """Positions (k, 2), velocities (k, 2) and energies (k,) at the tracers."""
        x, v, e = self.problem.unpack(y)
        xt = np.einsum("ka,kac->kc", self.kin_w, x[self.kin_idx])
        vt = np.einsum("ka,kac->kc", self.kin_w, v[self.kin_idx])
        et = np.einsum("ka,ka->k", self.th_w, e[self.th_idx])
        return xt, vt, et

    def vjp(self, x_bar=None, v_bar=None, e_bar=None):
        """Scatter tracer cotangents back to a full state cotangent."""
        prob = self.problem
        out = np.zeros(prob.dim)
        sx, sv, se = prob.slices
        for blk, bar in ((sx, x_bar), (sv, v_bar)):
            if bar is None:
                continue
            g = np.zeros((prob.nk, 2))
            np.add.at(g, self.kin_idx, self.kin_w[..., None] * np.asarray(bar)[:, None, :])
            out[blk] = g.ravel()
        if e_bar is not None:
            g = np.zeros(prob.nt)
            np.add.at(g, self.th_idx, self.th_w * np.asarray(e_bar)[:, None])
            out[se] = g
        return out


# -- RMI objective -------------------------------------------------------------

@dataclass(frozen=True)
class RmiObjectiveParams:
    lambda1: float = 1.0
    lambda2: float = 0.1
    delta: float = 0.1
    tip: int = 0
    outer: tuple = (1, 2)

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("objective weights must be non-negative")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


def rmi_objective(xt, vt, params: RmiObjectiveParams = RmiObjectiveParams()):
    """``1/2 l1 (x1 - x_outer)^2 + l2 / (delta + |v_ave|)`` on x-components."""
    i1 = params.tip
    i2, i3 = params.outer
    x_outer = 0.5 * (xt[i2, 0] + xt[i3, 0])
    v_ave = (vt[i1, 0] + vt[i2, 0] + vt[i3, 0]) / 3.0
    return float(0.5 * params.lambda1 * (xt[i1, 0] - x_outer) ** 2
                 + params.lambda2 / (params.delta + abs(v_ave)))


def rmi_objective_grad(xt, vt, params: RmiObjectiveParams = RmiObjectiveParams()):
    """Seeds ``(dO/dx_tracers, dO/dv_tracers)`` shaped like ``xt``, ``vt``."""
    i1 = params.tip
    i2, i3 = params.outer
    gx = np.zeros_like(xt, dtype=float)
    gv = np.zeros_like(vt, dtype=float)
    jump = xt[i1, 0] - 0.5 * (xt[i2, 0] + xt[i3, 0])
    gx[i1, 0] += params.lambda1 * jump
    gx[i2, 0] -= 0.5 * params.lambda1 * jump
    gx[i3, 0] -= 0.5 * params.lambda1 * jump
    v_ave = (vt[i1, 0] + vt[i2, 0] + vt[i3, 0]) / 3.0
    dv = -params.lambda2 / (params.delta + abs(v_ave)) ** 2 * np.sign(v_ave) / 3.0
    for i in (i1, i2, i3):
        gv[i, 0] += dv
    return gx, gv


def jet_length(xt, params: RmiObjectiveParams = RmiObjectiveParams()):
    i2, i3 = params.outer
    return float(abs(xt[params.tip, 0] - 0.5 * (xt[i2, 0] + xt[i3, 0])))


def average_velocity(vt, params: RmiObjectiveParams = RmiObjectiveParams()):
    i2, i3 = params.outer
    return float((vt[params.tip, 0] + vt[i2, 0] + vt[i3, 0]) / 3.0)


def terminal_objective(tracers: TracerSet, params: RmiObjectiveParams) -> ObjectiveSpec:
    def value(y):
        xt, vt, _ = tracers.eval(y)
        return rmi_objective(xt, vt, params)

    def grad(y):
        xt, vt, _ = tracers.eval(y)
        gx, gv = rmi_objective_grad(xt, vt, params)
        return tracers.vjp(gx, gv)

    return ObjectiveSpec(terminal=value, terminal_grad=grad)


# -- filtering and masking -------------------------------------------------------

def unit_mass(problem: HydroProblem):
    """Thermodynamic mass operator of unit density on the reference configuration."""
    return fem.thermo_mass(problem.spaces, problem.det0)


def filter_gradient(g, M1: fem.MassOperator):
    """Riesz representative ``M_1^{-1} g`` of a raw gradient covector."""
    return M1.solve(np.asarray(g, dtype=float))


def mask_control(g, dofs):
    """Zero every component of ``g`` outside the index set ``dofs``."""
    g = np.asarray(g, dtype=float)
    out = np.zeros_like(g)
    dofs = np.asarray(dofs, dtype=int)
    out[dofs] = g[dofs]
    return out


# -- end-to-end gradient ---------------------------------------------------------

@dataclass
class GradientResult:
    objective: float
    gradient: np.ndarray          # d O / d y0, full state
    forward: ForwardResult
    store_report: dict
    final_tracers: tuple

    def energy_block(self, problem: HydroProblem):
        return self.gradient[problem.slices[2]]


def objective_and_gradient(problem: HydroProblem, y0, T, tracers: TracerSet,
                           params: RmiObjectiveParams, cfl=0.25, schedule=None,
                           integrator="rk4", capacity=None, on_adjoint=None) -> GradientResult:
    """Forward run, terminal RMI objective and its discrete-adjoint gradient.

    States are held in a :class:`CheckpointStore` of ``capacity`` slots
    (all states when ``None``).  Passing ``schedule`` replays a recorded
    step-size sequence, which keeps the discrete map fixed across calls.
    """
    system = problem.system()
    step, _ = INTEGRATORS[integrator]
    times, steps = [], []

    def stepper(k, y):
        return step(system, y, times[k], steps[k])

    cap = capacity if capacity is not None else 10 ** 9
    store = CheckpointStore(cap, stepper)
    fwd = simulate(problem, y0, T, cfl=cfl, schedule=schedule, integrator=integrator,
                   store=store, keep_states=False, system=system)
    times.extend(fwd.trajectory.times)
    steps.extend(fwd.schedule)
    obj = terminal_objective(tracers, params)
    value = obj.terminal(fwd.final)
    grad = accumulate_gradient(system, fwd.trajectory, obj, integrator=integrator, store=store,
                               on_adjoint=on_adjoint)
    return GradientResult(value, grad, fwd, store.overhead_report(), tracers.eval(fwd.final))


def objective_only(problem: HydroProblem, y0, T, tracers: TracerSet, params: RmiObjectiveParams,
                   cfl=0.25, schedule=None, integrator="rk4"):
    fwd = simulate(problem, y0, T, cfl=cfl, schedule=schedule, integrator=integrator)
    xt, vt, _ = tracers.eval(fwd.final)
    return rmi_objective(xt, vt, params), fwd
