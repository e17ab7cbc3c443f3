"""Charged particles under mutual Coulomb forces and uniform gravity.

State ``y = [x (N,2), v (N,2), q (N,)]`` flattened; ``dx/dt = v``,
``dv/dt = F``, ``dq/dt = 0``.  Only the initial velocities are controlled
when steering the particles onto a ring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment

from .errors import ParticleOverlap
from .ode_core import DynamicalSystem, ObjectiveSpec, accumulate_gradient, integrate

EPS_MIN = 1e-6


@dataclass
class ParticleState:
    x: np.ndarray
    v: np.ndarray
    q: np.ndarray
    g: float = 1.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1, 2)
        self.v = np.asarray(self.v, dtype=float).reshape(-1, 2)
        self.q = np.asarray(self.q, dtype=float).ravel()
        if not (len(self.x) == len(self.v) == len(self.q)):
            raise ValueError("x, v and q must describe the same number of particles")

    @property
    def n(self):
        return len(self.q)

    def pack(self):
        return np.concatenate([self.x.ravel(), self.v.ravel(), self.q])

    @classmethod
    def unpack(cls, y, g=1.0):
        n = len(y) // 5
        return cls(y[:2 * n], y[2 * n:4 * n], y[4 * n:], g)


@njit(cache=True)
def _min_distance(x):
    n = x.shape[0]
    best = np.inf
    for i in range(n):
        for j in range(i + 1, n):
            d = np.sqrt((x[i, 0] - x[j, 0]) ** 2 + (x[i, 1] - x[j, 1]) ** 2)
            if d < best:
                best = d
    return best


@njit(cache=True)
def _coulomb(x, q):
    n = x.shape[0]
    F = np.zeros((n, 2))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            rx = x[i, 0] - x[j, 0]
            ry = x[i, 1] - x[j, 1]
            inv3 = (rx * rx + ry * ry) ** -1.5
            F[i, 0] += q[i] * q[j] * rx * inv3
            F[i, 1] += q[i] * q[j] * ry * inv3
    return F


@njit(cache=True)
def _coulomb_vjp(x, q, lam):
    n = x.shape[0]
    xbar = np.zeros((n, 2))
    qbar = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            rx = x[i, 0] - x[j, 0]
            ry = x[i, 1] - x[j, 1]
            d2 = rx * rx + ry * ry
            inv3 = d2 ** -1.5
            inv5 = d2 ** -2.5
            dlx = lam[i, 0] - lam[j, 0]
            dly = lam[i, 1] - lam[j, 1]
            rdl = rx * dlx + ry * dly
            qq = q[i] * q[j]
            # dK/dr = I/|r|^3 - 3 r r^T/|r|^5 applied to (lam_i - lam_j)
            xbar[i, 0] += qq * (dlx * inv3 - 3.0 * rdl * inv5 * rx)
            xbar[i, 1] += qq * (dly * inv3 - 3.0 * rdl * inv5 * ry)
            qbar[i] += q[j] * rdl * inv3
    return xbar, qbar


def _guard(x):
    if len(x) > 1:
        dmin = _min_distance(x)
        if dmin < EPS_MIN:
            raise ParticleOverlap(f"particles closer than {EPS_MIN} (distance {dmin:.3e})")


def forces(x, q, g=1.0):
    """``F_i = sum_j q_i q_j r_ij / |r_ij|^3 - g e_2``."""
    x = np.ascontiguousarray(x, dtype=float).reshape(-1, 2)
    q = np.ascontiguousarray(q, dtype=float)
    _guard(x)
    F = _coulomb(x, q)
    F[:, 1] -= g
    return F


def forces_vjp(x, q, lam):
    """Cotangents of ``sum_i lam_i . F_i`` with respect to ``x`` and ``q``."""
    x = np.ascontiguousarray(x, dtype=float).reshape(-1, 2)
    _guard(x)
    return _coulomb_vjp(x, np.ascontiguousarray(q, dtype=float),
                        np.ascontiguousarray(lam, dtype=float).reshape(-1, 2))


def particle_system(n, g=1.0) -> DynamicalSystem:
    def rhs(y, t):
        x = y[:2 * n].reshape(n, 2)
        q = y[4 * n:]
        return np.concatenate([y[2 * n:4 * n], forces(x, q, g).ravel(), np.zeros(n)])

    def rhs_vjp(y, t, lam):
        x = y[:2 * n].reshape(n, 2)
        q = y[4 * n:]
        xbar, qbar = forces_vjp(x, q, lam[2 * n:4 * n].reshape(n, 2))
        return np.concatenate([xbar.ravel(), lam[:2 * n], qbar])

    return DynamicalSystem(rhs=rhs, rhs_vjp=rhs_vjp, dim=5 * n)


def circle_targets(n_p, R):
    k = np.arange(n_p)
    ang = 2.0 * np.pi * k / n_p
    return R * np.column_stack([np.cos(ang), -np.sin(ang)])


def circle_objective(x_f, R=1.0, n_p=None):
    """``1/2 sum_i |x_i - x_i*|^2`` with targets evenly spaced on a circle of radius ``R``."""
    if not R > 0:
        raise ValueError("R must be positive")
    x_f = np.asarray(x_f, dtype=float).reshape(-1, 2)
    n_p = len(x_f) if n_p is None else n_p
    d = x_f - circle_targets(n_p, R)
    return 0.5 * float(np.sum(d * d))


def circle_objective_spec(n, R=1.0):
    target = circle_targets(n, R)

    def value(y):
        return circle_objective(y[:2 * n], R, n)

    def grad(y):
        out = np.zeros(5 * n)
        out[:2 * n] = (y[:2 * n].reshape(n, 2) - target).ravel()
        return out

    return ObjectiveSpec(terminal=value, terminal_grad=grad)


def label_by_matching(x, targets):
    """Reorder positions so particle ``i`` is the one assigned to target ``i``.

    Uses the assignment minimizing the summed squared distances, whose
    straight start-to-target paths never cross.
    """
    cost = ((x[:, None, :] - targets[None, :, :]) ** 2).sum(axis=-1)
    rows, cols = linear_sum_assignment(cost)
    out = np.empty_like(x)
    out[cols] = x[rows]
    return out


def random_start(n=8, seed=0, min_dist=1.0, q=1.0, g=1.0, box=(-2.0, 2.0), R=2.0):
    """Uniform positions in ``box`` squared (close pairs rejected), zero velocity, equal charges.

    With ``R`` given, particles are labelled by optimal matching to the ring
    targets of that radius (see :func:`label_by_matching`).
    """
    rng = np.random.default_rng(seed)
    lo, hi = box
    pts = []
    for _ in range(100_000 * n):
        if len(pts) == n:
            break
        p = lo + (hi - lo) * rng.random(2)
        if all(np.linalg.norm(p - o) >= min_dist for o in pts):
            pts.append(p)
    if len(pts) < n:
        raise ValueError(f"could not place {n} particles {min_dist} apart in the box")
    x = np.array(pts)
    if R is not None:
        x = label_by_matching(x, circle_targets(n, R))
    return ParticleState(x, np.zeros((n, 2)), np.full(n, q), g)


def velocity_mask(n):
    m = np.zeros(5 * n, dtype=bool)
    m[2 * n:4 * n] = True
    return m


@dataclass
class ParticleProblem:
    n: int
    T: float = 1.0
    dt: float = 1e-3
    R: float = 2.0
    g: float = 1.0

    def __post_init__(self):
        self.system = particle_system(self.n, self.g)
        self.objective = circle_objective_spec(self.n, self.R)
        steps = int(round(self.T / self.dt))
        self.schedule = [self.T / steps] * steps

    def value(self, y0):
        return self.objective.terminal(self.final_state(y0))

    def value_and_grad(self, y0):
        tr = integrate(self.system, y0, self.schedule)
        f = self.objective.terminal(tr.states[-1])
        return f, accumulate_gradient(self.system, tr, self.objective)

    def final_state(self, y0):
        integrate(self.system, y0, self.schedule, keep_states=False, callback=self._remember)
        return self._last

    def _remember(self, k, t, y):
        self._last = y


@dataclass
class ParticleHistory:
    iteration: int
    objective: float
    grad_norm: float


def optimize_initial_velocities(s0: ParticleState, R=2.0, T=1.0, dt=1e-3, iters=200,
                                alpha0=1.0, max_halvings=30, grad_tol=1e-14, callback=None):
    """Polak-Ribière conjugate gradients on the initial velocities.

    Position and charge components of every gradient are zeroed, so only
    ``v`` changes.  Each step backtracks from the last accepted step length
    (doubled) until the objective decreases.
    """
    prob = ParticleProblem(s0.n, T, dt, R, s0.g)
    mask = velocity_mask(s0.n)
    y = s0.pack()
    f, g = prob.value_and_grad(y)
    g = np.where(mask, g, 0.0)
    d = -g
    alpha = alpha0
    hist = [ParticleHistory(0, f, float(np.linalg.norm(g)))]
    if callback is not None:
        callback(hist[-1])
    for it in range(1, iters + 1):
        if np.linalg.norm(g) <= grad_tol:
            break
        slope = g @ d
        if slope >= 0:          # not a descent direction: restart
            d = -g
            slope = g @ d
        a = alpha
        f_new = None
        for _ in range(max_halvings):
            try:
                f_new = prob.value(y + a * d)
            except ParticleOverlap:
                f_new = np.inf
            if f_new <= f + 1e-4 * a * slope:
                break
            a *= 0.5
        else:
            break
        y = y + a * d
        f_new, g_new = prob.value_and_grad(y)
        g_new = np.where(mask, g_new, 0.0)
        beta = max(0.0, g_new @ (g_new - g) / (g @ g))
        d = -g_new + beta * d
        f, g = f_new, g_new
        alpha = 2.0 * a
        hist.append(ParticleHistory(it, f, float(np.linalg.norm(g))))
        if callback is not None:
            callback(hist[-1])
    return ParticleState.unpack(y, s0.g), hist
