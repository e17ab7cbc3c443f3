"""Explicit time integration with exactly matching discrete adjoints.

Every forward step ``y_{k+1} = G(y_k, dt)`` ships with its vector-Jacobian
product ``xi . dG/dy_k``.  The adjoint steps only ever call the physics
through ``rhs_vjp``, so the time-stepping derivative is independent of the
functional form of the right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CheckpointMiss, NonFiniteState, ObjectiveGradientShapeMismatch


@dataclass(frozen=True)
class DynamicalSystem:
    """``dy/dt = rhs(y, t)`` together with ``rhs_vjp(y, t, lam) = lam . df/dy``."""

    rhs: Callable[[np.ndarray, float], np.ndarray]
    rhs_vjp: Callable[[np.ndarray, float, np.ndarray], np.ndarray]
    dim: int

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be positive")


@dataclass
class Trajectory:
    """Forward history: ``times[k]`` and optionally ``states[k]`` for k < N_t.

    ``dt[k]`` is the size of the step taking state k to state k+1, so
    ``len(dt) == len(times) - 1``.
    """

    times: list
    dt: list
    states: Optional[list] = None

    def __post_init__(self):
        if self.states is not None and len(self.states) != len(self.times):
            raise ValueError("states and times differ in length")
        if len(self.dt) != max(len(self.times) - 1, 0):
            raise ValueError("need exactly one dt per step")
        if any(not (d > 0) for d in self.dt):
            raise ValueError("dt must be strictly positive")

    @property
    def n_states(self):
        return len(self.times)

    def weights(self):
        """Quadrature weights for running objectives ``sum_k o(y_k) w_k``.

        The last state reuses the final step size.
        """
        if not self.dt:
            return [1.0]
        return list(self.dt) + [self.dt[-1]]


@dataclass
class ObjectiveSpec:
    """Running part ``sum_k o(y_k, t_k) w_k`` and/or terminal part ``O(y_f)``."""

    running: Optional[Callable[[np.ndarray, float], float]] = None
    running_grad: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    terminal: Optional[Callable[[np.ndarray], float]] = None
    terminal_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.running is None and self.terminal is None:
            raise ValueError("objective needs a running or a terminal part")
        if (self.running is None) != (self.running_grad is None):
            raise ValueError("running objective and its gradient come together")
        if (self.terminal is None) != (self.terminal_grad is None):
            raise ValueError("terminal objective and its gradient come together")

    def value(self, traj: Trajectory, states: Sequence[np.ndarray]) -> float:
        total = 0.0
        if self.running is not None:
            for y, t, w in zip(states, traj.times, traj.weights()):
                total += self.running(y, t) * w
        if self.terminal is not None:
            total += self.terminal(states[-1])
        return total


def _check(arr, stage, where=""):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteState(stage, where)
    return arr


# -- forward Euler -----------------------------------------------------------

def step_euler(sys: DynamicalSystem, y, t, dt):
    k1 = _check(sys.rhs(y, t), "k1", "euler")
    return y + dt * k1


def adjoint_step_euler(sys: DynamicalSystem, y, t, dt, xi):
    if dt == 0:
        return np.array(xi, dtype=float, copy=True)
    return xi + dt * _check(sys.rhs_vjp(y, t, xi), "k1", "euler adjoint")


# -- classical RK4 -----------------------------------------------------------

def rk4_stages(sys: DynamicalSystem, y, t, dt):
    """Return the stage inputs ``u1..u4`` and slopes ``k1..k4`` of one RK4 step."""
    half = 0.5 * dt
    u1 = y
    k1 = _check(sys.rhs(u1, t), "k1", "rk4")
    u2 = y + half * k1
    k2 = _check(sys.rhs(u2, t + half), "k2", "rk4")
    u3 = y + half * k2
    k3 = _check(sys.rhs(u3, t + half), "k3", "rk4")
    u4 = y + dt * k3
    k4 = _check(sys.rhs(u4, t + dt), "k4", "rk4")
    return (u1, u2, u3, u4), (k1, k2, k3, k4)


def step_rk4(sys: DynamicalSystem, y, t, dt, cache=None):
    """One classical Runge-Kutta step.

    If ``cache`` is a dict it receives the stage slopes under ``"k"`` so the
    matching adjoint step can skip recomputing them.
    """
    _, ks = rk4_stages(sys, y, t, dt)
    if cache is not None:
        cache["k"] = ks
    k1, k2, k3, k4 = ks
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def adjoint_step_rk4(sys: DynamicalSystem, y, t, dt, xi, cache=None):
    """Return ``xi . d y_{k+1} / d y_k`` for the discrete map of :func:`step_rk4`.

    Reverse sweep of the four stages::

        kb4 = dt/6 xi                ub4 = kb4 . J(u4)
        kb3 = dt/3 xi + dt ub4       ub3 = kb3 . J(u3)
        kb2 = dt/3 xi + dt/2 ub3     ub2 = kb2 . J(u2)
        kb1 = dt/6 xi + dt/2 ub2     ub1 = kb1 . J(u1)
        yb  = xi + ub1 + ub2 + ub3 + ub4
    """
    xi = np.asarray(xi, dtype=float)
    if dt == 0:
        return xi.copy()
    half = 0.5 * dt
    if cache is not None and "k" in cache:
        k1, k2, k3, _ = cache["k"]
        us = (y, y + half * k1, y + half * k2, y + dt * k3)
    else:
        us, _ = rk4_stages(sys, y, t, dt)
    u1, u2, u3, u4 = us

    vjp = sys.rhs_vjp
    ub4 = _check(vjp(u4, t + dt, (dt / 6.0) * xi), "k4", "rk4 adjoint")
    ub3 = _check(vjp(u3, t + half, (dt / 3.0) * xi + dt * ub4), "k3", "rk4 adjoint")
    ub2 = _check(vjp(u2, t + half, (dt / 3.0) * xi + half * ub3), "k2", "rk4 adjoint")
    ub1 = _check(vjp(u1, t, (dt / 6.0) * xi + half * ub2), "k1", "rk4 adjoint")
    return xi + ub1 + ub2 + ub3 + ub4


INTEGRATORS = {
    "euler": (step_euler, adjoint_step_euler),
    "rk4": (step_rk4, adjoint_step_rk4),
}


def _integrator(name):
    try:
        return INTEGRATORS[name]
    except KeyError:
        raise ValueError(f"unknown integrator {name!r}; choose from {sorted(INTEGRATORS)}")


def integrate(sys: DynamicalSystem, y0, dt_schedule, t0=0.0, integrator="rk4",
              store=None, keep_states=True, callback=None) -> Trajectory:
    """March ``y0`` through a fixed list of step sizes.

    States are offered to ``store`` (a :class:`~adjhydro.checkpoint.CheckpointStore`)
    as they are produced; ``keep_states=False`` avoids holding the full history.
    """
    step, _ = _integrator(integrator)
    y = np.array(y0, dtype=float, copy=True)
    times = [float(t0)]
    states = [y] if keep_states else None
    if store is not None:
        store.offer(0, y)
    if callback is not None:
        callback(0, times[0], y)
    t = float(t0)
    for k, dt in enumerate(dt_schedule):
        y = step(sys, y, t, dt)
        t = t + dt
        times.append(t)
        if keep_states:
            states.append(y)
        if store is not None:
            store.offer(k + 1, y)
        if callback is not None:
            callback(k + 1, t, y)
    return Trajectory(times=times, dt=[float(d) for d in dt_schedule], states=states)


def _state_source(traj, store):
    if store is not None:
        return store.fetch
    if traj.states is None:
        raise CheckpointMiss("trajectory holds no states and no checkpoint store was given")
    return lambda k: traj.states[k]


def _shape_checked(g, dim, what):
    g = np.asarray(g, dtype=float)
    if g.shape != (dim,):
        raise ObjectiveGradientShapeMismatch(f"{what} has shape {g.shape}, expected ({dim},)")
    return g


def accumulate_gradient(sys: DynamicalSystem, traj: Trajectory, obj: ObjectiveSpec,
                        integrator="rk4", store=None, on_adjoint=None):
    """Gradient of the fully discrete objective with respect to ``y_0``.

    Runs the backward recursion::

        lam_{N-1} = dO/dy_{N-1} + do/dy_{N-1} w_{N-1}
        lam_k     = lam_{k+1} . dy_{k+1}/dy_k + do/dy_k w_k

    ``on_adjoint(k, t_k, lam_k)`` is called for every k, last step first.
    """
    _, adjoint_step = _integrator(integrator)
    fetch = _state_source(traj, store)
    n = traj.n_states
    w = traj.weights()

    y_last = fetch(n - 1)
    lam = np.zeros(sys.dim)
    if obj.terminal_grad is not None:
        lam = lam + _shape_checked(obj.terminal_grad(y_last), sys.dim, "terminal gradient")
    if obj.running_grad is not None:
        lam = lam + w[n - 1] * _shape_checked(
            obj.running_grad(y_last, traj.times[n - 1]), sys.dim, "running gradient")
    if on_adjoint is not None:
        on_adjoint(n - 1, traj.times[n - 1], lam)

    for k in range(n - 2, -1, -1):
        y_k = fetch(k)
        lam = adjoint_step(sys, y_k, traj.times[k], traj.dt[k], lam)
        if obj.running_grad is not None:
            lam = lam + w[k] * _shape_checked(
                obj.running_grad(y_k, traj.times[k]), sys.dim, "running gradient")
        if on_adjoint is not None:
            on_adjoint(k, traj.times[k], lam)
    return lam


def continuous_adjoint_baseline(sys: DynamicalSystem, traj: Trajectory, obj: ObjectiveSpec):
    """Discretize-then-differentiate comparison gradient.

    Integrates ``dlam/dt = -lam . df/dy - do/dy`` backwards from
    ``lam(T) = dO/dy_f`` with a backward-in-time Euler step that evaluates the
    Jacobian at the later forward state.  It is not the exact adjoint of any
    forward integrator and carries an O(dt) error.
    """
    fetch = _state_source(traj, None)
    n = traj.n_states
    y = fetch(n - 1)
    lam = np.zeros(sys.dim)
    if obj.terminal_grad is not None:
        lam = lam + _shape_checked(obj.terminal_grad(y), sys.dim, "terminal gradient")
    for k in range(n - 2, -1, -1):
        t_next = traj.times[k + 1]
        y_next = fetch(k + 1)
        rate = _check(sys.rhs_vjp(y_next, t_next, lam), "k1", "continuous adjoint")
        if obj.running_grad is not None:
            rate = rate + obj.running_grad(y_next, t_next)
        lam = lam + traj.dt[k] * rate
    return lam


# -- gradient verification ---------------------------------------------------

DEFAULT_H = tuple(np.logspace(-1, -4, 8))


@dataclass
class TaylorReport:
    h: np.ndarray
    remainder: np.ndarray
    gradient_error: np.ndarray
    slope: float
    degenerate: bool = False
    fit_slice: slice = field(default_factory=lambda: slice(1, -1))

    def rows(self):
        return list(zip(self.h, self.remainder, self.gradient_error))


def taylor_test(f, df, x, dx, h_list=DEFAULT_H, fit=slice(1, -1)) -> TaylorReport:
    """Taylor remainder check ``T(h) = |f(x + h dx) - f(x) - h df(x).dx| = O(h^2)``.

    ``dx`` is normalized here.  The reported slope is a least-squares fit of
    ``log T`` against ``log h`` over ``h_list[fit]`` (the middle six of the
    default eight values).  An exactly zero remainder makes the fit degenerate;
    the slope is then reported as NaN and ``degenerate`` is set.
    """
    x = np.asarray(x, dtype=float)
    dx = np.asarray(dx, dtype=float)
    dx = dx / np.linalg.norm(dx)
    h = np.asarray(h_list, dtype=float)
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise ValueError("h_list must be positive and strictly decreasing")
    f0 = f(x)
    slope_dir = float(np.dot(df(x), dx))
    rem = np.array([abs(f(x + hi * dx) - f0 - hi * slope_dir) for hi in h])
    grad_err = rem / h
    sel_h, sel_r = h[fit], rem[fit]
    if np.any(sel_r == 0):
        return TaylorReport(h, rem, grad_err, float("nan"), True, fit)
    slope = float(np.polyfit(np.log(sel_h), np.log(sel_r), 1)[0])
    return TaylorReport(h, rem, grad_err, slope, False, fit)


# -- static parameters -------------------------------------------------------

@dataclass(frozen=True)
class ParametricSystem:
    """``dy/dt = rhs(y, t, beta)`` with ``vjp(y, t, beta, lam) -> (lam.df/dy, lam.df/dbeta)``."""

    rhs: Callable[[np.ndarray, float, np.ndarray], np.ndarray]
    vjp: Callable[[np.ndarray, float, np.ndarray, np.ndarray], tuple]
    dim: int


def augment_static(sys: ParametricSystem, n_params: int) -> DynamicalSystem:
    """Promote constant parameters to state with ``d(beta)/dt = 0``.

    The augmented state is ``[y, beta]``.  Stepping it with any integrator
    leaves beta untouched, and the adjoint step returns
    ``[xi_y . dy'/dy, xi_y . dy'/dbeta + xi_beta]``.
    """
    if n_params < 0:
        raise ValueError("n_params must be non-negative")
    n = sys.dim

    def rhs(z, t):
        z = np.asarray(z)
        if z.shape != (n + n_params,):
            raise ValueError(f"augmented state has shape {z.shape}, expected ({n + n_params},)")
        out = np.zeros_like(z, dtype=float)
        out[:n] = sys.rhs(z[:n], t, z[n:])
        return out

    def rhs_vjp(z, t, lam):
        lam = np.asarray(lam)
        if lam.shape != (n + n_params,):
            raise ValueError(f"cotangent has shape {lam.shape}, expected ({n + n_params},)")
        gy, gb = sys.vjp(z[:n], t, z[n:], lam[:n])
        return np.concatenate([np.asarray(gy, dtype=float),
                               np.asarray(gb, dtype=float).reshape(n_params)])

    return DynamicalSystem(rhs=rhs, rhs_vjp=rhs_vjp, dim=n + n_params)
