"""Small reference systems used for gradient verification."""

import numpy as np

from .ode_core import DynamicalSystem

SPRING_Y0 = np.array([1.1, 5.0])


def spring_system(k=1.0, alpha=1.0, b=1.0):
    """Damped hardening spring ``y'' + k y + alpha y^3 + b y' = 0`` as a first-order system."""

    def rhs(s, t):
        y, yd = s
        return np.array([yd, -k * y - alpha * y ** 3 - b * yd])

    def rhs_vjp(s, t, lam):
        y = s[0]
        return np.array([lam[1] * (-k - 3.0 * alpha * y ** 2), lam[0] - b * lam[1]])

    return DynamicalSystem(rhs=rhs, rhs_vjp=rhs_vjp, dim=2)


def spring_objective():
    from .ode_core import ObjectiveSpec

    return ObjectiveSpec(terminal=lambda s: float(s[0] + s[1]),
                         terminal_grad=lambda s: np.array([1.0, 1.0]))
