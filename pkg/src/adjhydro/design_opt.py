"""Constrained gradient descent over an initial-energy design.

Two constraints are handled without multipliers: a fixed total-energy
budget ``w . e = C`` (linear, removed by orthogonal projection) and
non-negativity ``e >= 0`` (enforced by rectifying the perturbation).  The
two maps are alternated until the perturbed design is feasible, ending with
the projection so the budget holds to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConstraintLoopStalled, StepFailure


@dataclass
class DesignVector:
    """Design coefficients with the data of their constraints.

    Attributes
    ----------
    e : full coefficient vector (entries outside ``mask`` are never changed)
    mask : indices that may move
    w : basis integrals ``int phi_i dOmega`` for every coefficient
    """

    e: np.ndarray
    mask: np.ndarray
    w: np.ndarray
    budget: float = field(init=False)

    def __post_init__(self):
        self.e = np.asarray(self.e, dtype=float).copy()
        self.mask = np.asarray(self.mask, dtype=int)
        self.w = np.asarray(self.w, dtype=float)
        self.budget = float(self.w @ self.e)

    @property
    def w_masked(self):
        out = np.zeros_like(self.w)
        out[self.mask] = self.w[self.mask]
        return out

    def budget_error(self, e=None):
        """Relative budget drift (absolute when the budget is zero)."""
        e = self.e if e is None else e
        err = abs(float(self.w @ e) - self.budget)
        return err / abs(self.budget) if self.budget != 0 else err


def project_equality(de, w):
    """Remove the component of ``de`` along ``w``: ``(I - w w^T / |w|^2) de``."""
    de = np.asarray(de, dtype=float)
    w = np.asarray(w, dtype=float)
    ww = w @ w
    if not ww > 0:
        raise ValueError("constraint gradient must be nonzero")
    return de - (w @ de) / ww * w


def rectify(de, e):
    """``ReLU(e + de) - e``: the closest perturbation keeping ``e + de >= 0``."""
    e = np.asarray(e, dtype=float)
    return np.maximum(e + np.asarray(de, dtype=float), 0.0) - e


def infeasibility(x):
    """``max(ReLU(-x))``; zero when every entry is non-negative."""
    return float(np.max(np.maximum(-np.asarray(x), 0.0), initial=0.0))


@dataclass
class ConstrainResult:
    de: np.ndarray
    iterations: int
    error: float


def constrain(de, e, w, tol=1e-10, max_iters=500) -> ConstrainResult:
    """Alternate rectification and projection until ``e + de`` is feasible.

    Each pass applies ``rectify`` then ``project_equality``; the loop stops
    once ``infeasibility(e + de) <= tol``.  Since the projection comes last,
    ``w . de = 0`` up to round-off on return.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    de = np.asarray(de, dtype=float)
    err = np.inf
    for it in range(1, max_iters + 1):
        de = project_equality(rectify(de, e), w)
        err = infeasibility(e + de)
        if err <= tol:
            return ConstrainResult(de, it, err)
    raise ConstraintLoopStalled(err, max_iters)


# -- descent -------------------------------------------------------------------

@dataclass
class DescentOptions:
    alpha: float = 1.0
    max_iters: int = 20
    armijo: float = 1e-4
    max_halvings: int = 20
    growth: float = 1.0          # step multiplier after an accepted step
    line_search: bool = True
    constrained: bool = False
    constrain_tol: float = 1e-10
    constrain_max_iters: int = 500
    grad_tol: float = 0.0


@dataclass
class DescentRecord:
    iteration: int
    objective: float
    grad_norm: float
    constraint_error: float
    alpha: float
    accepted: bool
    constrain_iterations: int = 0


@dataclass
class DescentResult:
    design: DesignVector
    history: list
    failures: list


def descend(design: DesignVector, value_and_grad: Callable, value: Optional[Callable] = None,
            options: DescentOptions = DescentOptions(), transform: Optional[Callable] = None,
            callback: Optional[Callable] = None) -> DescentResult:
    """Projected / rectified gradient descent with Armijo backtracking.

    ``value_and_grad(e) -> (O, dO/de)`` returns the raw gradient covector;
    ``transform`` (filter then mask) turns it into a search direction, which
    is always restricted to ``design.mask``.  ``value(e)`` evaluates trial
    points (defaults to ``value_and_grad(e)[0]``).
    """
    if value is None:
        value = lambda e: value_and_grad(e)[0]
    e = design.e.copy()
    f, g = value_and_grad(e)
    alpha = options.alpha
    history = [DescentRecord(0, f, float(np.linalg.norm(g[design.mask])),
                             design.budget_error(e), 0.0, True)]
    failures = []
    if callback is not None:
        callback(history[-1], e)
    for it in range(1, options.max_iters + 1):
        d = -(transform(g) if transform is not None else g)
        d_masked = np.zeros_like(d)
        d_masked[design.mask] = d[design.mask]
        if not np.any(d_masked) or np.linalg.norm(g[design.mask]) <= options.grad_tol:
            break
        trial_alpha = alpha
        accepted = False
        cits = 0
        for _ in range(options.max_halvings + 1):
            step = trial_alpha * d_masked
            if options.constrained:
                res = constrain(step, e, design.w_masked, options.constrain_tol,
                                options.constrain_max_iters)
                step, cits = res.de, res.iterations
            if not options.line_search:
                accepted = True
                f_new = None
                break
            f_new = value(e + step)
            if f_new <= f + options.armijo * float(g @ step):
                accepted = True
                break
            trial_alpha *= 0.5
        if not accepted:
            err = StepFailure(f"no decrease after {options.max_halvings} halvings at iteration {it}")
            failures.append(err)
            history.append(DescentRecord(it, f, float(np.linalg.norm(g[design.mask])),
                                         design.budget_error(e), trial_alpha, False, cits))
            break
        e = e + step
        f, g = value_and_grad(e)
        alpha = trial_alpha * options.growth
        history.append(DescentRecord(it, f, float(np.linalg.norm(g[design.mask])),
                                     design.budget_error(e), trial_alpha, True, cits))
        if callback is not None:
            callback(history[-1], e)
    design.e = e
    return DescentResult(design, history, failures)
