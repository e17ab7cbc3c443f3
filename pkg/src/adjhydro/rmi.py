"""Shocked density-interface (Richtmyer-Meshkov) setup.

A heavy slab (``X < interface``) sits against a light one.  The strip
``X < drive_x`` carries extra internal energy that launches a shock towards a
sinusoidally perturbed interface.  Left, top and bottom walls slide; the
right boundary is free.

The mesh is warped so that one grid line follows the perturbed interface,
which keeps every element single-material.  The warp is a per-row shift
that decays linearly to zero at ``drive_x`` and at ``Lx``, so the drive
strip and the outer boundaries stay undeformed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .adjoint_hydro import RmiObjectiveParams, TracerSet, unit_mass
from .hydro import EosParams, HydroProblem, Material, ViscosityParams


@dataclass
class RmiSetup:
    nx: int = 32
    ny: int = 16
    Lx: float = 8.0
    Ly: float = 1.0
    order: int = 2
    interface_x: float = 4.0
    amplitude: float = 0.1
    drive_x: float = 1.0
    drive_energy: float = 0.15
    background_energy: float = 0.0
    left: EosParams = field(default_factory=lambda: EosParams(rho0=10.0))
    right: EosParams = field(default_factory=lambda: EosParams(rho0=1.0))
    visc: ViscosityParams = field(default_factory=ViscosityParams)
    T: float = 7.0
    cfl: float = 0.25
    integrator: str = "rk4"
    tracers: tuple = ()
    objective: RmiObjectiveParams = field(default_factory=RmiObjectiveParams)
    precond: str = "lu"

    def interface(self, Y):
        """Reference interface position ``X_I(Y)``; the heavy side lies at ``X < X_I``."""
        return self.interface_x - self.amplitude * np.sin(np.pi * np.asarray(Y) / self.Ly) ** 2

    def warp(self, P):
        """Logical grid coordinates -> initial positions; the line ``X = interface_x``
        lands on the perturbed interface."""
        X, Y = P[:, 0], P[:, 1]
        a, b, c = self.drive_x, self.interface_x, self.Lx
        hat = np.where(X <= b, (X - a) / (b - a), (c - X) / (c - b))
        hat = np.clip(hat, 0.0, 1.0)
        shift = self.interface(Y) - self.interface_x
        return np.column_stack([X + shift * hat, Y])

    def validate(self):
        h = self.Lx / self.nx
        for name in ("interface_x", "drive_x"):
            k = getattr(self, name) / h
            if abs(k - round(k)) > 1e-9:
                raise ValueError(f"{name} must fall on a grid line (element width {h})")
        if not 0 < self.drive_x < self.interface_x < self.Lx:
            raise ValueError("need 0 < drive_x < interface_x < Lx")
        if self.amplitude < 0 or self.amplitude >= min(self.interface_x - self.drive_x,
                                                       self.Lx - self.interface_x):
            raise ValueError("interface amplitude too large for the warp band")

    def tracer_points(self):
        """Logical coordinates of the tracers (middle, top and bottom of the interface)."""
        if self.tracers:
            return np.asarray(self.tracers, dtype=float)
        b = self.interface_x
        return np.array([[b, 0.5 * self.Ly], [b, self.Ly], [b, 0.0]])


@dataclass
class RmiCase:
    setup: RmiSetup
    problem: HydroProblem
    tracers: TracerSet
    y0: np.ndarray
    control_dofs: np.ndarray
    unit_mass: fem.MassOperator

    @property
    def e0(self):
        return self.y0[self.problem.slices[2]].copy()

    def with_energy(self, e0):
        y = self.y0.copy()
        y[self.problem.slices[2]] = e0
        return y


def build(setup: RmiSetup) -> RmiCase:
    setup.validate()
    mesh = fem.Mesh(setup.nx, setup.ny, setup.Lx, setup.Ly, warp=setup.warp)
    spaces = fem.FESpaces(mesh, setup.order)
    material = Material.from_regions(
        spaces, lambda X: (X[:, 0] >= setup.interface_x).astype(int),
        [setup.left, setup.right], logical=True)
    problem = HydroProblem(spaces, material, setup.visc, precond=setup.precond)
    # design dofs: every energy coefficient of an element lying inside X < drive_x
    centers = spaces.th_coords.reshape(spaces.n_elements, -1, 2).mean(axis=1)
    inside = centers[:, 0] < setup.drive_x
    control = spaces.th_conn[inside].ravel()
    e0 = np.full(problem.nt, setup.background_energy)
    e0[control] = setup.drive_energy
    y0 = problem.initial_state(e0)
    tracers = TracerSet(problem, setup.tracer_points())
    return RmiCase(setup, problem, tracers, y0, np.sort(control), unit_mass(problem))
