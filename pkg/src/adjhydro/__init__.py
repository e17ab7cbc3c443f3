"""Differentiable 2D Lagrangian shock hydrodynamics with discrete adjoints.

Submodules are imported on demand; ``import adjhydro`` itself stays light so
the command-line driver can size thread pools before numpy loads.
"""

__version__ = "0.1.0"
