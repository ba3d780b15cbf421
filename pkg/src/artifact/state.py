"""Fluid state on the slab and its finite-difference derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .kinetic_core import SpatialGrid

__all__ = ["FluidState", "wall_gradient", "wall_second_derivative"]

# wall values of (u1, theta) imposed by the non-slip condition
WALL_U = 0.0
WALL_THETA = 1.0


def wall_gradient(f: np.ndarray, dx: float, wall_value: float | None) -> np.ndarray:
    """Second-order first derivative at cell centres.

    Interior cells use central differences; the two wall cells use the
    quadratic through the wall value and the two nearest centres, or a
    one-sided three-point formula when no wall value is prescribed.
    """
    f = np.asarray(f, float)
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2.0 * dx)
    if wall_value is None:
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
        d[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dx)
    else:
        # nodes at 0, dx/2, 3dx/2 measured from the wall, derivative at dx/2
        w = wall_value
        d[0] = (-8.0 * w + 6.0 * f[0] + 2.0 * f[1]) / (6.0 * dx)
        d[-1] = (8.0 * w - 6.0 * f[-1] - 2.0 * f[-2]) / (6.0 * dx)
    return d


def wall_second_derivative(f: np.ndarray, dx: float, wall_value: float | None) -> np.ndarray:
    f = np.asarray(f, float)
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / dx**2
    if wall_value is None:
        d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / dx**2
        d[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / dx**2
    else:
        w = wall_value
        d[0] = (8.0 * w - 12.0 * f[0] + 4.0 * f[1]) / (3.0 * dx**2)
        d[-1] = (8.0 * w - 12.0 * f[-1] + 4.0 * f[-2]) / (3.0 * dx**2)
    return d


@dataclass(frozen=True)
class FluidState:
    """Density, streamwise velocity and temperature per cell, with derivatives.

    Only the first velocity component is active in the slab; ``velocity``
    returns the full 3-vectors.
    """

    grid: SpatialGrid
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("rho", "u", "theta"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.nx,):
                raise InvalidParameterError(f"{name} must have shape ({self.grid.nx},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.rho <= 0) or np.any(self.theta <= 0):
            raise InvalidParameterError("fluid state must have positive density and temperature")

    @classmethod
    def constant(cls, grid: SpatialGrid, rho=1.0, theta=1.0, t=0.0):
        n = grid.nx
        return cls(grid, np.full(n, rho), np.zeros(n), np.full(n, theta), t)

    @property
    def velocity(self) -> np.ndarray:
        v = np.zeros((self.grid.nx, 3))
        v[:, 0] = self.u
        return v

    @property
    def dudx(self):
        return wall_gradient(self.u, self.grid.dx, WALL_U)

    @property
    def dthdx(self):
        return wall_gradient(self.theta, self.grid.dx, WALL_THETA)

    @property
    def drhodx(self):
        return wall_gradient(self.rho, self.grid.dx, None)

    @property
    def d2udx2(self):
        return wall_second_derivative(self.u, self.grid.dx, WALL_U)

    @property
    def d2thdx2(self):
        return wall_second_derivative(self.theta, self.grid.dx, WALL_THETA)

    def with_fields(self, rho=None, u=None, theta=None, t=None) -> "FluidState":
        return FluidState(
            self.grid,
            self.rho if rho is None else rho,
            self.u if u is None else u,
            self.theta if theta is None else theta,
            self.t if t is None else t,
        )
