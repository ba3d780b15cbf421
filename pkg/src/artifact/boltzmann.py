"""Finite-volume discrete-velocity solver for dF/dt + v1 dF/dx = Q(F, F)/eps in
the slab [0, L] with diffuse reflection at both walls."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .collision import (
    CollisionQuadrature,
    bgk_frequency,
    collision_quadrature,
    conservative_correction,
    discrete_maxwellian,
    nu_M,
    q_full,
)
from .errors import InvalidParameterError, NumericalError, StepSizeError
from .kinetic_core import (
    REFERENCE_STATE,
    SpatialGrid,
    VelocityGrid,
    maxwellian,
    maxwellian_field,
    moments_field,
)

log = logging.getLogger(__name__)

__all__ = [
    "BoundaryFluxes",
    "KineticRunConfig",
    "KineticResult",
    "wall_maxwellian",
    "incoming_mask",
    "diffuse_reflect",
    "transport_step",
    "collision_step",
    "imex_step",
    "initial_profiles",
    "kinetic_run",
    "max_time_step",
]

WALLS = ("left", "right")


def _check_wall(wall):
    if wall not in WALLS:
        raise InvalidParameterError(f"wall must be 'left' or 'right', got {wall!r}")


def incoming_mask(grid: VelocityGrid, wall: str) -> np.ndarray:
    """Velocities entering the slab through ``wall`` (v.n < 0 with n the outward normal)."""
    _check_wall(wall)
    vx = grid.nodes[:, 0]
    return vx > 0 if wall == "left" else vx < 0


def wall_maxwellian(grid: VelocityGrid, wall: str) -> np.ndarray:
    """M^w with u_w = 0, theta_w = 1, scaled so its discrete incoming flux is exactly one."""
    inc = incoming_mask(grid, wall)
    M = maxwellian(REFERENCE_STATE, grid)
    flux = np.sum(np.abs(grid.nodes[inc, 0]) * M[inc]) * grid.cell_volume
    return np.where(inc, M / flux, 0.0)


def _outgoing_flux(F, grid, wall):
    out = ~incoming_mask(grid, wall) & (grid.nodes[:, 0] != 0.0)
    return np.sum(np.abs(grid.nodes[out, 0]) * F[..., out], axis=-1) * grid.cell_volume


def diffuse_reflect(F_wall: np.ndarray, grid: VelocityGrid, wall: str, warn: bool = True) -> np.ndarray:
    """Profile whose incoming half is M^w times the outgoing mass flux of ``F_wall``.

    The outgoing half (and the v1 = 0 plane) is returned unchanged.  Set
    ``warn=False`` for signed perturbations, whose outgoing flux may be negative.
    """
    F_wall = np.asarray(F_wall, float)
    J = _outgoing_flux(F_wall, grid, wall)
    if warn and np.any(J < 0):
        log.warning("negative outgoing wall flux %s at the %s wall", np.min(J), wall)
    inc = incoming_mask(grid, wall)
    Mw = wall_maxwellian(grid, wall)
    return np.where(inc, np.multiply.outer(J, Mw), F_wall)


@dataclass(frozen=True)
class BoundaryFluxes:
    """Outgoing mass flux per wall and the net mass flux after reflection."""

    outgoing: tuple[float, float]
    net: tuple[float, float]


def max_time_step(sgrid: SpatialGrid, grid: VelocityGrid, cfl: float = 1.0) -> float:
    return cfl * sgrid.dx / float(np.max(np.abs(grid.axis)))


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _fluxes(F, grid, scheme):
    """Numerical fluxes v1 F at the Nx + 1 faces; walls closed by diffuse reflection."""
    vx = grid.nodes[:, 0]
    pos = vx > 0
    nx = F.shape[0]
    face = np.empty((nx + 1, F.shape[1]))
    if scheme == "upwind" or nx < 3:
        face[1:-1] = np.where(pos, F[:-1], F[1:])
        face[0] = np.where(pos, 0.0, F[0])
        face[-1] = np.where(pos, F[-1], 0.0)
    elif scheme == "muscl":
        d = np.diff(F, axis=0)
        s = np.zeros_like(F)
        s[1:-1] = _minmod(d[:-1], d[1:])
        # wall cells: one-sided slope for outgoing nodes, refined below for incoming ones
        s[0] = d[0]
        s[-1] = d[-1]
        face[0] = np.where(pos, 0.0, F[0] - 0.5 * s[0])
        face[-1] = np.where(pos, F[-1] + 0.5 * s[-1], 0.0)
        gl = diffuse_reflect(face[0], grid, "left")
        gr = diffuse_reflect(face[-1], grid, "right")
        # incoming nodes see the wall value half a cell away
        s[0] = np.where(pos, _minmod(d[0], 2.0 * (F[0] - gl)), s[0])
        s[-1] = np.where(pos, s[-1], _minmod(d[-1], 2.0 * (gr - F[-1])))
        face[1:-1] = np.where(pos, F[:-1] + 0.5 * s[:-1], F[1:] - 0.5 * s[1:])
        face[0] = np.where(pos, gl, face[0])
        face[-1] = np.where(pos, face[-1], gr)
        return face * vx
    else:
        raise InvalidParameterError(f"unknown transport scheme {scheme!r}")
    face[0] = diffuse_reflect(face[0], grid, "left")
    face[-1] = diffuse_reflect(face[-1], grid, "right")
    return face * vx


def _wall_report(flux, grid):
    w = grid.cell_volume
    vx = grid.nodes[:, 0]
    out_l = -np.sum(np.where(vx < 0, flux[0], 0.0)) * w
    out_r = np.sum(np.where(vx > 0, flux[-1], 0.0)) * w
    return (out_l, out_r), (float(np.sum(flux[0]) * w), float(np.sum(flux[-1]) * w))


def transport_step(
    F: np.ndarray,
    dt: float,
    sgrid: SpatialGrid,
    grid: VelocityGrid,
    scheme: str = "upwind",
    cfl: float = 1.0,
    return_fluxes: bool = False,
):
    """Advance the free-streaming part by ``dt``.

    ``upwind`` is first order with forward Euler; ``muscl`` uses minmod
    slopes and the two-stage SSP Runge-Kutta method.  Mass changes only
    through the wall faces, where the diffuse closure makes the net flux zero.
    """
    if dt <= 0:
        raise StepSizeError(f"time step must be positive, got {dt}")
    limit = max_time_step(sgrid, grid, cfl)
    if dt > limit * (1.0 + 1e-12):
        raise StepSizeError(f"dt = {dt:.3e} exceeds the CFL limit {limit:.3e}")
    F = np.asarray(F, float)
    lam = dt / sgrid.dx

    def rhs(G):
        fl = _fluxes(G, grid, scheme)
        return -lam * np.diff(fl, axis=0), fl

    k1, fl = rhs(F)
    if scheme == "upwind":
        out = F + k1
        fluxes = [fl]
    else:
        F1 = F + k1
        k2, fl2 = rhs(F1)
        out = 0.5 * (F + F1 + k2)
        fluxes = [fl, fl2]
    if not return_fluxes:
        return out
    outg, net = zip(*[_wall_report(f, grid) for f in fluxes])
    avg = lambda xs: tuple(float(np.mean([x[i] for x in xs])) for i in range(2))  # noqa: E731
    return out, BoundaryFluxes(avg(outg), avg(net))


# ------------------------------------------------------------ collisions


@dataclass
class CollisionDiagnostics:
    undershoot: float = 0.0  # largest negative value relative to the peak density
    floored: int = 0


@lru_cache(maxsize=8)
def _peak_frequency(grid: VelocityGrid) -> float:
    return float(np.max(nu_M(REFERENCE_STATE, grid)))


def _reference_frequency(rho, theta, grid):
    """Largest hard-sphere collision frequency over the grid, scaled to the hottest, densest cell."""
    return _peak_frequency(grid) * float(np.max(rho * np.sqrt(theta)))


def collision_step(
    F: np.ndarray,
    dt: float,
    eps: float,
    grid: VelocityGrid,
    backend: str = "bgk",
    quad: CollisionQuadrature | None = None,
    floor: bool = False,
    diagnostics: CollisionDiagnostics | None = None,
) -> np.ndarray:
    """Stiff collision update over ``dt`` for every cell.

    ``nu (M_F - F)`` is integrated exactly and the remainder
    ``D = Q(F,F) - nu (M_F - F)`` is frozen over the step:
    ``F+ = M_F + D/nu + exp(-nu dt/eps) (F - M_F - D/nu)``.  For BGK ``D = 0``.
    Mass, momentum and energy are unchanged because M_F matches the discrete
    moments of F and D is conservative.
    """
    if eps <= 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    M, (rho, _, theta) = discrete_maxwellian(F, grid)
    if backend == "bgk":
        nu = bgk_frequency(rho, theta)[:, None]
        out = M + np.exp(-nu * dt / eps) * (F - M)
    elif backend == "hard-sphere":
        quad = quad or collision_quadrature(grid)
        nu = _reference_frequency(rho, theta, grid)
        D = q_full(F, F, quad) - nu * (M - F)
        D = conservative_correction(D, grid)
        out = M + D / nu + math.exp(-nu * dt / eps) * (F - M - D / nu)
    else:
        raise InvalidParameterError(f"unknown collision backend {backend!r}")
    neg = out.min()
    if neg < 0:
        rel = -neg / out.max()
        if diagnostics is not None:
            diagnostics.undershoot = max(diagnostics.undershoot, rel)
        log.debug("negative undershoot %.3e of peak", rel)
        if floor:
            mass = out.sum(axis=1, keepdims=True)
            out = np.maximum(out, 0.0)
            out *= mass / out.sum(axis=1, keepdims=True)
            if diagnostics is not None:
                diagnostics.floored += 1
    return out


def imex_step(
    F: np.ndarray,
    dt: float,
    eps: float,
    sgrid: SpatialGrid,
    grid: VelocityGrid,
    backend: str = "bgk",
    scheme: str = "upwind",
    quad: CollisionQuadrature | None = None,
    splitting: str = "strang",
    cfl: float = 1.0,
    diagnostics: CollisionDiagnostics | None = None,
) -> np.ndarray:
    """One split step: transport/collision/transport (Strang) or transport then collision (Lie)."""
    if splitting == "strang":
        F = transport_step(F, 0.5 * dt, sgrid, grid, scheme, cfl)
        F = collision_step(F, dt, eps, grid, backend, quad, diagnostics=diagnostics)
        return transport_step(F, 0.5 * dt, sgrid, grid, scheme, cfl)
    if splitting == "lie":
        F = transport_step(F, dt, sgrid, grid, scheme, cfl)
        return collision_step(F, dt, eps, grid, backend, quad, diagnostics=diagnostics)
    raise InvalidParameterError(f"unknown splitting {splitting!r}")


# ------------------------------------------------------------ runs


def initial_profiles(x: np.ndarray, amplitude: float, profile: str = "bump"):
    """Smooth initial (rho, u1, theta); u1 = 0 and theta = 1 at both walls.

    ``bump``: rho - 1 = A cos(pi x), u1 = A sin(2 pi x), theta - 1 = A sin(pi x)^2
    on the unit slab; ``constant`` returns the reference state.
    """
    x = np.asarray(x, float)
    if profile == "constant":
        return np.ones_like(x), np.zeros_like(x), np.ones_like(x)
    if profile == "bump":
        return (
            1.0 + amplitude * np.cos(np.pi * x),
            amplitude * np.sin(2.0 * np.pi * x),
            1.0 + amplitude * np.sin(np.pi * x) ** 2,
        )
    raise InvalidParameterError(f"unknown initial profile {profile!r}")


@dataclass(frozen=True)
class KineticRunConfig:
    eps: float
    T: float
    cfl: float = 0.9
    nx: int = 64
    nv: int = 16
    vmax: float = 7.0
    backend: str = "bgk"
    scheme: str = "upwind"
    splitting: str = "strang"
    kappa0: float = 0.1
    profile: str = "bump"
    n_outputs: int = 10
    design: str = "lebedev26"

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidParameterError("eps must be positive")
        if not 0 < self.cfl <= 1:
            raise InvalidParameterError("CFL number must lie in (0, 1]")
        if not self.T > 0:
            raise InvalidParameterError("final time must be positive")
        if self.n_outputs < 1:
            raise InvalidParameterError("need at least one output")

    @property
    def amplitude(self) -> float:
        return self.kappa0 * self.eps

    def grids(self):
        return SpatialGrid(self.nx), VelocityGrid(self.nv, self.vmax)

    def schedule(self):
        """(dt, steps per output): the largest admissible dt that lands on every output time."""
        sgrid, grid = self.grids()
        interval = self.T / self.n_outputs
        k = max(1, math.ceil(interval / max_time_step(sgrid, grid, self.cfl) - 1e-12))
        return interval / k, k


@dataclass
class KineticResult:
    config: KineticRunConfig
    times: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    u: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    undershoot: float = 0.0
    final: np.ndarray | None = None
    aborted: str | None = None

    @property
    def mass_drift(self) -> float:
        m = np.asarray(self.mass)
        return float(np.max(np.abs(m - m[0])) / abs(m[0]))


def _entropy(F, grid, dx):
    Fp = np.where(F > 0, F, 1.0)
    return float(np.sum(np.where(F > 0, F * np.log(Fp), 0.0)) * grid.cell_volume * dx)


def kinetic_run(
    config: KineticRunConfig,
    observer: Callable[[float, np.ndarray], object] | None = None,
    F0: np.ndarray | None = None,
) -> KineticResult:
    """Integrate from the local Maxwellian of the initial profiles to ``T``.

    ``observer(t, F)`` is called at t = 0 and at every output time; its
    return values are collected in ``observations``.
    """
    sgrid, grid = config.grids()
    if F0 is None:
        rho0, u0, th0 = initial_profiles(sgrid.centers, config.amplitude, config.profile)
        F = maxwellian_field(rho0, u0, th0, grid)
    else:
        F = np.array(F0, float)
    quad = collision_quadrature(grid, config.design) if config.backend == "hard-sphere" else None
    dt, k = config.schedule()
    res = KineticResult(config)
    diag = CollisionDiagnostics()

    def record(t, F):
        rho, u, th = moments_field(F, grid)
        res.times.append(t)
        res.rho.append(rho)
        res.u.append(u[:, 0])
        res.theta.append(th)
        res.mass.append(float(np.sum(F) * grid.cell_volume * sgrid.dx))
        res.entropy.append(_entropy(F, grid, sgrid.dx))
        if observer is not None:
            res.observations.append(observer(t, F))

    record(0.0, F)
    step = 0
    for out in range(1, config.n_outputs + 1):
        for _ in range(k):
            F = imex_step(
                F, dt, config.eps, sgrid, grid, config.backend, config.scheme, quad,
                config.splitting, config.cfl, diag,
            )
            step += 1
            if not np.all(np.isfinite(F)):
                res.aborted = f"non-finite values at step {step}"
                res.undershoot = diag.undershoot
                raise NumericalError("kinetic run blew up", {"step": step, "t": step * dt})
        record(out * k * dt, F)
    res.undershoot = diag.undershoot
    res.final = F
    return res
