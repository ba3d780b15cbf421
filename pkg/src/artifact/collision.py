"""Discrete hard-sphere collision operator and the BGK surrogate.

The hard-sphere operator is a conservative discrete-velocity projection
scheme.  Each pre-collision pair of grid nodes scatters into post-collision
directions taken from a rotated spherical design; the off-grid outgoing pair
is represented by two on-grid pairs whose energies bracket the exact energy,
so every individual collision conserves mass, momentum and energy exactly.
Post-collision values are interpolated as ratios to a reference Maxwellian,
which makes that Maxwellian an exact equilibrium and gives a linearisation
that is symmetric in L^2(dv/M) with exactly five collision invariants.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial.transform import Rotation

from . import _kernels
from .errors import DegenerateStateError, InvalidParameterError, ShapeError
from .kinetic_core import (
    REFERENCE_STATE,
    MaxwellParams,
    VelocityGrid,
    maxwellian,
    maxwellian_field,
    moments_field,
)

log = logging.getLogger(__name__)

__all__ = [
    "angular_design",
    "CollisionQuadrature",
    "collision_quadrature",
    "q_full",
    "q_gain",
    "q_loss",
    "conservative_correction",
    "nu_M",
    "apply_K_M",
    "bgk_frequency",
    "bgk_relax",
    "discrete_maxwellian",
]


def _lebedev26():
    pts, wts = [], []
    for d in range(3):
        for s in (1.0, -1.0):
            e = np.zeros(3)
            e[d] = s
            pts.append(e)
            wts.append(1.0 / 21.0)
    for a in range(3):
        for b in range(a + 1, 3):
            for sa in (1.0, -1.0):
                for sb in (1.0, -1.0):
                    e = np.zeros(3)
                    e[a], e[b] = sa, sb
                    pts.append(e / np.sqrt(2.0))
                    wts.append(4.0 / 105.0)
    for s in np.array(np.meshgrid([1, -1], [1, -1], [1, -1])).T.reshape(-1, 3):
        pts.append(s / np.sqrt(3.0))
        wts.append(9.0 / 280.0)
    return np.array(pts), 4.0 * np.pi * np.array(wts)


def _icosahedron():
    phi = 0.5 * (1.0 + np.sqrt(5.0))
    base = []
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            base += [(0.0, s1, s2 * phi), (s1, s2 * phi, 0.0), (s2 * phi, 0.0, s1)]
    pts = np.array(base)
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    return pts, np.full(len(pts), 4.0 * np.pi / len(pts))


_DESIGNS = {"lebedev26": _lebedev26, "icosahedron": _icosahedron}


def angular_design(name: str):
    """Nodes and weights (summing to 4 pi) of a centrally symmetric spherical rule."""
    try:
        return _DESIGNS[name]()
    except KeyError:
        raise InvalidParameterError(f"unknown angular design {name!r}; choose from {sorted(_DESIGNS)}") from None


def _half(pts, wts):
    """One representative per antipodal pair; sigma and -sigma give the same collision."""
    keep = []
    for k, p in enumerate(pts):
        nz = p[np.flatnonzero(np.abs(p) > 1e-12)[0]]
        if nz > 0:
            keep.append(k)
    return pts[keep], 2.0 * wts[keep]


@dataclass(frozen=True)
class CollisionQuadrature:
    """Immutable collision table on a velocity grid."""

    grid: VelocityGrid
    design: str
    pair_radius: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    I: np.ndarray = field(repr=False)
    J: np.ndarray = field(repr=False)
    LA: np.ndarray = field(repr=False)
    LB: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)
    rejected: int = 0
    _rates: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_collisions(self) -> int:
        return int(self.I.shape[0])

    def tables(self):
        return self.I, self.J, self.LA, self.LB, self.R, self.K

    def weighted_rates(self, p: MaxwellParams) -> np.ndarray:
        """Rates times M_p at both pre-collision nodes; the last state is cached."""
        with _CACHE_LOCK:
            KM = self._rates.get(p)
            if KM is None:
                if len(self._rates) >= 4:
                    self._rates.pop(next(iter(self._rates)))
                KM = _kernels.weighted_rates(self.I, self.J, self.K, maxwellian(p, self.grid))
                self._rates[p] = KM
            return KM

    @cached_property
    def distance(self) -> np.ndarray:
        """Dense matrix of relative speeds |v_i - v_j| (for loss terms)."""
        v = self.grid.nodes
        d2 = self.grid.speed2[:, None] + self.grid.speed2[None, :] - 2.0 * v @ v.T
        return np.sqrt(np.maximum(d2, 0.0))


_CACHE: dict = {}
_CACHE_LOCK = threading.RLock()


def collision_quadrature(
    grid: VelocityGrid,
    design: str = "lebedev26",
    pair_radius: float | None = None,
    n_rotations: int = 1024,
    seed: int = 20240611,
) -> CollisionQuadrature:
    """Build (or fetch from the in-process cache) the collision table.

    Pairs are retained when at least one member lies within ``pair_radius``
    of the origin (default ``0.6 vmax``); pairs of two tail nodes carry
    negligible Maxwellian weight and are skipped for speed.  Post-collision
    directions are the design nodes rotated by one of ``n_rotations`` fixed
    pseudo-random rotations chosen per pair, which removes the alignment of
    the rule with the grid axes.
    """
    if pair_radius is None:
        pair_radius = 0.6 * grid.vmax
    key = (grid.n, grid.vmax, design, float(pair_radius), n_rotations, seed)
    with _CACHE_LOCK:
        if key in _CACHE:
            return _CACHE[key]
        pts, wts = angular_design(design)
        hp, hw = _half(pts, wts)
        rots = Rotation.random(n_rotations, random_state=seed).as_matrix()
        I, J, LA, LB, R, K, rej = _kernels.build_table(
            grid.n, grid.axis, grid.dv, float(pair_radius) ** 2, hp, hw / (4.0 * np.pi), rots, 7919, 104729
        )
        quad = CollisionQuadrature(grid, design, float(pair_radius), pts, wts, I, J, LA, LB, R, K, int(rej))
        log.info("collision table: %d collisions, %d rejected directions", quad.n_collisions, rej)
        _CACHE[key] = quad
        return quad


def _raw(F1, F2, quad, reference):
    grid = quad.grid
    F1 = grid.check_profile(F1)
    F2 = grid.check_profile(F2)
    if F1.shape != F2.shape:
        raise ShapeError(f"profile shapes differ: {F1.shape} vs {F2.shape}")
    p = REFERENCE_STATE if reference is None else reference
    Mr = maxwellian(p, grid)
    KM = quad.weighted_rates(p)
    h1 = np.ascontiguousarray(F1 / Mr)
    h2 = np.ascontiguousarray(F2 / Mr)
    out = np.zeros(F1.shape)
    I, J, LA, LB, R, _ = quad.tables()
    if F1.ndim == 1:
        _kernels.collide(I, J, LA, LB, R, KM, h1, h2, out)
    else:
        lead = F1.shape[:-1]
        h1 = np.ascontiguousarray(h1.reshape(-1, grid.size).T)
        h2 = np.ascontiguousarray(h2.reshape(-1, grid.size).T)
        outT = np.zeros_like(h1)
        _kernels.collide_field(I, J, LA, LB, R, KM, h1, h2, outT)
        out = outT.T.reshape(lead + (grid.size,))
    return out


def _invariants(grid):
    v = grid.nodes
    return np.column_stack([np.ones(grid.size), v, grid.speed2])


def conservative_correction(qraw: np.ndarray, grid: VelocityGrid, return_size: bool = False):
    """Remove the mass, momentum and energy content of ``qraw``.

    The correction is the minimum-norm change in L^2(dv/M_-), i.e. it is a
    combination of ``M_- (1, v, |v|^2)``; zero for conservative input.
    """
    q = grid.check_profile(qraw)
    C = _invariants(grid)
    Mm = maxwellian(REFERENCE_STATE, grid)
    WC = C * Mm[:, None]
    gram = C.T @ WC
    mom = q @ C
    coef = np.linalg.solve(gram, mom.T).T
    corr = coef @ WC.T
    out = q - corr
    if return_size:
        size = np.linalg.norm(corr, axis=-1) / np.maximum(np.linalg.norm(q, axis=-1), 1e-300)
        return out, size
    return out


def q_full(F1, F2, quad: CollisionQuadrature, reference: MaxwellParams | None = None, correct=True):
    """Discrete hard-sphere operator, bilinear in ``(F1, F2)``.

    ``reference`` selects the Maxwellian used in the ratio interpolation (the
    global reference state by default); it is an exact equilibrium.
    Accepts single profiles or fields with a leading cell axis.
    """
    out = _raw(F1, F2, quad, reference)
    return conservative_correction(out, quad.grid) if correct else out


def q_loss(F1, F2, quad: CollisionQuadrature):
    """Local loss term F2(v) * 2 pi int |v - v*| F1(v*) dv*."""
    grid = quad.grid
    F1 = grid.check_profile(F1)
    F2 = grid.check_profile(F2)
    nu = F1 @ quad.distance * (2.0 * np.pi * grid.cell_volume)
    return F2 * nu


def q_gain(F1, F2, quad: CollisionQuadrature, reference: MaxwellParams | None = None):
    """Everything in the discrete operator that is not the local loss term."""
    return _raw(F1, F2, quad, reference) + q_loss(F1, F2, quad)


def nu_M(p: MaxwellParams, grid: VelocityGrid) -> np.ndarray:
    """Collision frequency of the Maxwellian ``p`` on the grid nodes."""
    M = maxwellian(p, grid)
    return _kernels.loss_frequency(grid.nodes, grid.cell_volume, M)


def apply_K_M(g, p: MaxwellParams, quad: CollisionQuadrature):
    """K_M g = Q_gain(M,g) - Q_loss(g,M) + Q_gain(g,M), linearised about M itself."""
    M = maxwellian(p, quad.grid)
    if np.ndim(g) > 1:
        M = np.broadcast_to(M, np.shape(g)).copy()
    return q_gain(M, g, quad, p) - q_loss(g, M, quad) + q_gain(g, M, quad, p)


# ---------------------------------------------------------------- BGK backend


def bgk_frequency(rho, theta):
    """nu_M at the bulk velocity of M: 2 pi int |w| M(w) dw = 4 rho sqrt(2 pi theta)."""
    return 4.0 * np.asarray(rho) * np.sqrt(2.0 * np.pi * np.asarray(theta))


def discrete_maxwellian(F: np.ndarray, grid: VelocityGrid, tol: float = 1e-14, maxiter: int = 30):
    """Maxwellian field whose discrete moments equal those of ``F`` to rounding.

    Newton iteration on ``(rho, u, theta)`` per cell, started from the
    continuous moments; it stops once the residual reaches ``tol`` relative or
    stagnates.  Returns the profiles and the fitted parameters.
    """
    F = grid.check_profile(F)
    single = F.ndim == 1
    F2 = np.atleast_2d(F)
    C = _invariants(grid)
    w = grid.cell_volume
    target = F2 @ C * w
    scale = np.abs(target).max(axis=1, keepdims=True)
    rho, u, theta = moments_field(F2, grid)
    best = np.inf
    for _ in range(maxiter):
        M = maxwellian_field(rho, u, theta, grid)
        res = M @ C * w - target
        err = float(np.max(np.abs(res) / scale))
        if err <= tol or err >= 0.5 * best:
            break
        best = err
        # derivatives of M w.r.t. (rho, u, theta)
        dv = grid.nodes[None] - u[:, None, :]
        d2 = np.sum(dv * dv, axis=-1)
        dM = np.empty(M.shape + (5,))
        dM[..., 0] = M / rho[:, None]
        dM[..., 1:4] = M[..., None] * dv / theta[:, None, None]
        dM[..., 4] = M * (0.5 * d2 / theta[:, None] ** 2 - 1.5 / theta[:, None])
        jac = np.matmul(C.T, dM) * w
        step = np.linalg.solve(jac, res[..., None])[..., 0]
        rho = rho - step[:, 0]
        u = u - step[:, 1:4]
        theta = theta - step[:, 4]
        if np.any(rho <= 0) or np.any(theta <= 0):
            raise DegenerateStateError("moment matching produced a non-positive state")
    else:
        M = maxwellian_field(rho, u, theta, grid)
    if single:
        return M[0], (rho[0], u[0], theta[0])
    return M, (rho, u, theta)


def bgk_relax(F: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """nu_ref (M_F - F) with M_F the moment-matched discrete Maxwellian."""
    M, (rho, _, theta) = discrete_maxwellian(F, grid)
    nu = bgk_frequency(rho, theta)
    out = np.asarray(nu)[..., None] * (M - F) if np.ndim(F) > 1 else nu * (M - F)
    return conservative_correction(out, grid)
