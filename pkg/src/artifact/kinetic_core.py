"""Velocity and spatial grids, Maxwellians, moments, projections and norms.

Velocity profiles are 1-D arrays over the flattened velocity grid; fields
carry a leading spatial axis, shape ``(Nx, Nv)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateStateError,
    InvalidParameterError,
    ShapeError,
    WeightDominationError,
)

__all__ = [
    "VelocityGrid",
    "SpatialGrid",
    "MaxwellParams",
    "Moments",
    "MacroDecomposition",
    "REFERENCE_STATE",
    "maxwellian",
    "maxwellian_field",
    "moments",
    "moments_field",
    "kernel_basis",
    "project_macro",
    "project_macro_field",
    "weighted_norm",
    "japanese_bracket",
]


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform midpoint tensor grid on ``[-vmax, vmax]^3``.

    Nodes are ordered with the first axis slowest (``indexing='ij'``), so
    the node index of ``(i, j, k)`` is ``(i*N + j)*N + k``.
    """

    n: int
    vmax: float

    def __post_init__(self):
        if int(self.n) < 2 or not np.isfinite(self.vmax) or self.vmax <= 0:
            raise InvalidParameterError(f"invalid velocity grid n={self.n}, vmax={self.vmax}")

    @property
    def dv(self) -> float:
        return 2.0 * self.vmax / self.n

    @property
    def size(self) -> int:
        return self.n**3

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.vmax + self.dv * (np.arange(self.n) + 0.5)

    @cached_property
    def nodes(self) -> np.ndarray:
        c = self.axis
        return np.stack(np.meshgrid(c, c, c, indexing="ij"), axis=-1).reshape(-1, 3)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.dv**3)

    @property
    def cell_volume(self) -> float:
        return self.dv**3

    @cached_property
    def speed2(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.nodes, self.nodes)

    @cached_property
    def mirror(self) -> np.ndarray:
        """Index permutation realising ``v -> -v``."""
        return np.arange(self.size)[::-1].copy()

    @cached_property
    def outer_shell(self) -> np.ndarray:
        """Mask of nodes on the boundary layer of the velocity box."""
        idx = np.arange(self.n)
        edge = (idx == 0) | (idx == self.n - 1)
        e = np.meshgrid(edge, edge, edge, indexing="ij")
        return (e[0] | e[1] | e[2]).reshape(-1)

    def scaled(self, theta: float) -> "VelocityGrid":
        """Same node count with the cutoff scaled by ``sqrt(theta)``."""
        return VelocityGrid(self.n, self.vmax * float(np.sqrt(theta)))

    def check_profile(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[-1] != self.size:
            raise ShapeError(f"profile has {f.shape[-1]} velocity nodes, grid has {self.size}")
        return f


@dataclass(frozen=True)
class SpatialGrid:
    """Cell-centred uniform grid on ``[0, length]`` with walls at both ends."""

    nx: int
    length: float = 1.0

    def __post_init__(self):
        if int(self.nx) < 2 or not self.length > 0:
            raise InvalidParameterError(f"invalid spatial grid nx={self.nx}, L={self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @cached_property
    def centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    # outward normals of the left and right wall (first component only)
    normals = (-1.0, 1.0)


@dataclass(frozen=True)
class MaxwellParams:
    rho: float = 1.0
    u: tuple = (0.0, 0.0, 0.0)
    theta: float = 1.0

    def __post_init__(self):
        u = tuple(float(x) for x in np.broadcast_to(np.asarray(self.u, dtype=float), (3,)))
        object.__setattr__(self, "u", u)
        vals = (self.rho, self.theta) + u
        if not all(np.isfinite(vals)):
            raise InvalidParameterError(f"non-finite Maxwellian parameters {vals}")
        if self.rho <= 0 or self.theta <= 0:
            raise InvalidParameterError(f"need rho > 0 and theta > 0, got rho={self.rho}, theta={self.theta}")

    @property
    def velocity(self) -> np.ndarray:
        return np.asarray(self.u)

    def dominated_by_reference(self) -> bool:
        """True when M_- dominates the tails of M in the sqrt(M_-) weight."""
        return self.theta < 2.0


REFERENCE_STATE = MaxwellParams(1.0, (0.0, 0.0, 0.0), 1.0)


@dataclass(frozen=True)
class Moments:
    params: MaxwellParams
    mass: float
    momentum: np.ndarray
    energy: float


@dataclass(frozen=True)
class MacroDecomposition:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    coefficients: np.ndarray = field(repr=False)  # coordinates in the orthonormal basis


def _gaussian(nodes, rho, u, theta):
    d2 = np.sum((nodes - u) ** 2, axis=-1)
    return rho / (2.0 * np.pi * theta) ** 1.5 * np.exp(-0.5 * d2 / theta)


def maxwellian(p: MaxwellParams, grid: VelocityGrid) -> np.ndarray:
    return _gaussian(grid.nodes, p.rho, p.velocity, p.theta)


def maxwellian_field(rho, u, theta, grid: VelocityGrid) -> np.ndarray:
    """Maxwellians for arrays of states; ``u`` has shape ``(Nx, 3)`` or ``(Nx,)`` (first component)."""
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == rho.ndim:
        u = np.stack([u, np.zeros_like(u), np.zeros_like(u)], axis=-1)
    if np.any(rho <= 0) or np.any(theta <= 0) or not np.all(np.isfinite(rho * theta)):
        raise InvalidParameterError("maxwellian_field needs positive finite rho and theta")
    return _gaussian(grid.nodes[None, :, :], rho[:, None], u[:, None, :], theta[:, None])


def moments_field(f: np.ndarray, grid: VelocityGrid):
    """Return ``(rho, u, theta)`` arrays for a field of profiles."""
    f = grid.check_profile(f)
    w = grid.cell_volume
    rho = f.sum(axis=-1) * w
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        raise DegenerateStateError("non-positive mass moment")
    mom = f @ grid.nodes * w
    en = f @ grid.speed2 * w
    u = mom / rho[..., None]
    theta = (en / rho - np.sum(u * u, axis=-1)) / 3.0
    if np.any(theta <= 0):
        raise DegenerateStateError("non-positive temperature moment")
    return rho, u, theta


def moments(f: np.ndarray, grid: VelocityGrid) -> Moments:
    f = grid.check_profile(f)
    if f.ndim != 1:
        raise ShapeError("moments expects a single velocity profile; use moments_field")
    rho, u, theta = moments_field(f[None], grid)
    w = grid.cell_volume
    return Moments(
        MaxwellParams(float(rho[0]), tuple(u[0]), float(theta[0])),
        float(rho[0]),
        f @ grid.nodes * w,
        float(f @ grid.speed2 * w),
    )


def _basis_polynomials(nodes, u, theta):
    """Polynomial parts psi_k with chi_k = M psi_k / sqrt(rho) in the continuum."""
    V = (nodes - u) / np.sqrt(theta)
    psi = np.empty(V.shape[:-1] + (5,))
    psi[..., 0] = 1.0
    psi[..., 1:4] = V
    psi[..., 4] = (np.sum(V * V, axis=-1) - 3.0) / np.sqrt(6.0)
    return psi


def kernel_basis(p: MaxwellParams, grid: VelocityGrid) -> np.ndarray:
    """Discretely orthonormal basis of span{chi_0..chi_4} in L^2(dv/M), shape (5, Nv)."""
    M = maxwellian(p, grid)
    psi = _basis_polynomials(grid.nodes, p.velocity, p.theta)
    gram = (psi * M[:, None]).T @ psi * grid.cell_volume
    # Cholesky-based Gram-Schmidt keeps the ordering chi_0, chi_i, chi_4
    L = np.linalg.cholesky(gram)
    coef = np.linalg.inv(L)
    return (psi @ coef.T).T * M


def _project(R, M, psi, w):
    """Orthogonal projection onto span{M psi_k} in L^2(dv/M), batched over cells."""
    gram = np.einsum("...vk,...v,...vl->...kl", psi, M, psi) * w
    rhs = np.einsum("...v,...vk->...k", R, psi) * w
    alpha = np.linalg.solve(gram, rhs[..., None])[..., 0]
    p0 = M * np.einsum("...vk,...k->...v", psi, alpha)
    return alpha, p0


def _abc(alpha, rho, theta):
    a = rho * alpha[..., 0]
    b = (rho * np.sqrt(theta))[..., None] * alpha[..., 1:4]
    c = rho * theta * alpha[..., 4] / np.sqrt(6.0)
    return a, b, c


def project_macro(R: np.ndarray, p: MaxwellParams, grid: VelocityGrid) -> MacroDecomposition:
    """Split ``R`` into its kernel part P0 and the microscopic remainder P1.

    The coefficients are those of the orthogonal projection in L^2(dv/M) and
    are returned in the ``(a, b, c)`` parameterisation
    ``P0 = (a/rho) M + b.(v-u)/(rho theta) M + c/(rho theta) (|v-u|^2/theta - 3) M``.
    """
    R = grid.check_profile(R)
    M = maxwellian(p, grid)
    psi = _basis_polynomials(grid.nodes, p.velocity, p.theta)
    alpha, p0 = _project(R, M, psi, grid.cell_volume)
    a, b, c = _abc(alpha, p.rho, p.theta)
    return MacroDecomposition(np.asarray(a), np.asarray(b), np.asarray(c), p0, R - p0, alpha)


def project_macro_field(R, rho, u, theta, grid: VelocityGrid) -> MacroDecomposition:
    """Cell-wise ``project_macro`` for a field; ``u`` may be the first component only."""
    R = grid.check_profile(R)
    rho = np.asarray(rho, float)
    theta = np.asarray(theta, float)
    u = np.asarray(u, float)
    if u.ndim == rho.ndim:
        u = np.stack([u, np.zeros_like(u), np.zeros_like(u)], axis=-1)
    M = maxwellian_field(rho, u, theta, grid)
    psi = _basis_polynomials(grid.nodes[None], u[:, None, :], theta[:, None, None])
    alpha, p0 = _project(R, M, psi, grid.cell_volume)
    a, b, c = _abc(alpha, rho, theta)
    return MacroDecomposition(a, b, c, p0, R - p0, alpha)


def japanese_bracket(grid: VelocityGrid) -> np.ndarray:
    return np.sqrt(1.0 + grid.speed2)


def _check_domination(ratio: np.ndarray, grid: VelocityGrid):
    shell = grid.outer_shell
    r = ratio.reshape(-1, grid.size)
    outer = r[:, shell].max()
    inner = r[:, ~shell].max()
    if outer > inner:
        raise WeightDominationError(
            "weighted profile peaks on the velocity cutoff; sqrt(M_-) does not dominate its tails"
        )


def weighted_norm(
    f: np.ndarray,
    kind: str,
    grid: VelocityGrid | None = None,
    ell: float = 2.0,
    dx: float = 1.0,
) -> float:
    """Discrete norms used by the convergence statements.

    ``L2_sqrtMminus``    sqrt(sum_x sum_v |f|^2 / M_- dv dx)
    ``Linf_wl_sqrtMminus``  max_x,v <v>^ell |f| / sqrt(M_-)
    ``L3_macro``/``L6_macro``  L^p over x of the Euclidean length of macro
    coefficient vectors; ``f`` then has shape ``(Nx, k)``.
    """
    if kind in ("L3_macro", "L6_macro"):
        p = 3.0 if kind == "L3_macro" else 6.0
        m = np.atleast_2d(np.asarray(f, float))
        mag = np.sqrt(np.sum(m * m, axis=-1))
        return float((np.sum(mag**p) * dx) ** (1.0 / p))
    if grid is None:
        raise InvalidParameterError("velocity grid required for kinetic norms")
    f = grid.check_profile(f)
    Mm = maxwellian(REFERENCE_STATE, grid)
    if kind == "L2_sqrtMminus":
        ratio = np.abs(f) / np.sqrt(Mm)
        _check_domination(ratio, grid)
        return float(np.sqrt(np.sum(f * f / Mm) * grid.cell_volume * (dx if f.ndim > 1 else 1.0)))
    if kind == "Linf_wl_sqrtMminus":
        if not ell > 1.5:
            raise InvalidParameterError(f"weight exponent must exceed 3/2, got {ell}")
        ratio = japanese_bracket(grid) ** ell * np.abs(f) / np.sqrt(Mm)
        _check_domination(ratio, grid)
        return float(ratio.max())
    raise InvalidParameterError(f"unknown norm kind {kind!r}")
