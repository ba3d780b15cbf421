"""Linearised operator, constrained inversion, transport coefficients and the
first-order Chapman-Enskog correction built from a fluid state."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import LinearOperator, gmres

from . import _kernels
from .collision import CollisionQuadrature, bgk_frequency, collision_quadrature, nu_M
from .errors import CapacityError, InvalidParameterError, NumericalError
from .kinetic_core import (
    MaxwellParams,
    VelocityGrid,
    kernel_basis,
    maxwellian,
    maxwellian_field,
    project_macro_field,
)
from .sonine import sonine_transport
from .state import WALL_THETA, WALL_U, FluidState

log = logging.getLogger(__name__)

__all__ = [
    "LinearizedOperator",
    "SolveResult",
    "CoercivityReport",
    "TransportTable",
    "assemble_LM",
    "solve_LM",
    "coercivity_probe",
    "transport_coefficients",
    "build_transport_table",
    "bgk_transport_table",
    "burnett_sources",
    "correction_G",
    "correction_G_field",
    "dissipation_H",
    "boundary_source_r",
    "wall_trace",
]

DENSE_LIMIT = 16  # nodes per axis for which dense N^3 x N^3 matrices are allowed


def _tensor_A(V):
    T = V[..., :, None] * V[..., None, :]
    return T - (np.einsum("...ii->...", T) / 3.0)[..., None, None] * np.eye(3)


def _vector_B(V):
    return 0.5 * (np.sum(V * V, axis=-1) - 5.0)[..., None] * V


@dataclass
class LinearizedOperator:
    """L_M on the velocity grid, stored in the symmetric variables y = g / sqrt(M).

    With these variables ``<f, g>_{L^2(dv/M)} = dv^3 y_f . y_g`` and
    ``L g / sqrt(M) = S y``; ``U`` holds the kernel basis, orthonormal in the
    Euclidean sense.
    """

    params: MaxwellParams
    grid: VelocityGrid
    backend: str
    M: np.ndarray
    S: np.ndarray
    U: np.ndarray
    nu: np.ndarray
    quad: CollisionQuadrature | None = None
    _lu: tuple | None = field(default=None, repr=False)

    @property
    def sqrtM(self):
        return np.sqrt(self.M)

    @property
    def chi(self) -> np.ndarray:
        """Kernel basis chi_0..chi_4 as velocity profiles, orthonormal in L^2(dv/M)."""
        return (self.U / np.sqrt(self.grid.cell_volume)).T * self.sqrtM

    def apply(self, g: np.ndarray) -> np.ndarray:
        y = g / self.sqrtM
        return (y @ self.S.T) * self.sqrtM

    def inner(self, f, g) -> float:
        return float(np.sum(f * g / self.M) * self.grid.cell_volume)

    def factorize(self):
        if self._lu is None:
            n = self.grid.size
            B = np.zeros((n + 5, n + 5))
            B[:n, :n] = self.S
            B[:n, n:] = self.U
            B[n:, :n] = self.U.T
            self._lu = sla.lu_factor(B, overwrite_a=True, check_finite=False)
        return self._lu

    def project_out_kernel(self, h):
        y = h / self.sqrtM
        coef = y @ self.U
        return (y - coef @ self.U.T) * self.sqrtM, coef


@dataclass(frozen=True)
class SolveResult:
    g: np.ndarray
    removed: np.ndarray  # kernel components of the right-hand side
    residual: float


@dataclass(frozen=True)
class CoercivityReport:
    delta0: float
    params: MaxwellParams
    grid_n: int
    grid_vmax: float
    backend: str
    kernel_quotients: np.ndarray


def _dense_guard(grid):
    if grid.n > DENSE_LIMIT:
        raise CapacityError(f"dense linearised operator limited to {DENSE_LIMIT}^3 nodes, got {grid.n}^3")


def assemble_LM(
    p: MaxwellParams,
    grid: VelocityGrid,
    backend: str = "hard-sphere",
    quad: CollisionQuadrature | None = None,
) -> LinearizedOperator:
    """Dense linearisation of the collision backend about M_p."""
    _dense_guard(grid)
    M = maxwellian(p, grid)
    sq = np.sqrt(M)
    chi = kernel_basis(p, grid)
    U = (chi / sq).T * np.sqrt(grid.cell_volume)
    if backend == "hard-sphere":
        quad = quad or collision_quadrature(grid)
        A = _kernels.linearization(quad.I, quad.J, quad.LA, quad.LB, quad.R, quad.K, M, grid.size)
        A /= sq[:, None]
        A /= sq[None, :]
        nu = nu_M(p, grid)
        return LinearizedOperator(p, grid, backend, M, A, U, nu, quad)
    if backend == "bgk":
        nu0 = float(bgk_frequency(p.rho, p.theta))
        S = -nu0 * (U @ U.T)
        S[np.diag_indices_from(S)] += nu0
        return LinearizedOperator(p, grid, backend, M, S, U, np.full(grid.size, nu0))
    raise InvalidParameterError(f"unknown collision backend {backend!r}")


def solve_LM(rhs: np.ndarray, op: LinearizedOperator, tol: float = 1e-9) -> SolveResult:
    """Unique g orthogonal to the kernel with L_M g = P1 rhs.

    The kernel part of ``rhs`` is removed first and returned in ``removed``
    (coordinates in the orthonormal kernel basis).  Accepts one profile or a
    stack of right-hand sides.
    """
    rhs = np.asarray(rhs, float)
    p1, removed = op.project_out_kernel(rhs)
    n = op.grid.size
    y = p1 / op.sqrtM
    b = np.concatenate([y, np.zeros(y.shape[:-1] + (5,))], axis=-1)
    sol = sla.lu_solve(op.factorize(), b.T, check_finite=False).T
    g = sol[..., :n] * op.sqrtM
    res_y = sol[..., :n] @ op.S.T - y
    scale = max(float(np.max(np.abs(y))), 1e-300)
    residual = float(np.max(np.abs(res_y))) / scale
    if not np.isfinite(residual) or residual > tol:
        raise NumericalError(
            "constrained solve did not reach tolerance", {"residual": residual, "tol": tol}
        )
    return SolveResult(g, removed, residual)


def coercivity_probe(p: MaxwellParams, op: LinearizedOperator | None = None) -> CoercivityReport:
    """Smallest Rayleigh quotient <L g, g> / <nu g, g> over the kernel complement.

    Solved as a generalised symmetric eigenproblem on the full space with the
    kernel mapped to eigenvalue zero, so the sixth eigenvalue is delta_0.
    """
    op = op or assemble_LM(p, VelocityGrid(16, 7.0))
    if abs(np.linalg.norm(p.velocity)) + abs(p.theta - 1.0) > 0.2:
        log.warning("coercivity probe far from the reference state: %s", p)
    U = op.U
    P = np.eye(op.grid.size) - U @ U.T
    A = P @ op.S @ P
    A = 0.5 * (A + A.T)
    B = P @ (op.nu[:, None] * P)
    B += U @ U.T
    B = 0.5 * (B + B.T)
    try:
        w = sla.eigh(A, B, eigvals_only=True, subset_by_index=[0, 5], check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"generalised eigensolver failed: {exc}") from exc
    # Rayleigh quotients of the kernel directions themselves
    kq = np.einsum("ik,ij,jk->k", U, op.S, U) / np.einsum("ik,i,ik->k", U, op.nu, U)
    return CoercivityReport(float(w[5]), p, op.grid.n, op.grid.vmax, op.backend, kq)


# ------------------------------------------------------------ transport


def burnett_sources(p: MaxwellParams, grid: VelocityGrid):
    """M A(V) (6 independent components) and M B(V) (3 components) on the grid."""
    V = (grid.nodes - p.velocity) / np.sqrt(p.theta)
    M = maxwellian(p, grid)
    A = _tensor_A(V)
    iu = np.triu_indices(3)
    return (A[:, iu[0], iu[1]] * M[:, None]).T, (_vector_B(V) * M[:, None]).T


def _grid_transport(theta, grid, backend, quad):
    p = MaxwellParams(1.0, (0.0, 0.0, 0.0), theta)
    op = assemble_LM(p, grid, backend, quad)
    srcA, srcB = burnett_sources(p, grid)
    solA = solve_LM(srcA, op)
    solB = solve_LM(srcB, op)
    V = grid.nodes / np.sqrt(theta)
    A = _tensor_A(V)
    iu = np.triu_indices(3)
    mult = np.where(iu[0] == iu[1], 1.0, 2.0)  # off-diagonal components appear twice in A:A
    w = grid.cell_volume
    mu = theta / 10.0 * w * np.sum(mult[:, None] * A[:, iu[0], iu[1]].T * solA.g)
    kappa = theta / 3.0 * w * np.sum(_vector_B(V).T * solB.g)
    # the grid has cubic, not rotational, symmetry: the normal-stress component
    # (the only one active in the slab) has its own viscosity
    mu_slab = 0.75 * theta * w * np.sum(A[:, 0, 0] * solA.g[0])
    residual = max(solA.residual, solB.residual)
    return mu, kappa, mu_slab, solA.g[0], solB.g[0], residual


@dataclass(frozen=True)
class TransportCoefficients:
    theta: float
    mu: float
    kappa: float
    A_hat: np.ndarray | None  # L^{-1}(M A_11) on the grid
    B_hat: np.ndarray | None  # L^{-1}(M B_1) on the grid
    basis_size: int
    residual: float
    method: str
    mu_slab: float | None = None  # (3/4) theta int A_11 L^{-1}(M A_11); equals mu for an isotropic operator


def transport_coefficients(
    theta: float,
    backend: str = "hard-sphere",
    method: str = "grid",
    grid: VelocityGrid | None = None,
    quad: CollisionQuadrature | None = None,
    order: int = 4,
) -> TransportCoefficients:
    """mu(theta) and kappa(theta) evaluated at rho = 1, u = 0.

    ``method='grid'`` inverts the discrete operator of ``backend`` on the
    velocity grid (and returns the Burnett profiles); ``method='sonine'``
    uses the continuous hard-sphere operator in an ``order``-term Sonine basis.
    """
    if not (0.0 < theta < 2.0) or not np.isfinite(theta):
        raise InvalidParameterError(f"theta must lie in (0, 2), got {theta}")
    if method == "sonine":
        if backend != "hard-sphere":
            raise InvalidParameterError("the Sonine path is implemented for hard spheres only")
        r = sonine_transport(theta, order)
        return TransportCoefficients(theta, r.mu, r.kappa, None, None, order, 0.0, method, r.mu)
    if method != "grid":
        raise InvalidParameterError(f"unknown method {method!r}")
    grid = grid or VelocityGrid(16, 7.0)
    mu, kappa, mu_slab, Ah, Bh, res = _grid_transport(theta, grid, backend, quad)
    if not (mu > 0 and kappa > 0 and mu_slab > 0):
        raise NumericalError("non-positive transport coefficient", {"mu": mu, "kappa": kappa})
    return TransportCoefficients(theta, float(mu), float(kappa), Ah, Bh, grid.size, res, method, float(mu_slab))


@dataclass
class TransportTable:
    """mu, kappa sampled in theta; cubic interpolation of mu/sqrt(theta), kappa/sqrt(theta)."""

    thetas: np.ndarray
    mu_values: np.ndarray
    kappa_values: np.ndarray
    basis_size: int
    residuals: np.ndarray
    label: str = ""
    A_hat: list = field(default_factory=list, repr=False)
    B_hat: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, float)
        order = np.argsort(self.thetas)
        self.thetas = self.thetas[order]
        self.mu_values = np.asarray(self.mu_values, float)[order]
        self.kappa_values = np.asarray(self.kappa_values, float)[order]
        self.residuals = np.asarray(self.residuals, float)[order]
        if np.any(self.mu_values <= 0) or np.any(self.kappa_values <= 0):
            raise NumericalError("transport table must be positive")
        sq = np.sqrt(self.thetas)
        if len(self.thetas) >= 2:
            kind = "natural" if len(self.thetas) > 2 else "clamped"
            self._mu = CubicSpline(self.thetas, self.mu_values / sq, bc_type=kind, extrapolate=True)
            self._ka = CubicSpline(self.thetas, self.kappa_values / sq, bc_type=kind, extrapolate=True)
        else:
            c_mu, c_ka = self.mu_values[0] / sq[0], self.kappa_values[0] / sq[0]
            self._mu = _Const(c_mu)
            self._ka = _Const(c_ka)

    def mu(self, theta):
        theta = np.asarray(theta, float)
        return self._mu(theta) * np.sqrt(theta)

    def kappa(self, theta):
        theta = np.asarray(theta, float)
        return self._ka(theta) * np.sqrt(theta)

    def dmu(self, theta):
        theta = np.asarray(theta, float)
        return self._mu(theta, 1) * np.sqrt(theta) + 0.5 * self._mu(theta) / np.sqrt(theta)

    def dkappa(self, theta):
        theta = np.asarray(theta, float)
        return self._ka(theta, 1) * np.sqrt(theta) + 0.5 * self._ka(theta) / np.sqrt(theta)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "mu", "kappa", "basis_size", "residual"])
            for row in zip(self.thetas, self.mu_values, self.kappa_values, self.residuals):
                w.writerow([f"{row[0]:.6g}", f"{row[1]:.10e}", f"{row[2]:.10e}", self.basis_size, f"{row[3]:.3e}"])


class _Const:
    def __init__(self, c):
        self.c = c

    def __call__(self, x, nu=0):
        return np.full(np.shape(x), self.c if nu == 0 else 0.0)


def build_transport_table(
    thetas,
    backend: str = "hard-sphere",
    method: str = "grid",
    grid: VelocityGrid | None = None,
    quad: CollisionQuadrature | None = None,
    order: int = 4,
    viscosity: str = "isotropic",
) -> TransportTable:
    """Tabulate mu and kappa; ``viscosity='slab'`` uses the normal-stress viscosity instead of the average."""
    if viscosity not in ("isotropic", "slab"):
        raise InvalidParameterError(f"unknown viscosity choice {viscosity!r}")
    rows = [transport_coefficients(float(t), backend, method, grid, quad, order) for t in thetas]
    return TransportTable(
        [r.theta for r in rows],
        [r.mu_slab if viscosity == "slab" else r.mu for r in rows],
        [r.kappa for r in rows],
        rows[0].basis_size,
        [r.residual for r in rows],
        label=f"{backend}/{method}" + ("/slab" if viscosity == "slab" else ""),
        A_hat=[r.A_hat for r in rows],
        B_hat=[r.B_hat for r in rows],
    )


def bgk_transport_table() -> TransportTable:
    """Closed form for the BGK backend: mu = rho theta / nu = sqrt(theta) / (4 sqrt(2 pi)), Pr = 1."""
    th = np.array([0.5, 1.0, 1.5])
    mu = np.sqrt(th) / (4.0 * np.sqrt(2.0 * np.pi))
    return TransportTable(th, mu, 2.5 * mu, 0, np.zeros(3), label="bgk/closed-form")


# ------------------------------------------------------------ expansion terms


def _cell_params(state: FluidState, cell: int) -> MaxwellParams:
    return MaxwellParams(float(state.rho[cell]), (float(state.u[cell]), 0.0, 0.0), float(state.theta[cell]))


def _slab_source(M, V, dudx, dthdx, theta):
    """M { A(V):sigma(u)/2 + B(V).grad(theta)/sqrt(theta) } for u = (u1(x), 0, 0).

    sigma_11 = 4/3 u', sigma_22 = sigma_33 = -2/3 u' and A is traceless, so
    A:sigma/2 = u' A_11.
    """
    A11 = V[..., 0] ** 2 - np.sum(V * V, axis=-1) / 3.0
    B1 = 0.5 * (np.sum(V * V, axis=-1) - 5.0) * V[..., 0]
    return M * (dudx[..., None] * A11 + (dthdx / np.sqrt(theta))[..., None] * B1)


def correction_G_field(
    state: FluidState,
    grid: VelocityGrid,
    backend: str = "bgk",
    quad: CollisionQuadrature | None = None,
    reference_op: LinearizedOperator | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """G = -L_M^{-1} M {A:sigma/2 + B.grad(theta)/sqrt(theta)} in every cell.

    For the BGK backend L_M = nu (I - P0) and the inverse on the kernel
    complement is explicit.  For hard spheres each cell is solved with GMRES
    on the bordered system of its own state, preconditioned by the factorised
    operator at the reference state.
    """
    rho, u, theta = state.rho, state.u, state.theta
    vel = state.velocity
    M = maxwellian_field(rho, vel, theta, grid)
    V = (grid.nodes[None] - vel[:, None, :]) / np.sqrt(theta)[:, None, None]
    src = _slab_source(M, V, state.dudx, state.dthdx, theta)
    if backend == "bgk":
        p1 = project_macro_field(src, rho, vel, theta, grid).p1
        return -p1 / bgk_frequency(rho, theta)[:, None]
    if backend != "hard-sphere":
        raise InvalidParameterError(f"unknown collision backend {backend!r}")
    quad = quad or collision_quadrature(grid)
    ref = reference_op or assemble_LM(MaxwellParams(), grid, "hard-sphere", quad)
    out = np.zeros_like(src)
    for c in range(state.grid.nx):
        if not np.any(src[c]):
            continue
        out[c] = -_solve_cell(src[c], _cell_params(state, c), grid, quad, ref, tol)
    return out


def _solve_cell(rhs, p, grid, quad, ref, tol):
    n = grid.size
    M = maxwellian(p, grid)
    sq = np.sqrt(M)
    chi = kernel_basis(p, grid)
    U = (chi / sq).T * np.sqrt(grid.cell_volume)
    KM = quad.weighted_rates(p)
    I, J, LA, LB, R, _ = quad.tables()

    def S_apply(y):
        out = np.zeros(n)
        _kernels.linearized_apply(I, J, LA, LB, R, KM, np.ascontiguousarray(y / sq), out)
        return -out / sq

    def matvec(z):
        y, lam = z[:n], z[n:]
        return np.concatenate([S_apply(y) + U @ lam, U.T @ y])

    lu = ref.factorize()
    sref = ref.sqrtM

    def precond(z):
        # map between the two symmetric scalings before using the reference factors
        y = z[:n] * sq / sref
        sol = sla.lu_solve(lu, np.concatenate([y, z[n:]]), check_finite=False)
        return np.concatenate([sol[:n] * sref / sq, sol[n:]])

    y_rhs = rhs / sq
    y_rhs = y_rhs - U @ (U.T @ y_rhs)
    b = np.concatenate([y_rhs, np.zeros(5)])
    Aop = LinearOperator((n + 5, n + 5), matvec=matvec)
    Pop = LinearOperator((n + 5, n + 5), matvec=precond)
    z, info = gmres(Aop, b, M=Pop, rtol=tol, atol=0.0, restart=40, maxiter=20)
    if info != 0:
        raise NumericalError("per-cell constrained solve did not converge", {"info": info, "params": str(p)})
    return z[:n] * sq


def _G_profile(p, dudx, dthdx, grid, backend, quad, reference_op):
    M = maxwellian(p, grid)
    V = (grid.nodes - p.velocity) / np.sqrt(p.theta)
    src = _slab_source(M, V, np.asarray(dudx, float), np.asarray(dthdx, float), p.theta)
    if backend == "bgk":
        op = assemble_LM(p, grid, "bgk")
        return -op.project_out_kernel(src)[0] / bgk_frequency(p.rho, p.theta)
    if backend != "hard-sphere":
        raise InvalidParameterError(f"unknown collision backend {backend!r}")
    quad = quad or collision_quadrature(grid)
    ref = reference_op or assemble_LM(MaxwellParams(), grid, "hard-sphere", quad)
    return -_solve_cell(src, p, grid, quad, ref, 1e-10)


def correction_G(
    state: FluidState,
    cell: int,
    grid: VelocityGrid,
    backend: str = "bgk",
    quad: CollisionQuadrature | None = None,
    reference_op: LinearizedOperator | None = None,
) -> np.ndarray:
    """Single-cell version of :func:`correction_G_field`."""
    p = _cell_params(state, cell)
    return _G_profile(p, state.dudx[cell], state.dthdx[cell], grid, backend, quad, reference_op)


def dissipation_H(state: FluidState, cell: int, grid: VelocityGrid, table: TransportTable) -> np.ndarray:
    """H = M V.div(mu sigma)/(rho sqrt(theta)) + M (|V|^2/3 - 1)(mu sigma:sigma/2 + div(kappa grad theta))/(rho theta)."""
    rho = state.rho[cell]
    th = state.theta[cell]
    ux, uxx = state.dudx[cell], state.d2udx2[cell]
    tx, txx = state.dthdx[cell], state.d2thdx2[cell]
    mu, ka = table.mu(th), table.kappa(th)
    div_stress = 4.0 / 3.0 * (table.dmu(th) * tx * ux + mu * uxx)
    heating = 4.0 / 3.0 * mu * ux**2  # sigma:sigma = 8/3 u'^2 in the slab
    div_flux = table.dkappa(th) * tx**2 + ka * txx
    p = _cell_params(state, cell)
    M = maxwellian(p, grid)
    V = (grid.nodes - p.velocity) / np.sqrt(th)
    V2 = np.sum(V * V, axis=-1)
    return M * V[:, 0] * div_stress / (rho * np.sqrt(th)) + M * (V2 / 3.0 - 1.0) * (heating + div_flux) / (rho * th)


def wall_trace(state: FluidState, wall: str):
    """(rho, u1, theta, du1/dx, dtheta/dx) on the wall.

    u1 and theta take their wall values; rho is extrapolated quadratically and
    the gradients use the one-sided second-order formula through the wall value.
    """
    if wall not in ("left", "right"):
        raise InvalidParameterError(f"wall must be 'left' or 'right', got {wall!r}")
    dx = state.grid.dx
    if wall == "left":
        r0, r1, r2 = state.rho[:3]
        u0, u1 = state.u[:2]
        t0, t1 = state.theta[:2]
        sign = 1.0
    else:
        r0, r1, r2 = state.rho[::-1][:3]
        u0, u1 = state.u[::-1][:2]
        t0, t1 = state.theta[::-1][:2]
        sign = -1.0
    rho = (15.0 * r0 - 10.0 * r1 + 3.0 * r2) / 8.0
    dudx = sign * (9.0 * u0 - u1 - 8.0 * WALL_U) / (3.0 * dx)
    dthdx = sign * (9.0 * t0 - t1 - 8.0 * WALL_THETA) / (3.0 * dx)
    return float(rho), WALL_U, WALL_THETA, float(dudx), float(dthdx)


def boundary_source_r(
    state: FluidState,
    wall: str,
    grid: VelocityGrid,
    backend: str = "bgk",
    quad: CollisionQuadrature | None = None,
    reference_op: LinearizedOperator | None = None,
) -> np.ndarray:
    """r = P_gamma G - G on the incoming half of ``wall`` (zero on the outgoing half).

    G is evaluated from the wall trace of the fluid state.
    """
    from .boltzmann import diffuse_reflect, incoming_mask

    rho, u, th, ux, thx = wall_trace(state, wall)
    if rho <= 0:
        raise NumericalError("extrapolated wall density is not positive", {"rho": rho})
    G = _G_profile(MaxwellParams(rho, (u, 0.0, 0.0), th), ux, thx, grid, backend, quad, reference_op)
    incoming = incoming_mask(grid, wall)
    return np.where(incoming, diffuse_reflect(G, grid, wall, warn=False) - G, 0.0)
