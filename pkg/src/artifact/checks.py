"""Fast property checks behind ``artifact check`` (coarse grids, a few seconds in total)."""

from __future__ import annotations

import numpy as np

from .boltzmann import diffuse_reflect, imex_step, transport_step
from .chapman_enskog import assemble_LM, bgk_transport_table, correction_G_field
from .cns import cns_step
from .collision import bgk_relax, collision_quadrature, q_full
from .harness import fit_slope
from .kinetic_core import (
    REFERENCE_STATE,
    MaxwellParams,
    SpatialGrid,
    VelocityGrid,
    kernel_basis,
    maxwellian,
    maxwellian_field,
    moments,
    project_macro,
)
from .state import FluidState

_GRID = VelocityGrid(10, 6.0)


def _check_maxwellian_moments():
    p = MaxwellParams(1.3, (0.2, -0.1, 0.05), 0.9)
    m = moments(maxwellian(p, _GRID), _GRID).params
    err = max(abs(m.rho - p.rho), np.max(np.abs(np.subtract(m.u, p.u))), abs(m.theta - p.theta))
    return err < 1e-3, f"moment error {err:.1e} (coarse grid quadrature)"


def _check_projection():
    rng = np.random.default_rng(1)
    p = MaxwellParams(1.0, (0.1, 0.0, 0.0), 1.1)
    M = maxwellian(p, _GRID)
    R = M * rng.standard_normal(_GRID.size)
    dec = project_macro(R, p, _GRID)
    chi = kernel_basis(p, _GRID)
    orth = np.max(np.abs(chi @ (dec.p1 / M))) * _GRID.cell_volume
    rec = np.max(np.abs(dec.p0 + dec.p1 - R)) / np.max(np.abs(R))
    return orth < 1e-10 and rec < 1e-12, f"orthogonality {orth:.1e}, reconstruction {rec:.1e}"


def _check_collision_invariants():
    quad = collision_quadrature(_GRID)
    rng = np.random.default_rng(2)
    M = maxwellian(REFERENCE_STATE, _GRID)
    F = M * (1.0 + 0.3 * rng.uniform(-1, 1, _GRID.size))
    q = q_full(F, F, quad)
    C = np.column_stack([np.ones(_GRID.size), _GRID.nodes, _GRID.speed2])
    mom = np.max(np.abs(q @ C)) / np.max(np.abs(q))
    eq = np.max(np.abs(q_full(M, M, quad))) / np.max(M)
    ent = float(np.sum(q * np.log(F)) * _GRID.cell_volume)
    return mom < 1e-12 and eq < 1e-12 and ent <= 1e-8, f"moments {mom:.1e}, Q(M,M) {eq:.1e}, entropy production {ent:.1e}"


def _check_bgk():
    M = maxwellian(MaxwellParams(1.2, (0.1, 0, 0), 0.95), _GRID)
    r = bgk_relax(M, _GRID)
    op = assemble_LM(REFERENCE_STATE, _GRID, "bgk")
    w = np.linalg.eigvalsh(op.S)
    kernel = int(np.sum(np.abs(w) < 1e-10))
    return np.max(np.abs(r)) < 1e-12 and kernel == 5, f"|bgk(M)| {np.max(np.abs(r)):.1e}, kernel dim {kernel}"


def _check_walls():
    M = maxwellian(REFERENCE_STATE, _GRID)
    out = diffuse_reflect(M, _GRID, "left")
    eq = np.max(np.abs(out - M)) / M.max()
    net = float(np.sum(out * _GRID.nodes[:, 0]) * _GRID.cell_volume)
    return eq < 1e-10 and abs(net) < 1e-14, f"wall equilibrium {eq:.1e}, net flux {net:.1e}"


def _check_equilibrium_steps():
    sgrid = SpatialGrid(8)
    M = maxwellian(REFERENCE_STATE, _GRID)
    F = np.tile(M, (8, 1))
    dt = 0.5 * sgrid.dx / _GRID.vmax
    G = transport_step(F, dt, sgrid, _GRID, "muscl")
    H = imex_step(F, dt, 0.1, sgrid, _GRID, "bgk", "muscl")
    err = max(np.max(np.abs(G - F)), np.max(np.abs(H - F))) / M.max()
    return err < 1e-10, f"drift {err:.1e}"


def _check_cns_fixed_point():
    s = FluidState.constant(SpatialGrid(16))
    table = bgk_transport_table()
    for _ in range(5):
        s = cns_step(s, 0.01, 0.1, table)
    err = max(np.max(np.abs(s.rho - 1)), np.max(np.abs(s.u)), np.max(np.abs(s.theta - 1)))
    return err < 1e-14, f"drift {err:.1e}"


def _check_uniform_G():
    s = FluidState.constant(SpatialGrid(4), rho=1.1, theta=1.0)
    G = correction_G_field(s, _GRID, "bgk")
    return bool(np.all(G == 0.0)), f"max |G| {np.max(np.abs(G)):.1e}"


def _check_slope_fitter():
    eps = np.array([0.4, 0.2, 0.1, 0.05])
    f = fit_slope(eps, 3.0 * eps**1.5)
    return abs(f.slope - 1.5) < 1e-10, f"slope {f.slope!r}"


def _check_field_maxwellian():
    rho = np.array([1.0, 1.1])
    u = np.array([0.0, 0.1])
    th = np.array([1.0, 0.9])
    F = maxwellian_field(rho, u, th, _GRID)
    ok = np.allclose(F[1], maxwellian(MaxwellParams(1.1, (0.1, 0, 0), 0.9), _GRID), rtol=1e-14, atol=0)
    return bool(ok), "field and single-profile Maxwellians agree"


CHECKS = [
    ("maxwellian moments", _check_maxwellian_moments),
    ("field maxwellian", _check_field_maxwellian),
    ("macro/micro projection", _check_projection),
    ("collision invariants", _check_collision_invariants),
    ("bgk backend", _check_bgk),
    ("diffuse wall", _check_walls),
    ("equilibrium steps", _check_equilibrium_steps),
    ("cns fixed point", _check_cns_fixed_point),
    ("uniform correction", _check_uniform_G),
    ("slope fitter", _check_slope_fitter),
]


def run_checks():
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
