"""Chapman-Enskog expansion, remainder extraction, deviation norms and the eps sweep."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy

from .boltzmann import KineticRunConfig, kinetic_run
from .chapman_enskog import (
    TransportTable,
    assemble_LM,
    bgk_transport_table,
    build_transport_table,
    correction_G_field,
)
from .cns import CnsRunConfig, cns_run
from .collision import collision_quadrature
from .errors import AlignmentError, ArtifactError, InvalidParameterError
from .kinetic_core import (
    REFERENCE_STATE,
    SpatialGrid,
    VelocityGrid,
    maxwellian_field,
    project_macro_field,
    weighted_norm,
)
from .state import FluidState

log = logging.getLogger(__name__)

__all__ = [
    "ExpansionSnapshot",
    "SlopeFit",
    "SweepConfig",
    "SweepReport",
    "assemble_expansion",
    "extract_remainder",
    "deviation_norms",
    "fit_slope",
    "run_member",
    "eps_sweep",
    "write_outputs",
]

NORM_KEYS = ("L2", "Linf_w", "R_L2", "macro_L2", "macro_L3", "macro_L6")
TIME_TOL = 1e-9
ENVELOPE_KAPPA0 = (0.1, 1.0, 3.0, 10.0)


@dataclass
class ExpansionSnapshot:
    """F = M + eps G + eps^{3/2} R at one time, with the fluid state defining M and G."""

    t: float
    eps: float
    F: np.ndarray
    M: np.ndarray
    G: np.ndarray
    R: np.ndarray
    fluid: FluidState
    abc: np.ndarray  # (Nx, 5): a, b1, b2, b3, c of R

    def reconstruction_error(self) -> float:
        recon = self.M + self.eps * self.G + self.eps**1.5 * self.R
        return float(np.max(np.abs(recon - self.F)) / np.max(np.abs(self.F)))


class _ExpansionContext:
    """Objects shared by every G evaluation of one run (hard-sphere tables and factorisation)."""

    def __init__(self, grid: VelocityGrid, backend: str, design: str = "lebedev26"):
        self.grid = grid
        self.backend = backend
        self.quad = None
        self.ref = None
        if backend == "hard-sphere":
            self.quad = collision_quadrature(grid, design)
            self.ref = assemble_LM(REFERENCE_STATE, grid, "hard-sphere", self.quad)
            self.ref.factorize()


def assemble_expansion(
    fluid: FluidState,
    eps: float,
    grid: VelocityGrid,
    backend: str = "bgk",
    context: _ExpansionContext | None = None,
):
    """Per-cell local Maxwellian and correction G of a fluid state."""
    ctx = context or _ExpansionContext(grid, backend)
    M = maxwellian_field(fluid.rho, fluid.u, fluid.theta, grid)
    G = correction_G_field(fluid, grid, backend, ctx.quad, ctx.ref)
    return M, G


def extract_remainder(
    F: np.ndarray,
    fluid: FluidState,
    eps: float,
    grid: VelocityGrid,
    backend: str = "bgk",
    t: float | None = None,
    context: _ExpansionContext | None = None,
    expansion=None,
) -> ExpansionSnapshot:
    """R = eps^{-3/2} (F - M - eps G) and the macroscopic coefficients (a, b, c) of R."""
    if t is not None and abs(t - fluid.t) > TIME_TOL:
        raise AlignmentError(f"kinetic time {t} does not match fluid time {fluid.t}")
    F = np.asarray(F, float)
    if F.shape != (fluid.grid.nx, grid.size):
        raise AlignmentError(f"field shape {F.shape} does not match ({fluid.grid.nx}, {grid.size})")
    M, G = expansion if expansion is not None else assemble_expansion(fluid, eps, grid, backend, context)
    R = (F - M - eps * G) / eps**1.5
    dec = project_macro_field(R, fluid.rho, fluid.u, fluid.theta, grid)
    abc = np.column_stack([dec.a, dec.b, dec.c])
    return ExpansionSnapshot(fluid.t if t is None else t, eps, F, M, G, R, fluid, abc)


def deviation_norms(snapshot: ExpansionSnapshot, grid: VelocityGrid, ell: float = 2.0) -> dict:
    """The two theorem norms of F - M, the L2 norm of R and L2/L3/L6 norms of R's (a, b, c)."""
    dx = snapshot.fluid.grid.dx
    dev = snapshot.F - snapshot.M
    return {
        "L2": weighted_norm(dev, "L2_sqrtMminus", grid, dx=dx),
        "Linf_w": weighted_norm(dev, "Linf_wl_sqrtMminus", grid, ell=ell),
        "R_L2": weighted_norm(snapshot.R, "L2_sqrtMminus", grid, dx=dx),
        "macro_L2": float(np.sqrt(np.sum(snapshot.abc**2) * dx)),
        "macro_L3": weighted_norm(snapshot.abc, "L3_macro", dx=dx),
        "macro_L6": weighted_norm(snapshot.abc, "L6_macro", dx=dx),
    }


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float  # root-mean-square misfit in log space
    n: int


def fit_slope(eps, values) -> SlopeFit:
    """Least-squares fit of log(value) = slope log(eps) + intercept."""
    e = np.asarray(eps, float)
    v = np.asarray(values, float)
    if e.size != v.size or e.size < 3:
        raise InvalidParameterError("slope fits need at least three points")
    if np.any(e <= 0) or np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise InvalidParameterError("slope fits need positive finite data")
    order = np.argsort(e)
    x, y = np.log(e[order]), np.log(v[order])
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return SlopeFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2))), int(e.size))


# ------------------------------------------------------------ sweep


@dataclass(frozen=True)
class SweepConfig:
    eps: tuple = (0.4, 0.2, 0.1, 0.05)
    kappa0: float = 0.1
    T: float = 0.5
    resolutions: tuple = (64, 128)
    nv: int = 16
    vmax: float = 7.0
    backend: str = "bgk"
    scheme: str = "muscl"
    splitting: str = "strang"
    cfl: float = 0.9
    cns_cfl: float = 0.25
    n_outputs: int = 10
    ell: float = 2.0
    profile: str = "bump"
    workers: int = 1
    full_q_eps: float | None = 0.2
    full_q_nx: int = 64
    full_q_design: str = "lebedev26"
    full_q_outputs: int = 5

    def __post_init__(self):
        eps = tuple(sorted(float(e) for e in self.eps))
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "resolutions", tuple(int(n) for n in self.resolutions))
        if len(set(eps)) != len(eps) or any(e <= 0 for e in eps):
            raise InvalidParameterError("eps values must be positive and distinct")
        if self.workers < 1:
            raise InvalidParameterError("workers must be at least 1")
        if not self.ell > 1.5:
            raise InvalidParameterError("ell must exceed 3/2")

    def physics(self) -> dict:
        """Everything that determines the numbers (worker count excluded)."""
        d = asdict(self)
        d.pop("workers")
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.physics(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class MemberResult:
    eps: float
    nx: int
    backend: str
    times: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    sup: dict = field(default_factory=dict)
    reconstruction: float = 0.0
    mass_drift: float = 0.0
    undershoot: float = 0.0
    cns_energy: list = field(default_factory=list)
    elapsed: float = 0.0
    error: str | None = None

    def norms_record(self) -> dict:
        d = asdict(self)
        d.pop("elapsed")
        return d


def _fluid_table(backend, grid, design):
    if backend == "bgk":
        return bgk_transport_table()
    quad = collision_quadrature(grid, design)
    return build_transport_table([0.9, 1.0, 1.1], "hard-sphere", "grid", grid, quad, viscosity="slab")


def run_member(cfg: SweepConfig, eps: float, nx: int, backend: str, n_outputs: int | None = None) -> MemberResult:
    """One sweep member: CNS and kinetic runs from matched data, norms at every output time."""
    t0 = time.perf_counter()
    n_out = n_outputs or cfg.n_outputs
    res = MemberResult(eps, nx, backend)
    try:
        kcfg = KineticRunConfig(
            eps=eps, T=cfg.T, cfl=cfg.cfl, nx=nx, nv=cfg.nv, vmax=cfg.vmax, backend=backend,
            scheme=cfg.scheme, splitting=cfg.splitting, kappa0=cfg.kappa0, profile=cfg.profile,
            n_outputs=n_out, design=cfg.full_q_design,
        )
        _, grid = kcfg.grids()
        table = _fluid_table(backend, grid, cfg.full_q_design)
        ccfg = CnsRunConfig(eps=eps, T=cfg.T, nx=nx, cfl=cfg.cns_cfl, n_outputs=n_out, kappa0=cfg.kappa0,
                            profile=cfg.profile)
        dt, k = kcfg.schedule()
        out_times = [(j + 1) * k * dt for j in range(n_out)]
        fluid = cns_run(ccfg, table, output_times=out_times)
        res.cns_energy = list(fluid.energy)
        states = fluid.states
        ctx = _ExpansionContext(grid, backend, cfg.full_q_design)
        counter = iter(range(len(states)))

        def observe(t, F):
            st = states[next(counter)]
            snap = extract_remainder(F, st, eps, grid, backend, t=t, context=ctx)
            return deviation_norms(snap, grid, cfg.ell), snap.reconstruction_error()

        kin = kinetic_run(kcfg, observer=observe)
        res.times = [float(t) for t in kin.times]
        res.series = {key: [float(o[0][key]) for o in kin.observations] for key in NORM_KEYS}
        res.sup = {key: max(vals) for key, vals in res.series.items()}
        res.reconstruction = max(o[1] for o in kin.observations)
        res.mass_drift = kin.mass_drift
        res.undershoot = kin.undershoot
        if not all(np.isfinite(v) for v in res.sup.values()):
            res.error = "non-finite norm"
    except ArtifactError as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        log.error("sweep member eps=%g nx=%d failed: %s", eps, nx, exc)
    res.elapsed = time.perf_counter() - t0
    return res


@dataclass
class SweepReport:
    config: SweepConfig
    members: list
    slopes: dict
    gate: dict
    remainder_factor: dict
    full_q: dict | None
    complete: bool
    provenance: dict
    caveats: list
    observations: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config.physics(),
            "config_hash": self.config.digest(),
            "complete": self.complete,
            "slopes": self.slopes,
            "resolution_gate": self.gate,
            "remainder_variation": self.remainder_factor,
            "full_q_point": self.full_q,
            "members": [m.norms_record() for m in self.members],
            "provenance": self.provenance,
            "caveats": self.caveats,
            "observations": self.observations,
        }

    def norm_fields(self) -> dict:
        """The deterministic numerical content (used for bit-identity checks)."""
        d = self.to_dict()
        return {k: d[k] for k in ("slopes", "resolution_gate", "remainder_variation", "full_q_point", "members")}


def cns_envelope(kappa0_values, eps_values, T=0.5, nx=64, cfl=0.25, profile="bump") -> list:
    """Empirical stability envelope of the fluid solver over (kappa0, eps).

    Each entry records whether the run reached T and, if not, the error.
    """
    table = bgk_transport_table()
    out = []
    for k0 in kappa0_values:
        for e in eps_values:
            try:
                cns_run(CnsRunConfig(eps=e, T=T, nx=nx, cfl=cfl, n_outputs=1, kappa0=k0, profile=profile), table)
                rec = {"stable": True}
            except ArtifactError as exc:  # amplitude >= 1 is already inadmissible initial data
                rec = {"stable": False, "error": f"{type(exc).__name__}: {exc}"}
            out.append({"kappa0": float(k0), "eps": float(e), "amplitude": float(k0 * e), **rec})
    return out


def _slopes_for(members, eps):
    out = {}
    ok = [m for m in members if m.error is None]
    if len(ok) < 3:
        return None
    e = [m.eps for m in ok]
    for key in NORM_KEYS:
        f = fit_slope(e, [m.sup[key] for m in ok])
        out[key] = asdict(f)
    return out


def eps_sweep(cfg: SweepConfig) -> SweepReport:
    """Run every (eps, resolution) member, fit slopes per resolution and apply the resolution gate."""
    jobs = [(eps, nx, cfg.backend, None) for nx in cfg.resolutions for eps in cfg.eps]
    if cfg.full_q_eps is not None:
        jobs.append((float(cfg.full_q_eps), cfg.full_q_nx, "hard-sphere", cfg.full_q_outputs))
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [pool.submit(run_member, cfg, *job) for job in jobs]
        results = [f.result() for f in futures]
    n_sweep = len(cfg.eps) * len(cfg.resolutions)
    sweep, extra = results[:n_sweep], results[n_sweep:]
    slopes, gate, rfac = {}, {}, {}
    for nx in cfg.resolutions:
        ms = [m for m in sweep if m.nx == nx]
        slopes[str(nx)] = _slopes_for(ms, cfg.eps)
        good = [m.sup["R_L2"] for m in ms if m.error is None]
        rfac[str(nx)] = float(max(good) / min(good)) if good else None
    if len(cfg.resolutions) >= 2 and all(slopes[str(n)] for n in cfg.resolutions[:2]):
        a, b = (slopes[str(n)] for n in cfg.resolutions[:2])
        for key in ("L2", "Linf_w"):
            shift = abs(a[key]["slope"] - b[key]["slope"])
            gate[key] = {"shift": shift, "passed": bool(shift < 0.1)}
    full_q = None
    if extra:
        m = extra[0]
        twin = [s for s in sweep if s.nx == m.nx and s.eps == m.eps and s.error is None]
        full_q = {"member": m.norms_record()}
        if twin and m.error is None:
            full_q["ratio_to_" + cfg.backend] = {k: m.sup[k] / twin[0].sup[k] for k in NORM_KEYS}
    complete = all(r.error is None for r in results) and all(slopes.values())
    prov = {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        "workers": cfg.workers,
        "timing_s": {f"{r.backend}/nx={r.nx}/eps={r.eps}": round(r.elapsed, 1) for r in results},
        "cpu_count": os.cpu_count(),
    }
    caveats = [
        f"sup over t is taken on {cfg.n_outputs + 1} output times in [0, {cfg.T}], not over t >= 0",
        "exponents are tested, never the implicit constants",
    ]
    # where in [0, T] each sup was attained (the window choice is an empirical matter)
    observations = {
        "sup_attained_at": {
            f"{r.backend}/nx={r.nx}/eps={r.eps}": {
                k: r.times[int(np.argmax(r.series[k]))] for k in ("L2", "Linf_w", "R_L2")
            }
            for r in results
            if r.error is None
        },
        "cns_envelope": cns_envelope(ENVELOPE_KAPPA0, cfg.eps, cfg.T, cfg.resolutions[0], cfg.cns_cfl, cfg.profile),
    }
    return SweepReport(cfg, results, slopes, gate, rfac, full_q, complete, prov, caveats, observations)


def write_outputs(report: SweepReport, path: str) -> None:
    """report.json at ``path`` plus norms_eps*.csv and plot_*.dat next to it."""
    outdir = os.path.dirname(os.path.abspath(path))
    os.makedirs(outdir, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    for m in report.members:
        if m.error is not None:
            continue
        name = os.path.join(outdir, f"norms_eps{m.eps:g}_nx{m.nx}_{m.backend}.csv")
        with open(name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *NORM_KEYS])
            for i, t in enumerate(m.times):
                w.writerow([repr(t)] + [repr(m.series[k][i]) for k in NORM_KEYS])
    cfg = report.config
    with open(os.path.join(outdir, "plot_sup_norms.dat"), "w") as fh:
        fh.write("# eps nx " + " ".join(f"sup_{k}" for k in NORM_KEYS) + "\n")
        for nx in cfg.resolutions:
            n_sweep = len(cfg.eps) * len(cfg.resolutions)
            for m in sorted((m for m in report.members[:n_sweep] if m.nx == nx), key=lambda m: m.eps):
                if m.error is None:
                    fh.write(f"{m.eps:.6g} {nx} " + " ".join(f"{m.sup[k]:.10e}" for k in NORM_KEYS) + "\n")
            fh.write("\n\n")
    with open(os.path.join(outdir, "plot_norms_time.dat"), "w") as fh:
        for m in report.members:
            if m.error is not None:
                continue
            fh.write(f"# backend={m.backend} nx={m.nx} eps={m.eps:g}\n# t " + " ".join(NORM_KEYS) + "\n")
            for i, t in enumerate(m.times):
                fh.write(f"{t:.6g} " + " ".join(f"{m.series[k][i]:.10e}" for k in NORM_KEYS) + "\n")
            fh.write("\n\n")
