"""Command line entry point: ``artifact <subcommand> ...``.

Exit status 0 on success, 2 for usage or configuration errors and 3 for
numerical failures (a JSON error report is written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from .errors import ArtifactError, ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("artifact")


def _floats(s):
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {s!r}") from exc


def _write_json(obj, path):
    if path in (None, "-"):
        json.dump(obj, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)


# ------------------------------------------------------------ subcommands


def cmd_transport_table(args):
    from .chapman_enskog import bgk_transport_table, build_transport_table
    from .kinetic_core import VelocityGrid

    if args.backend == "bgk" and args.method == "closed-form":
        table = bgk_transport_table()
    else:
        method = "grid" if args.method == "closed-form" else args.method
        table = build_transport_table(
            args.theta, args.backend, method, VelocityGrid(args.nv, args.vmax), order=args.order, viscosity=args.viscosity
        )
    if args.out:
        table.to_csv(args.out)
    else:
        print("theta,mu,kappa,basis_size,residual")
        for row in zip(table.thetas, table.mu_values, table.kappa_values, table.residuals):
            print(f"{row[0]:.6g},{row[1]:.10e},{row[2]:.10e},{table.basis_size},{row[3]:.3e}")
    return EXIT_OK


def cmd_coercivity(args):
    from .chapman_enskog import assemble_LM, coercivity_probe
    from .kinetic_core import MaxwellParams, VelocityGrid

    p = MaxwellParams(args.rho, (args.u, 0.0, 0.0), args.theta)
    op = assemble_LM(p, VelocityGrid(args.nv, args.vmax), args.backend)
    rep = coercivity_probe(p, op)
    _write_json(
        {
            "delta0": rep.delta0,
            "params": {"rho": p.rho, "u": list(p.u), "theta": p.theta},
            "grid": {"n": rep.grid_n, "vmax": rep.grid_vmax},
            "backend": rep.backend,
            "kernel_rayleigh_quotients": rep.kernel_quotients.tolist(),
        },
        args.out,
    )
    return EXIT_OK


def cmd_kinetic_run(args):
    from .boltzmann import kinetic_run
    from .config import kinetic_config, load_config

    cfg = kinetic_config(load_config(args.config))
    res = kinetic_run(cfg)
    os.makedirs(args.out, exist_ok=True)
    sgrid, _ = cfg.grids()
    with open(os.path.join(args.out, "moments.csv"), "w") as fh:
        fh.write("t,x,rho,u1,theta\n")
        for t, r, u, th in zip(res.times, res.rho, res.u, res.theta):
            for row in zip(sgrid.centers, r, u, th):
                fh.write(f"{t:.10g}," + ",".join(f"{v:.12e}" for v in row) + "\n")
    if args.dump_f:
        size = res.final.nbytes
        if size > args.max_dump_mb * 2**20:
            raise ConfigError(f"full F dump of {size / 2**20:.1f} MB exceeds --max-dump-mb")
        np.save(os.path.join(args.out, "F_final.npy"), res.final)
    _write_json(
        {
            "config": cfg.__dict__,
            "times": res.times,
            "mass": res.mass,
            "mass_drift": res.mass_drift,
            "entropy": res.entropy,
            "undershoot": res.undershoot,
        },
        os.path.join(args.out, "summary.json"),
    )
    with open(os.path.join(args.out, "plot_moments.dat"), "w") as fh:
        for t, r, u, th in zip(res.times, res.rho, res.u, res.theta):
            fh.write(f"# t = {t:.6g}\n")
            for row in zip(sgrid.centers, r, u, th):
                fh.write(" ".join(f"{v:.10e}" for v in row) + "\n")
            fh.write("\n\n")
    return EXIT_OK


def cmd_cns_run(args):
    from .chapman_enskog import bgk_transport_table, build_transport_table
    from .cns import cns_run, dump_trajectory
    from .config import cns_config, load_config
    from .kinetic_core import VelocityGrid

    cfg, transport = cns_config(load_config(args.config))
    table = bgk_transport_table() if transport == "bgk" else build_transport_table(
        [0.9, 1.0, 1.1], "hard-sphere", "grid", VelocityGrid(16, 7.0), viscosity="slab"
    )
    res = cns_run(cfg, table)
    os.makedirs(args.out, exist_ok=True)
    dump_trajectory(res, os.path.join(args.out, "trajectory.csv"))
    _write_json(
        {"config": cfg.__dict__, "times": res.times, "energy": res.energy, "dissipation": res.dissipation,
         "steps": res.steps, "transport": table.label},
        os.path.join(args.out, "summary.json"),
    )
    with open(os.path.join(args.out, "plot_energy.dat"), "w") as fh:
        fh.write("# t energy dissipation_integral\n")
        for row in zip(res.times, res.energy, res.dissipation):
            fh.write(" ".join(f"{v:.10e}" for v in row) + "\n")
    return EXIT_OK


def cmd_sweep(args):
    import dataclasses

    from .config import load_config, sweep_config
    from .harness import eps_sweep, write_outputs

    cfg = sweep_config(load_config(args.config))
    if args.workers is not None:
        cfg = dataclasses.replace(cfg, workers=args.workers)
    t0 = time.perf_counter()
    report = eps_sweep(cfg)
    write_outputs(report, args.out)
    log.info("sweep finished in %.0f s", time.perf_counter() - t0)
    return EXIT_OK if report.complete else EXIT_NUMERIC


def cmd_check(args):
    from .checks import run_checks

    results = run_checks()
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    if args.out:
        _write_json([{"name": n, "passed": ok, "detail": d} for n, ok, d in results], args.out)
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="artifact", description="Kinetic/fluid verification suite for the slab problem.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("transport-table", help="mu(theta), kappa(theta) as CSV")
    s.add_argument("--theta", type=_floats, default=[0.81, 1.0, 1.21])
    s.add_argument("--backend", choices=["hard-sphere", "bgk"], default="hard-sphere")
    s.add_argument("--method", choices=["grid", "sonine", "closed-form"], default="grid")
    s.add_argument("--order", type=int, default=4, help="Sonine basis size")
    s.add_argument("--viscosity", choices=["isotropic", "slab"], default="isotropic")
    s.add_argument("--nv", type=int, default=16)
    s.add_argument("--vmax", type=float, default=7.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_transport_table)

    s = sub.add_parser("coercivity", help="estimate delta_0 for L_M")
    s.add_argument("--rho", type=float, default=1.0)
    s.add_argument("--u", type=float, default=0.0)
    s.add_argument("--theta", type=float, default=1.0)
    s.add_argument("--backend", choices=["hard-sphere", "bgk"], default="hard-sphere")
    s.add_argument("--nv", type=int, default=16)
    s.add_argument("--vmax", type=float, default=7.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_coercivity)

    s = sub.add_parser("kinetic-run", help="integrate the kinetic equation")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--dump-f", action="store_true", help="also save the final distribution")
    s.add_argument("--max-dump-mb", type=float, default=64.0)
    s.set_defaults(func=cmd_kinetic_run)

    s = sub.add_parser("cns-run", help="integrate the Navier-Stokes system")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_cns_run)

    s = sub.add_parser("sweep", help="run the eps sweep and fit slopes")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="report.json")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("check", help="run the fast property suite")
    s.add_argument("--out")
    s.set_defaults(func=cmd_check)

    sub.add_parser("schema", help="print the config schema").set_defaults(func=cmd_schema)
    return p


def cmd_schema(args):
    from .config import render_schema

    print(render_schema())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactError as exc:
        report = {"error": type(exc).__name__, "message": str(exc), "diagnostics": getattr(exc, "diagnostics", {})}
        out = getattr(args, "out", None)
        target = out if out and out.endswith(".json") else None
        if target:
            _write_json(report, target)
        print(json.dumps(report, default=str), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
