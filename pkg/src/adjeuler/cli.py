"""Command-line front end.

Subcommands
-----------
burgers     1D Burgers gradient study (Table-1 style or analytic Riemann case)
euler       2D forward solve, adjoint, verification reports, gradient check
verify-all  run the acceptance matrix

Exit codes: 0 ok, 2 configuration error, 3 convergence failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import math
import os
import platform
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import adjoint as ad
from . import burgers as bg
from . import cases
from . import solver as sv
from .mesh import (MeshError, MeshParseError, WedgeChannelParams, body_vertices,
                   generate_wedge_channel, read_mesh)

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_VERIFY = 0, 2, 3, 4

log = logging.getLogger("adjeuler")


class ConfigError(ValueError):
    pass


# every key with its default; values are parsed by the type of the default
DEFAULTS = {
    "mesh": {"source": "generator", "file": "", **{
        f.name: ("" if f.default is None else f.default) for f in fields(WedgeChannelParams)}},
    "flow": {"mach": 2.0, "angle": 0.0, "rho": 1.0, "p": 1.0 / 1.4, "gamma": 1.4},
    "solver": {"muscl": False, "limiter": "dervieux3", "cfl": 5.0, "cfl_max": 1e4,
               "entropy_eps": 0.05, "steger_convention": "standard", "implicit": True,
               "jacobian": "exact", "linear_solver": "gmres", "convergence_tol": 1e-11,
               "max_steps": 200},
    "functional": {"kind": "outflow_density_target", "tag": "", "rho_ref": 1.0, "p0": ""},
    "adjoint": {"enabled": True, "method": "direct"},
    "verify": {"boundary": True, "flag_threshold": 0.1, "jump_geography": True,
               "jump_theta": 3.0, "shape_gradient": True, "shape_amplitude": 1e-4},
    "gradient_check": {"eps": "1e-4 1e-5 1e-6", "tolerance": 1e-3},
    "burgers": {"case": "table1", "n": 0, "T": 0.0, "x_min": 0.0, "x_max": 0.0,
                "cfl": 0.4, "fd_step": 0.01},
}


def _parse_value(section, key, raw, default):
    try:
        if isinstance(default, bool):
            v = raw.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            x = float(raw)
            if not math.isfinite(x):
                raise ValueError(raw)
            return x
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as "
                          f"{type(default).__name__}") from None


def load_config(path=None, overrides=None) -> dict:
    """Parse an INI file over the defaults. Unknown sections or keys are errors."""
    cfg = {s: dict(v) for s, v in DEFAULTS.items()}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(p.read_text(encoding="ascii"), source=str(p))
        except (configparser.Error, UnicodeDecodeError) as exc:
            raise ConfigError(f"malformed config {p}: {exc}") from None
        if cp.defaults():
            raise ConfigError("keys outside a section are not allowed")
        for sec in cp.sections():
            if sec not in cfg:
                raise ConfigError(f"unknown section [{sec}]")
            for key, raw in cp.items(sec):
                if key not in cfg[sec]:
                    raise ConfigError(f"unknown key [{sec}] {key}")
                cfg[sec][key] = _parse_value(sec, key, raw, DEFAULTS[sec][key])
        if cfg["mesh"]["source"] == "file" and cfg["mesh"]["file"]:
            f = Path(cfg["mesh"]["file"])
            if not f.is_absolute():
                cfg["mesh"]["file"] = str((p.parent / f).resolve())
    for (sec, key), val in (overrides or {}).items():
        cfg[sec][key] = val
    _validate(cfg)
    return cfg


def _validate(cfg):
    m = cfg["mesh"]
    if m["source"] not in ("generator", "file"):
        raise ConfigError("[mesh] source must be 'generator' or 'file'")
    if m["source"] == "file" and not Path(m["file"]).is_file():
        raise ConfigError(f"[mesh] file not found: {m['file']!r}")
    if m["h"] <= 0 or m["length"] <= 0 or m["height"] <= 0:
        raise ConfigError("[mesh] h, length and height must be positive")
    for sec, key in (("mesh", "wedge_end"), ("functional", "p0")):
        if cfg[sec][key] != "":
            try:
                float(cfg[sec][key])
            except ValueError:
                raise ConfigError(f"[{sec}] {key}: expected a number or nothing") from None
    f = cfg["flow"]
    if f["mach"] <= 0 or f["rho"] <= 0 or f["p"] <= 0 or f["gamma"] <= 1:
        raise ConfigError("[flow] mach, rho, p must be positive and gamma > 1")
    s = cfg["solver"]
    if s["max_steps"] < 0 or s["convergence_tol"] <= 0:
        raise ConfigError("[solver] max_steps >= 0 and convergence_tol > 0 required")
    if s["steger_convention"] not in ("standard", "negated"):
        raise ConfigError("[solver] steger_convention must be 'standard' or 'negated'")
    if cfg["functional"]["kind"] not in ad.KINDS:
        raise ConfigError(f"[functional] kind must be one of {', '.join(ad.KINDS)}")
    if cfg["adjoint"]["method"] not in ("direct", "gmres"):
        raise ConfigError("[adjoint] method must be 'direct' or 'gmres'")
    b = cfg["burgers"]
    if b["case"] not in ("table1", "analytic"):
        raise ConfigError("[burgers] case must be 'table1' or 'analytic'")
    if b["n"] < 0 or b["T"] < 0 or not 0 < b["cfl"] <= 1 or b["fd_step"] <= 0:
        raise ConfigError("[burgers] n, T >= 0, 0 < cfl <= 1 and fd_step > 0 required")
    try:
        eps = [float(e) for e in cfg["gradient_check"]["eps"].split()]
    except ValueError:
        raise ConfigError("[gradient_check] eps must be a list of numbers") from None
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("[gradient_check] eps must be positive")
    try:
        solver_config(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[solver] {exc}") from None


def solver_config(cfg) -> sv.SolverConfig:
    f, s = cfg["flow"], cfg["solver"]
    from .gas import GasModel
    return sv.SolverConfig(gas=GasModel(f["gamma"]),
                           freestream=sv.Freestream(f["mach"], f["angle"], f["rho"], f["p"]),
                           **s)


def functional(cfg) -> ad.Functional:
    f = cfg["functional"]
    p0 = float(f["p0"]) if f["p0"] else None
    return ad.Functional(f["kind"], f["tag"] or None, f["rho_ref"], p0)


def build_mesh(cfg):
    m = cfg["mesh"]
    if m["source"] == "file":
        return read_mesh(m["file"])
    kw = {k: m[k] for k in (f.name for f in fields(WedgeChannelParams))}
    kw["wedge_end"] = float(kw["wedge_end"]) if kw["wedge_end"] != "" else None
    return generate_wedge_channel(**kw)


# ---------------------------------------------------------------------------
# output helpers


class Run:
    """Output directory with a manifest of every file written."""

    def __init__(self, out, command, cfg, argv):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.cfg = cfg
        # the output location is not part of the run's identity
        self.argv = [a for k, a in enumerate(argv)
                     if a != "--out" and not a.startswith("--out=") and (k == 0 or argv[k - 1] != "--out")]
        self.files = []
        self.summary = {}

    def path(self, name) -> Path:
        self.files.append(name)
        return self.out / name

    def put(self, key, value):
        self.summary[key] = value
        if isinstance(value, float):
            value = "%.10g" % value
        print(f"{key}={value}")

    def finish(self, status):
        self.summary["status"] = status
        with open(self.path("summary.txt"), "w", encoding="ascii") as fh:
            for k, v in self.summary.items():
                fh.write(f"{k}={'%.17g' % v if isinstance(v, float) else v}\n")
        hashes = {}
        for name in sorted(set(self.files)):
            hashes[name] = hashlib.sha256((self.out / name).read_bytes()).hexdigest()
        manifest = {
            "command": self.command,
            "arguments": self.argv,
            "config": self.cfg,
            "versions": {"adjeuler": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "threads": os.environ.get("ADJ_EULER_THREADS", ""),
            "outputs": hashes,
            "status": status,
        }
        with open(self.out / "manifest.json", "w", encoding="ascii") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, ensure_ascii=True)
            fh.write("\n")
        return status


def _write_field_vtk(path, mesh, W, lam, gamma):
    data = sv.flow_point_data(W, gamma)
    if lam is not None:
        for k in range(4):
            data[f"W{k + 1}_star"] = lam[:, k]
    sv.write_vtk(path, mesh, data)


# ---------------------------------------------------------------------------
# subcommands


def cmd_burgers(args, cfg, run: Run) -> int:
    b = cfg["burgers"]
    case = args.case or b["case"]
    if case == "table1":
        T = args.T or b["T"] or cases.TABLE1["T"]
        n = b["n"] or cases.TABLE1["n"]
        lo, hi = (b["x_min"], b["x_max"]) if b["x_max"] > b["x_min"] else (-6.0, 6.0)
        u0, du0 = bg.atan_initial, bg.atan_initial_da
        region = cases.TABLE1["region"]
    else:
        T = args.T or b["T"] or 1.0
        n = b["n"] or 4000
        lo, hi = (b["x_min"], b["x_max"]) if b["x_max"] > b["x_min"] else (-2.0, 2.0)
        u0, du0 = bg.riemann_initial, bg.riemann_initial_da
        region = (-0.5, 0.5)
    grid = bg.Grid1D.for_profile(u0(), lo, hi, n, T, cfl=b["cfl"])
    st = bg.gradient_study(u0, du0, grid, region, fd_step=b["fd_step"])
    run.put("case", case)
    run.put("T", float(T))
    run.put("n", n)
    run.put("dt", grid.dt)
    run.put("J", st.J)
    run.put("adjoint_gradient", st.gradient)
    run.put("fd_gradient", st.fd_gradient)
    run.put("fd_step", st.fd_step)
    if case == "analytic":
        run.put("J_exact", bg.riemann_exact_J(0.0, T))
        run.put("analytic_gradient", cases.analytic_gradient(T))
    else:
        run.put("reference_J", cases.TABLE1_REFERENCE["J"])
        run.put("reference_gradient", cases.TABLE1_REFERENCE["gradient"])
    du = du0()(grid.x)
    bg.write_csv(run.path("burgers.csv"), st.trajectory, st.adjoint, du)
    return EXIT_OK


def _gradient_check(W, lam, mesh, config, fn, cfg, run: Run) -> bool:
    g = ad.adjoint_gradient_rho_inf(W, lam, mesh, config)
    rho = config.freestream.rho
    rows, best = [], None
    for eps in (float(e) for e in cfg["gradient_check"]["eps"].split()):
        vals = []
        for s in (1, -1):
            c2 = ad.with_rho_inf(config, rho * (1 + s * eps))
            r = sv.solve_steady(mesh, c2, W0=W)
            if not r.converged:
                raise sv.ConvergenceError(f"gradient-check solve (eps={eps:g}) did not converge", r)
            vals.append(ad.functional_value(r.field, mesh, fn, c2))
        fd = (vals[0] - vals[1]) / (2 * eps * rho)
        err = abs(g - fd) / max(abs(fd), 1e-300)
        rows.append((eps, fd, err))
        if best is None or err < best[2]:
            best = (eps, fd, err)
    with open(run.path("gradient_check.csv"), "w", encoding="ascii") as fh:
        fh.write("eps,fd_gradient,adjoint_gradient,rel_error\n")
        for eps, fd, err in rows:
            fh.write("%.17g,%.17g,%.17g,%.17g\n" % (eps, fd, g, err))
    run.put("gradient_check_adjoint", g)
    run.put("gradient_check_fd", best[1])
    run.put("gradient_check_eps", best[0])
    run.put("gradient_check_rel_error", best[2])
    return best[2] <= cfg["gradient_check"]["tolerance"]


def cmd_euler(args, cfg, run: Run) -> int:
    config = solver_config(cfg)
    fn = functional(cfg)
    mesh = build_mesh(cfg)
    sv.validate_field(sv.freestream_field(mesh, config), config.gamma)
    if not np.any(mesh.boundary_weights(fn.boundary_tag) > 0):
        raise ConfigError(f"mesh has no '{fn.boundary_tag.label}' boundary for the functional")
    run.put("vertices", mesh.n_vertices)
    run.put("triangles", len(mesh.triangles))
    if args.dry_run:
        run.put("dry_run", "ok")
        return EXIT_OK
    res = sv.solve_steady(mesh, config)
    sv.write_convergence_log(run.path("convergence.csv"), res)
    run.put("steps", res.steps)
    run.put("final_residual", res.final_residual)
    if not res.converged:
        _write_field_vtk(run.path("flow.vtk"), mesh, res.field, None, config.gamma)
        run.put("converged", "no")
        return EXIT_CONVERGENCE
    W = res.field
    run.put("J", ad.functional_value(W, mesh, fn, config))
    ok = True
    lam = None
    if cfg["adjoint"]["enabled"] or args.gradient_check:
        a = ad.solve_adjoint(W, mesh, fn, config, method=cfg["adjoint"]["method"])
        lam = a.field
        run.put("adjoint_rel_residual", a.rel_residual)
    _write_field_vtk(run.path("flow.vtk"), mesh, W, lam, config.gamma)
    if lam is not None:
        sv.write_vtk(run.path("adjoint.vtk"), mesh, {f"W{k + 1}_star": lam[:, k] for k in range(4)})
        ok &= _verification(W, lam, mesh, config, fn, cfg, run)
    if args.gradient_check:
        ok &= _gradient_check(W, lam, mesh, config, fn, cfg, run)
    return EXIT_OK if ok else EXIT_VERIFY


def _verification(W, lam, mesh, config, fn, cfg, run: Run) -> bool:
    v = cfg["verify"]
    if v["boundary"]:
        if fn.kind == "outflow_density_target":
            rep = ad.verify_outflow_bc(lam, W, mesh, fn, config, v["flag_threshold"])
            name = "outflow_bc"
        else:
            rep = ad.ground_adjoint_check(lam, W, mesh, fn, config, -1.0, v["flag_threshold"])
            name = "ground_bc"
        rep.write_csv(run.path(f"{name}.csv"))
        run.put(f"{name}_max_rel_smooth", rep.max_rel_smooth)
        run.put(f"{name}_correlation", rep.correlation())
        run.put(f"{name}_flagged", int(rep.excluded.sum()))
        r = ad.outflow_right_boundary_zero_check(lam, mesh, fn)
        if r is not None:
            run.put("outflow_adjoint_rel_max", r)
        _, _, rel = ad.airfoil_adjoint_bc_residual(lam, mesh)
        run.put("wall_condition_rel_max", float(rel.max()) if len(rel) else 0.0)
    if v["jump_geography"] and fn.kind == "outflow_density_target":
        case = cases.FlowCase(mesh, W, lam, fn, config, 0.0, 0.0)
        geo = cases.jump_geography(case, v["jump_theta"])
        run.put("jump_overlap_fraction", geo["overlap"])
        run.put("jump_adjoint_near_intersection", geo["near_intersection"])
        run.put("jump_adjoint_reach", geo["reach"])
        with open(run.path("jump_edges.csv"), "w", encoding="ascii") as fh:
            fh.write("edge,i,j,field\n")
            for name, es in (("rho", geo["rho_edges"]), ("W1_star", geo["adjoint_jump_edges"])):
                for e in es:
                    fh.write(f"{e},{mesh.edges[e, 0]},{mesh.edges[e, 1]},{name}\n")
    if v["shape_gradient"] and "wedge_angle" in mesh.meta:
        body = body_vertices(mesh)
        sg = ad.shape_gradient(lam, W, mesh, 1.0, config, wall_vertices=body)
        step = v["shape_amplitude"] / max(np.abs(sg.density).max(), 1e-300)
        sg = ad.shape_gradient(lam, W, mesh, step, config, wall_vertices=body)
        sg.write_csv(run.path("shape_gradient.csv"))
        run.put("shape_predicted_dJ", sg.predicted_dJ)
    return True


def cmd_verify_all(args, cfg, run: Run) -> int:
    if not cases.select(args.filter):
        raise ConfigError(f"--filter {args.filter!r} matches no criterion")
    if args.inject_fault:
        with cases.inject_fault(args.inject_fault):
            results = cases.run_all(args.filter, echo=print)
    else:
        results = cases.run_all(args.filter, echo=print)
    with open(run.path("verify_report.txt"), "w", encoding="ascii") as fh:
        for r in results:
            keep = [c for c in r.checks if c.name != "runtime_s"]
            status = "PASS" if r.passed else "FAIL"
            fh.write(f"C{r.number} {r.key} {status} " +
                     "; ".join(c.describe() for c in keep) + (f" error: {r.error}" if r.error else "") + "\n")
    failed = [r for r in results if not r.passed]
    run.put("criteria_run", len(results))
    run.put("criteria_failed", len(failed))
    if failed:
        first = failed[0]
        run.put("first_failure", f"C{first.number} {first.key} ({', '.join(first.failed_checks) or first.error})")
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def threads_from_env():
    raw = os.environ.get("ADJ_EULER_THREADS")
    if raw is None or raw == "":
        return None
    if not raw.isdigit() or int(raw) < 1:
        raise ConfigError(f"ADJ_EULER_THREADS must be a positive integer, got {raw!r}")
    return int(raw)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration file")
    common.add_argument("--out", metavar="DIR", default=None, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p = argparse.ArgumentParser(prog="adjeuler", description=__doc__.splitlines()[0],
                                parents=[common])
    p.add_argument("--version", action="version", version=f"adjeuler {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    b = sub.add_parser("burgers", parents=[common], help="1D Burgers gradient study")
    b.add_argument("--case", choices=("table1", "analytic"))
    b.add_argument("--T", type=float, help="final time")
    e = sub.add_parser("euler", parents=[common], help="2D forward/adjoint pipeline")
    e.add_argument("--gradient-check", action="store_true",
                   help="compare the adjoint dJ/drho_inf with finite differences")
    e.add_argument("--dry-run", action="store_true", help="validate config and mesh only")
    va = sub.add_parser("verify-all", parents=[common], help="run the acceptance matrix")
    va.add_argument("--filter", metavar="NAME",
                    help="criterion number, key or group (burgers, calculus, euler)")
    va.add_argument("--inject-fault", choices=("jacobian",), help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:           # argparse usage errors exit with 2 already
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        threads = threads_from_env()
        cfg = load_config(args.config)
        if args.command == "burgers" and args.T is not None and args.T <= 0:
            raise ConfigError("--T must be positive")
        if threads:
            log.info("thread cap %d", threads)
        out = args.out or f"adjeuler-{args.command}"
        run = Run(out, args.command, cfg, argv)
        handler = {"burgers": cmd_burgers, "euler": cmd_euler, "verify-all": cmd_verify_all}
        status = handler[args.command](args, cfg, run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MeshError, MeshParseError) as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except sv.ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return run.finish(EXIT_CONVERGENCE)
    if status == EXIT_CONVERGENCE:
        print("convergence failure: steady solve did not reach the tolerance; "
              f"log kept in {run.out / 'convergence.csv'}", file=sys.stderr)
    return run.finish(status)


if __name__ == "__main__":
    sys.exit(main())
