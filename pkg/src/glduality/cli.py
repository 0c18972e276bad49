"""Command-line front end: ``glduality <command> --config <path> [--out <dir>] [--seed <n>]``.

Exit codes: 0 success, 1 configuration error, 2 solver did not converge,
3 certificate precondition failed.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .duality import CertificateError, certify_gl, certify_scalar
from .energy import newton_scalar, scalar_energy, scalar_residual
from .fields import GLParams, ParamError, applied_field, envelope
from .grid import BoxGrid, GLDomain
from .outer import GLSolver, default_start

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_CERTIFICATE = 0, 1, 2, 3
MODELS = ("gl3d", "scalar1d", "scalar2d")
COMMANDS = ("solve", "certify", "sweep", "export")
ENVELOPES = ("paper-envelope", "uniform", "zero")
FORCINGS = ("sine", "constant", "zero")
STARTS = ("uniform", "random")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class RunConfig:
    model: str
    command: str = "solve"
    seed: int = 0
    start: str = "uniform"
    noise: float = 0.01
    refine: bool = True
    axis: int = 0
    cells: int = 16
    pad: int = 4
    half_width: float = 0.5
    n: int = 31
    params: GLParams = field(default_factory=GLParams)
    B0: float = 0.0
    envelope: str = "paper-envelope"
    forcing: str = "sine"
    forcing_amplitude: float = 0.1
    sweep_B0: tuple[float, ...] = ()


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    t = text.strip().lower()
    return None if t in ("", "none", "auto") else float(text)


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _axis(text):
    t = text.strip().lower()
    if t in ("x", "y", "z"):
        return "xyz".index(t)
    return int(t)


# section -> key -> (target, converter)
SCHEMA = {
    "run": {
        "model": ("model", str), "command": ("command", str), "seed": ("seed", int),
        "start": ("start", str), "noise": ("noise", float), "refine": ("refine", _bool),
        "axis": ("axis", _axis),
    },
    "grid": {
        "cells": ("cells", int), "pad": ("pad", int), "half_width": ("half_width", float), "n": ("n", int),
    },
    "params": {
        "gamma": ("params.gamma", float), "alpha": ("params.alpha", float), "beta": ("params.beta", float),
        "rho": ("params.rho", float), "K0": ("params.K0", float), "K": ("params.K", _opt_float),
        "K2": ("params.K2", _opt_float), "mol_shift": ("params.mol_shift", _opt_float),
        "tol": ("params.tol", float), "max_iter": ("params.max_iter", int), "damping": ("params.damping", float),
    },
    "field": {
        "B0": ("B0", float), "envelope": ("envelope", str), "forcing": ("forcing", str),
        "forcing_amplitude": ("forcing_amplitude", float),
    },
    "sweep": {"B0": ("sweep_B0", _floats)},
}


def _line_numbers(text):
    """Map (section, key) to the 1-based line where it is set."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = i
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            out[(section, m.group(1).strip())] = i
    return out


def parse_config(text: str) -> RunConfig:
    """Validate an INI run configuration; every violation is reported with its line."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    lines = _line_numbers(text)
    problems, top, par = [], {}, {}
    for section in cp.sections():
        if section not in SCHEMA:
            problems.append(f"line {lines.get((section, None), '?')}: unknown section [{section}]")
            continue
        for key, raw in cp.items(section):
            where = f"line {lines.get((section, key), '?')}"
            if key not in SCHEMA[section]:
                problems.append(f"{where}: unknown key '{key}' in [{section}]")
                continue
            target, conv = SCHEMA[section][key]
            try:
                value = conv(raw)
            except ValueError as exc:
                problems.append(f"{where}: bad value for '{key}': {exc}")
                continue
            if target.startswith("params."):
                par[target[7:]] = value
            else:
                top[target] = value
    if "model" not in top:
        problems.append("line ?: [run] model is required")
    checks = [("model", MODELS), ("command", COMMANDS), ("envelope", ENVELOPES), ("forcing", FORCINGS),
              ("start", STARTS)]
    for key, allowed in checks:
        if key in top and top[key] not in allowed:
            sec = next(s for s, d in SCHEMA.items() if key in d)
            problems.append(f"line {lines.get((sec, key), '?')}: '{key}' must be one of {', '.join(allowed)}")
    for key, lo in (("cells", 2), ("pad", 1), ("n", 1)):
        if key in top and top[key] < lo:
            problems.append(f"line {lines.get(('grid', key), '?')}: '{key}' must be >= {lo}")
    if "half_width" in top and not top["half_width"] > 0:
        problems.append(f"line {lines.get(('grid', 'half_width'), '?')}: 'half_width' must be positive")
    if "axis" in top and not 0 <= top["axis"] <= 2:
        problems.append(f"line {lines.get(('run', 'axis'), '?')}: 'axis' must be x, y or z")
    try:
        params = GLParams(**par)
    except ParamError as exc:
        problems.append(f"line {lines.get(('params', None), '?')}: {exc}")
        params = None
    if problems:
        raise ConfigError(problems)
    return RunConfig(params=params, **top)


def serialize(cfg: RunConfig) -> str:
    """INI text that parses back to ``cfg``."""
    def fmt(v):
        if v is None:
            return "auto"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        if isinstance(v, tuple):
            return ", ".join(repr(float(x)) for x in v)
        return str(v)

    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key, (target, _) in keys.items():
            if target.startswith("params."):
                v = getattr(cfg.params, target[7:])
            else:
                v = getattr(cfg, target)
            if target == "axis":
                v = "xyz"[v]
            out.append(f"{key} = {fmt(v)}")
        out.append("")
    return "\n".join(out)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def builtin_envelope(name: str):
    """Profile function of (x, y, z) for the applied induction."""
    if name == "paper-envelope":
        return envelope
    if name == "uniform":
        return lambda x, y, z: np.ones_like(np.asarray(x, dtype=float))
    if name == "zero":
        return lambda x, y, z: np.zeros_like(np.asarray(x, dtype=float))
    raise ValueError(f"unknown envelope {name!r}; choose from {', '.join(ENVELOPES)}")


# ----------------------------------------------------------------------------
# exports


def export_slice(values, grid: BoxGrid, path, axis: int = 2, coordinate: float = 0.0) -> Path:
    """Write the plane nearest to ``coordinate`` along ``axis`` as ``x,y,value`` CSV rows."""
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ValueError("field does not match grid")
    path = Path(path)
    if grid.dim == 1:
        xs = grid.coords(0)
        rows = np.column_stack([xs, np.zeros_like(xs), values])
    else:
        if grid.dim == 3:
            k = int(np.argmin(np.abs(grid.coords(axis) - coordinate)))
            plane = np.take(values, k, axis=axis)
            keep = [a for a in range(3) if a != axis]
        else:
            plane, keep = values, [0, 1]
        X, Y = np.meshgrid(grid.coords(keep[0]), grid.coords(keep[1]), indexing="ij")
        rows = np.column_stack([X.ravel(), Y.ravel(), plane.ravel()])
    np.savetxt(path, rows, delimiter=",", header="x,y,value", comments="", fmt="%.17g")
    return path


def read_slice(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def export_vtk(values, grid: BoxGrid, path, name: str = "phi2") -> Path:
    """Legacy ASCII STRUCTURED_POINTS file, x varying fastest."""
    values = np.asarray(values, dtype=float)
    dims = list(grid.shape) + [1] * (3 - grid.dim)
    origin = list(grid.lower) + [0.0] * (3 - grid.dim)
    data = values.transpose().ravel() if grid.dim > 1 else values.ravel()
    head = [
        "# vtk DataFile Version 3.0", name, "ASCII", "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(map(str, dims)),
        "ORIGIN " + " ".join(f"{o:.17g}" for o in origin),
        "SPACING " + " ".join([f"{grid.spacing:.17g}"] * 3),
        f"POINT_DATA {data.size}", f"SCALARS {name} double 1", "LOOKUP_TABLE default",
    ]
    path = Path(path)
    path.write_text("\n".join(head) + "\n" + "\n".join(f"{v:.17g}" for v in data) + "\n")
    return path


def write_report(path, items: dict) -> Path:
    def fmt(v):
        if isinstance(v, (list, tuple)):
            return ",".join(fmt(x) for x in v)
        if isinstance(v, float):
            return f"{v:.17g}"
        return str(v)

    path = Path(path)
    path.write_text("".join(f"{k} = {fmt(v)}\n" for k, v in items.items()))
    return path


# ----------------------------------------------------------------------------
# runs


def _forcing(cfg: RunConfig, grid: BoxGrid) -> np.ndarray:
    pts = [c[tuple(slice(1, -1) for _ in range(grid.dim))] for c in grid.mesh()]
    if cfg.forcing == "zero":
        return np.zeros(pts[0].shape)
    if cfg.forcing == "constant":
        return np.full(pts[0].shape, cfg.forcing_amplitude)
    return cfg.forcing_amplitude * np.prod([np.sin(np.pi * p) for p in pts], axis=0)


def _scalar_grid(cfg):
    return BoxGrid.unit_interval_interior(cfg.n, 1 if cfg.model == "scalar1d" else 2)


def _embed(grid, u):
    full = np.zeros(grid.shape)
    full[tuple(slice(1, -1) for _ in range(grid.dim))] = u
    return full


def _solve_scalar(cfg, out: Path, log):
    grid = _scalar_grid(cfg)
    f = _forcing(cfg, grid)
    u = newton_scalar(grid, f, cfg.params)
    res = float(np.abs(scalar_residual(grid, u, f, cfg.params)).max())
    J = scalar_energy(grid, u, f, cfg.params)
    export_slice(_embed(grid, u), grid, out / "u.csv")
    write_report(out / "report.txt", {"model": cfg.model, "energy": J, "residual": res})
    log(f"scalar solve: J = {J:.12g}, residual = {res:.3e}")
    return grid, u, f, res <= 1e-9


def _solve_gl(cfg, B0_amp, out: Path, log, solver=None):
    dom = GLDomain.build(cfg.cells, cfg.pad, cfg.half_width)
    B0 = applied_field(dom.outer, B0_amp, builtin_envelope(cfg.envelope))
    solver = solver or GLSolver(dom, cfg.axis)
    phi0, A0 = default_start(cfg.params, dom, cfg.seed, cfg.noise if cfg.start == "random" else 0.0)
    phi, A, rep = solver.run(phi0, A0, B0, cfg.params, refine=cfg.refine)
    m = np.abs(phi) ** 2
    items = {"model": cfg.model, "B0": B0_amp, "reason": rep.reason, "iterations": rep.iterations,
             "refine_steps": rep.refine_steps, "mean_phi2": float(m.mean()), "min_phi2": float(m.min()),
             "max_phi2": float(m.max())}
    items.update({k: v for k, v in rep.as_dict().items() if k not in ("reason", "refine_steps", "iterations")})
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "report.txt", items)
    export_slice(m, dom.inner, out / "phi2_z0.csv", axis=2, coordinate=0.0)
    log(f"B0 = {B0_amp:g}: {rep.reason} after {rep.iterations} iterations, mean |phi|^2 = {m.mean():.15f}")
    return dom, B0, phi, A, rep, solver


def run_command(cfg: RunConfig, out, log=print) -> int:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    scalar = cfg.model != "gl3d"
    if cfg.command == "sweep":
        amps = cfg.sweep_B0 or (cfg.B0,)
        rows, code, solver = [], EXIT_OK, None
        if scalar:
            log("sweep is only defined for the gl3d model")
            return EXIT_CONFIG
        for amp in amps:
            *_, phi, _, rep, solver = _solve_gl(cfg, amp, out / f"B0_{amp:g}", log, solver)
            rows.append((amp, float((np.abs(phi) ** 2).mean()), rep.reason))
            if not rep.converged:
                code = EXIT_NOT_CONVERGED
        (out / "sweep.csv").write_text("B0,mean_phi2,reason\n" + "".join(f"{a:.17g},{m:.17g},{r}\n" for a, m, r in rows))
        log("B0        mean |phi|^2")
        for a, m, _ in rows:
            log(f"{a:<9g} {m:.15f}")
        return code
    if scalar:
        grid, u, f, ok = _solve_scalar(cfg, out, log)
        if not ok:
            return EXIT_NOT_CONVERGED
        if cfg.command == "export":
            export_vtk(_embed(grid, u), grid, out / "u.vtk", "u")
        if cfg.command == "certify":
            try:
                cert = certify_scalar(grid, u, f, cfg.params)
            except CertificateError as exc:
                log(f"certificate precondition failed: {exc}")
                return EXIT_CERTIFICATE
            write_report(out / "certificate.txt", cert.summary())
            log(f"gap = {cert.gap:.3e}, J = {cert.primal:.12g}, J* = {cert.dual:.12g}")
        return EXIT_OK
    dom, B0, phi, A, rep, _ = _solve_gl(cfg, cfg.B0, out, log)
    if not rep.converged:
        return EXIT_NOT_CONVERGED
    if cfg.command == "export":
        export_vtk(np.abs(phi) ** 2, dom.inner, out / "phi2.vtk", "phi2")
    if cfg.command == "certify":
        try:
            cert = certify_gl(dom, phi, A, B0, cfg.params)
        except CertificateError as exc:
            log(f"certificate precondition failed: {exc}")
            return EXIT_CERTIFICATE
        write_report(out / "certificate.txt", cert.summary())
        log(f"gap = {cert.gap:.3e}, J = {cert.primal:.12g}, J* = {cert.dual:.12g}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="glduality", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = dataclasses.replace(cfg, command=args.command)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return run_command(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
