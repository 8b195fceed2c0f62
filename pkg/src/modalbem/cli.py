"""Command-line front end: frequency sweeps, mode solves, driven
excitations, modal expansions, RCS cuts, and dense spectrum dumps.

Configuration is a plain key=value text file; any --set key=value flag
overrides the file.  All outputs land under output_dir together with a
manifest listing the effective configuration and output checksums.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
from pathlib import Path

import numpy as np

from . import assembly, charmodes, postproc, spectral
from .basis import BcSpace, RwgSpace
from .calderon import assemble_cmp_cfie, assemble_efie_bc, assemble_gramian
from .excitation import (
    PlaneWave,
    modal_coefficients,
    plane_wave_rhs,
    reconstruct_current,
    save_expansion_csv,
    solve_driven,
)
from .kernels import Medium
from .mesh import barycentric_refine, load_mesh, make_box, make_sphere

FORMULATIONS = ("efie_x", "efie_z", "mfie", "cfie", "cmp_cfie")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def parse_config(path=None, overrides=()) -> dict:
    cfg: dict[str, str] = {}
    if path is not None:
        for raw in Path(path).read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw!r}")
            key, _, val = line.partition("=")
            cfg[key.strip()] = val.strip()
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"bad --set override: {item!r}")
        key, _, val = item.partition("=")
        cfg[key.strip()] = val.strip()
    return cfg


def _require(cfg, key):
    if key not in cfg:
        raise KeyError(f"config key '{key}' is required")
    return cfg[key]


def build_mesh(spec: str):
    """mesh = sphere:<radius>:<subdivision> | box:<ax,ay,az>:<nx,ny,nz>
    | path to an OFF / MSH file."""
    if spec.startswith("sphere:"):
        _, radius, sub = spec.split(":")
        return make_sphere(float(radius), int(sub))
    if spec.startswith("box:"):
        _, dims, divs = spec.split(":")
        return make_box(tuple(float(x) for x in dims.split(",")),
                        tuple(int(x) for x in divs.split(",")))
    return load_mesh(spec)


def _wave(cfg) -> PlaneWave:
    d = np.array([float(x) for x in cfg.get("wave_direction", "0,0,1").split(",")])
    p = np.array([float(x) for x in cfg.get("wave_polarization", "1,0,0").split(",")])
    amp = float(cfg.get("wave_amplitude", "1.0"))
    return PlaneWave(d / np.linalg.norm(d), p / np.linalg.norm(p), amp)


def _outdir(cfg) -> Path:
    out = Path(cfg.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(outdir: Path, command: str, cfg: dict, files) -> None:
    with open(outdir / "manifest.txt", "w") as fh:
        fh.write(f"command={command}\n")
        for key in sorted(cfg):
            fh.write(f"config.{key}={cfg[key]}\n")
        for f in sorted(files):
            digest = hashlib.sha256(Path(f).read_bytes()).hexdigest()
            fh.write(f"output {Path(f).name} sha256={digest}\n")


# ---------------------------------------------------------------------------
# Matrix pipelines shared by the commands
# ---------------------------------------------------------------------------


def _operators(cfg, mesh, medium, need):
    """Assemble the operator matrices listed in `need` for one frequency."""
    space = RwgSpace(mesh)
    alpha = float(cfg.get("alpha", "0.5"))
    out = {"space": space, "alpha": alpha}
    Z_E = assembly.assemble_efie(space, medium) if need & {
        "Z_E", "Z_C", "Z_CC"} else None
    Z_H = assembly.assemble_mfie(space, medium) if need & {
        "Z_H", "Z_C", "Z_CC"} else None
    out["Z_E"], out["Z_H"] = Z_E, Z_H
    if need & {"Z_C", "Z_CC"}:
        out["Z_C"], out["K_C"] = assembly.assemble_cfie(Z_E, Z_H, medium, alpha)
    if "Z_CC" in need:
        bc = BcSpace(barycentric_refine(mesh))
        Z_tilde = assemble_efie_bc(bc, medium, "ik")
        G = assemble_gramian(space, bc)
        R_E, X_E = assembly.real_imag_split(Z_E)
        R_H, X_H = assembly.real_imag_split(Z_H)
        out["Z_CC"], out["K_CC"] = assemble_cmp_cfie(
            Z_E, R_E, Z_H, X_H, Z_tilde, G, medium, alpha
        )
    return out


def _solve_modes(cfg, ops, medium):
    formulation = cfg.get("formulation", "cfie")
    n_modes = int(cfg.get("n_modes", "10"))
    seed = int(cfg.get("seed", "0"))
    inner = cfg.get("inner_method", "gmres")
    eig = cfg.get("eig_method", "arnoldi")
    kw = dict(inner_method=inner, seed=seed, eig_method=eig,
              frequency=medium.frequency, alpha=ops["alpha"])
    if formulation == "efie_x":
        return charmodes.solve_modes_efie(ops["Z_E"], n_modes, "x_inverse", **kw)
    if formulation == "efie_z":
        return charmodes.solve_modes_efie(ops["Z_E"], n_modes, "z_inverse", **kw)
    if formulation == "mfie":
        return charmodes.solve_modes_mfie(ops["Z_H"], n_modes, **kw)
    if formulation == "cfie":
        return charmodes.solve_modes_cfie(ops["Z_C"], ops["K_C"], n_modes, **kw)
    if formulation == "cmp_cfie":
        return charmodes.solve_modes_cmp_cfie(ops["Z_CC"], ops["K_CC"], n_modes, **kw)
    raise ValueError(f"unknown formulation '{formulation}'")


def _system_matrices(ops, formulation):
    """(system matrix, weighting matrix) of a formulation for driven solves
    and expansions."""
    if formulation in ("efie_x", "efie_z"):
        return ops["Z_E"], np.real(ops["Z_E"]) + 0j
    if formulation == "mfie":
        return ops["Z_H"], 1j * np.imag(ops["Z_H"])
    if formulation == "cfie":
        return ops["Z_C"], ops["K_C"]
    if formulation == "cmp_cfie":
        return ops["Z_CC"], ops["K_CC"]
    raise ValueError(f"unknown formulation '{formulation}'")


_NEEDS = {
    "efie_x": {"Z_E"},
    "efie_z": {"Z_E"},
    "mfie": {"Z_H"},
    "cfie": {"Z_C"},
    "cmp_cfie": {"Z_CC"},
}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_sweep(cfg) -> int:
    outdir = _outdir(cfg)
    mesh = build_mesh(_require(cfg, "mesh"))
    start = float(_require(cfg, "sweep_start_hz"))
    stop = float(_require(cfg, "sweep_stop_hz"))
    step = float(_require(cfg, "sweep_step_hz"))
    cols = [c.strip() for c in cfg.get(
        "sweep_columns", "Z_E,X_E,Z_H,R_H,Z_C").split(",")]
    freqs = np.arange(start, stop + 0.5 * step, step)
    rows, failures = [], []
    for f in freqs:
        medium = Medium(float(f))
        try:
            need = set()
            for c in cols:
                need |= {"X_E": {"Z_E"}, "R_H": {"Z_H"}}.get(c, {c})
            ops = _operators(cfg, mesh, medium, need)
            vals = []
            for c in cols:
                if c == "X_E":
                    M = np.imag(ops["Z_E"])
                elif c == "R_H":
                    M = np.real(ops["Z_H"])
                else:
                    M = ops[c]
                vals.append(spectral.condition_number(M))
            rows.append((float(f), vals))
        except Exception as exc:  # record and continue per contract
            failures.append((float(f), repr(exc)))
    path = outdir / "sweep.csv"
    with open(path, "w") as fh:
        fh.write("frequency_hz," + ",".join(f"cond_{c}" for c in cols) + "\n")
        for f, vals in rows:
            fh.write(f"{f:.17g}," + ",".join(f"{v:.17g}" for v in vals) + "\n")
    files = [path]
    if failures:
        fp = outdir / "sweep_failures.txt"
        with open(fp, "w") as fh:
            for f, msg in failures:
                fh.write(f"{f:.17g} {msg}\n")
        files.append(fp)
    write_manifest(outdir, "sweep", cfg, files)
    return 0


def cmd_modes(cfg) -> int:
    outdir = _outdir(cfg)
    mesh = build_mesh(_require(cfg, "mesh"))
    medium = Medium(float(_require(cfg, "frequency_hz")))
    formulation = cfg.get("formulation", "cfie")
    t0 = time.perf_counter()
    ops = _operators(cfg, mesh, medium, _NEEDS[formulation] | {"Z_E", "Z_H"})
    modes = _solve_modes(cfg, ops, medium)
    charmodes.detect_null_modes(modes, ops["Z_E"], ops["Z_H"])
    if cfg.get("aux_modes", "true").lower() in ("true", "1", "yes"):
        Z, K = _system_matrices(ops, formulation)
        modes = charmodes.solve_aux_modes(
            Z, K, modes, inner_method=cfg.get("inner_method", "gmres"),
            eig_method=cfg.get("eig_method", "arnoldi"))
    wall = time.perf_counter() - t0
    mdir = outdir / "modes"
    charmodes.save_modes(mdir, modes)
    stats = modes.stats or spectral.SolveStats()
    spath = outdir / "stats.txt"
    with open(spath, "w") as fh:
        fh.write(f"outer_iterations={stats.outer_iterations}\n")
        fh.write(f"mean_inner_iterations={stats.mean_inner_iterations:.17g}\n")
        fh.write(f"wall_time_s={wall:.17g}\n")
    print(f"{formulation}: {modes.n_modes} modes, "
          f"N_out={stats.outer_iterations}, "
          f"N_in={stats.mean_inner_iterations:.1f}, wall={wall:.1f}s")
    files = [spath] + [p for p in mdir.iterdir()]
    write_manifest(outdir, "modes", cfg, files)
    return 0


def cmd_excite(cfg) -> int:
    outdir = _outdir(cfg)
    mesh = build_mesh(_require(cfg, "mesh"))
    medium = Medium(float(_require(cfg, "frequency_hz")))
    formulation = cfg.get("formulation", "cfie")
    ops = _operators(cfg, mesh, medium, _NEEDS[formulation])
    Z, _ = _system_matrices(ops, formulation)
    wave = _wave(cfg)
    F = plane_wave_rhs(ops["space"], medium, wave, ops["alpha"])
    J, stats = solve_driven(Z, F, method=cfg.get("solve_method", "gmres"))
    cpath = outdir / "current.bin"
    assembly.save_matrix_binary(cpath, J.reshape(-1, 1))
    vpath = outdir / "current.vtk"
    postproc.export_current_vtk(ops["space"], J, vpath)
    print(f"driven solve: N_in={stats.mean_inner_iterations:.1f}, "
          f"wall={stats.wall_time:.2f}s")
    write_manifest(outdir, "excite", cfg, [cpath, vpath])
    return 0


def cmd_expand(cfg) -> int:
    outdir = _outdir(cfg)
    mesh = build_mesh(_require(cfg, "mesh"))
    medium = Medium(float(_require(cfg, "frequency_hz")))
    modes = charmodes.load_modes(_require(cfg, "modes_dir"))
    if abs(modes.frequency - medium.frequency) > 1e-6 * medium.frequency:
        raise ValueError(
            f"mode set frequency {modes.frequency:g} Hz does not match the "
            f"requested expansion frequency {medium.frequency:g} Hz"
        )
    formulation = cfg.get("formulation", modes.formulation)
    ops = _operators(cfg, mesh, medium, _NEEDS[formulation])
    wave = _wave(cfg)
    F = plane_wave_rhs(ops["space"], medium, wave, ops["alpha"])
    counts = [int(x) for x in cfg.get("keep_counts", "5,15,25,75").split(",")]
    files = []
    order = np.argsort(np.abs(modes.lambdas))
    for count in counts:
        expansion = modal_coefficients(modes, F, keep=order[:count])
        I_rec = reconstruct_current(expansion)
        epath = outdir / f"expansion_{count:04d}.csv"
        save_expansion_csv(epath, expansion)
        rpath = outdir / f"reconstruction_{count:04d}.bin"
        assembly.save_matrix_binary(rpath, I_rec.reshape(-1, 1))
        files += [epath, rpath]
    write_manifest(outdir, "expand", cfg, files)
    return 0


def cmd_rcs(cfg) -> int:
    outdir = _outdir(cfg)
    mesh = build_mesh(_require(cfg, "mesh"))
    medium = Medium(float(_require(cfg, "frequency_hz")))
    space = RwgSpace(mesh)
    if "current_file" in cfg:
        J = assembly.load_matrix_binary(cfg["current_file"]).ravel()
    else:
        formulation = cfg.get("formulation", "cfie")
        ops = _operators(cfg, mesh, medium, _NEEDS[formulation])
        Z, _ = _system_matrices(ops, formulation)
        wave = _wave(cfg)
        F = plane_wave_rhs(ops["space"], medium, wave, ops["alpha"])
        J, _ = solve_driven(Z, F, method=cfg.get("solve_method", "gmres"))
        space = ops["space"]
    plane = cfg.get("plane", "phi0")
    n_angles = int(cfg.get("n_angles", "181"))
    theta, sigma, dbsm = postproc.rcs_cut(space, J, medium, plane, n_angles)
    path = outdir / f"rcs_{plane}.csv"
    postproc.save_rcs_csv(path, theta, sigma, dbsm)
    write_manifest(outdir, "rcs", cfg, [path])
    return 0


def cmd_spectrum(cfg) -> int:
    outdir = _outdir(cfg)
    mesh = build_mesh(_require(cfg, "mesh"))
    medium = Medium(float(_require(cfg, "frequency_hz")))
    formulation = cfg.get("formulation", "cfie")
    ops = _operators(cfg, mesh, medium, _NEEDS[formulation])
    Z, _ = _system_matrices(ops, formulation)
    res = spectral.dense_eigs(Z)
    order = np.argsort(np.abs(res.values))
    path = outdir / f"spectrum_{formulation}.csv"
    spectral.save_spectrum_csv(path, res.values[order])
    write_manifest(outdir, "spectrum", cfg, [path])
    return 0


COMMANDS = {
    "sweep": cmd_sweep,
    "modes": cmd_modes,
    "excite": cmd_excite,
    "expand": cmd_expand,
    "rcs": cmd_rcs,
    "spectrum": cmd_spectrum,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="modalbem",
        description="Boundary-element characteristic-mode solver for closed "
                    "conducting surfaces",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("-c", "--config", help="key=value configuration file")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a configuration key (repeatable)",
    )
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config, args.set)
        return COMMANDS[args.command](cfg)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
