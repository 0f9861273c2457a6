"""Subcommand CLI: build -> transform -> compile -> simulate -> spectrum.

Exit codes: 0 success, 2 configuration error, 3 numeric error,
4 under-constrained analysis. Outputs are CSV files written atomically, so
identical configs and seeds give byte-identical results.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import hamiltonian as ham
from .compiler import block_propagator, cartan_decompose, cnot_to_ms
from .config import ConfigError, RunConfig, load_config
from .constants import AU_TIME_TO_FS, HARTREE_TO_INVCM
from .dynamics import (
    InitialStateSpec,
    load_timeseries_csv,
    run_dynamics,
    save_timeseries_csv,
)
from .gates import emit_text
from .io import atomic_write, format_sig
from .simulator import NoiseModel
from .spectrum import (
    UnderConstrainedError,
    combine_spectra,
    detect_peaks,
    fourier_spectrum,
    reconstruct_ladder,
    save_ladder_csv,
    save_peaks_csv,
    save_spectrum_csv,
)
from .symmetry import save_block_csv, transform

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_UNDERCONSTRAINED = 4


def _build_hamiltonian(cfg: RunConfig) -> ham.NuclearHamiltonian:
    if cfg.potential_source == "builtin_dmanh":
        return ham.load_builtin_dmanh()
    grid, potential = ham.load_potential_csv(cfg.potential_source)
    sigma = cfg.kinetic["sigma"]
    spec = ham.DafKineticSpec(
        mass=cfg.kinetic["mass"],
        sigma=sigma if sigma is not None else 2.0 * grid.spacing,
        m_daf=cfg.kinetic["m_daf"],
    )
    return ham.build_hamiltonian(grid, potential, spec)


def _initial_spec(cfg: RunConfig) -> InitialStateSpec:
    variant = cfg.initial["variant"]
    params = cfg.initial["params"]
    return InitialStateSpec(variant, tuple(params))


def _noise_model(cfg: RunConfig) -> NoiseModel | None:
    if not cfg.noise_enabled:
        return None
    n = cfg.noise
    return NoiseModel(
        fidelity_1q=n["fidelity_1q"],
        fidelity_ms=n["fidelity_ms"],
        fidelity_cnot=n["fidelity_cnot"],
        readout_flip=n["readout_flip"],
    )


def _out_dir(cfg: RunConfig, args) -> str:
    out = args.out or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def cmd_build(cfg: RunConfig, args) -> int:
    h = _build_hamiltonian(cfg)
    out = _out_dir(cfg, args)
    ham.save_hamiltonian_csv(h, os.path.join(out, "hamiltonian.csv"))
    sol = ham.exact_diagonalize(h)
    lines = ["index,energy_hartree,energy_rel_cm1"]
    e0 = sol.eigenvalues[0]
    for k, e in enumerate(sol.eigenvalues):
        lines.append(f"{k},{float(e)!r},{format_sig((e - e0) * HARTREE_TO_INVCM, 12)}")
    atomic_write(os.path.join(out, "eigenvalues.csv"), "\n".join(lines) + "\n")
    _say(args, f"wrote hamiltonian.csv and eigenvalues.csv to {out}")
    return EXIT_OK


def cmd_transform(cfg: RunConfig, args) -> int:
    h = _build_hamiltonian(cfg)
    blocks = transform(h)
    out = _out_dir(cfg, args)
    save_block_csv(blocks.block_upper, os.path.join(out, "block_upper.csv"))
    save_block_csv(blocks.block_lower, os.path.join(out, "block_lower.csv"))
    _say(args, f"off-block residual: {blocks.off_block_residual:.3e} Ha")
    return EXIT_OK


def cmd_compile(cfg: RunConfig, args) -> int:
    h = _build_hamiltonian(cfg)
    blocks = transform(h)
    t_au = args.t_fs / AU_TIME_TO_FS
    out = _out_dir(cfg, args)
    for name, block in (("upper", blocks.block_upper), ("lower", blocks.block_lower)):
        program = cartan_decompose(block_propagator(block, t_au))
        atomic_write(os.path.join(out, f"block_{name}.gates"), emit_text(program))
        atomic_write(
            os.path.join(out, f"block_{name}_ms.gates"), emit_text(cnot_to_ms(program))
        )
    _say(args, f"wrote gate programs for t = {args.t_fs} fs to {out}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    h = _build_hamiltonian(cfg)
    dyn = cfg.dynamics
    sol = ham.exact_diagonalize(h)
    span_ha = float(sol.eigenvalues[-1] - sol.eigenvalues[0])
    nyquist_dt_fs = 0.5 / (span_ha / AU_TIME_TO_FS / (2.0 * np.pi)) if span_ha > 0 else np.inf
    if dyn["dt_fs"] > nyquist_dt_fs:
        print(
            f"warning: dt = {dyn['dt_fs']} fs exceeds the Nyquist bound "
            f"{nyquist_dt_fs:.4g} fs for this spectral range",
            file=sys.stderr,
        )
    backend = dyn["backend"]
    noise = _noise_model(cfg) if backend == "circuit_noisy" else None
    program_log = [] if (args.emit_programs and backend != "oracle") else None
    series = run_dynamics(
        h,
        _initial_spec(cfg),
        dt_fs=dyn["dt_fs"],
        n_steps=dyn["n_steps"],
        backend=backend,
        noise=noise,
        shots=cfg.shots if backend == "circuit_noisy" else None,
        seed=cfg.seed,
        remap_mode=dyn["remap_mode"],
        program_log=program_log,
    )
    out = _out_dir(cfg, args)
    save_timeseries_csv(series, os.path.join(out, "timeseries.csv"))
    if program_log:
        pdir = os.path.join(out, "programs")
        os.makedirs(pdir, exist_ok=True)
        for step, block, program in program_log:
            atomic_write(os.path.join(pdir, f"step{step:05d}_{block}.gates"), emit_text(program))
    _say(args, f"wrote timeseries.csv ({dyn['n_steps']} steps, backend {backend}) to {out}")
    return EXIT_OK


def _plot_script(out: str) -> str:
    return """#!/usr/bin/env python3
\"\"\"Render spectrum/ladder PNGs from the CSVs next to this script.\"\"\"
import csv
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

def read(name):
    with open(os.path.join(here, name)) as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    cols = list(zip(*[[float(v) for v in r] for r in data]))
    return header, cols

header, (freq, amp) = read("spectrum_combined.csv")
fig, ax = plt.subplots(figsize=(9, 4))
ax.plot(freq, amp, lw=0.8)
try:
    _, (pf, pa, pu) = read("peaks.csv")
    ax.plot(pf, pa, "v", ms=6)
except (FileNotFoundError, ValueError):
    pass
ax.set_xlabel("frequency (cm$^{-1}$)")
ax.set_ylabel("amplitude")
fig.tight_layout()
fig.savefig(os.path.join(here, "spectrum.png"), dpi=150)

try:
    _, (idx, energy, sigma) = read("ladder.csv")
    fig, ax = plt.subplots(figsize=(4, 5))
    for e in energy:
        ax.hlines(e, 0.2, 0.8)
    ax.set_ylabel("relative energy (cm$^{-1}$)")
    ax.set_xticks([])
    fig.tight_layout()
    fig.savefig(os.path.join(here, "ladder.png"), dpi=150)
except (FileNotFoundError, ValueError):
    pass
print("wrote spectrum.png / ladder.png")
"""


def cmd_spectrum(cfg: RunConfig, args) -> int:
    if not args.series:
        raise ConfigError("spectrum needs at least one time-series CSV")
    h = _build_hamiltonian(cfg)
    sol = ham.exact_diagonalize(h)
    predicted = ham.splittings_invcm(sol.eigenvalues)
    spectra = []
    peaksets = []
    out = _out_dir(cfg, args)
    for k, path in enumerate(args.series):
        if not os.path.exists(path):
            raise ConfigError(f"series file not found: {path}")
        series = load_timeseries_csv(path)
        spec = fourier_spectrum(series, window=args.window)
        spectra.append(spec)
        peaksets.append(detect_peaks(spec, threshold_factor=args.threshold))
        save_spectrum_csv(spec, os.path.join(out, f"spectrum_{k}.csv"))
    combined = combine_spectra(spectra)
    save_spectrum_csv(combined, os.path.join(out, "spectrum_combined.csv"))
    save_peaks_csv(detect_peaks(combined, threshold_factor=args.threshold),
                   os.path.join(out, "peaks.csv"))
    ladder = reconstruct_ladder(peaksets, predicted)
    save_ladder_csv(ladder, os.path.join(out, "ladder.csv"))
    atomic_write(os.path.join(out, "plot_spectrum.py"), _plot_script(out))
    _say(
        args,
        f"wrote spectra, peaks.csv, ladder.csv (residual RMS "
        f"{ladder.residual_rms_cm:.3g} cm^-1) and plot_spectrum.py to {out}",
    )
    return EXIT_OK


def cmd_ladder(cfg: RunConfig, args) -> int:
    import csv as _csv

    from .spectrum import Peak, PeakSet

    h = _build_hamiltonian(cfg)
    sol = ham.exact_diagonalize(h)
    predicted = ham.splittings_invcm(sol.eigenvalues)
    peaksets = []
    for path in args.peaks:
        if not os.path.exists(path):
            raise ConfigError(f"peaks file not found: {path}")
        with open(path, newline="") as fh:
            reader = _csv.reader(fh)
            header = next(reader)
            if header[:1] != ["freq_cm1"]:
                raise ConfigError(f"{path}: not a peaks CSV")
            peaks = [Peak(float(r[0]), float(r[1]), float(r[2])) for r in reader if r]
        peaksets.append(PeakSet(peaks=tuple(peaks), source=path))
    ladder = reconstruct_ladder(peaksets, predicted)
    out = _out_dir(cfg, args)
    save_ladder_csv(ladder, os.path.join(out, "ladder.csv"))
    _say(args, f"wrote ladder.csv (residual RMS {ladder.residual_rms_cm:.3g} cm^-1)")
    return EXIT_OK


def cmd_mps_demo(cfg: RunConfig, args) -> int:
    from . import mps as tn

    n_pts = 8
    grid = ham.SpatialGrid(n_points=n_pts, x_min=-1.5, x_max=1.5)
    spec = ham.DafKineticSpec.for_grid(grid, mass=1836.15267343)
    x = grid.points()
    well = 0.02 * (x**2 - 0.5) ** 2
    harm = 0.05 * x**2
    k1 = ham.kinetic_matrix(grid, spec)
    eye = np.eye(n_pts)
    h2d = np.kron(k1 + np.diag(well), eye) + np.kron(eye, k1 + np.diag(harm))

    psi = np.zeros((n_pts, n_pts), dtype=complex)
    psi[2, 3] = 1.0
    state0, _ = tn.mps_from_dense(psi)
    t_au = args.t_fs / AU_TIME_TO_FS
    traj, reports = tn.propagate_nd(h2d, state0, t_au, n_substeps=args.substeps, chi_max=64)

    import scipy.linalg

    dense = scipy.linalg.expm(-1j * h2d * t_au) @ psi.ravel()
    dense_marg = (np.abs(dense.reshape(n_pts, n_pts)) ** 2).sum(axis=1)
    tn_marg = tn.site_marginal(traj[-1], 0)
    out = _out_dir(cfg, args)
    lines = ["site,p_tensor_train,p_dense,abs_diff"]
    for s in range(n_pts):
        lines.append(
            f"{s},{tn_marg[s]:.12g},{dense_marg[s]:.12g},{abs(tn_marg[s] - dense_marg[s]):.3e}"
        )
    atomic_write(os.path.join(out, "mps_demo.csv"), "\n".join(lines) + "\n")
    worst = float(np.max(np.abs(tn_marg - dense_marg)))
    _say(args, f"2-d demo marginal deviation vs dense: {worst:.3e} (mps_demo.csv)")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protonq",
        description="Nuclear wavepacket dynamics compiled to qubit gate programs",
    )
    parser.add_argument("--config", default="protonq.toml", help="TOML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--quiet", action="store_true", help="suppress status lines")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("build", help="assemble the Hamiltonian and eigenvalues")
    sub.add_parser("transform", help="write the two sub-blocks")
    p_compile = sub.add_parser("compile", help="emit gate programs for one evolution time")
    p_compile.add_argument("--t-fs", type=float, default=0.5)
    p_sim = sub.add_parser("simulate", help="run the timestep sweep")
    p_sim.add_argument("--emit-programs", action="store_true",
                       help="write per-timestep gate programs (circuit backends)")
    p_spec = sub.add_parser("spectrum", help="spectra, peaks, and ladder from series CSVs")
    p_spec.add_argument("series", nargs="*", help="time-series CSV files")
    p_spec.add_argument("--window", default="rectangular", choices=("rectangular", "hann"))
    p_spec.add_argument("--threshold", type=float, default=5.0)
    p_ladder = sub.add_parser("ladder", help="energy ladder from peaks CSVs")
    p_ladder.add_argument("peaks", nargs="*", help="peaks CSV files")
    p_mps = sub.add_parser("mps-demo", help="2-d tensor-train propagation demo")
    p_mps.add_argument("--t-fs", type=float, default=5.0)
    p_mps.add_argument("--substeps", type=int, default=16)
    return parser


COMMANDS = {
    "build": cmd_build,
    "transform": cmd_transform,
    "compile": cmd_compile,
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "ladder": cmd_ladder,
    "mps-demo": cmd_mps_demo,
}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, overrides={"seed": args.seed})
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnderConstrainedError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_UNDERCONSTRAINED
    except (ValueError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
