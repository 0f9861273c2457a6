"""Wavepacket preparation, time evolution, and block-to-site probability remap.

Three backends produce the same observable, per-timestep site occupation
probabilities: `oracle` applies exp(-iHt) directly; `circuit_ideal` compiles
each sub-block's propagator into a gate program per timestep and runs it
noiselessly; `circuit_noisy` adds the depolarizing/readout noise model and
samples a finite number of shots.

Because the two sub-blocks evolve as separate programs, recombining their
outcome probabilities into site probabilities needs the relative phase
between blocks. `exact_phase` mode reads it from simulated amplitudes
(verification grade, unavailable on hardware); `first_order` mode
approximates each transformed-basis amplitude's phase as its initial phase
plus diagonal-energy * t, which is buildable from measured probabilities
alone and degrades slowly with t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compiler import block_propagator, cartan_decompose, single_qubit_program
from .constants import AU_TIME_TO_FS
from .gates import GateProgram, GlobalPhase, normalize_angle
from .hamiltonian import NuclearHamiltonian, exact_diagonalize
from .io import atomic_write, format_sig
from .simulator import NoiseModel, run_program, statevector_final
from .symmetry import BlockDiagonalHamiltonian, GivensReflector, build_reflector, transform

__all__ = [
    "InitialStateSpec",
    "WavepacketState",
    "TimeSeries",
    "prepare_initial",
    "to_block_states",
    "remap_probabilities",
    "run_dynamics",
    "oracle_state_trajectory",
    "save_timeseries_csv",
    "load_timeseries_csv",
]

NORM_TOL = 1e-10
ORACLE_ROW_TOL = 1e-9
PROB_ROW_TOL = 2e-2

BACKENDS = ("oracle", "circuit_ideal", "circuit_noisy")


@dataclass(frozen=True)
class InitialStateSpec:
    """Menu of initial wavepackets.

    variant 'site': delta on grid point params[0].
    variant 'two_site': (|i> + e^{i phase} |j>)/sqrt(2) with params (i, j, phase).
    variant 'eigenstate': stationary state params[0] of the Hamiltonian.
    """

    variant: str
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if self.variant not in ("site", "two_site", "eigenstate"):
            raise ValueError(f"unknown initial-state variant {self.variant!r}")
        if self.variant == "two_site":
            if len(self.params) != 3:
                raise ValueError("two_site needs (i, j, phase)")
            phase = float(self.params[2])
            if abs(phase) > math.pi + 1e-12:
                raise ValueError("relative phase must lie in [-pi, pi]")
        elif len(self.params) != 1:
            raise ValueError(f"{self.variant} needs exactly one index")

    @classmethod
    def site(cls, index: int) -> "InitialStateSpec":
        return cls("site", (index,))

    @classmethod
    def two_site(cls, i: int, j: int, phase: float) -> "InitialStateSpec":
        return cls("two_site", (i, j, phase))

    @classmethod
    def eigenstate(cls, k: int) -> "InitialStateSpec":
        return cls("eigenstate", (k,))


@dataclass(frozen=True, eq=False)
class WavepacketState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm!r} != 1")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Per-timestep site occupation probabilities.

    backend is 'oracle', 'circuit_ideal', or 'circuit_noisy(seed=...,shots=...)'.
    Oracle rows sum to 1 within 1e-9; probability backends within 2e-2
    (shot noise plus first-order remap leakage).
    """

    times_fs: np.ndarray
    site_probabilities: np.ndarray
    backend: str

    def __post_init__(self):
        times = np.asarray(self.times_fs, dtype=float)
        probs = np.asarray(self.site_probabilities, dtype=float)
        if probs.shape[0] != times.shape[0]:
            raise ValueError("one probability row per timestep required")
        tol = ORACLE_ROW_TOL if self.backend == "oracle" else PROB_ROW_TOL
        sums = probs.sum(axis=1)
        worst = float(np.max(np.abs(sums - 1.0))) if len(sums) else 0.0
        if worst > tol:
            raise ValueError(f"row sums deviate from 1 by {worst:g} (tol {tol:g})")
        object.__setattr__(self, "times_fs", times)
        object.__setattr__(self, "site_probabilities", probs)

    @property
    def n_sites(self) -> int:
        return self.site_probabilities.shape[1]


def prepare_initial(spec: InitialStateSpec, h: NuclearHamiltonian) -> WavepacketState:
    n = h.n_points
    if spec.variant == "site":
        (i,) = spec.params
        if not 0 <= i < n:
            raise IndexError(f"site {i} outside 0..{n - 1}")
        amps = np.zeros(n, dtype=complex)
        amps[i] = 1.0
    elif spec.variant == "two_site":
        i, j, phase = spec.params
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise IndexError(f"sites ({i}, {j}) invalid for {n} points")
        amps = np.zeros(n, dtype=complex)
        amps[i] = 1.0 / math.sqrt(2.0)
        amps[j] = np.exp(1j * phase) / math.sqrt(2.0)
    else:
        (k,) = spec.params
        if not 0 <= k < n:
            raise IndexError(f"eigenstate {k} outside 0..{n - 1}")
        amps = exact_diagonalize(h).eigenvectors[:, k].astype(complex)
    return WavepacketState(amplitudes=amps)


def to_block_states(
    state: WavepacketState, reflector: GivensReflector
) -> tuple[np.ndarray, np.ndarray]:
    """G |psi> split into upper/lower halves; squared norms are block weights."""
    if len(state.amplitudes) != reflector.n_points:
        raise ValueError("state and reflector dimensions differ")
    transformed = reflector.matrix @ state.amplitudes
    half = reflector.n_points // 2
    return transformed[:half], transformed[half:]


def _site_coefficients(upper: np.ndarray, lower: np.ndarray) -> np.ndarray:
    """Inverse of the pairing map: site amplitudes from block amplitudes."""
    half = len(upper)
    n = 2 * half - 1
    c = np.zeros(2 * half, dtype=complex)
    for i in range(half):
        c[i] = (upper[i] - lower[n - i - half]) / math.sqrt(2.0)
        c[n - i] = (upper[i] + lower[n - i - half]) / math.sqrt(2.0)
    return c


def remap_probabilities(
    block_probs: tuple[np.ndarray, np.ndarray],
    t_fs: float,
    blocks: BlockDiagonalHamiltonian,
    mode: str = "first_order",
    initial_blocks: tuple[np.ndarray, np.ndarray] | None = None,
    amplitudes: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Site probabilities from per-block outcome probabilities.

    block_probs carry the global normalization (each block's probabilities
    sum to that block's weight). In first_order mode the cross term uses
    sqrt(P_u P_l) cos(phase), with each block amplitude's phase modeled as
    its initial phase advanced by the transformed-basis diagonal energy
    times t. In exact_phase mode the supplied evolved block amplitudes are
    recombined directly.
    """
    p_upper, p_lower = (np.asarray(p, dtype=float) for p in block_probs)
    if np.min(p_upper) < -1e-12 or np.min(p_lower) < -1e-12:
        raise FloatingPointError("negative block probability")
    p_upper = np.clip(p_upper, 0.0, None)
    p_lower = np.clip(p_lower, 0.0, None)
    half = len(p_upper)
    n = 2 * half - 1

    if mode == "exact_phase":
        if amplitudes is None:
            raise ValueError("exact_phase mode needs evolved block amplitudes")
        c = _site_coefficients(*amplitudes)
        return np.abs(c) ** 2

    if mode != "first_order":
        raise ValueError(f"unknown remap mode {mode!r}")
    if initial_blocks is None:
        raise ValueError("first_order mode needs the initial block amplitudes")

    t_au = t_fs / AU_TIME_TO_FS
    diag = blocks.full_diagonal()
    theta0_u = np.angle(initial_blocks[0])
    theta0_l = np.angle(initial_blocks[1])
    probs = np.zeros(2 * half)
    for i in range(half):
        l = n - i - half  # lower-block index paired with upper index i
        pu, pl = p_upper[i], p_lower[l]
        phase = (theta0_l[l] - theta0_u[i]) - (diag[half + l] - diag[i]) * t_au
        cross = math.sqrt(pu * pl) * math.cos(phase)
        probs[i] = 0.5 * (pu + pl) - cross
        probs[n - i] = 0.5 * (pu + pl) + cross
    return probs


def _block_preparation_unitary(block_state: np.ndarray) -> np.ndarray:
    """Any unitary whose first column is the (normalized) block state."""
    dim = len(block_state)
    psi = block_state / np.linalg.norm(block_state)
    basis = np.eye(dim, dtype=complex)
    cols = [psi]
    for e in basis.T:
        v = e.copy()
        for c in cols:
            v -= c * np.vdot(c, v)
        nv = np.linalg.norm(v)
        if nv > 1e-9:
            cols.append(v / nv)
        if len(cols) == dim:
            break
    return np.column_stack(cols)


def _compile_block_program(u_block: np.ndarray) -> GateProgram:
    dim = u_block.shape[0]
    if dim == 2:
        gates, phase = single_qubit_program(u_block, 0)
        reduced, _ = normalize_angle(phase)
        return GateProgram.build(1, [*gates, GlobalPhase(reduced)])
    if dim == 4:
        return cartan_decompose(u_block)
    raise NotImplementedError(
        f"circuit backend synthesizes 1- and 2-qubit blocks; got dimension {dim}"
    )


def run_dynamics(
    h: NuclearHamiltonian,
    spec: InitialStateSpec,
    dt_fs: float,
    n_steps: int,
    backend: str = "oracle",
    noise: NoiseModel | None = None,
    shots: int | None = None,
    seed: int = 0,
    remap_mode: str = "exact_phase",
    program_log: list | None = None,
) -> TimeSeries:
    """Site-probability sweep over timesteps t_k = k * dt, k = 0..n_steps-1.

    Circuit backends compile each block's propagator freshly per timestep
    (the gate skeleton stays fixed; only rotation angles change). Per-
    timestep sampling seeds are seed + k, so sweeps are reproducible and
    timesteps independent. program_log, if given, receives tuples
    (step, block_name, program).
    """
    if dt_fs <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}")
    if backend == "circuit_noisy":
        noise = noise if noise is not None else NoiseModel()
        if shots is not None and shots <= 0:
            raise ValueError("shots must be positive")
    elif backend == "circuit_ideal":
        if noise is not None:
            raise ValueError("circuit_ideal backend takes no noise model")
    psi0 = prepare_initial(spec, h)
    times = np.arange(n_steps) * dt_fs

    if backend == "oracle":
        traj = oracle_state_trajectory(h, psi0, dt_fs, n_steps)
        probs = np.abs(traj) ** 2
        return TimeSeries(times_fs=times, site_probabilities=probs, backend="oracle")

    blocks = transform(h)
    reflector = build_reflector(h.n_points)
    upper0, lower0 = to_block_states(psi0, reflector)
    w_upper = float(np.vdot(upper0, upper0).real)
    w_lower = float(np.vdot(lower0, lower0).real)
    half = h.n_points // 2

    prep = {}
    for name, vec, weight in (("upper", upper0, w_upper), ("lower", lower0, w_lower)):
        prep[name] = None if weight < 1e-14 else _block_preparation_unitary(vec)

    rows = np.zeros((n_steps, h.n_points))
    for k in range(n_steps):
        t_au = times[k] / AU_TIME_TO_FS
        block_probs = {}
        block_amps = {}
        for name, block, weight in (
            ("upper", blocks.block_upper, w_upper),
            ("lower", blocks.block_lower, w_lower),
        ):
            if prep[name] is None:
                block_probs[name] = np.zeros(half)
                block_amps[name] = np.zeros(half, dtype=complex)
                continue
            u_t = block_propagator(block, t_au)
            program = _compile_block_program(u_t @ prep[name])
            if program_log is not None:
                program_log.append((k, name, program))
            if backend == "circuit_ideal":
                amps = statevector_final(program) * math.sqrt(weight)
                block_amps[name] = amps
                block_probs[name] = np.abs(amps) ** 2
            else:
                result = run_program(program, noise=noise, n_shots=shots, seed=seed + k)
                measured = (
                    np.array(
                        [
                            result.shots.counts.get(format(s, f"0{program.n_qubits}b"), 0)
                            for s in range(half)
                        ],
                        dtype=float,
                    )
                    / result.shots.n_shots
                    if shots is not None
                    else result.probabilities
                )
                block_probs[name] = measured * weight
        if backend == "circuit_ideal" and remap_mode == "exact_phase":
            rows[k] = remap_probabilities(
                (block_probs["upper"], block_probs["lower"]),
                times[k],
                blocks,
                mode="exact_phase",
                amplitudes=(block_amps["upper"], block_amps["lower"]),
            )
        else:
            rows[k] = remap_probabilities(
                (block_probs["upper"], block_probs["lower"]),
                times[k],
                blocks,
                mode="first_order",
                initial_blocks=(upper0, lower0),
            )
    tag = (
        "circuit_ideal"
        if backend == "circuit_ideal"
        else f"circuit_noisy(seed={seed},shots={shots})"
    )
    return TimeSeries(times_fs=times, site_probabilities=rows, backend=tag)


def oracle_state_trajectory(
    h: NuclearHamiltonian, psi0: WavepacketState, dt_fs: float, n_steps: int
) -> np.ndarray:
    """Amplitude rows [n_steps, n_points] under exp(-iHt), eigenbasis exact."""
    sol = exact_diagonalize(h)
    coeffs = sol.eigenvectors.T @ psi0.amplitudes
    t_au = (np.arange(n_steps) * dt_fs) / AU_TIME_TO_FS
    phases = np.exp(-1j * np.outer(t_au, sol.eigenvalues))
    return (phases * coeffs) @ sol.eigenvectors.T


def save_timeseries_csv(series: TimeSeries, path) -> None:
    n = series.n_sites
    header = "t_fs," + ",".join(f"p_site_{i}" for i in range(n)) + ",row_sum"
    lines = [header]
    for t, row in zip(series.times_fs, series.site_probabilities):
        cells = [format_sig(t, 12)] + [format_sig(v, 12) for v in row]
        cells.append(format_sig(float(row.sum()), 12))
        lines.append(",".join(cells))
    atomic_write(path, "\n".join(lines) + "\n")


def load_timeseries_csv(path, backend: str = "oracle") -> TimeSeries:
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        if header[0] != "t_fs" or header[-1] != "row_sum":
            raise ValueError(f"{path}: unexpected time-series header")
        times, rows = [], []
        for rec in reader:
            if not rec:
                continue
            times.append(float(rec[0]))
            rows.append([float(v) for v in rec[1:-1]])
    return TimeSeries(
        times_fs=np.array(times), site_probabilities=np.array(rows), backend=backend
    )
