"""Density-matrix execution of gate programs with per-gate depolarizing noise.

Each gate applies as a unitary channel followed by a depolarizing channel on
the gate's own support, with depolarizing probability 1 - fidelity for that
gate kind. z rotations are software phase advances and carry no noise.
Readout error acts as independent bit flips on the outcome distribution
before sampling. Sampling is a seeded multinomial draw (numpy PCG64), so a
fixed seed reproduces counts exactly.

A simulator run touches no shared state; concurrent runs of independent
programs are safe.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gates import (
    CNOT,
    MS,
    GateProgram,
    GlobalPhase,
    MeasureAll,
    PrepareAll,
    R,
    Ry,
    Rz,
    embed_gate,
    program_unitary,
)
from .io import atomic_write

__all__ = [
    "NoiseModel",
    "DensityMatrix",
    "ShotResult",
    "RunResult",
    "run_program",
    "statevector_final",
    "circuit_fidelity_estimate",
    "sample_counts",
    "save_counts_csv",
    "save_probabilities_csv",
]

TRACE_TOL = 1e-10
PSD_TOL = -1e-10


@dataclass(frozen=True)
class NoiseModel:
    """Gate and readout fidelities (probabilities in [0, 1])."""

    fidelity_1q: float = 0.995
    fidelity_ms: float = 0.97
    fidelity_cnot: float = 0.965
    readout_flip: float = 0.01

    def __post_init__(self):
        for name in ("fidelity_1q", "fidelity_ms", "fidelity_cnot", "readout_flip"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    def gate_fidelity(self, gate) -> float:
        if isinstance(gate, (Ry, R)):
            return self.fidelity_1q
        if isinstance(gate, Rz):
            return 1.0  # software phase advance
        if isinstance(gate, MS):
            return self.fidelity_ms
        if isinstance(gate, CNOT):
            return self.fidelity_cnot
        return 1.0


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    n_qubits: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = 2**self.n_qubits
        if m.shape != (dim, dim):
            raise ValueError(f"density matrix shape {m.shape} for {self.n_qubits} qubits")
        if np.max(np.abs(m - m.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
            raise ValueError("density matrix must be Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr!r} != 1")
        if np.min(np.linalg.eigvalsh(m)) < PSD_TOL:
            raise ValueError("density matrix has a significantly negative eigenvalue")
        object.__setattr__(self, "matrix", m)

    def probabilities(self) -> np.ndarray:
        return np.clip(np.diag(self.matrix).real, 0.0, None)


@dataclass(frozen=True)
class ShotResult:
    counts: dict[str, int]
    n_shots: int
    seed: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.n_shots:
            raise ValueError("counts must sum to n_shots")


@dataclass(frozen=True, eq=False)
class RunResult:
    probabilities: np.ndarray
    shots: ShotResult | None
    density: DensityMatrix


def _gate_support(gate) -> tuple[int, ...]:
    if isinstance(gate, (Rz, Ry, R)):
        return (gate.qubit,)
    if isinstance(gate, CNOT):
        return (gate.control, gate.target)
    if isinstance(gate, MS):
        return (gate.qubit_a, gate.qubit_b)
    return ()


def _depolarize(rho: np.ndarray, support: tuple[int, ...], p: float, n: int) -> np.ndarray:
    """(1-p) rho + p * (maximally mixed on support) x (partial trace off it)."""
    if p <= 0.0 or not support:
        return rho
    dim = 2**n
    tensor = rho.reshape((2,) * (2 * n))
    # trace out the support qubits
    for q in sorted(support, reverse=True):
        tensor = np.trace(tensor, axis1=q, axis2=q + len(tensor.shape) // 2)
    k = len(support)
    rest = [q for q in range(n) if q not in support]
    # rebuild: identity/2^k on support, traced remainder elsewhere
    mixed = np.zeros((dim, dim), dtype=complex)
    rest_dim = 2 ** len(rest)
    reduced = tensor.reshape(rest_dim, rest_dim)
    for a in range(dim):
        for b in range(dim):
            # support bits must match pairwise between bra and ket for identity
            sa = [(a >> (n - 1 - q)) & 1 for q in support]
            sb = [(b >> (n - 1 - q)) & 1 for q in support]
            if sa != sb:
                continue
            ra = 0
            rb = 0
            for q in rest:
                ra = (ra << 1) | ((a >> (n - 1 - q)) & 1)
                rb = (rb << 1) | ((b >> (n - 1 - q)) & 1)
            mixed[a, b] = reduced[ra, rb] / 2**k
    return (1.0 - p) * rho + p * mixed


def _readout_matrix(n: int, flip: float) -> np.ndarray:
    one = np.array([[1.0 - flip, flip], [flip, 1.0 - flip]])
    out = np.eye(1)
    for _ in range(n):
        out = np.kron(out, one)
    return out


def run_program(
    program: GateProgram,
    noise: NoiseModel | None = None,
    n_shots: int | None = None,
    seed: int = 0,
) -> RunResult:
    """Execute a program from |0...0> and return probabilities, shots, state.

    With a noise model, the returned probabilities already include the
    readout bit-flip channel (they are what sampling draws from); without
    one they are the ideal Born probabilities.
    """
    if n_shots is not None and n_shots <= 0:
        raise ValueError("n_shots must be positive when sampling is requested")
    n = program.n_qubits
    dim = 2**n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    for gate in program.gates:
        if isinstance(gate, (PrepareAll, MeasureAll)):
            continue
        if isinstance(gate, GlobalPhase):
            continue  # no effect on a density matrix
        u = embed_gate(gate, n)
        rho = u @ rho @ u.conj().T
        if noise is not None:
            p = 1.0 - noise.gate_fidelity(gate)
            rho = _depolarize(rho, _gate_support(gate), p, n)
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise FloatingPointError(f"trace drifted to {tr!r}")
    probs = np.clip(np.diag(rho).real, 0.0, None)
    if noise is not None and noise.readout_flip > 0.0:
        probs = _readout_matrix(n, noise.readout_flip) @ probs
    shots = sample_counts(probs, n_shots, seed) if n_shots is not None else None
    return RunResult(
        probabilities=probs,
        shots=shots,
        density=DensityMatrix(matrix=rho, n_qubits=n),
    )


def statevector_final(program: GateProgram) -> np.ndarray:
    """Ideal final amplitudes (global phase included), for amplitude-level checks."""
    dim = 2**program.n_qubits
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    return program_unitary(program) @ psi


def circuit_fidelity_estimate(program: GateProgram, noise: NoiseModel) -> float:
    """Product of per-gate fidelities; the standard back-of-envelope estimate."""
    estimate = 1.0
    for gate in program.body:
        estimate *= noise.gate_fidelity(gate)
    return estimate


def sample_counts(probabilities, n_shots: int, seed: int) -> ShotResult:
    """Multinomial draw over basis states; deterministic for a fixed seed."""
    p = np.asarray(probabilities, dtype=float)
    if np.min(p) < -1e-12:
        raise FloatingPointError(f"negative probability {np.min(p):g}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    if n_shots <= 0:
        raise ValueError("n_shots must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.multinomial(n_shots, p / total)
    n_bits = int(np.log2(len(p)))
    counts = {
        format(state, f"0{n_bits}b"): int(c) for state, c in enumerate(draws) if c > 0
    }
    return ShotResult(counts=counts, n_shots=n_shots, seed=seed)


def save_counts_csv(result: ShotResult, path) -> None:
    lines = ["bitstring,count"]
    for bits in sorted(result.counts):
        lines.append(f"{bits},{result.counts[bits]}")
    atomic_write(path, "\n".join(lines) + "\n")


def save_probabilities_csv(probabilities: np.ndarray, path) -> None:
    n_bits = int(np.log2(len(probabilities)))
    lines = ["bitstring,probability"]
    for state, p in enumerate(probabilities):
        lines.append(f"{format(state, f'0{n_bits}b')},{p:.16g}")
    atomic_write(path, "\n".join(lines) + "\n")
