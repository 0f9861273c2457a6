"""Gate programs: the compiler's output IR, its matrices, and its text form.

A program is an immutable ordered gate list on a fixed qubit register. Every
rotation angle is kept in [-pi, pi]; reducing an angle into that window flips
the operator sign once per 2*pi, which is compensated by an explicit global
phase so that composed matrices stay exactly equal, not merely equal up to
phase. Simulators may ignore the phase gate.

Text form (one instruction per line, lowercase mnemonics):

    version 1
    qubits <n>
    ---
    prepare_all
    rz <q> <angle>
    ry <q> <angle>
    r <q> <theta> <phi>
    cnot <control> <target>
    ms <q1> <q2> <angle>
    gphase <angle>
    measure_all

Angles are printed as the shortest decimal that parses back to the same
float (positional inside [1e-3, 1e3], scientific outside), so parse(emit(p))
reproduces p exactly. Lines starting with '#' are comments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Rz",
    "Ry",
    "R",
    "CNOT",
    "MS",
    "GlobalPhase",
    "PrepareAll",
    "MeasureAll",
    "Gate",
    "GateProgram",
    "normalize_angle",
    "program_unitary",
    "emit_text",
    "parse_text",
]

ANGLE_TOL = 1e-12


def normalize_angle(angle: float) -> tuple[float, int]:
    """Reduce into [-pi, pi]; returns (reduced, k) with angle = reduced + 2*pi*k."""
    k = math.floor((angle + math.pi) / (2.0 * math.pi))
    reduced = angle - 2.0 * math.pi * k
    if reduced > math.pi:  # guard the exact upper boundary
        reduced -= 2.0 * math.pi
        k += 1
    return reduced, k


def _check_angle(angle: float) -> float:
    angle = float(angle)
    if not math.isfinite(angle):
        raise ValueError("angle must be finite")
    if abs(angle) > math.pi + ANGLE_TOL:
        raise ValueError(f"angle {angle!r} outside [-pi, pi]")
    return min(max(angle, -math.pi), math.pi)


@dataclass(frozen=True)
class Rz:
    qubit: int
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", _check_angle(self.angle))

    def matrix(self) -> np.ndarray:
        half = 0.5j * self.angle
        return np.array([[np.exp(-half), 0], [0, np.exp(half)]])


@dataclass(frozen=True)
class Ry:
    qubit: int
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", _check_angle(self.angle))

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle / 2), math.sin(self.angle / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class R:
    """Rotation by theta about the equatorial axis at azimuth phi."""

    qubit: int
    theta: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _check_angle(self.theta))
        object.__setattr__(self, "phi", _check_angle(self.phi))

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
        e = np.exp(-1j * self.phi)
        return np.array([[c, -1j * s * e], [-1j * s / e, c]])


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int

    def __post_init__(self):
        if self.control == self.target:
            raise ValueError("control and target must differ")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
        )


@dataclass(frozen=True)
class MS:
    """XX-type two-qubit interaction exp(-i angle/2 * XX)."""

    qubit_a: int
    qubit_b: int
    angle: float

    def __post_init__(self):
        if self.qubit_a == self.qubit_b:
            raise ValueError("interaction qubits must differ")
        object.__setattr__(self, "angle", _check_angle(self.angle))

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle / 2), -1j * math.sin(self.angle / 2)
        return np.array(
            [[c, 0, 0, s], [0, c, s, 0], [0, s, c, 0], [s, 0, 0, c]], dtype=complex
        )


@dataclass(frozen=True)
class GlobalPhase:
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", _check_angle(self.angle))


@dataclass(frozen=True)
class PrepareAll:
    pass


@dataclass(frozen=True)
class MeasureAll:
    pass


Gate = Union[Rz, Ry, R, CNOT, MS, GlobalPhase, PrepareAll, MeasureAll]

ROTATION_GATES = (Rz, Ry, R)
PHYSICAL_1Q = (Ry, R)  # rz is a software phase advance, not a pulse


def _gate_qubits(gate: Gate) -> tuple[int, ...]:
    if isinstance(gate, (Rz, Ry, R)):
        return (gate.qubit,)
    if isinstance(gate, CNOT):
        return (gate.control, gate.target)
    if isinstance(gate, MS):
        return (gate.qubit_a, gate.qubit_b)
    return ()


@dataclass(frozen=True)
class GateProgram:
    """Ordered gates on n_qubits; starts with prepare_all, may end measured."""

    n_qubits: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        if not gates or not isinstance(gates[0], PrepareAll):
            raise ValueError("program must begin with prepare_all")
        for g in gates[1:]:
            if isinstance(g, PrepareAll):
                raise ValueError("prepare_all may appear only once, first")
        measures = [i for i, g in enumerate(gates) if isinstance(g, MeasureAll)]
        if measures and (len(measures) > 1 or measures[0] != len(gates) - 1):
            raise ValueError("measure_all may appear at most once, last")
        for g in gates:
            for q in _gate_qubits(g):
                if not 0 <= q < self.n_qubits:
                    raise ValueError(f"qubit index {q} out of range for {self.n_qubits} qubits")

    @classmethod
    def build(cls, n_qubits: int, body=(), measure: bool = False) -> "GateProgram":
        gates: list[Gate] = [PrepareAll(), *body]
        if measure:
            gates.append(MeasureAll())
        return cls(n_qubits=n_qubits, gates=tuple(gates))

    @property
    def body(self) -> tuple[Gate, ...]:
        return tuple(
            g for g in self.gates if not isinstance(g, (PrepareAll, MeasureAll))
        )

    @property
    def measured(self) -> bool:
        return bool(self.gates) and isinstance(self.gates[-1], MeasureAll)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.body:
            name = type(g).__name__.lower()
            out[name] = out.get(name, 0) + 1
        return out


def embed_gate(gate: Gate, n_qubits: int) -> np.ndarray:
    """Gate matrix lifted to the full register (qubit 0 = most significant)."""
    dim = 2**n_qubits
    if isinstance(gate, GlobalPhase):
        return np.exp(1j * gate.angle) * np.eye(dim, dtype=complex)
    qubits = _gate_qubits(gate)
    local = gate.matrix()
    out = np.zeros((dim, dim), dtype=complex)
    shifts = [n_qubits - 1 - q for q in qubits]
    k = len(qubits)
    for col in range(dim):
        col_sub = 0
        for s in shifts:
            col_sub = (col_sub << 1) | ((col >> s) & 1)
        base = col
        for s in shifts:
            base &= ~(1 << s)
        for row_sub in range(2**k):
            amp = local[row_sub, col_sub]
            if amp == 0:
                continue
            row = base
            for pos, s in enumerate(shifts):
                row |= ((row_sub >> (k - 1 - pos)) & 1) << s
            out[row, col] = amp
    return out


def program_unitary(program: GateProgram) -> np.ndarray:
    """Dense composition of the program body, global phase included."""
    dim = 2**program.n_qubits
    u = np.eye(dim, dtype=complex)
    for gate in program.body:
        u = embed_gate(gate, program.n_qubits) @ u
    return u


def format_angle(value: float) -> str:
    """Shortest round-trip decimal; scientific outside [1e-3, 1e3]."""
    value = float(value)
    if value == 0.0:
        return "0"
    if 1e-3 <= abs(value) <= 1e3:
        return repr(value)
    mantissa, _, exponent = f"{value:.17e}".partition("e")
    mantissa = mantissa.rstrip("0").rstrip(".")
    # trim to the shortest mantissa that still round-trips
    for digits in range(1, 18):
        cand = f"{value:.{digits}e}"
        if float(cand) == value:
            m, _, e = cand.partition("e")
            return f"{m.rstrip('0').rstrip('.')}e{int(e):+03d}"
    return f"{mantissa}e{int(exponent):+03d}"


def emit_text(program: GateProgram) -> str:
    """Deterministic text rendering; parse_text inverts it exactly."""
    lines = ["version 1", f"qubits {program.n_qubits}", "---"]
    for gate in program.gates:
        if isinstance(gate, PrepareAll):
            lines.append("prepare_all")
        elif isinstance(gate, MeasureAll):
            lines.append("measure_all")
        elif isinstance(gate, Rz):
            lines.append(f"rz {gate.qubit} {format_angle(gate.angle)}")
        elif isinstance(gate, Ry):
            lines.append(f"ry {gate.qubit} {format_angle(gate.angle)}")
        elif isinstance(gate, R):
            lines.append(f"r {gate.qubit} {format_angle(gate.theta)} {format_angle(gate.phi)}")
        elif isinstance(gate, CNOT):
            lines.append(f"cnot {gate.control} {gate.target}")
        elif isinstance(gate, MS):
            lines.append(f"ms {gate.qubit_a} {gate.qubit_b} {format_angle(gate.angle)}")
        elif isinstance(gate, GlobalPhase):
            lines.append(f"gphase {format_angle(gate.angle)}")
        else:
            raise TypeError(f"unknown gate {gate!r}")
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> GateProgram:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if len(lines) < 3 or lines[0] != "version 1" or lines[2] != "---":
        raise ValueError("bad header: expected 'version 1', 'qubits <n>', '---'")
    head, _, count = lines[1].partition(" ")
    if head != "qubits":
        raise ValueError("bad header: missing qubits line")
    n_qubits = int(count)
    gates: list[Gate] = []
    for ln in lines[3:]:
        parts = ln.split()
        op, args = parts[0], parts[1:]
        if op == "prepare_all":
            gates.append(PrepareAll())
        elif op == "measure_all":
            gates.append(MeasureAll())
        elif op == "rz":
            gates.append(Rz(int(args[0]), float(args[1])))
        elif op == "ry":
            gates.append(Ry(int(args[0]), float(args[1])))
        elif op == "r":
            gates.append(R(int(args[0]), float(args[1]), float(args[2])))
        elif op == "cnot":
            gates.append(CNOT(int(args[0]), int(args[1])))
        elif op == "ms":
            gates.append(MS(int(args[0]), int(args[1]), float(args[2])))
        elif op == "gphase":
            gates.append(GlobalPhase(float(args[0])))
        else:
            raise ValueError(f"unknown mnemonic {op!r}")
    return GateProgram(n_qubits=n_qubits, gates=tuple(gates))
