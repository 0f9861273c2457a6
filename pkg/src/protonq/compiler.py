"""Unitary-to-gate compilation.

Covers four jobs: Hermitian propagators by eigendecomposition, factorization
of any 4x4 unitary into exactly three CNOTs plus local rotations, expansion
of CNOTs into a single XX interaction with rotation wrappers, and
first-order product-formula schedules for spin-model Hamiltonians.

The two-qubit synthesis works in the magic basis, where a 4x4 special
unitary U has u = E^dag U E with the complex symmetric u u^T encoding U's
local-equivalence class. Diagonalizing u u^T with a real orthogonal matrix
splits U into two SO(4) factors (tensor products of single-qubit unitaries
after undoing the basis change) around a three-parameter interior that a
fixed CNOT-RZ/RY-CNOT-RY-CNOT template realizes.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .gates import (
    CNOT,
    MS,
    GateProgram,
    Gate,
    GlobalPhase,
    R,
    Ry,
    Rz,
    normalize_angle,
    program_unitary,
)
from .symmetry import IsingParameters

__all__ = [
    "TwoQubitUnitary",
    "EulerAngles",
    "block_propagator",
    "euler_zyz",
    "cartan_decompose",
    "cnot_to_ms",
    "trotter_compile",
    "single_qubit_program",
]

UNITARITY_TOL = 1e-10

# Magic basis: conjugation by E carries SO(4) to SU(2) x SU(2) and diagonal
# phase matrices to tensor-power rotations generated by XX, YY, ZZ.
_E = np.array(
    [[1, 1j, 0, 0], [0, 0, 1j, 1], [0, 0, 1j, -1], [1, -1j, 0, 0]], dtype=complex
) / math.sqrt(2.0)
_E_DAG = _E.conj().T
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
_CNOT01 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CNOT10 = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)


@dataclass(frozen=True, eq=False)
class TwoQubitUnitary:
    """4x4 complex matrix validated to be unitary."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got {m.shape}")
        object.__setattr__(self, "matrix", m)
        if self.unitarity_defect > UNITARITY_TOL:
            raise ValueError(f"matrix is not unitary (defect {self.unitarity_defect:g})")

    @property
    def unitarity_defect(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(4))))


@dataclass(frozen=True)
class EulerAngles:
    """u = exp(i alpha) Rz(beta) Ry(gamma) Rz(delta), all in [-pi, pi]."""

    alpha: float
    beta: float
    gamma: float
    delta: float


def block_propagator(block: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) for a real symmetric block, via eigendecomposition."""
    block = np.asarray(block, dtype=float)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise ValueError("block must be square")
    if np.max(np.abs(block - block.T)) > 1e-10 * max(1.0, np.max(np.abs(block))):
        raise ValueError("block must be symmetric")
    evals, vecs = np.linalg.eigh(block)
    return (vecs * np.exp(-1j * evals * t)) @ vecs.T


def euler_zyz(u: np.ndarray) -> EulerAngles:
    """Angles of the phase-times-ZYZ factorization of a 2x2 unitary.

    Gauge at the poles (gamma = 0 or pi) is fixed by putting the whole z
    rotation into beta. All four angles come back reduced into [-pi, pi].
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    if np.max(np.abs(u.conj().T @ u - np.eye(2))) > UNITARITY_TOL:
        raise ValueError("matrix is not unitary")
    det = u[0, 0] * u[1, 1] - u[0, 1] * u[1, 0]
    alpha = cmath.phase(det) / 2.0
    su = u * cmath.exp(-1j * alpha)
    gamma = 2.0 * math.atan2(abs(su[1, 0]), abs(su[0, 0]))
    if abs(su[1, 0]) < 1e-14:  # diagonal: pure z rotation
        beta = 2.0 * cmath.phase(su[1, 1])
        delta = 0.0
    elif abs(su[0, 0]) < 1e-14:  # antidiagonal
        beta = 2.0 * cmath.phase(su[1, 0])
        delta = 0.0
    else:
        sum_bd = 2.0 * cmath.phase(su[1, 1])
        diff_bd = 2.0 * cmath.phase(su[1, 0])
        beta = (sum_bd + diff_bd) / 2.0
        delta = (sum_bd - diff_bd) / 2.0
    angles = []
    phase_flips = 0
    for a in (beta, gamma, delta):
        reduced, k = normalize_angle(a)
        angles.append(reduced)
        phase_flips += k
    # each 2*pi reduction of beta/gamma/delta negates the SU(2) matrix
    alpha_adj, _ = normalize_angle(alpha + math.pi * (phase_flips % 2))
    return EulerAngles(alpha=alpha_adj, beta=angles[0], gamma=angles[1], delta=angles[2])


def zyz_matrix(angles: EulerAngles) -> np.ndarray:
    rz = lambda t: np.array([[cmath.exp(-0.5j * t), 0], [0, cmath.exp(0.5j * t)]])
    c, s = math.cos(angles.gamma / 2), math.sin(angles.gamma / 2)
    ry = np.array([[c, -s], [s, c]], dtype=complex)
    return cmath.exp(1j * angles.alpha) * (rz(angles.beta) @ ry @ rz(angles.delta))


def single_qubit_program(u: np.ndarray, qubit: int) -> tuple[list[Gate], float]:
    """Circuit-order gate list [Rz(delta), Ry(gamma), Rz(beta)] plus phase.

    Zero-angle rotations are emitted too: the gate skeleton of a compiled
    program must not depend on the rotation values.
    """
    ang = euler_zyz(u)
    gates: list[Gate] = [Rz(qubit, ang.delta), Ry(qubit, ang.gamma), Rz(qubit, ang.beta)]
    return gates, ang.alpha


def _orthogonal_diagonalize(gamma: np.ndarray, tol: float = 1e-9):
    """Real orthogonal P and phases th with gamma = P diag(exp(i th)) P^T.

    gamma is complex symmetric unitary, so its real and imaginary parts
    commute and share a real eigenbasis. A weighted sum of the two parts
    usually separates the joint eigenspaces; degenerate weightings are
    retried until the candidate basis actually diagonalizes gamma.
    """
    for wr, wi in ((1.0 / math.pi, math.pi), (1.0, 1.0), (0.5, 10.0), (10.0, 0.5), (math.e, 0.1)):
        _, p = np.linalg.eigh(wr * gamma.real + wi * gamma.imag)
        d = p.T @ gamma @ p
        if np.max(np.abs(d - np.diag(np.diag(d)))) < tol:
            return p, np.angle(np.diag(d))
    raise ArithmeticError("could not diagonalize the local-invariant matrix")


def _sorted_so4_diagonalizer(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gamma = u @ u.T
    p, th = _orthogonal_diagonalize(gamma)
    order = np.argsort(th, kind="stable")
    p, th = p[:, order], th[order]
    if np.linalg.det(p) < 0:
        p = p.copy()
        p[:, 0] = -p[:, 0]
    return p, th


def _matched_so4_diagonalizer(u: np.ndarray, th_ref: np.ndarray) -> np.ndarray:
    """Diagonalizer with columns ordered to track th_ref around the branch cut.

    Phases at exactly +-pi can land on either side of the cut, so plain
    sorting may disagree between the target and template invariants; match
    each reference phase to the circularly-closest remaining eigenphase
    instead.
    """
    gamma = u @ u.T
    q, th = _orthogonal_diagonalize(gamma)
    remaining = list(range(len(th)))
    order = []
    for t in th_ref:
        best = min(
            remaining,
            key=lambda j: abs((th[j] - t + math.pi) % (2 * math.pi) - math.pi),
        )
        order.append(best)
        remaining.remove(best)
    q = q[:, order]
    if np.linalg.det(q) < 0:
        q = q.copy()
        q[:, 0] = -q[:, 0]
    return q


def _su2su2_factors(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split an exact tensor product of two SU(2) matrices into its factors.

    Writing the top factor as [[a1, a2], [-a2*, a1*]], the 2x2 corner blocks
    of m satisfy C1 C4^dag = a1^2 I and -C2 C3^dag = a2^2 I; the relative
    sign between the two square roots is settled by reconstruction.
    """
    c1, c2 = m[0:2, 0:2], m[0:2, 2:4]
    c3, c4 = m[2:4, 0:2], m[2:4, 2:4]
    a1 = cmath.sqrt((c1 @ c4.conj().T)[0, 0])
    a2 = cmath.sqrt(-(c2 @ c3.conj().T)[0, 0])
    best = None
    for sign in (1.0, -1.0):
        top = np.array([[a1, sign * a2], [-sign * a2.conjugate(), a1.conjugate()]])
        bottom = c1 / a1 if abs(a1) >= abs(a2) else c2 / (sign * a2)
        defect = float(np.max(np.abs(np.kron(top, bottom) - m)))
        if best is None or defect < best[0]:
            best = (defect, top, bottom)
    return best[1], best[2]


def _interior_matrix(alpha: float, beta: float, delta: float) -> np.ndarray:
    rz = np.array([[cmath.exp(-0.5j * delta), 0], [0, cmath.exp(0.5j * delta)]])
    ry_b = np.array(
        [[math.cos(beta / 2), -math.sin(beta / 2)], [math.sin(beta / 2), math.cos(beta / 2)]],
        dtype=complex,
    )
    ry_a = np.array(
        [[math.cos(alpha / 2), -math.sin(alpha / 2)], [math.sin(alpha / 2), math.cos(alpha / 2)]],
        dtype=complex,
    )
    v = _CNOT10.copy()
    v = np.kron(rz, ry_b) @ v
    v = _CNOT01 @ v
    v = np.kron(np.eye(2), ry_a) @ v
    v = _CNOT10 @ v
    return v


def cartan_decompose(u) -> GateProgram:
    """Exactly three CNOTs and at most seven rotation slots for any 4x4 unitary.

    The emitted program reproduces the input matrix exactly (a global-phase
    gate carries the leftover phase). Interior rotation angles come from the
    eigenphases of the magic-basis invariant; ties and degeneracies resolve
    deterministically through a stable sort, so equal inputs give equal
    programs.
    """
    if isinstance(u, TwoQubitUnitary):
        matrix = u.matrix
    else:
        matrix = TwoQubitUnitary(np.asarray(u, dtype=complex)).matrix

    det = np.linalg.det(matrix)
    phase0 = cmath.phase(det) / 4.0
    su = matrix * cmath.exp(-1j * phase0)
    swapped = cmath.exp(1j * math.pi / 4) * (_SWAP @ su)

    mb = _E_DAG @ swapped @ _E
    p, th = _sorted_so4_diagonalizer(mb)
    x, y, z = th[0], th[1], th[2]
    alpha, beta, delta = (x + y) / 2.0, (x + z) / 2.0, (z + y) / 2.0

    interior = _interior_matrix(alpha, beta, delta)
    v = _SWAP @ interior
    vb = _E_DAG @ v @ _E
    q = _matched_so4_diagonalizer(vb, th)

    g = p @ q.T
    hmat = vb.conj().T @ g.T @ mb
    ab = _E @ g @ _E_DAG
    cd = _E @ hmat @ _E_DAG
    a_mat, b_mat = _su2su2_factors(ab)
    c_mat, d_mat = _su2su2_factors(cd)

    # swapped = (A x B) SWAP interior (C x D)  =>  su = (B x A) interior (C x D)
    total_phase = phase0 - math.pi / 4.0
    body: list[Gate] = []
    for local, qubit in ((c_mat, 0), (d_mat, 1)):
        gates, ph = single_qubit_program(local, qubit)
        body.extend(gates)
        total_phase += ph
    body.append(CNOT(1, 0))
    body.append(Rz(0, normalize_angle(delta)[0]))
    body.append(Ry(1, normalize_angle(beta)[0]))
    body.append(CNOT(0, 1))
    body.append(Ry(1, normalize_angle(alpha)[0]))
    body.append(CNOT(1, 0))
    for local, qubit in ((b_mat, 0), (a_mat, 1)):
        gates, ph = single_qubit_program(local, qubit)
        body.extend(gates)
        total_phase += ph
    reduced_phase, _ = normalize_angle(total_phase)
    body.append(GlobalPhase(reduced_phase))
    program = GateProgram.build(2, body)

    defect = float(np.max(np.abs(program_unitary(program) - matrix)))
    if defect > 1e-9:
        raise ArithmeticError(f"decomposition failed to reproduce the unitary ({defect:g})")
    return program


def cnot_to_ms(program: GateProgram) -> GateProgram:
    """Replace each CNOT with one XX interaction inside fixed local wrappers.

    Identity used (control c, target t), exact including phase:
    CNOT = e^{i pi/4} Rz(pi/2)_c R(pi/2, 0)_t Ry(-pi/2)_c MS(-pi/2) Ry(pi/2)_c
    as a matrix product (rightmost factor applied first).
    """
    body: list[Gate] = []
    extra_phase = 0.0
    for gate in program.body:
        if not isinstance(gate, CNOT):
            body.append(gate)
            continue
        c, t = gate.control, gate.target
        body.append(Ry(c, math.pi / 2))
        body.append(MS(c, t, -math.pi / 2))
        body.append(Ry(c, -math.pi / 2))
        body.append(R(t, math.pi / 2, 0.0))
        body.append(Rz(c, math.pi / 2))
        extra_phase += math.pi / 4
    if extra_phase:
        body = _merge_phase(body, extra_phase)
    return GateProgram.build(program.n_qubits, body, measure=program.measured)


def _merge_phase(body: list[Gate], extra: float) -> list[Gate]:
    out = [g for g in body if not isinstance(g, GlobalPhase)]
    existing = sum(g.angle for g in body if isinstance(g, GlobalPhase))
    reduced, _ = normalize_angle(existing + extra)
    out.append(GlobalPhase(reduced))
    return out


def _append_rotation(body: list[Gate], kind: str, qubits, angle: float) -> float:
    """Append a rotation with its angle reduced; returns the phase correction."""
    reduced, k = normalize_angle(angle)
    phase = math.pi * (k % 2)  # each 2*pi reduction flips the operator sign
    if reduced == 0.0:
        return phase
    if kind == "rz":
        body.append(Rz(qubits, reduced))
    elif kind == "ry":
        body.append(Ry(qubits, reduced))
    elif kind == "ms":
        body.append(MS(qubits[0], qubits[1], reduced))
    return phase


def trotter_compile(params: IsingParameters, t: float, n_steps: int) -> GateProgram:
    """First-order product formula for a transverse-free spin Hamiltonian.

    Per step: z-field rotations first, then ZZ, XX, YY couplings in ascending
    (i, j) order. ZZ and YY terms are conjugated XX interactions (Ry and Rz
    sandwiches), so every coupling runs as one MS-class gate. Gate count is
    O(N^2 n_steps).
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if not params.transverse_free:
        raise ValueError("product formula supports z fields only (bx = by = 0)")
    n = params.n_qubits
    dt = t / n_steps
    body: list[Gate] = []
    phase = 0.0
    half_pi = math.pi / 2
    for _ in range(n_steps):
        for i in range(n):
            if params.bz[i] != 0.0:
                phase += _append_rotation(body, "rz", i, 2.0 * params.bz[i] * dt)
        for name in ("jz", "jx", "jy"):
            j = getattr(params, name)
            for i in range(n):
                for k in range(i + 1, n):
                    if j[i, k] == 0.0:
                        continue
                    theta = 2.0 * j[i, k] * dt
                    if name == "jz":
                        body.append(Ry(i, half_pi))
                        body.append(Ry(k, half_pi))
                        phase += _append_rotation(body, "ms", (i, k), theta)
                        body.append(Ry(i, -half_pi))
                        body.append(Ry(k, -half_pi))
                    elif name == "jx":
                        phase += _append_rotation(body, "ms", (i, k), theta)
                    else:
                        body.append(Rz(i, -half_pi))
                        body.append(Rz(k, -half_pi))
                        phase += _append_rotation(body, "ms", (i, k), theta)
                        body.append(Rz(i, half_pi))
                        body.append(Rz(k, half_pi))
    reduced, _ = normalize_angle(phase)
    if reduced != 0.0:
        body.append(GlobalPhase(reduced))
    return GateProgram.build(n, body)


def matrix_exponential_reference(h: np.ndarray, t: float) -> np.ndarray:
    """Independent scaling-and-squaring exponential, for cross-checks only."""
    return scipy.linalg.expm(-1j * np.asarray(h) * t)
