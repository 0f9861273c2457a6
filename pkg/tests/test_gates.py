import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protonq.gates import (
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
    emit_text,
    format_angle,
    normalize_angle,
    parse_text,
    program_unitary,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)


class TestNormalizeAngle:
    @given(st.floats(-50.0, 50.0))
    def test_range_and_reconstruction(self, a):
        reduced, k = normalize_angle(a)
        assert -math.pi <= reduced <= math.pi
        assert reduced + 2 * math.pi * k == pytest.approx(a, abs=1e-12)

    def test_boundary(self):
        assert normalize_angle(math.pi)[0] in (-math.pi, math.pi)
        assert normalize_angle(-math.pi)[0] in (-math.pi, math.pi)
        assert normalize_angle(3 * math.pi)[0] == pytest.approx(-math.pi)


class TestProgramInvariants:
    def test_requires_prepare_first(self):
        with pytest.raises(ValueError, match="prepare_all"):
            GateProgram(n_qubits=1, gates=(Rz(0, 0.1),))

    def test_single_measure_at_end(self):
        with pytest.raises(ValueError, match="measure_all"):
            GateProgram(n_qubits=1, gates=(PrepareAll(), MeasureAll(), Rz(0, 0.1)))

    def test_angle_range_enforced(self):
        with pytest.raises(ValueError, match="outside"):
            Rz(0, 4.0)

    def test_qubit_bounds(self):
        with pytest.raises(ValueError, match="out of range"):
            GateProgram.build(1, [CNOT(0, 1)])

    def test_counts(self):
        p = GateProgram.build(2, [Rz(0, 0.1), Ry(1, 0.2), CNOT(0, 1)], measure=True)
        assert p.counts() == {"rz": 1, "ry": 1, "cnot": 1}
        assert p.measured


class TestEmbedGate:
    def test_single_qubit_kron_placement(self):
        g = Ry(1, 0.7)
        full = embed_gate(g, 3)
        expected = np.kron(np.kron(np.eye(2), g.matrix()), np.eye(2))
        assert np.max(np.abs(full - expected)) <= 1e-15

    def test_cnot_adjacent(self):
        full = embed_gate(CNOT(0, 1), 2)
        expected = np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
        )
        assert np.array_equal(full, expected)

    def test_cnot_reversed_and_nonadjacent(self):
        # control 2, target 0 on three qubits, checked on basis states
        full = embed_gate(CNOT(2, 0), 3)
        for state in range(8):
            ket = np.zeros(8)
            ket[state] = 1
            out = full @ ket
            control = state & 1
            expect = state ^ (0b100 if control else 0)
            assert out[expect] == 1.0

    def test_ms_is_xx_exponential(self):
        theta = 0.37
        got = embed_gate(MS(0, 1, theta), 2)
        xx = np.kron(X, X)
        import scipy.linalg

        expected = scipy.linalg.expm(-0.5j * theta * xx)
        assert np.max(np.abs(got - expected)) <= 1e-12


angles = st.floats(-math.pi, math.pi)


@st.composite
def random_programs(draw):
    n_qubits = draw(st.integers(1, 3))
    body = []
    for _ in range(draw(st.integers(0, 12))):
        kind = draw(st.sampled_from(["rz", "ry", "r", "cnot", "ms", "gphase"]))
        q = draw(st.integers(0, n_qubits - 1))
        if kind == "rz":
            body.append(Rz(q, draw(angles)))
        elif kind == "ry":
            body.append(Ry(q, draw(angles)))
        elif kind == "r":
            body.append(R(q, draw(angles), draw(angles)))
        elif kind == "gphase":
            body.append(GlobalPhase(draw(angles)))
        elif n_qubits > 1:
            q2 = draw(st.integers(0, n_qubits - 1).filter(lambda v: v != q))
            body.append(CNOT(q, q2) if kind == "cnot" else MS(q, q2, draw(angles)))
    return GateProgram.build(n_qubits, body, measure=draw(st.booleans()))


class TestTextIr:
    def test_empty_program_two_qubits(self):
        text = emit_text(GateProgram.build(2, [], measure=True))
        assert text == "version 1\nqubits 2\n---\nprepare_all\nmeasure_all\n"

    def test_minus_pi_formatting(self):
        text = emit_text(GateProgram.build(1, [Rz(0, -math.pi)]))
        assert "rz 0 -3.141592653589793" in text

    def test_small_angle_scientific(self):
        assert format_angle(5e-4) == "5e-04"
        assert format_angle(0.0) == "0"
        assert format_angle(1.0) == "1.0"

    def test_comments_ignored(self):
        text = "version 1\nqubits 1\n---\n# a comment\nprepare_all\nrz 0 0.5\n"
        program = parse_text(text)
        assert program.body == (Rz(0, 0.5),)

    def test_bad_header_rejected(self):
        with pytest.raises(ValueError, match="header"):
            parse_text("version 2\nqubits 1\n---\n")

    @settings(max_examples=100)
    @given(random_programs())
    def test_round_trip(self, program):
        assert parse_text(emit_text(program)) == program

    @given(st.floats(-math.pi, math.pi))
    def test_angle_round_trip(self, a):
        assert float(format_angle(a)) == a

    def test_all_mnemonics(self):
        body = [
            Rz(0, -1.0),
            Ry(1, 0.5),
            R(0, 1.2, -0.4),
            CNOT(0, 1),
            MS(0, 1, math.pi / 2),
            GlobalPhase(0.25),
        ]
        program = GateProgram.build(2, body, measure=True)
        text = emit_text(program)
        for token in ("rz 0", "ry 1", "r 0", "cnot 0 1", "ms 0 1", "gphase"):
            assert token in text
        assert parse_text(text) == program


class TestProgramUnitary:
    def test_global_phase_included(self):
        program = GateProgram.build(1, [GlobalPhase(0.3)])
        assert np.allclose(program_unitary(program), np.exp(0.3j) * np.eye(2))

    def test_composition_order(self):
        # Rz then Ry in circuit order means Ry @ Rz as matrices
        program = GateProgram.build(1, [Rz(0, 0.4), Ry(0, 1.1)])
        expected = Ry(0, 1.1).matrix() @ Rz(0, 0.4).matrix()
        assert np.max(np.abs(program_unitary(program) - expected)) <= 1e-15
