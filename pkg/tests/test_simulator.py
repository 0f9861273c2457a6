import math

import numpy as np
import pytest

from conftest import haar_unitary
from protonq.compiler import cartan_decompose
from protonq.gates import CNOT, MS, GateProgram, GlobalPhase, R, Ry, Rz
from protonq.simulator import (
    DensityMatrix,
    NoiseModel,
    ShotResult,
    circuit_fidelity_estimate,
    run_program,
    sample_counts,
    save_counts_csv,
    save_probabilities_csv,
    statevector_final,
)


class TestIdealRuns:
    def test_empty_program(self):
        result = run_program(GateProgram.build(2, [], measure=True))
        np.testing.assert_allclose(result.probabilities, [1.0, 0.0, 0.0, 0.0])

    def test_single_cnot_on_zero(self):
        result = run_program(GateProgram.build(2, [CNOT(0, 1)], measure=True))
        np.testing.assert_allclose(result.probabilities, [1.0, 0.0, 0.0, 0.0])

    def test_cartan_program_matches_statevector(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            u = haar_unitary(4, rng)
            program = cartan_decompose(u)
            result = run_program(program)
            expected = np.abs(u[:, 0]) ** 2
            assert np.max(np.abs(result.probabilities - expected)) <= 1e-9

    def test_density_equals_pure_state(self):
        program = GateProgram.build(2, [Ry(0, 1.0), CNOT(0, 1), Rz(1, -0.7)])
        result = run_program(program)
        psi = statevector_final(program)
        rho = np.outer(psi, psi.conj())
        assert np.max(np.abs(result.density.matrix - rho)) <= 1e-10

    def test_global_phase_ignored_by_density(self):
        with_phase = GateProgram.build(1, [Ry(0, 0.5), GlobalPhase(1.0)])
        without = GateProgram.build(1, [Ry(0, 0.5)])
        a = run_program(with_phase).density.matrix
        b = run_program(without).density.matrix
        assert np.array_equal(a, b)


class TestNoise:
    def test_trace_and_psd_preserved(self):
        rng = np.random.default_rng(6)
        program = cartan_decompose(haar_unitary(4, rng))
        result = run_program(program, noise=NoiseModel())
        rho = result.density.matrix
        assert abs(np.trace(rho).real - 1.0) <= 1e-10
        assert np.min(np.linalg.eigvalsh(rho)) >= -1e-10

    def test_full_depolarizing_gives_uniform(self):
        noise = NoiseModel(fidelity_1q=0.0, readout_flip=0.0)
        program = GateProgram.build(1, [Ry(0, 0.3)])
        result = run_program(program, noise=noise)
        np.testing.assert_allclose(result.density.matrix, np.eye(2) / 2, atol=1e-12)

    def test_depolarizing_on_support_only(self):
        # noisy gate on qubit 0 must leave qubit 1's marginal intact
        noise = NoiseModel(fidelity_1q=0.5, readout_flip=0.0)
        program = GateProgram.build(2, [Ry(1, math.pi / 2), Ry(0, 0.4)])
        result = run_program(program, noise=noise)
        rho = result.density.matrix
        marginal = np.array(
            [rho[0, 0] + rho[2, 2], rho[1, 1] + rho[3, 3]]
        ).real
        np.testing.assert_allclose(marginal, [0.5, 0.5], atol=1e-12)

    def test_rz_is_noise_free(self):
        noise = NoiseModel(fidelity_1q=0.5, readout_flip=0.0)
        program = GateProgram.build(1, [Rz(0, 1.0)])
        result = run_program(program, noise=noise)
        np.testing.assert_allclose(result.probabilities, [1.0, 0.0], atol=1e-14)

    def test_readout_flip_on_basis_state(self):
        noise = NoiseModel(readout_flip=0.1)
        program = GateProgram.build(1, [])
        result = run_program(program, noise=noise)
        np.testing.assert_allclose(result.probabilities, [0.9, 0.1], atol=1e-14)

    def test_two_qubit_readout_factorizes(self):
        noise = NoiseModel(readout_flip=0.2)
        result = run_program(GateProgram.build(2, []), noise=noise)
        np.testing.assert_allclose(
            result.probabilities, [0.64, 0.16, 0.16, 0.04], atol=1e-12
        )

    def test_depolarizing_channel_analytic_form(self):
        # single-qubit support: (1-p) rho + p * I/2 (x) partial trace
        from protonq.simulator import _depolarize

        rng = np.random.default_rng(12)
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        p = 0.3
        got = _depolarize(rho, (0,), p, 2)
        traced = rho[:2, :2] + rho[2:, 2:]  # trace over qubit 0
        expected = (1 - p) * rho + p * np.kron(np.eye(2) / 2, traced)
        assert np.max(np.abs(got - expected)) <= 1e-14
        got_full = _depolarize(rho, (0, 1), p, 2)
        expected_full = (1 - p) * rho + p * np.eye(4) / 4
        assert np.max(np.abs(got_full - expected_full)) <= 1e-14

    def test_noise_model_validation(self):
        with pytest.raises(ValueError):
            NoiseModel(fidelity_ms=1.5)


class TestFidelityEstimate:
    def test_template_product(self):
        body = [Ry(0, 0.1)] * 7 + [CNOT(0, 1)] * 3
        program = GateProgram.build(2, body)
        estimate = circuit_fidelity_estimate(program, NoiseModel())
        assert estimate == pytest.approx(0.965**3 * 0.995**7, rel=1e-12)
        assert estimate == pytest.approx(0.868, abs=0.001)

    def test_empty_program(self):
        assert circuit_fidelity_estimate(GateProgram.build(1, []), NoiseModel()) == 1.0

    def test_noise_free_model(self):
        body = [Ry(0, 0.1), CNOT(0, 1), MS(0, 1, 0.2), R(1, 0.3, 0.0)]
        program = GateProgram.build(2, body)
        clean = NoiseModel(fidelity_1q=1.0, fidelity_ms=1.0, fidelity_cnot=1.0)
        assert circuit_fidelity_estimate(program, clean) == 1.0

    def test_software_rz_free(self):
        program = GateProgram.build(1, [Rz(0, 0.5)] * 10)
        assert circuit_fidelity_estimate(program, NoiseModel()) == 1.0


class TestSampling:
    def test_deterministic_all_in_one(self):
        result = sample_counts(np.array([1.0, 0.0]), 1000, seed=1)
        assert result.counts == {"0": 1000}

    def test_uniform_within_five_sigma(self):
        p = np.full(4, 0.25)
        result = sample_counts(p, 10**6, seed=2)
        sigma = math.sqrt(0.25 * 0.75 * 10**6)
        for bits in ("00", "01", "10", "11"):
            assert abs(result.counts[bits] - 250000) <= 5 * sigma

    def test_same_seed_identical(self):
        p = np.array([0.3, 0.2, 0.4, 0.1])
        a = sample_counts(p, 5000, seed=99)
        b = sample_counts(p, 5000, seed=99)
        assert a == b

    def test_rejects_bad_input(self):
        with pytest.raises(FloatingPointError):
            sample_counts(np.array([1.1, -0.1]), 10, seed=0)
        with pytest.raises(ValueError):
            sample_counts(np.array([0.5, 0.4]), 10, seed=0)
        with pytest.raises(ValueError):
            sample_counts(np.array([0.5, 0.5]), 0, seed=0)

    def test_counts_invariant(self):
        with pytest.raises(ValueError):
            ShotResult(counts={"0": 3}, n_shots=4, seed=0)

    def test_run_program_shot_request_zero(self):
        with pytest.raises(ValueError):
            run_program(GateProgram.build(1, []), n_shots=0)


class TestCsvExports:
    def test_counts_csv(self, tmp_path):
        result = sample_counts(np.array([0.5, 0.5]), 100, seed=3)
        path = tmp_path / "counts.csv"
        save_counts_csv(result, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "bitstring,count"
        total = sum(int(ln.split(",")[1]) for ln in lines[1:])
        assert total == 100

    def test_probabilities_csv(self, tmp_path):
        path = tmp_path / "probs.csv"
        save_probabilities_csv(np.array([0.25, 0.75]), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "bitstring,probability"
        assert lines[1] == "0,0.25"


class TestDensityMatrixValidation:
    def test_trace_enforced(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(matrix=np.eye(2), n_qubits=1)

    def test_hermiticity_enforced(self):
        m = np.array([[0.5, 0.1], [0.3, 0.5]], dtype=complex)
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(matrix=m, n_qubits=1)


class TestDepolarizeNonContiguous:
    def test_three_qubit_split_support(self):
        # support {0, 2} on three qubits: mixed part is I/2 (x) rho_1 (x) I/2
        from protonq.simulator import _depolarize

        rng = np.random.default_rng(21)
        m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        p = 0.4
        got = _depolarize(rho, (0, 2), p, 3)
        t = rho.reshape(2, 2, 2, 2, 2, 2)  # (k0,k1,k2,b0,b1,b2)
        rho_mid = np.einsum("aicajc->ij", t)
        mixed = np.einsum("ab,ij,cd->aicbjd", np.eye(2) / 2, rho_mid, np.eye(2) / 2)
        expected = (1 - p) * rho + p * mixed.reshape(8, 8)
        assert np.max(np.abs(got - expected)) <= 1e-14
        assert np.trace(got).real == pytest.approx(1.0, abs=1e-12)
