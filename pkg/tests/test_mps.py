import numpy as np
import pytest
import scipy.linalg

from protonq.hamiltonian import DafKineticSpec, SpatialGrid, kinetic_matrix
from protonq.mps import (
    CompressionReport,
    MpoOperator,
    MpsState,
    apply_mpo,
    compress,
    kinetic_mpo,
    load_mps_text,
    mpo_from_dense,
    mpo_to_dense,
    mps_from_dense,
    mps_to_dense,
    propagate_nd,
    save_mps_text,
    site_marginal,
)


def random_mps(dims, chi, rng):
    tensor = rng.normal(size=dims) + 1j * rng.normal(size=dims)
    tensor /= np.linalg.norm(tensor)
    state, _ = mps_from_dense(tensor, chi_max=chi)
    return state, tensor


class TestMpsFromDense:
    def test_product_state_bond_one(self):
        f = np.array([1.0, 2.0, 1.0, 0.5])
        g = np.array([0.5, -1.0, 0.25, 3.0])
        state, report = mps_from_dense(np.outer(f, g))
        assert state.bond_dims == (1,)
        assert report.discarded_weight <= 1e-24
        np.testing.assert_allclose(mps_to_dense(state), np.outer(f, g), atol=1e-12)

    def test_random_tensor_exact_at_full_rank(self):
        rng = np.random.default_rng(0)
        tensor = rng.normal(size=(8, 8, 8))
        state, _ = mps_from_dense(tensor, chi_max=64)
        np.testing.assert_allclose(mps_to_dense(state), tensor, atol=1e-12)

    def test_maximally_entangled_bond_equals_site_dim(self):
        bell = np.eye(4) / 2.0
        state, _ = mps_from_dense(bell)
        assert state.bond_dims == (4,)

    def test_truncation_error_bound(self):
        rng = np.random.default_rng(1)
        tensor = rng.normal(size=(8, 8))
        state, report = mps_from_dense(tensor, chi_max=3)
        err2 = np.linalg.norm(mps_to_dense(state) - tensor) ** 2
        assert err2 <= report.discarded_weight + 1e-12

    def test_single_dimension(self):
        v = np.array([1.0, 2.0, 3.0, 4.0])
        state, _ = mps_from_dense(v)
        assert state.n_sites == 1
        np.testing.assert_allclose(mps_to_dense(state), v)

    def test_chi_max_validation(self):
        with pytest.raises(ValueError):
            mps_from_dense(np.zeros((2, 2)), chi_max=0)


class TestMpoFromDense:
    def test_identity_bond_one(self):
        op, _ = mpo_from_dense(np.eye(16), (4, 4))
        assert op.bond_dims == (1,)
        np.testing.assert_allclose(mpo_to_dense(op), np.eye(16), atol=1e-12)

    def test_separable_potential_bond_two(self):
        v1 = np.diag([0.1, 0.2, 0.3, 0.4])
        v2 = np.diag([1.0, -1.0, 0.5, 0.0])
        dense = np.kron(v1, np.eye(4)) + np.kron(np.eye(4), v2)
        op, _ = mpo_from_dense(dense, (4, 4))
        assert op.bond_dims == (2,)
        np.testing.assert_allclose(mpo_to_dense(op), dense, atol=1e-12)

    def test_propagator_contraction_matches_exponential(self):
        rng = np.random.default_rng(2)
        grid = SpatialGrid(n_points=8, x_min=-1.0, x_max=1.0)
        spec = DafKineticSpec.for_grid(grid, mass=1836.0, m_daf=12)
        k = kinetic_matrix(grid, spec)
        eye = np.eye(8)
        h = np.kron(k, eye) + np.kron(eye, k) + np.diag(rng.uniform(0, 1e-3, 64))
        u = scipy.linalg.expm(-1j * h * 5.0)
        op, _ = mpo_from_dense(u, (8, 8), tol=0.0, chi_max=64)  # adequate chi: no truncation
        np.testing.assert_allclose(mpo_to_dense(op), u, atol=1e-10)


class TestKineticMpo:
    def _grid_spec(self, n=8):
        grid = SpatialGrid(n_points=n, x_min=-1.0, x_max=1.0)
        return grid, DafKineticSpec.for_grid(grid, mass=1836.0, m_daf=12)

    def test_single_dimension_equals_dense(self):
        grid, spec = self._grid_spec()
        op = kinetic_mpo([(grid, spec)])
        np.testing.assert_allclose(mpo_to_dense(op), kinetic_matrix(grid, spec))

    def test_two_dimensions_kronecker_oracle(self):
        g1, s1 = self._grid_spec()
        g2, s2 = self._grid_spec()
        op = kinetic_mpo([(g1, s1), (g2, s2)])
        k1 = kinetic_matrix(g1, s1)
        k2 = kinetic_matrix(g2, s2)
        expected = np.kron(k1, np.eye(8)) + np.kron(np.eye(8), k2)
        assert np.max(np.abs(mpo_to_dense(op) - expected)) <= 1e-12

    @pytest.mark.parametrize("n_dims", [2, 3, 4, 5, 6])
    def test_bond_dimension_two(self, n_dims):
        pairs = [self._grid_spec(4) for _ in range(n_dims)]
        op = kinetic_mpo(pairs)
        assert all(b == 2 for b in op.bond_dims)

    def test_parameter_count_linear(self):
        counts = []
        for n_dims in range(1, 7):
            pairs = [self._grid_spec(4) for _ in range(n_dims)]
            op = kinetic_mpo(pairs)
            counts.append(sum(core.size for core in op.cores))
        site_sq = 16
        for n_dims, count in zip(range(1, 7), counts):
            assert count <= 4 * site_sq * n_dims


class TestApplyMpo:
    def test_identity_preserves_state_and_multiplies_bonds(self):
        rng = np.random.default_rng(3)
        state, tensor = random_mps((4, 4, 4), chi=16, rng=rng)
        op, _ = mpo_from_dense(np.eye(64), (4, 4, 4))
        out = apply_mpo(op, state)
        assert out.bond_dims == state.bond_dims  # identity has bond 1
        np.testing.assert_allclose(mps_to_dense(out), tensor, atol=1e-12)

    def test_bond_dims_multiply_exactly(self):
        rng = np.random.default_rng(4)
        state, _ = random_mps((4, 4, 4), chi=16, rng=rng)
        grid = SpatialGrid(n_points=4, x_min=0.0, x_max=1.0)
        spec = DafKineticSpec.for_grid(grid, mass=100.0, m_daf=8)
        op = kinetic_mpo([(grid, spec)] * 3)
        out = apply_mpo(op, state)
        assert out.bond_dims == tuple(
            2 * b for b in state.bond_dims
        )

    def test_separable_rotation_keeps_product(self):
        f = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)
        state, _ = mps_from_dense(np.outer(f, f))
        u1 = scipy.linalg.expm(-1j * 0.3 * np.diag([0.0, 1.0, 2.0, 3.0]))
        dense = np.kron(u1, u1)
        op, _ = mpo_from_dense(dense, (4, 4))
        out = apply_mpo(op, state)
        expected = (dense @ np.outer(f, f).ravel()).reshape(4, 4)
        np.testing.assert_allclose(mps_to_dense(out), expected, atol=1e-12)

    def test_dense_contraction_equivalence_three_dims(self):
        rng = np.random.default_rng(5)
        state, tensor = random_mps((8, 8, 8), chi=64, rng=rng)
        dense_op = rng.normal(size=(512, 512)) + 1j * rng.normal(size=(512, 512))
        op, _ = mpo_from_dense(dense_op, (8, 8, 8), chi_max=64)
        out = apply_mpo(op, state)
        expected = (dense_op @ tensor.ravel()).reshape(8, 8, 8)
        assert np.max(np.abs(mps_to_dense(out) - expected)) <= 1e-10

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(6)
        state, _ = random_mps((4, 4), chi=8, rng=rng)
        op, _ = mpo_from_dense(np.eye(4), (2, 2))
        with pytest.raises(ValueError):
            apply_mpo(op, state)


class TestCompress:
    def test_minimal_state_unchanged(self):
        f = np.array([1.0, 2.0, 0.5, 0.1])
        state, _ = mps_from_dense(np.outer(f, f))
        out, report = compress(state)
        assert report.discarded_weight <= 1e-28
        np.testing.assert_allclose(mps_to_dense(out), np.outer(f, f), atol=1e-12)

    def test_apply_then_compress_full_rank_exact(self):
        rng = np.random.default_rng(7)
        state, tensor = random_mps((8, 8), chi=8, rng=rng)
        dense_op = rng.normal(size=(64, 64))
        op, _ = mpo_from_dense(dense_op, (8, 8))
        raw = apply_mpo(op, state)
        out, _ = compress(raw, chi_max=64)
        expected = (dense_op @ tensor.ravel()).reshape(8, 8)
        np.testing.assert_allclose(mps_to_dense(out), expected, atol=1e-12)

    def test_discarded_weight_monotone_in_chi(self):
        rng = np.random.default_rng(8)
        state, _ = random_mps((8, 8, 8), chi=64, rng=rng)
        weights = []
        for chi in (64, 16, 6, 2, 1):
            _, report = compress(state, chi_max=chi)
            weights.append(report.discarded_weight)
        assert all(a <= b + 1e-15 for a, b in zip(weights, weights[1:]))

    def test_error_bounded_by_discarded_weight(self):
        rng = np.random.default_rng(9)
        state, tensor = random_mps((8, 8), chi=8, rng=rng)
        out, report = compress(state, chi_max=3)
        err2 = np.linalg.norm(mps_to_dense(out) - tensor) ** 2
        assert err2 <= report.discarded_weight * (1 + 1e-9) + 1e-14

    def test_renormalize(self):
        rng = np.random.default_rng(10)
        state, _ = random_mps((8, 8), chi=8, rng=rng)
        out, _ = compress(state, chi_max=2, renormalize=True)
        assert out.norm() == pytest.approx(1.0, abs=1e-12)

    def test_report_validation(self):
        with pytest.raises(ValueError):
            CompressionReport(discarded_weight=-1.0, max_bond_before=1, max_bond_after=1)


class TestPropagate:
    def _model_2d(self, coupled=True):
        grid = SpatialGrid(n_points=8, x_min=-1.5, x_max=1.5)
        spec = DafKineticSpec.for_grid(grid, mass=1836.0, m_daf=12)
        x = grid.points()
        k = kinetic_matrix(grid, spec)
        eye = np.eye(8)
        well = 0.02 * (x**2 - 0.5) ** 2
        harm = 0.05 * x**2
        h = np.kron(k + np.diag(well), eye) + np.kron(eye, k + np.diag(harm))
        if coupled:
            h = h + np.diag(np.kron(0.002 * x, x))
        return h

    def test_time_zero(self):
        psi = np.zeros((8, 8), dtype=complex)
        psi[3, 4] = 1.0
        state, _ = mps_from_dense(psi)
        traj, reports = propagate_nd(self._model_2d(), state, t=0.0, n_substeps=1)
        np.testing.assert_allclose(mps_to_dense(traj[-1]), psi, atol=1e-12)

    def test_2d_marginals_match_dense(self):
        h = self._model_2d()
        psi = np.zeros((8, 8), dtype=complex)
        psi[2, 3] = 1.0
        state, _ = mps_from_dense(psi)
        t = 400.0  # a.u.
        traj, _ = propagate_nd(h, state, t=t, n_substeps=16, chi_max=64)
        dense = scipy.linalg.expm(-1j * h * t) @ psi.ravel()
        dense_marg = (np.abs(dense.reshape(8, 8)) ** 2).sum(axis=1)
        got = site_marginal(traj[-1], 0)
        assert np.max(np.abs(got - dense_marg)) <= 1e-6

    def test_separable_hamiltonian_stays_product(self):
        h = self._model_2d(coupled=False)
        psi = np.zeros((8, 8), dtype=complex)
        psi[2, 3] = 1.0
        state, _ = mps_from_dense(psi)
        traj, _ = propagate_nd(h, state, t=200.0, n_substeps=8, chi_max=64, tol=1e-10)
        assert traj[-1].bond_dims == (1,)

    def test_norm_conserved_under_untruncated_application(self):
        h = self._model_2d()
        u = scipy.linalg.expm(-1j * h * 50.0)
        op, _ = mpo_from_dense(u, (8, 8), tol=0.0, chi_max=64)
        psi = np.zeros((8, 8), dtype=complex)
        psi[1, 1] = 1.0
        state, _ = mps_from_dense(psi)
        out = apply_mpo(op, state)
        assert out.norm() == pytest.approx(1.0, abs=1e-9)

    def test_blowup_guard_trips(self):
        h = self._model_2d()
        psi = np.zeros((8, 8), dtype=complex)
        psi[1, 1] = 1.0
        state, _ = mps_from_dense(psi)
        with pytest.raises(ArithmeticError, match="guard"):
            propagate_nd(h, state, t=100.0, n_substeps=4, chi_max=8, tol=0.0)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        state, tensor = random_mps((4, 4, 4), chi=8, rng=rng)
        path = tmp_path / "state.mps"
        save_mps_text(state, path)
        back = load_mps_text(path)
        assert all(
            np.array_equal(a, b) for a, b in zip(back.cores, state.cores)
        )
        np.testing.assert_allclose(mps_to_dense(back), tensor, atol=1e-15)
