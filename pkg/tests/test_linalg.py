import numpy as np
import pytest

from qest.errors import BranchAmbiguityWarning, ContractViolationError
from qest.linalg import (
    gell_mann_basis,
    herm_expm,
    is_hermitian,
    is_psd,
    is_unitary,
    matrix_from_json,
    matrix_to_json,
    nearest_unitary,
    unitary_log,
    vec,
    vec_inv,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def random_hermitian(d, rng, norm=None):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (g + g.conj().T) / 2
    if norm is not None:
        h *= norm / np.linalg.norm(h, 2)
    return h


def random_unitary(d, rng):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


class TestGellMannBasis:
    def test_qubit_basis_is_scaled_paulis(self):
        b = gell_mann_basis(2)
        expected = np.stack([SX, SY, SZ]) / np.sqrt(2)
        assert np.allclose(b.elements, expected, atol=1e-15)

    @pytest.mark.parametrize("d", range(2, 9))
    def test_invariants(self, d):
        b = gell_mann_basis(d)
        assert b.elements.shape == (d * d - 1, d, d)
        for om in b.elements:
            assert is_hermitian(om, 1e-12)
            assert abs(np.trace(om)) <= 1e-12
        gram = np.einsum("aij,bji->ab", b.elements, b.elements).real
        assert np.abs(gram - np.eye(d * d - 1)).max() <= 1e-10

    @pytest.mark.parametrize("d", [2, 3, 5, 8])
    def test_total_hilbert_schmidt_norm(self, d):
        b = gell_mann_basis(d)
        total = sum(np.trace(om @ om).real for om in b.elements)
        assert total == pytest.approx(d * d - 1, abs=1e-9)

    def test_invalid_dimension(self):
        with pytest.raises(ValueError):
            gell_mann_basis(1)


class TestVec:
    def test_column_stacking_order(self):
        assert np.array_equal(vec(np.array([[1, 3], [2, 4]])), [1, 2, 3, 4])

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert np.array_equal(vec_inv(vec(a), 3, 3), a)
        v = rng.normal(size=12)
        assert np.array_equal(vec(vec_inv(v, 3, 4)), v)

    def test_degenerate_1x1(self):
        assert np.array_equal(vec(np.array([[2.5 + 1j]])), [2.5 + 1j])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            vec_inv(np.arange(5), 2, 3)


class TestHermExpm:
    def test_zero_time_is_identity(self):
        h = random_hermitian(4, np.random.default_rng(1))
        assert np.allclose(herm_expm(h, 0.0), np.eye(4), atol=1e-14)

    def test_pauli_z_half_period(self):
        # eigenvalues +-1 give exp(-i pi) = exp(+i pi) = -1 on both branches
        assert np.allclose(herm_expm(SZ, np.pi), -np.eye(2), atol=1e-12)

    def test_one_parameter_group(self):
        rng = np.random.default_rng(2)
        h = random_hermitian(3, rng)
        lhs = herm_expm(h, 0.7) @ herm_expm(h, 1.8)
        assert np.linalg.norm(lhs - herm_expm(h, 2.5)) <= 1e-9

    def test_unitarity_for_large_generators(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            h = random_hermitian(5, rng, norm=10.0)
            u = herm_expm(h, rng.uniform(0, 10))
            assert np.linalg.norm(u.conj().T @ u - np.eye(5)) <= 1e-9

    def test_rejects_non_hermitian(self):
        with pytest.raises(ContractViolationError):
            herm_expm(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)


class TestNearestUnitary:
    def test_unitary_fixed_point(self):
        u = random_unitary(3, np.random.default_rng(4))
        assert np.linalg.norm(nearest_unitary(u) - u) <= 1e-12

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        s = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert np.allclose(nearest_unitary(3.7 * s), nearest_unitary(s), atol=1e-12)

    def test_beats_random_unitaries(self):
        # Monte-Carlo oracle: the polar factor minimizes the Frobenius distance
        rng = np.random.default_rng(6)
        s = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        best = np.linalg.norm(nearest_unitary(s) - s)
        for _ in range(1000):
            assert best <= np.linalg.norm(random_unitary(2, rng) - s) + 1e-12

    def test_rank_deficient_rejected(self):
        with pytest.raises(ContractViolationError):
            nearest_unitary(np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestUnitaryLog:
    def test_identity_gives_zero(self):
        h = unitary_log(np.eye(3, dtype=complex), 2.0)
        assert np.linalg.norm(h) <= 1e-12

    def test_pauli_z_round_trip(self):
        h = unitary_log(herm_expm(SZ, 0.3), 0.3)
        assert np.linalg.norm(h - SZ) <= 1e-9

    def test_random_round_trips_inside_branch(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            d = int(rng.integers(2, 5))
            h = random_hermitian(d, rng, norm=1.0)
            h -= (np.trace(h) / d) * np.eye(d)
            t = rng.uniform(0.05, 0.9) * np.pi / np.linalg.norm(h, 2)
            recovered = unitary_log(herm_expm(h, t), t)
            assert np.linalg.norm(recovered - h) <= 1e-8

    def test_rejects_non_unitary(self):
        with pytest.raises(ContractViolationError):
            unitary_log(np.diag([1.0, 2.0]).astype(complex), 1.0)

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ValueError):
            unitary_log(np.eye(2, dtype=complex), 0.0)

    def test_branch_cut_warning(self):
        u = herm_expm(SZ, np.pi - 1e-7)
        with pytest.warns(BranchAmbiguityWarning):
            unitary_log(u, np.pi - 1e-7)


class TestPredicates:
    def test_hermitian_unitary_psd(self):
        rng = np.random.default_rng(8)
        h = random_hermitian(3, rng)
        assert is_hermitian(h)
        assert not is_hermitian(h + 1e-6 * 1j * np.eye(3))
        u = random_unitary(3, rng)
        assert is_unitary(u)
        assert not is_unitary(1.01 * u)
        assert is_psd(h @ h.conj().T)
        assert not is_psd(-np.eye(2))


class TestMatrixJson:
    def test_round_trip(self):
        rng = np.random.default_rng(9)
        a = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
        obj = matrix_to_json(a)
        assert obj["rows"] == 3 and obj["cols"] == 2
        assert np.allclose(matrix_from_json(obj), a)

    def test_data_is_column_stacked(self):
        obj = matrix_to_json(np.array([[1, 3], [2, 4]], dtype=complex))
        assert [c[0] for c in obj["data"]] == [1.0, 2.0, 3.0, 4.0]

    def test_malformed_rejected(self):
        with pytest.raises(ValueError):
            matrix_from_json({"rows": 2, "data": []})
