import numpy as np
import pytest

from sgeo.operators import (AlgebraElement, MatrixOperator, ModeLattice,
                            eigendecompose, functional_calculus,
                            operator_norm)


def _random_matrix(rng, n, hermitian=False):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (A + A.conj().T) / 2 if hermitian else A


class TestModeLattice:
    def test_reps_are_symmetric_integers(self):
        lat = ModeLattice(7, 2)
        assert lat.n_modes == 49
        assert set(lat.axis_reps) == {-3, -2, -1, 0, 1, 2, 3}

    def test_flat_index_roundtrip(self):
        lat = ModeLattice(9, 2)
        idx = lat.flat_index(lat.reps)
        assert np.array_equal(idx, np.arange(lat.n_modes))

    def test_shift_indices_shift_by_one(self):
        lat = ModeLattice(5, 1)
        # hitting mode k with a shift by m lands at the slot of k + m
        shifted = lat.shift_indices([1])
        expected = lat.flat_index(lat.reps + np.array([1]))
        assert np.array_equal(shifted, expected)

    def test_grid_points_unit_cell(self):
        lat = ModeLattice(8, 2)
        x = lat.grid_points()
        assert x.shape == (64, 2)
        assert x.min() == 0.0 and x.max() < 1.0

    def test_nearest_grid_index_wraps(self):
        lat = ModeLattice(10, 1)
        assert lat.nearest_grid_index([0.999]) == 0   # wraps past the edge
        assert lat.nearest_grid_index([0.31]) == 3


class TestMatrixOperator:
    def test_norm_matches_numpy_svd(self, rng):
        A = _random_matrix(rng, 40)
        assert operator_norm(MatrixOperator(A)) == pytest.approx(
            np.linalg.norm(A, 2), rel=1e-10)

    def test_power_iteration_path(self):
        # above the dense cutoff the Lanczos/power route must still be exact
        # on a diagonal with known top singular value
        n = 2000
        vals = np.linspace(0.1, 3.7, n)
        vals[-1] = 5.0   # spectral gap so the iteration converges fast
        T = MatrixOperator.diag(vals)
        assert operator_norm(T) == pytest.approx(5.0, rel=1e-6)

    def test_herm_defect(self, rng):
        H = _random_matrix(rng, 12, hermitian=True)
        assert MatrixOperator(H).herm_defect() == 0.0
        assert MatrixOperator(H + 1e-3 * 1j * np.eye(12)).herm_defect() > 0

    def test_commutator_and_algebra(self, rng):
        A = MatrixOperator(_random_matrix(rng, 9))
        B = MatrixOperator(_random_matrix(rng, 9))
        C = A.commutator(B).dense()
        ref = A.dense() @ B.dense() - B.dense() @ A.dense()
        assert np.allclose(C, ref)

    def test_submatrix_compression(self, rng):
        A = MatrixOperator(_random_matrix(rng, 6))
        mask = np.array([True, False, True, True, False, False])
        sub = A.submatrix(mask).dense()
        idx = np.flatnonzero(mask)
        assert np.allclose(sub, A.dense()[np.ix_(idx, idx)])


class TestFunctionalCalculus:
    def test_matches_direct_eigh(self, rng):
        H = _random_matrix(rng, 15, hermitian=True)
        F = functional_calculus(H, np.exp).dense()
        w, v = np.linalg.eigh(H)
        ref = v @ np.diag(np.exp(w)) @ v.conj().T
        assert np.allclose(F, ref, atol=1e-10)

    def test_kernel_shift(self):
        H = np.diag([0.0, 2.0])
        F = functional_calculus(H, lambda x: 1.0 / x, kernel_shift=1.0)
        assert np.allclose(F.dense(), np.diag([1.0, 0.5]))

    def test_rejects_non_hermitian(self, rng):
        with pytest.raises(ValueError, match="not Hermitian"):
            eigendecompose(_random_matrix(rng, 8))


class TestAlgebraElement:
    def test_product_exactly_commutative(self, rng):
        # complex SIMD multiplication need not be bitwise commutative;
        # the canonical operand ordering must make it so
        lat = ModeLattice(31, 1)
        a = AlgebraElement(lat, rng.standard_normal(31) + 1j * rng.standard_normal(31))
        b = AlgebraElement(lat, rng.standard_normal(31) + 1j * rng.standard_normal(31))
        assert np.array_equal((a * b).symbol, (b * a).symbol)

    def test_coeffs_roundtrip(self, rng):
        lat = ModeLattice(16, 1)
        a = AlgebraElement(lat, rng.standard_normal(16))
        back = np.fft.ifftn(a.coeffs) * lat.n_modes
        assert np.allclose(back, a.symbol)

    def test_bandwidth(self):
        lat = ModeLattice(21, 1)
        theta = 2 * np.pi * np.arange(21) / 21
        assert AlgebraElement(lat, np.cos(3 * theta)).bandwidth() == 3
        assert AlgebraElement(lat, np.ones(21)).bandwidth() == 0

    def test_matrix_of_unimodular_is_shift(self):
        lat = ModeLattice(5, 1)
        theta = 2 * np.pi * np.arange(5) / 5
        U = AlgebraElement(lat, np.exp(1j * theta)).matrix(1).dense()
        # exactly one unit entry per column, shifting mode k to k + 1
        expected = np.zeros((5, 5))
        src = lat.flat_index(lat.reps)
        dst = lat.flat_index(lat.reps + np.array([1]))
        expected[dst, src] = 1.0
        assert np.allclose(U, expected, atol=1e-12)

    def test_matrix_is_multiplicative(self, rng):
        lat = ModeLattice(17, 1)
        theta = 2 * np.pi * np.arange(17) / 17
        a = AlgebraElement(lat, np.cos(theta))
        b = AlgebraElement(lat, np.sin(2 * theta))
        prod = (a.matrix(1) @ b.matrix(1)).dense()
        assert np.allclose(prod, (a * b).matrix(1).dense(), atol=1e-12)

    def test_generators_commute_exactly(self, circle16):
        names = sorted(circle16.generators)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                c = circle16.generators[a].commutator(circle16.generators[b])
                assert c.fro() <= 1e-13

    def test_dense_route_agrees_with_sparse(self, rng):
        # symbols with many Fourier modes take the DFT-conjugation path
        lat = ModeLattice(101, 1)
        sym = rng.standard_normal(101)
        A = AlgebraElement(lat, sym).matrix(1)
        xi = rng.standard_normal(101) + 1j * rng.standard_normal(101)
        small = AlgebraElement(ModeLattice(101, 1), sym)
        # multiplication operator diagonalizes on the spatial grid: check
        # its spectrum equals the symbol values
        w = np.linalg.eigvalsh(A.dense())
        assert np.allclose(np.sort(w), np.sort(sym), atol=1e-10)
