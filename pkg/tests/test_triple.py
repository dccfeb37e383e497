import numpy as np
import pytest

from sgeo import build
from sgeo.operators import AlgebraElement, MatrixOperator
from sgeo.triple import (BandExhausted, BandPolicy, circulant_extract,
                         module_inner, module_matrix_element,
                         rank_one_endomorphism, validate_triple)


class TestBandPolicy:
    def test_lambda_in_shrinks_with_depth(self):
        band = BandPolicy(16, 2)
        assert band.lambda_in(0) == 16
        assert band.lambda_in(3) == 10

    def test_exhausted_band_raises(self):
        with pytest.raises(BandExhausted):
            BandPolicy(4, 2).lambda_in(2)

    def test_custom_margin_rule(self):
        band = BandPolicy(16, 2, margin_rule=lambda d: 16 - d)
        assert band.lambda_in(3) == 13


class TestTripleBasics:
    def test_band_projector_idempotent(self, circle16):
        P = circle16.band_projector(2)
        assert (P @ P - P).fro() == 0.0

    def test_band_mask_counts(self, circle16):
        # 2*lambda_in + 1 modes survive at each depth
        assert circle16.band_mask(3).sum() == 2 * 13 + 1

    def test_calculus_on_spectrum(self, circle16):
        sq = circle16.calculus(lambda x: x ** 2).dense()
        w = circle16.abs_d_spectrum() ** 2
        assert np.allclose(np.sort(np.linalg.eigvalsh(sq)), np.sort(w))

    def test_kernel_shift_in_abs_d(self, circle16):
        w = circle16.abs_d_spectrum()
        assert w.min() == pytest.approx(circle16.kernel_shift)

    def test_as_operator_accepts_all_forms(self, circle16):
        a = circle16.as_operator("cos")
        b = circle16.as_operator(circle16.algebra["cos"])
        assert (a - b).fro() <= 1e-14

    def test_validate_all_shipped_geometries(self):
        for kind, cut in (("circle", 16), ("torus", 8), ("torus3", 8),
                          ("interval", 32)):
            res = validate_triple(build(kind, cutoff=cut))
            assert res["ok"], (kind, res)


class TestCirculantExtract:
    def test_recovers_multiplication_operator(self, circle16):
        el = circle16.algebra["cos"]
        back = circulant_extract(el.matrix(1), circle16)
        assert np.allclose(back.symbol, el.symbol, atol=1e-12)

    def test_recovers_through_spinor_trace(self, torus8):
        el = torus8.algebra["cos_x"]
        back = circulant_extract(el.matrix(torus8.spinor_dim), torus8)
        assert np.allclose(back.symbol, el.symbol, atol=1e-12)

    def test_kills_traceless_spinor_part(self, torus8):
        from sgeo.geometries import PAULI
        import scipy.sparse as sp
        X = MatrixOperator(sp.kron(
            sp.identity(torus8.lattice.n_modes), sp.csr_matrix(PAULI[3])))
        back = circulant_extract(X, torus8)
        assert np.abs(back.symbol).max() <= 1e-12


class TestModuleInner:
    def test_hermitian_symmetry(self, circle16, rng):
        n = circle16.hilbert_dim
        xi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        eta = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        lhs = module_inner(xi, eta, circle16)
        rhs = module_inner(eta, xi, circle16)
        assert np.allclose(lhs.symbol, rhs.symbol.conj(), atol=1e-10)

    def test_positivity_on_diagonal(self, circle16, rng):
        n = circle16.hilbert_dim
        xi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        # band-limit so the pairing is alias-free
        xi[circle16.lattice.inf_norms > 6] = 0.0
        q = module_inner(xi, xi, circle16)
        assert q.symbol.real.min() >= -1e-10
        assert np.abs(q.symbol.imag).max() <= 1e-10

    def test_mean_recovers_scalar_product(self, circle16, rng):
        n = circle16.hilbert_dim
        xi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        eta = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        xi[circle16.lattice.inf_norms > 6] = 0.0
        eta[circle16.lattice.inf_norms > 6] = 0.0
        q = module_inner(xi, eta, circle16)
        assert q.symbol.mean() == pytest.approx(np.vdot(xi, eta), abs=1e-10)

    def test_module_property(self, circle16, rng):
        # (xi | a eta) = a * (xi | eta) for a in the algebra
        n = circle16.hilbert_dim
        xi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        eta = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        xi[circle16.lattice.inf_norms > 4] = 0.0
        eta[circle16.lattice.inf_norms > 4] = 0.0
        a = circle16.algebra["cos"]
        lhs = module_inner(xi, a.matrix(1) @ eta, circle16)
        rhs = a * module_inner(xi, eta, circle16)
        assert np.allclose(lhs.symbol, rhs.symbol, atol=1e-9)


class TestModuleMatrixElement:
    def test_polarization_against_direct_pairing(self, circle16, rng):
        # for T = mult(f), (xi | T eta) = f * (xi | eta)
        n = circle16.hilbert_dim
        xi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        eta = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        xi[circle16.lattice.inf_norms > 4] = 0.0
        eta[circle16.lattice.inf_norms > 4] = 0.0
        f = circle16.algebra["sin"]
        got = module_matrix_element(xi, eta, f.matrix(1), circle16)
        ref = f * module_inner(xi, eta, circle16)
        assert np.allclose(got.symbol, ref.symbol, atol=1e-9)

    def test_slot_order_convention(self, circle16, rng):
        # the pairing is conjugate-linear in the FIRST slot: scaling xi by
        # i must conjugate-scale the result
        n = circle16.hilbert_dim
        xi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        eta = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        T = circle16.algebra["cos"].matrix(1)
        base = module_matrix_element(xi, eta, T, circle16)
        scaled = module_matrix_element(1j * xi, eta, T, circle16)
        assert np.allclose(scaled.symbol, -1j * base.symbol, atol=1e-9)


class TestRankOne:
    def test_rank_one_action(self, circle16, rng):
        # theta_{xi,eta} zeta = (eta | zeta) . xi, with the pairing acting
        # by multiplication
        n = circle16.hilbert_dim
        xi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        eta = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        zeta = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        for v in (xi, eta, zeta):
            v[circle16.lattice.inf_norms > 4] = 0.0
        R = rank_one_endomorphism(xi, eta, circle16)
        ref = module_inner(eta, zeta, circle16).matrix(1) @ xi
        assert np.allclose(R @ zeta, ref, atol=1e-9)
