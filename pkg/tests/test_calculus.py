import numpy as np
import pytest

from sgeo import build
from sgeo.calculus import (delta, delta1, double_identity_residual,
                           geodesic_flow_derivative_check,
                           leibniz_ladder_residual, max_principle_check,
                           multicommutator, order_one_check, pk_norm,
                           regularity_probe, rho_k_matrix,
                           symbol_commutation_check)
from sgeo.geometries import PAULI
from sgeo.operators import MatrixOperator


class TestOrderOne:
    def test_circle_passes(self, circle16):
        rep = order_one_check(circle16)
        assert rep.ok and rep.residuals["max_double_commutator"] <= 1e-10

    def test_torus_passes(self, torus8):
        rep = order_one_check(torus8)
        assert rep.ok and rep.residuals["max_double_commutator"] <= 1e-10

    def test_exhausted_band_is_inconclusive(self):
        t = build("circle", cutoff=16)
        t.band.generator_bandwidth = 8
        rep = order_one_check(t)
        assert rep.verdict == "inconclusive"


class TestDerivations:
    def test_delta_is_a_derivation(self, circle16):
        a = circle16.as_operator("cos")
        b = circle16.as_operator("sin")
        lhs = delta(a @ b, circle16)
        rhs = delta(a, circle16) @ b + a @ delta(b, circle16)
        assert (lhs - rhs).fro() <= 1e-10

    def test_delta1_bounded_on_generators(self, circle16):
        x = delta1(circle16.as_operator("cos"), circle16)
        assert x.norm() < 10.0

    def test_double_identity(self, circle16, torus8):
        # [[D^2, h], h] = 2 [D,h]^2 for multiplication operators
        assert double_identity_residual("cos", circle16) <= 1e-9
        assert double_identity_residual("cos_x", torus8) <= 1e-9

    def test_leibniz_ladder(self, circle16):
        assert leibniz_ladder_residual("sin", circle16, m=2) <= 1e-9
        assert leibniz_ladder_residual("sin", circle16, m=3) <= 1e-9

    def test_symbol_commutation(self, circle16):
        rep = symbol_commutation_check("sin", "cos", circle16)
        assert rep.ok, rep.residuals

    def test_geodesic_flow_first_order(self, circle16):
        rep = geodesic_flow_derivative_check("cos", circle16)
        assert rep.ok, rep.residuals


class TestRhoKRepresentation:
    def test_multiplicative(self, circle16):
        a = circle16.algebra["cos"]
        b = circle16.algebra["sin"]
        k = 2
        ra = rho_k_matrix(a, circle16, k)
        rb = rho_k_matrix(b, circle16, k)
        rab = rho_k_matrix(a * b, circle16, k)
        assert np.linalg.norm(ra @ rb - rab) <= 1e-8 * max(
            1.0, np.linalg.norm(rab))

    def test_pk_norm_dominates_operator_norm(self, circle16):
        a = circle16.as_operator("cos")
        assert pk_norm("cos", circle16, 2) >= a.norm() - 1e-12


class TestMulticommutator:
    def test_determinant_expansion(self, rng):
        # antisymmetrized products of linear combinations pick up the
        # determinant of the coefficient matrix
        for p in (2, 3):
            sigmas = [PAULI[m + 1] for m in range(p)]
            for _ in range(5):
                c = rng.standard_normal((p, p))
                xs = [MatrixOperator(sum(c[i, m] * sigmas[m] for m in range(p)))
                      for i in range(p)]
                lhs = multicommutator(xs).dense()
                rhs = np.linalg.det(c) * multicommutator(
                    [MatrixOperator(s) for s in sigmas]).dense()
                assert np.allclose(lhs, rhs, atol=1e-10)

    def test_vanishes_on_repeated_argument(self, rng):
        X = MatrixOperator(rng.standard_normal((4, 4)))
        Y = MatrixOperator(rng.standard_normal((4, 4)))
        assert multicommutator([X, X]).fro() <= 1e-12
        assert multicommutator([X, Y, X]).fro() <= 1e-10


class TestMaxPrincipleAndRegularity:
    def test_circle_and_torus_pass(self, circle64, torus8):
        assert max_principle_check("sin", circle64).ok
        assert regularity_probe("sin", circle64).ok
        assert max_principle_check("sin_x", torus8).ok

    def test_interval_coordinate_fails_both(self, interval64):
        # reflecting-boundary fixture: the commutator [D, x] does not die
        # at the maximum and the smoothness tower blows up under refinement
        assert max_principle_check("x", interval64).verdict == "fail"
        assert regularity_probe("x", interval64).verdict == "fail"

    def test_interval_smooth_element_is_fine(self, interval64):
        # the failure is attributable to the geometry at the boundary, not
        # to the discretization: a periodic-smooth element still passes
        assert regularity_probe("cos1", interval64).ok

    def test_needs_hermitian_probe(self, circle16):
        with pytest.raises(ValueError, match="Hermitian"):
            max_principle_check("u", circle16)
