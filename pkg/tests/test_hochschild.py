import numpy as np
import pytest

from sgeo import build
from sgeo.hochschild import (HochschildChain, antisymmetrize,
                             antisymmetry_defect, boundary,
                             orientability_check, pi_d)
from sgeo.operators import AlgebraElement, MatrixOperator, ModeLattice


def _random_chain(rng, lat, degree, n_terms=3):
    terms = []
    for _ in range(n_terms):
        slots = tuple(
            AlgebraElement(lat, rng.standard_normal(lat.shape)
                           + 1j * rng.standard_normal(lat.shape))
            for _ in range(degree + 1))
        terms.append((complex(rng.standard_normal()), slots))
    return HochschildChain(degree, terms)


class TestBoundaryComplex:
    def test_b_squared_is_zero(self, rng):
        lat = ModeLattice(11, 1)
        for degree in (2, 3):
            c = _random_chain(rng, lat, degree)
            bb = boundary(boundary(c))
            assert bb.scale() <= 1e-10 * max(c.scale(), 1.0)

    def test_b_after_antisymmetrize_is_zero(self, rng):
        # on a commutative algebra the boundary of any antisymmetrized
        # chain cancels pairwise
        lat = ModeLattice(9, 1)
        c = _random_chain(rng, lat, 2)
        bp = boundary(antisymmetrize(c))
        assert bp.scale() <= 1e-10 * max(c.scale(), 1.0)

    def test_antisymmetrize_idempotent(self, rng):
        lat = ModeLattice(9, 1)
        c = _random_chain(rng, lat, 2)
        once = antisymmetrize(c)
        twice = antisymmetrize(once)
        diff = (once + (-1.0) * twice).canonical()
        assert diff.scale() <= 1e-10 * max(once.scale(), 1.0)

    def test_antisymmetry_defect_detects(self, rng):
        lat = ModeLattice(9, 1)
        c = _random_chain(rng, lat, 2)
        assert antisymmetry_defect(antisymmetrize(c)) <= 1e-10
        assert antisymmetry_defect(c) > 1e-3   # generic chain is not

    def test_slot_count_enforced(self):
        lat = ModeLattice(5, 1)
        a = AlgebraElement(lat, np.ones(5))
        with pytest.raises(ValueError):
            HochschildChain(2, [(1.0, (a, a))])


class TestSerialization:
    def test_roundtrip(self, rng):
        lat = ModeLattice(7, 1)
        c = _random_chain(rng, lat, 2)
        back = HochschildChain.from_dict(c.as_dict(), lat)
        diff = (c + (-1.0) * back).canonical()
        assert diff.scale() <= 1e-12 * max(c.scale(), 1.0)

    def test_json_compatible(self, rng):
        import json
        lat = ModeLattice(5, 1)
        c = _random_chain(rng, lat, 1, n_terms=1)
        text = json.dumps(c.as_dict())
        back = HochschildChain.from_dict(json.loads(text), lat)
        assert back.degree == 1


class TestOrientability:
    def test_circle_cycle_represents_identity(self, circle16):
        res = orientability_check(circle16)
        assert res["ok"], res
        assert res["representation"] <= 1e-10

    def test_circle_pi_d_exact(self, circle16):
        # u* [D, u] = 1: the shift weight is exactly the mode step
        rep = pi_d(circle16.cycle, circle16)
        eye = MatrixOperator.identity(circle16.hilbert_dim)
        assert circle16.inner_norm(rep - eye, 2) <= 1e-12

    def test_torus_cycle_represents_grading(self, torus8):
        res = orientability_check(torus8)
        assert res["ok"], res

    def test_torus3_cycle_represents_identity(self):
        t3 = build("torus3", cutoff=8)
        res = orientability_check(t3)
        assert res["ok"], res

    def test_scaled_cycle_fails_by_linearity(self, circle16):
        res = orientability_check(circle16, circle16.cycle * 2.0)
        assert not res["ok"]
        assert res["representation"] == pytest.approx(1.0, abs=1e-8)

    def test_missing_cycle_raises(self, interval64):
        with pytest.raises(ValueError, match="chain"):
            orientability_check(interval64)
