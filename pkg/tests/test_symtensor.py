import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mroot import fixtures
from mroot.errors import ArityExceeded, DuplicateOrbit, IndexOutOfRange
from mroot.symtensor import (
    PolyField,
    SymCoeffTensor,
    SymValueTensor,
    build_from_representatives,
    canonicalize,
    contract,
    contract_momenta,
    orbit_size,
    poly_eval_grad,
    symmetrize,
)


class TestCanonicalize:
    @pytest.mark.parametrize(
        "idx, key", [((2, 1, 1), (1, 1, 2)), ((1, 1, 1), (1, 1, 1)), ((3, 2, 1), (1, 2, 3))]
    )
    def test_examples(self, idx, key):
        assert canonicalize(idx, 3) == key

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            canonicalize((0, 1), 2)
        with pytest.raises(IndexOutOfRange):
            canonicalize((1, 3), 2)

    @given(st.lists(st.integers(1, 4), min_size=2, max_size=6), st.randoms())
    def test_permutation_invariant(self, idx, random):
        shuffled = list(idx)
        random.shuffle(shuffled)
        assert canonicalize(idx, 4) == canonicalize(shuffled, 4)

    def test_orbit_sizes(self):
        assert orbit_size((1, 2, 3)) == 6
        assert orbit_size((1, 1, 2, 2)) == 6
        assert orbit_size((1, 1, 1)) == 1


class TestBuild:
    def test_berwald_moor_orbit(self):
        a = fixtures.fixture("M_BM").a
        for perm in itertools.permutations((1, 2, 3)):
            assert a.lookup(perm)((0, 0, 0)) == 1.0
        assert contract(a.dense((0, 0, 0)), np.array([1.0, 2.0, 3.0]), 3) == pytest.approx(36.0, rel=1e-15)

    def test_euclidean_quartic(self):
        a = fixtures.fixture("M_EUC4").a.dense((0, 0))
        for p in ([1.0, 0.0], [0.3, -1.7], [3.0, 4.0]):
            p = np.array(p)
            assert contract(a, p, 4) == pytest.approx((p @ p) ** 2, rel=1e-14)

    def test_empty_is_zero(self):
        a = build_from_representatives(2, 3, [])
        assert contract(a.dense((0.5, 0.5)), np.array([1.0, 2.0]), 3) == 0.0

    def test_duplicate_orbit(self):
        one = PolyField.constant(1.0, 2)
        with pytest.raises(DuplicateOrbit):
            build_from_representatives(2, 3, [((1, 1, 2), one), ((2, 1, 1), one)])

    def test_length_mismatch(self):
        with pytest.raises(IndexOutOfRange):
            build_from_representatives(2, 3, [((1, 1), PolyField.constant(1.0, 2))])

    def test_limits(self):
        with pytest.raises(ValueError):
            SymCoeffTensor(9, 3, {})
        with pytest.raises(ValueError):
            SymCoeffTensor(2, 7, {})


class TestContractions:
    @pytest.mark.parametrize(
        "name, p, value",
        [("M_CUB", [1.0, 2.0], 9.0), ("M_BM", [1.0, 1.0, 1.0], 6.0), ("M_EUC4", [3.0, 4.0], 625.0)],
    )
    def test_full_contraction(self, name, p, value):
        spec = fixtures.fixture(name)
        out = contract_momenta(spec.a, p, spec.m, x=[0.0] * spec.n)
        assert out.scalar == pytest.approx(value, rel=1e-14)

    def test_arity(self):
        spec = fixtures.fixture("M_CUB")
        with pytest.raises(ArityExceeded):
            contract_momenta(spec.a, [1.0, 2.0], 4, x=[0.0, 0.0])
        vt = SymValueTensor.from_dense(np.eye(2))
        with pytest.raises(ArityExceeded):
            contract_momenta(vt, [1.0, 2.0], 3)

    def test_one_at_a_time(self, rng):
        spec = fixtures.fixture("M_GEN4")
        A = spec.a.dense((0.3, 0.2))
        p = rng.normal(size=2)
        for k in range(1, 5):
            step = A
            for _ in range(k):
                step = step @ p
            np.testing.assert_allclose(step, contract(A, p, k), rtol=1e-14, atol=0)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_bilinear(self, seed):
        r = np.random.default_rng(seed)
        n, m = int(r.integers(2, 5)), int(r.integers(2, 6))
        T1 = symmetrize(r.normal(size=(n,) * m))
        T2 = symmetrize(r.normal(size=(n,) * m))
        p = r.normal(size=n)
        k = int(r.integers(1, m + 1))
        lhs = contract(T1 + T2, p, k)
        rhs = contract(T1, p, k) + contract(T2, p, k)
        scale = np.max(np.abs(contract(np.abs(T1) + np.abs(T2), np.abs(p), k)))
        assert np.max(np.abs(lhs - rhs)) <= 1e-14 * scale


class TestPolyField:
    @pytest.mark.parametrize(
        "terms, x, value, grad",
        [
            ([((0, 0), 1.0), ((1, 0), 1.0)], (0, 0), 1.0, (1.0, 0.0)),
            ([((0, 0), 1.0)], (0, 0), 1.0, (0.0, 0.0)),
            ([((2, 1), 1.0)], (2, 3), 12.0, (12.0, 4.0)),
        ],
    )
    def test_eval_grad(self, terms, x, value, grad):
        v, g = poly_eval_grad(PolyField.from_terms(terms), x)
        assert v == value
        np.testing.assert_array_equal(g, grad)

    def test_hessian(self):
        f = PolyField.from_terms([((2, 1), 1.0), ((0, 3), 2.0)])
        np.testing.assert_allclose(f.hess((2.0, 3.0)), [[6.0, 4.0], [4.0, 36.0]])

    def test_merges_terms(self):
        f = PolyField.from_terms([((1, 0), 1.0), ((1, 0), -1.0)])
        assert f.is_zero

    def test_negative_exponent(self):
        with pytest.raises(ValueError):
            PolyField.from_terms([((-1, 0), 1.0)])


class TestValueTensor:
    def test_round_trip(self, rng):
        T = symmetrize(rng.normal(size=(3, 3, 3)))
        vt = SymValueTensor.from_dense(T)
        np.testing.assert_allclose(vt.dense(), T, rtol=0, atol=1e-15)
        assert vt[1, 2, 3] == pytest.approx(T[0, 1, 2])
        assert vt[3, 2, 1] == vt[1, 2, 3]

    def test_equality_ignores_zero_entries(self):
        one = PolyField.constant(1.0, 2)
        a = SymCoeffTensor(2, 2, {(1, 1): one})
        b = SymCoeffTensor(2, 2, {(1, 1): one, (1, 2): PolyField()})
        assert a == b and hash(a) == hash(b)
