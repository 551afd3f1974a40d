import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skewergodic.linalg import LocalMatrix, matmul
from skewergodic.local_field import FieldSpec, InsufficientPrecision, LocalElem, chi
from skewergodic.residue import CyclotomicSum, ResidueRing, invertible_mod_p

SPECS = [FieldSpec.padic(3), FieldSpec.padic(2), FieldSpec.laurent(3), FieldSpec.laurent(5)]


def integral(spec):
    return st.tuples(
        st.integers(0, 4), st.lists(st.integers(0, spec.p - 1), min_size=spec.prec, max_size=spec.prec)
    ).map(lambda t: LocalElem.from_digits(spec, t[0], t[1]))


def det_leibniz(M):
    n = len(M)
    total = 0
    for perm in itertools.permutations(range(n)):
        sign = (-1) ** sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = sign
        for i in range(n):
            term *= int(M[i][perm[i]])
        total += term
    return total


@pytest.mark.parametrize("spec", SPECS, ids=str)
class TestRingMatchesObjects:
    @given(data=st.data())
    def test_elementwise(self, spec, data):
        ring = ResidueRing(spec, 6)
        a, b = data.draw(integral(spec)), data.draw(integral(spec))
        ra, rb = ring.const(a), ring.const(b)
        assert np.array_equal(ring.add(ra, rb), ring.const(a + b))
        assert np.array_equal(ring.sub(ra, rb), ring.const(a - b))
        assert np.array_equal(ring.mul(ra, rb), ring.const(a * b))
        assert np.array_equal(ring.scale(ra, 2), ring.const(a, 2))

    @given(data=st.data())
    def test_matmul_and_trace(self, spec, data):
        ring = ResidueRing(spec, 5)
        A = LocalMatrix(spec, [[data.draw(integral(spec)) for _ in range(3)] for _ in range(3)])
        B = LocalMatrix(spec, [[data.draw(integral(spec)) for _ in range(3)] for _ in range(3)])
        RA, RB = ring.const_matrix(A.entries), ring.const_matrix(B.entries)
        assert np.array_equal(ring.matmul(RA, RB), ring.const_matrix(matmul(A, B).entries))
        tr = sum((A @ B)[i, i] for i in range(1, 3)) + (A @ B)[0, 0]
        assert np.array_equal(ring.trace(ring.matmul(RA, RB)), ring.const(tr))

    @given(data=st.data(), E=st.integers(0, 4))
    def test_phase_numerators_match_chi(self, spec, data, E):
        ring = ResidueRing(spec, 5)
        a = data.draw(integral(spec))
        x = a.shift(-E)
        ph = chi(x)
        n = int(ring.phase_numerators(ring.const(a), E))
        assert Fraction(n, spec.p**E) % 1 == ph.as_fraction()

    @given(data=st.data())
    def test_valuation(self, spec, data):
        ring = ResidueRing(spec, 5)
        a = data.draw(integral(spec))
        v = int(ring.valuation(ring.const(a)))
        assert v == min(a.valuation, 5)


def test_int64_guard():
    with pytest.raises(InsufficientPrecision):
        ResidueRing(FieldSpec.padic(3), 40)


@pytest.mark.parametrize("p,n", [(2, 3), (3, 2), (3, 3), (5, 2)])
def test_invertible_matches_determinant(p, n):
    mats = np.array(list(itertools.product(range(p), repeat=n * n))).reshape(-1, n, n)
    got = invertible_mod_p(mats, p)
    want = np.array([det_leibniz(M) % p != 0 for M in mats])
    assert np.array_equal(got, want)


def test_invertible_counts():
    mats = np.array(list(itertools.product(range(3), repeat=4))).reshape(-1, 2, 2)
    assert invertible_mod_p(mats, 3).sum() == 48


class TestCyclotomicSum:
    def test_all_roots_cancel(self):
        for p, E in [(3, 1), (3, 2), (2, 3), (5, 2)]:
            s = CyclotomicSum(p, E, np.ones(p**E, dtype=np.int64))
            assert s.is_rational() and s.to_fraction() == 0

    def test_theta_enumeration_pattern(self):
        # 33 + 24ω + 24ω² over 81 matrices
        s = CyclotomicSum(3, 1, [33, 24, 24])
        assert s.to_fraction() == Fraction(1, 9)

    def test_irrational_detected(self):
        s = CyclotomicSum(3, 1, [1, 1, 0])
        assert not s.is_rational()
        with pytest.raises(ValueError):
            s.to_fraction()
        assert abs(s.value() - (1 + np.exp(2j * np.pi / 3))) < 1e-12

    @given(st.lists(st.integers(0, 8), min_size=9, max_size=9))
    def test_reduction_preserves_value(self, counts):
        s = CyclotomicSum(3, 2, counts)
        red = s.reduced()
        zeta = np.exp(2j * np.pi / 9)
        assert abs(sum(c * zeta**k for k, c in enumerate(red)) - s.value()) < 1e-9

    @given(st.lists(st.integers(0, 5), min_size=3, max_size=3), st.lists(st.integers(0, 5), min_size=9, max_size=9))
    def test_addition_lifts(self, a, b):
        x, y = CyclotomicSum(3, 1, a), CyclotomicSum(3, 2, b)
        assert abs((x + y).value() - (x.value() + y.value())) < 1e-9
        assert (x + y).total == x.total + y.total
