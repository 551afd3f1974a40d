from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from skewergodic.local_field import (
    INF,
    NEG_INF,
    FieldMismatch,
    FieldSpec,
    InsufficientPrecision,
    Kind,
    LocalElem,
    PhaseValue,
    chi,
    draw_digits,
    inv,
    is_prime,
    parse_ext,
    format_ext,
    sample_uniform_integer,
    theta,
)

Q3 = FieldSpec.padic(3)
Q2 = FieldSpec.padic(2)
Q5 = FieldSpec.padic(5)
L3 = FieldSpec.laurent(3)
L5 = FieldSpec.laurent(5)


def greedy_digits(x: Fraction, p: int, count: int):
    """(valuation, digits) of a nonzero rational, one digit at a time."""
    v = 0
    while x.numerator % p == 0:
        x /= p
        v += 1
    while x.denominator % p == 0:
        x *= p
        v -= 1
    out = []
    for _ in range(count):
        d = next(d for d in range(p) if Fraction(x - d).numerator % p == 0)
        out.append(d)
        x = (x - d) / p
    return v, out


def conv_mod(a, b, p, n):
    return [sum(a[i] * b[k - i] for i in range(k + 1) if i < len(a) and k - i < len(b)) % p for k in range(n)]


rationals = st.fractions(max_denominator=10**6).filter(lambda x: x != 0)
small_rationals = st.builds(
    Fraction, st.integers(-10**6, 10**6).filter(lambda n: n != 0), st.integers(1, 10**4)
)


def laurent_elem(spec, v, coeffs):
    return LocalElem.from_digits(spec, v, coeffs)


laurent_parts = st.tuples(st.integers(-5, 5), st.lists(st.integers(0, 2), min_size=24, max_size=24)).filter(
    lambda t: t[1][0] != 0
)


class TestFieldSpec:
    def test_ell0(self):
        assert Q2.ell0 == 1
        assert Q3.ell0 == 0
        assert L3.ell0 == 0
        assert Q3.q == 3

    def test_laurent_two_rejected(self):
        with pytest.raises(ValueError):
            FieldSpec.laurent(2)

    @pytest.mark.parametrize("p", [1, 4, 9, 15])
    def test_non_prime_rejected(self, p):
        with pytest.raises(ValueError):
            FieldSpec.padic(p)

    def test_json_roundtrip(self):
        for s in (Q3, Q2, L5, FieldSpec.padic(7, 10)):
            assert FieldSpec.from_json(s.to_json()) == s
        assert Q3.to_json() == {"kind": "padic", "p": 3, "prec": 24}

    def test_is_prime(self):
        assert [n for n in range(30) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


class TestExtInt:
    def test_parse_format(self):
        assert parse_ext("-inf") == NEG_INF
        assert parse_ext("inf") == INF
        assert parse_ext(3) == 3
        assert format_ext(NEG_INF) == "-inf"
        assert format_ext(5) == 5

    def test_order_and_addition(self):
        assert NEG_INF < -10**9 < 10**9 < INF
        assert 4 + NEG_INF == NEG_INF


class TestExamples:
    def test_carry(self):
        s = Q3(1) + Q3(2)
        assert s.valuation == 1
        assert s.digits[:3] == (1, 0, 0)

    def test_cancellation_to_zero(self):
        z = Q3(1) + Q3(-1)
        assert z.is_zero and z.valuation == INF

    def test_ultrametric_equality_case(self):
        assert (Q3(Fraction(1, 3)) + Q3(1)).valuation == -1

    def test_inverse_pair(self):
        x = Q3(3) * Q3(Fraction(1, 3))
        assert x.valuation == 0 and x.digits[:3] == (1, 0, 0)
        assert x == Q3.one()

    def test_times_zero(self):
        assert (Q3(7) * Q3.zero()).is_exact_zero
        assert (L3.uniformizer_power(-3) * L3.zero()).is_exact_zero

    def test_laurent_valuation(self):
        t2 = L3.uniformizer_power(2)
        tm5 = L3.uniformizer_power(-5)
        assert (t2 * tm5).valuation == -3

    def test_inv_examples(self):
        a = inv(Q3(3))
        assert a.valuation == -1 and a.digits[:3] == (1, 0, 0)
        b = inv(Q3(2))
        assert b.valuation == 0 and b.digits[:6] == (2, 1, 1, 1, 1, 1)
        assert (Q3(2) * b) == Q3.one()
        with pytest.raises(ZeroDivisionError):
            inv(Q3.zero())

    def test_chi_examples(self):
        assert chi(Q3(5)) == PhaseValue.trivial(3)
        assert chi(Q3(Fraction(1, 3))).as_fraction() == Fraction(1, 3)
        x = L3.uniformizer_power(-1, unit=2)
        assert chi(x).as_fraction() == Fraction(2, 3)

    def test_theta_examples(self):
        assert theta(Q3(1), Q3) == 1
        assert theta(Q3(Fraction(1, 3)), Q3) == Fraction(1, 9)
        assert theta(Q2(Fraction(1, 2)), Q2) == 1
        assert theta(Q2(Fraction(1, 4)), Q2) == Fraction(1, 4)
        assert theta(NEG_INF, Q3) == 1
        assert theta(Q3.zero(), Q3) == 1

    def test_mismatch(self):
        with pytest.raises(FieldMismatch):
            Q3(1) + Q5(1)


class TestAgainstRationalOracle:
    @given(rationals)
    def test_digits_match_greedy_expansion(self, x):
        for spec in (Q3, Q2, Q5):
            e = spec(x)
            v, d = greedy_digits(x, spec.p, spec.prec)
            assert e.valuation == v
            assert list(e.digits) == d

    @given(small_rationals, small_rationals)
    def test_add_mul_match_fractions(self, x, y):
        for spec in (Q3, Q5):
            a, b = spec(x), spec(y)
            s = a + b
            if x + y == 0:
                assert s.is_zero
            else:
                v, d = greedy_digits(x + y, spec.p, 30)
                assert s.valuation == v
                assert list(s.digits) == d[: s.rel]
                assert s.prec == min(a.prec, b.prec)
            v, d = greedy_digits(x * y, spec.p, 30)
            m = a * b
            assert m.valuation == v and list(m.digits) == d[: spec.prec]

    @given(small_rationals)
    def test_inverse_matches_fraction(self, x):
        v, d = greedy_digits(1 / x, 3, 24)
        y = inv(Q3(x))
        assert y.valuation == v and list(y.digits) == d


class TestLaurentOracle:
    @given(laurent_parts, laurent_parts)
    def test_mul_is_truncated_convolution(self, a, b):
        x, y = laurent_elem(L3, *a), laurent_elem(L3, *b)
        m = x * y
        assert m.valuation == a[0] + b[0]
        assert list(m.digits) == conv_mod(a[1], b[1], 3, 24)

    @given(laurent_parts, laurent_parts)
    def test_add_same_valuation_is_coefficientwise(self, a, b):
        x, y = laurent_elem(L3, a[0], a[1]), laurent_elem(L3, a[0], b[1])
        coeffs = [(u + w) % 3 for u, w in zip(a[1], b[1])]
        s = x + y
        expected = LocalElem.from_digits(L3, a[0], coeffs)
        assert s == expected

    @given(laurent_parts)
    def test_inverse(self, a):
        x = laurent_elem(L3, *a)
        assert x * inv(x) == L3.one()


def elems(spec):
    return st.tuples(
        st.integers(-6, 6), st.lists(st.integers(0, spec.p - 1), min_size=spec.prec, max_size=spec.prec)
    ).map(lambda t: LocalElem.from_digits(spec, t[0], t[1]))


def units(spec):
    return st.tuples(
        st.integers(1, spec.p - 1), st.lists(st.integers(0, spec.p - 1), min_size=spec.prec - 1, max_size=spec.prec - 1)
    ).map(lambda t: LocalElem.from_digits(spec, 0, [t[0]] + t[1]))


SPECS = [Q3, Q2, L3, L5]


@pytest.mark.parametrize("spec", SPECS, ids=str)
class TestProperties:
    @given(data=st.data())
    def test_ultrametric(self, spec, data):
        a, b = data.draw(elems(spec)), data.draw(elems(spec))
        s = a + b
        if not a.is_zero and not b.is_zero:
            assert s.valuation >= min(a.valuation, b.valuation)
            if a.valuation != b.valuation:
                assert s.valuation == min(a.valuation, b.valuation)

    @given(data=st.data())
    def test_valuation_additive(self, spec, data):
        a, b = data.draw(elems(spec)), data.draw(elems(spec))
        assert (a * b).valuation == a.valuation + b.valuation

    @given(data=st.data())
    def test_ring_axioms_within_precision(self, spec, data):
        a, b, c = (data.draw(elems(spec)) for _ in range(3))
        assert (a + b).equals_within(b + a)
        assert (a * b) == (b * a)
        assert ((a + b) + c).equals_within(a + (b + c))
        assert (a * (b + c)).equals_within(a * b + a * c)
        assert (a - a).is_zero

    @given(data=st.data())
    def test_chi_additive(self, spec, data):
        a, b = data.draw(elems(spec)), data.draw(elems(spec))
        assert chi(a + b) == chi(a) + chi(b)

    @given(data=st.data())
    def test_chi_trivial_on_integers(self, spec, data):
        a = data.draw(elems(spec))
        assume(a.valuation >= 0)
        assert chi(a).numerator == 0

    def test_chi_hits_all_pth_roots_on_first_shell(self, spec):
        got = {chi(spec.uniformizer_power(-1) * spec(d)).as_fraction() for d in range(spec.p)}
        assert got == {Fraction(d, spec.p) for d in range(spec.p)}

    @given(data=st.data())
    def test_theta_depends_on_absolute_value(self, spec, data):
        a = data.draw(elems(spec))
        u = data.draw(units(spec))
        assert theta(a * u, spec) == theta(a, spec) == theta(-a, spec)

    @given(st.integers(-10, 10))
    def test_theta_equals_min_formula(self, spec, ell):
        abs_two = Fraction(1, spec.q**spec.ell0)
        abs_x = Fraction(spec.q) ** ell
        assert theta(ell, spec) == min(Fraction(1), 1 / (abs_two * abs_x) ** 2)

    @given(data=st.data())
    def test_json_roundtrip(self, spec, data):
        a = data.draw(elems(spec))
        assert LocalElem.from_json(spec, a.to_json()) == a


def test_chi_needs_digits():
    x = LocalElem.from_digits(Q3, -5, [1, 2])
    with pytest.raises(InsufficientPrecision):
        chi(x)


def test_phase_value_arithmetic():
    a = PhaseValue(1, 2, 3)
    assert (a * 9).numerator == 0
    assert (a + (-a)) == PhaseValue.trivial(3)
    assert PhaseValue(3, 2, 3) == PhaseValue(1, 1, 3)
    assert abs(PhaseValue(1, 1, 3).to_complex() - np.exp(2j * np.pi / 3)) < 1e-15


class TestSampling:
    @pytest.mark.parametrize("spec", [Q3, L3], ids=str)
    def test_haar_mass_of_balls(self, spec):
        rng = np.random.default_rng(1)
        d = draw_digits(spec, rng, (100_000,))
        first_nonzero = np.where(d.any(axis=1), np.argmax(d != 0, axis=1), spec.prec)
        for j in range(4):
            freq = np.mean(first_nonzero >= j)
            expected = spec.q**-j
            se = np.sqrt(expected * (1 - expected) / len(d))
            assert abs(freq - expected) <= 3 * se + 1e-12

    def test_sample_uniform_integer_is_integral(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            assert sample_uniform_integer(Q3, rng).is_integral

    def test_independent_streams(self):
        from scipy.stats import chi2_contingency

        from skewergodic.ensembles import make_rng

        a = draw_digits(Q3, make_rng(5, 0), (20_000,))[:, 0]
        b = draw_digits(Q3, make_rng(5, 1), (20_000,))[:, 0]
        table = np.zeros((3, 3))
        np.add.at(table, (a, b), 1)
        assert chi2_contingency(table)[1] > 0.001
