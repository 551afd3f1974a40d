"""Non-Archimedean local fields at fixed relative precision.

Two families are supported: the p-adic numbers ``Q_p`` and the Laurent
series field ``F_p((t))``.  Elements are stored in floating form, a
valuation plus a unit known to a number of relative digits, so that
valuations and absolute values are read off in constant time.  Precision
lost to cancellation is tracked per element and never padded back.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Union

import numpy as np

INF = math.inf
NEG_INF = -math.inf

# Valuations and exponents live in Z ∪ {±∞}; ints plus the float infinities
# give the required total order and absorbing addition.
ExtInt = Union[int, float]

DEFAULT_PRECISION = 24


class InsufficientPrecision(ArithmeticError):
    """A quantity needs digits that lie outside the tracked window."""


class FieldMismatch(ValueError):
    pass


class Kind(str, Enum):
    PADIC = "padic"
    LAURENT = "laurent"


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def format_ext(x: ExtInt):
    """JSON-friendly form of an extended integer."""
    if x == INF:
        return "inf"
    if x == NEG_INF:
        return "-inf"
    return int(x)


def parse_ext(x) -> ExtInt:
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return INF
        if s in ("-inf", "-infinity"):
            return NEG_INF
        return int(s)
    if isinstance(x, float):
        if math.isinf(x):
            return x
        if not x.is_integer():
            raise ValueError(f"not an extended integer: {x!r}")
        return int(x)
    return int(x)


@dataclass(frozen=True)
class FieldSpec:
    kind: Kind
    p: int
    prec: int = DEFAULT_PRECISION

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not is_prime(self.p):
            raise ValueError(f"p must be prime, got {self.p}")
        if self.kind is Kind.LAURENT and self.p == 2:
            raise ValueError("F_2((t)) has characteristic 2, which is not supported")
        if self.prec < 1:
            raise ValueError("precision must be a positive number of digits")

    @classmethod
    def padic(cls, p: int, prec: int = DEFAULT_PRECISION) -> "FieldSpec":
        return cls(Kind.PADIC, p, prec)

    @classmethod
    def laurent(cls, p: int, prec: int = DEFAULT_PRECISION) -> "FieldSpec":
        return cls(Kind.LAURENT, p, prec)

    @property
    def q(self) -> int:
        """Size of the residue field (prime residue fields only)."""
        return self.p

    @property
    def ell0(self) -> int:
        """The exponent with ``|2| = q^(-ell0)``."""
        return 1 if (self.kind is Kind.PADIC and self.p == 2) else 0

    def __str__(self):
        name = f"Q_{self.p}" if self.kind is Kind.PADIC else f"F_{self.p}((t))"
        return f"{name}[prec={self.prec}]"

    # constructors -------------------------------------------------------

    def zero(self) -> "LocalElem":
        return LocalElem.zero(self)

    def one(self) -> "LocalElem":
        return LocalElem.from_int(self, 1)

    def __call__(self, x) -> "LocalElem":
        if isinstance(x, LocalElem):
            _check_same(self, x.spec)
            return x
        if isinstance(x, Fraction):
            return LocalElem.from_rational(self, x)
        return LocalElem.from_int(self, int(x))

    def uniformizer_power(self, k: int, unit: int = 1) -> "LocalElem":
        """``unit * ϖ^k``; ``k = +inf`` gives exact zero."""
        if k == INF:
            return LocalElem.zero(self)
        u = LocalElem.from_int(self, unit)
        if u.valuation != 0:
            raise ValueError("unit must be prime to p")
        return LocalElem(self, k, u.unit, u.rel)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "p": self.p, "prec": self.prec}

    @classmethod
    def from_json(cls, obj: dict) -> "FieldSpec":
        return cls(Kind(obj["kind"]), int(obj["p"]), int(obj.get("prec", DEFAULT_PRECISION)))


def _check_same(a: FieldSpec, b: FieldSpec):
    if a != b:
        raise FieldMismatch(f"field mismatch: {a} vs {b}")


# ---------------------------------------------------------------------------
# unit arithmetic in O/ϖ^r: ints for Q_p, coefficient tuples for F_p((t))


def _lift(spec: FieldSpec, unit, offset: int, r: int):
    """``unit * ϖ^offset`` truncated to r digits."""
    if spec.kind is Kind.PADIC:
        return (unit * spec.p**offset) % spec.p**r
    return ((0,) * offset + tuple(unit))[:r]


def _radd(spec: FieldSpec, a, b, r: int):
    if spec.kind is Kind.PADIC:
        return (a + b) % spec.p**r
    p = spec.p
    return tuple((x + y) % p for x, y in zip(a, b))


def _rval(spec: FieldSpec, a, r: int) -> int:
    """Number of leading zero digits (r when a vanishes mod ϖ^r)."""
    if spec.kind is Kind.PADIC:
        if a == 0:
            return r
        v = 0
        while a % spec.p == 0:
            a //= spec.p
            v += 1
        return v
    for i, c in enumerate(a):
        if c:
            return i
    return r


def _rdrop(spec: FieldSpec, a, t: int):
    """Divide by ϖ^t (exact)."""
    if spec.kind is Kind.PADIC:
        return a // spec.p**t
    return tuple(a[t:])


def _rtrunc(spec: FieldSpec, a, r: int):
    if spec.kind is Kind.PADIC:
        return a % spec.p**r
    return tuple(a[:r])


def _rmul(spec: FieldSpec, a, b, r: int):
    if spec.kind is Kind.PADIC:
        return (a * b) % spec.p**r
    p = spec.p
    out = [0] * r
    for i in range(r):
        ai = a[i]
        if ai:
            for j in range(r - i):
                out[i + j] += ai * b[j]
    return tuple(c % p for c in out)


def _rneg(spec: FieldSpec, a, r: int):
    if spec.kind is Kind.PADIC:
        return (-a) % spec.p**r
    p = spec.p
    return tuple((-c) % p for c in a)


def _rinv(spec: FieldSpec, a, r: int):
    p = spec.p
    if spec.kind is Kind.PADIC:
        return pow(a, -1, p**r)
    b0 = pow(a[0], -1, p)
    b = [b0]
    for k in range(1, r):
        s = sum(a[i] * b[k - i] for i in range(1, k + 1))
        b.append((-b0 * s) % p)
    return tuple(b)


def _rdigits(spec: FieldSpec, a, r: int) -> tuple:
    if spec.kind is Kind.LAURENT:
        return tuple(a)
    out = []
    p = spec.p
    for _ in range(r):
        a, d = divmod(a, p)
        out.append(d)
    return tuple(out)


def _rfrom_digits(spec: FieldSpec, digits) -> object:
    if spec.kind is Kind.LAURENT:
        return tuple(int(d) for d in digits)
    p = spec.p
    u = 0
    for d in reversed(digits):
        u = u * p + int(d)
    return u


class LocalElem:
    """An element of F known to finite precision.

    A nonzero element is ``ϖ^valuation * unit`` where the unit is known
    modulo ``ϖ^rel``.  Zero has valuation +inf; it is *exact* when built
    as zero, and carries a finite absolute precision when it arose from
    cancellation.
    """

    __slots__ = ("spec", "valuation", "unit", "rel", "_zprec")

    def __init__(self, spec: FieldSpec, valuation: ExtInt, unit, rel: int, zprec: ExtInt = INF):
        self.spec = spec
        self.valuation = valuation
        self.unit = unit
        self.rel = rel
        self._zprec = zprec

    # construction ---------------------------------------------------------

    @classmethod
    def zero(cls, spec: FieldSpec, prec: ExtInt = INF) -> "LocalElem":
        return cls(spec, INF, 0 if spec.kind is Kind.PADIC else (), 0, prec)

    @classmethod
    def from_int(cls, spec: FieldSpec, n: int) -> "LocalElem":
        N = spec.prec
        if spec.kind is Kind.LAURENT:
            c = n % spec.p
            if c == 0:
                return cls.zero(spec)
            return cls(spec, 0, (c,) + (0,) * (N - 1), N)
        if n == 0:
            return cls.zero(spec)
        v = 0
        while n % spec.p == 0:
            n //= spec.p
            v += 1
        return cls(spec, v, n % spec.p**N, N)

    @classmethod
    def from_rational(cls, spec: FieldSpec, x: Fraction) -> "LocalElem":
        x = Fraction(x)
        if x.denominator == 1:
            return cls.from_int(spec, x.numerator)
        if spec.kind is Kind.LAURENT:
            if x.denominator % spec.p == 0:
                raise ValueError(f"{x} has no image in F_{spec.p}")
            return cls.from_int(spec, x.numerator * pow(x.denominator, -1, spec.p))
        num, den = x.numerator, x.denominator
        v = 0
        while den % spec.p == 0:
            den //= spec.p
            v -= 1
        a = cls.from_int(spec, num)
        if a.valuation == INF:
            return a
        N = spec.prec
        unit = (a.unit * pow(den, -1, spec.p**N)) % spec.p**N
        return cls(spec, a.valuation + v, unit, N)

    @classmethod
    def from_digits(cls, spec: FieldSpec, valuation: ExtInt, digits) -> "LocalElem":
        """Element ``ϖ^valuation * sum(d_j ϖ^j)``; leading zero digits are absorbed."""
        if valuation == INF:
            return cls.zero(spec)
        digits = [int(d) for d in digits[: spec.prec]]
        if any(not 0 <= d < spec.p for d in digits):
            raise ValueError("digits must lie in range(p)")
        t = 0
        while t < len(digits) and digits[t] == 0:
            t += 1
        if t == len(digits):
            return cls.zero(spec, valuation + len(digits))
        digits = digits[t:]
        return cls(spec, valuation + t, _rfrom_digits(spec, digits), len(digits))

    # inspection -----------------------------------------------------------

    @property
    def prec(self) -> ExtInt:
        """Absolute precision: self is known modulo ϖ^prec."""
        if self.valuation == INF:
            return self._zprec
        return self.valuation + self.rel

    @property
    def digits(self) -> tuple:
        return _rdigits(self.spec, self.unit, self.rel)

    @property
    def is_zero(self) -> bool:
        return self.valuation == INF

    @property
    def is_exact_zero(self) -> bool:
        return self.valuation == INF and self._zprec == INF

    @property
    def is_integral(self) -> bool:
        if self.is_zero:
            return self._zprec >= 0
        return self.valuation >= 0

    @property
    def abs_exponent(self) -> ExtInt:
        """ℓ with |self| = q^ℓ (-inf for zero)."""
        return -self.valuation

    def residue(self) -> int:
        """Image in the residue field O/ϖ."""
        if self.is_zero:
            if self._zprec < 1:
                raise InsufficientPrecision("residue of a zero known below ϖ^1")
            return 0
        if self.valuation < 0:
            raise ValueError("element is not integral")
        if self.valuation > 0:
            return 0
        return self.unit % self.spec.p if self.spec.kind is Kind.PADIC else self.unit[0]

    def __repr__(self):
        if self.is_zero:
            return "0" if self._zprec == INF else f"O(ϖ^{self._zprec})"
        d = "".join(str(x) if self.spec.p <= 10 else f"{x}," for x in self.digits[:8])
        more = "..." if self.rel > 8 else ""
        return f"ϖ^{self.valuation}·({d}{more})_{self.spec.p}"

    def __eq__(self, other):
        if not isinstance(other, LocalElem):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.valuation == other.valuation
            and self.rel == other.rel
            and self.unit == other.unit
            and self.prec == other.prec
        )

    def __hash__(self):
        return hash((self.spec, self.valuation, self.rel, self.unit, self.prec))

    def equals_within(self, other: "LocalElem") -> bool:
        """Agreement to the jointly tracked precision."""
        return (self - other).is_zero

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, LocalElem):
            other = self.spec(other)
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero:
            return self
        return LocalElem(self.spec, self.valuation, _rneg(self.spec, self.unit, self.rel), self.rel)

    def __sub__(self, other):
        if not isinstance(other, LocalElem):
            other = self.spec(other)
        return add(self, -other)

    def __rsub__(self, other):
        return self.spec(other) - self

    def __mul__(self, other):
        if not isinstance(other, LocalElem):
            other = self.spec(other)
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, LocalElem):
            other = self.spec(other)
        return mul(self, inv(other))

    def shift(self, k: int) -> "LocalElem":
        """Multiply by ϖ^k."""
        if self.is_zero:
            return LocalElem.zero(self.spec, self._zprec + k)
        return LocalElem(self.spec, self.valuation + k, self.unit, self.rel)

    def scaled_digits(self, shift: int, width: int) -> tuple:
        """Digits of ``self * ϖ^shift`` modulo ϖ^width (must be integral)."""
        if width <= 0:
            return ()
        if self.prec + shift < width:
            raise InsufficientPrecision(
                f"need {self!r}·ϖ^{shift} mod ϖ^{width}, known only mod ϖ^{self.prec + shift}"
            )
        if self.is_zero:
            return (0,) * width
        v = self.valuation + shift
        if v < 0:
            raise ValueError("scaled element is not integral")
        if v >= width:
            return (0,) * width
        return (0,) * v + self.digits[: width - v]

    # serialization --------------------------------------------------------

    def to_json(self) -> dict:
        out = {"v": format_ext(self.valuation), "d": list(self.digits)}
        if self.is_zero and not self.is_exact_zero:
            out["prec"] = self._zprec
        return out

    @classmethod
    def from_json(cls, spec: FieldSpec, obj: dict) -> "LocalElem":
        v = parse_ext(obj["v"])
        if v == INF:
            return cls.zero(spec, parse_ext(obj.get("prec", "inf")))
        return cls.from_digits(spec, v, obj["d"])


def add(a: LocalElem, b: LocalElem) -> LocalElem:
    spec = a.spec
    _check_same(spec, b.spec)
    if a.is_exact_zero:
        return b
    if b.is_exact_zero:
        return a
    P = min(a.prec, b.prec)
    terms = [x for x in (a, b) if not x.is_zero]
    if not terms:
        return LocalElem.zero(spec, P)
    v = min(x.valuation for x in terms)
    if v >= P:
        return LocalElem.zero(spec, P)
    r = P - v
    s = _lift(spec, terms[0].unit, terms[0].valuation - v, r)
    if len(terms) == 2:
        s = _radd(spec, s, _lift(spec, terms[1].unit, terms[1].valuation - v, r), r)
    t = _rval(spec, s, r)
    if t >= r:
        return LocalElem.zero(spec, P)
    rel = r - t
    s = _rdrop(spec, s, t)
    if rel > spec.prec:
        rel = spec.prec
        s = _rtrunc(spec, s, rel)
    return LocalElem(spec, v + t, s, rel)


def mul(a: LocalElem, b: LocalElem) -> LocalElem:
    spec = a.spec
    _check_same(spec, b.spec)
    if a.is_exact_zero or b.is_exact_zero:
        return LocalElem.zero(spec)
    if a.is_zero or b.is_zero:
        if a.is_zero and b.is_zero:
            return LocalElem.zero(spec, a.prec + b.prec)
        z, x = (a, b) if a.is_zero else (b, a)
        return LocalElem.zero(spec, z.prec + x.valuation)
    rel = min(a.rel, b.rel)
    u = _rmul(spec, _rtrunc(spec, a.unit, rel), _rtrunc(spec, b.unit, rel), rel)
    return LocalElem(spec, a.valuation + b.valuation, u, rel)


def inv(a: LocalElem) -> LocalElem:
    if a.is_zero:
        raise ZeroDivisionError("inverse of zero")
    return LocalElem(a.spec, -a.valuation, _rinv(a.spec, a.unit, a.rel), a.rel)


@dataclass(frozen=True)
class PhaseValue:
    """The root of unity ``exp(2πi·numerator/p^exponent)``, kept exact."""

    numerator: int
    exponent: int
    p: int

    def __post_init__(self):
        a, m, p = self.numerator, self.exponent, self.p
        if m < 0:
            raise ValueError("exponent must be nonnegative")
        a %= p**m
        while m > 0 and a % p == 0:
            a //= p
            m -= 1
        object.__setattr__(self, "numerator", a)
        object.__setattr__(self, "exponent", m)

    @classmethod
    def trivial(cls, p: int) -> "PhaseValue":
        return cls(0, 0, p)

    def __add__(self, other: "PhaseValue") -> "PhaseValue":
        if self.p != other.p:
            raise ValueError("phases over different primes")
        m = max(self.exponent, other.exponent)
        a = self.numerator * self.p ** (m - self.exponent) + other.numerator * self.p ** (m - other.exponent)
        return PhaseValue(a, m, self.p)

    def __neg__(self):
        return PhaseValue(-self.numerator, self.exponent, self.p)

    def __mul__(self, k: int) -> "PhaseValue":
        return PhaseValue(self.numerator * k, self.exponent, self.p)

    def as_fraction(self) -> Fraction:
        """The angle as a fraction of a full turn, in [0, 1)."""
        return Fraction(self.numerator, self.p**self.exponent)

    def to_complex(self) -> complex:
        if self.numerator == 0:
            return 1 + 0j
        return cmath.exp(2j * math.pi * self.numerator / self.p**self.exponent)


def chi(x: LocalElem) -> PhaseValue:
    """The fixed additive character: trivial on O_F, nontrivial on ϖ^-1 O_F.

    For Q_p this is exp(2πi {x}_p); for F_p((t)) it is exp(2πi c_{-1}/p)
    where c_{-1} is the coefficient of t^-1.
    """
    spec = x.spec
    if x.prec < 0:
        raise InsufficientPrecision(f"χ({x!r}) needs digits down to ϖ^0")
    if x.is_zero or x.valuation >= 0:
        return PhaseValue.trivial(spec.p)
    m = -x.valuation
    if spec.kind is Kind.PADIC:
        return PhaseValue(x.unit % spec.p**m, m, spec.p)
    return PhaseValue(x.unit[m - 1], 1, spec.p)


def theta(x: Union[LocalElem, ExtInt], spec: FieldSpec) -> Fraction:
    """Θ as a function of |x| = q^ℓ: q^(-2(ℓ-ℓ0)) when ℓ ≥ ℓ0, else 1.

    ``x`` is either an element or the exponent ℓ (with ℓ = -inf for zero).
    """
    ell = x.abs_exponent if isinstance(x, LocalElem) else x
    if ell == NEG_INF or ell < spec.ell0:
        return Fraction(1)
    return Fraction(1, spec.q ** (2 * (int(ell) - spec.ell0)))


def draw_digits(spec: FieldSpec, rng: np.random.Generator, shape, width: int | None = None) -> np.ndarray:
    """Uniform residue digits of shape ``shape + (width,)``.

    Each trailing row is the expansion of a Haar-random element of O_F
    truncated at ``width`` digits (the working precision by default).
    """
    shape = tuple(shape) if np.iterable(shape) else (int(shape),)
    dtype = np.uint8 if spec.p < 256 else np.int64
    width = spec.prec if width is None else int(width)
    return rng.integers(0, spec.p, size=shape + (width,), dtype=dtype)


def elem_from_digit_row(spec: FieldSpec, row, scale: int = 0) -> LocalElem:
    """Element ``ϖ^scale * sum(row[j] ϖ^j)`` from a drawn digit row."""
    return LocalElem.from_digits(spec, scale, row)


def sample_uniform_integer(spec: FieldSpec, rng: np.random.Generator) -> LocalElem:
    """Haar-random element of O_F at the working precision."""
    return elem_from_digit_row(spec, draw_digits(spec, rng, (1,))[0])
