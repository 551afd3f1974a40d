"""Matrices over F, Haar sampling on GL(n, O_F), and skew canonical forms."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .local_field import (
    INF,
    NEG_INF,
    ExtInt,
    FieldSpec,
    InsufficientPrecision,
    LocalElem,
    _check_same,
    draw_digits,
    format_ext,
    inv,
    parse_ext,
)
from .residue import invertible_mod_p


class ShapeError(ValueError):
    pass


class NotSkewError(ValueError):
    pass


class LocalMatrix:
    """Immutable rectangular matrix of LocalElem over one field."""

    __slots__ = ("spec", "rows", "cols", "entries")

    def __init__(self, spec: FieldSpec, rows: Sequence[Sequence[LocalElem]]):
        rows = tuple(tuple(r) for r in rows)
        if not rows or not rows[0]:
            raise ShapeError("matrices must be nonempty")
        width = len(rows[0])
        for r in rows:
            if len(r) != width:
                raise ShapeError("ragged rows")
            for x in r:
                _check_same(spec, x.spec)
        self.spec = spec
        self.rows = len(rows)
        self.cols = width
        self.entries = rows

    @classmethod
    def from_values(cls, spec: FieldSpec, rows) -> "LocalMatrix":
        """Build from ints, Fractions or LocalElems."""
        return cls(spec, [[spec(x) for x in r] for r in rows])

    @classmethod
    def zeros(cls, spec: FieldSpec, rows: int, cols: int | None = None) -> "LocalMatrix":
        cols = rows if cols is None else cols
        z = LocalElem.zero(spec)
        return cls(spec, [[z] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, spec: FieldSpec, n: int) -> "LocalMatrix":
        one, z = spec.one(), LocalElem.zero(spec)
        return cls(spec, [[one if i == j else z for j in range(n)] for i in range(n)])

    @classmethod
    def permutation(cls, spec: FieldSpec, perm: Sequence[int]) -> "LocalMatrix":
        """M_σ with M_σ(i, j) = 1 iff σ(i) = j."""
        n = len(perm)
        one, z = spec.one(), LocalElem.zero(spec)
        return cls(spec, [[one if perm[i] == j else z for j in range(n)] for i in range(n)])

    @property
    def shape(self):
        return (self.rows, self.cols)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __iter__(self):
        return iter(self.entries)

    def __repr__(self):
        return f"LocalMatrix({self.spec}, {[list(r) for r in self.entries]})"

    def __eq__(self, other):
        if not isinstance(other, LocalMatrix):
            return NotImplemented
        return self.spec == other.spec and self.entries == other.entries

    def __hash__(self):
        return hash((self.spec, self.entries))

    def transpose(self) -> "LocalMatrix":
        return LocalMatrix(self.spec, list(zip(*self.entries)))

    @property
    def T(self) -> "LocalMatrix":
        return self.transpose()

    def __add__(self, other: "LocalMatrix") -> "LocalMatrix":
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        return LocalMatrix(self.spec, [[a + b for a, b in zip(r, s)] for r, s in zip(self, other)])

    def __neg__(self) -> "LocalMatrix":
        return LocalMatrix(self.spec, [[-a for a in r] for r in self])

    def __sub__(self, other: "LocalMatrix") -> "LocalMatrix":
        return self + (-other)

    def __matmul__(self, other: "LocalMatrix") -> "LocalMatrix":
        return matmul(self, other)

    def scale(self, c: LocalElem) -> "LocalMatrix":
        return LocalMatrix(self.spec, [[c * a for a in r] for r in self])

    def is_square(self) -> bool:
        return self.rows == self.cols

    def is_integral(self) -> bool:
        return all(x.is_integral for r in self for x in r)

    def is_zero(self) -> bool:
        return all(x.is_zero for r in self for x in r)

    def is_skew(self) -> bool:
        """A^t = -A to tracked precision."""
        if not self.is_square():
            return False
        n = self.rows
        return all((self[i, j] + self[j, i]).is_zero for i in range(n) for j in range(i, n))

    def equals_within(self, other: "LocalMatrix") -> bool:
        return self.shape == other.shape and all(
            a.equals_within(b) for r, s in zip(self, other) for a, b in zip(r, s)
        )

    def min_valuation(self) -> ExtInt:
        return min(x.valuation for r in self for x in r)

    def min_prec(self) -> ExtInt:
        return min(x.prec for r in self for x in r)

    def residue_matrix(self) -> np.ndarray:
        """Reduction mod ϖ of an integral matrix."""
        return np.array([[x.residue() for x in r] for r in self], dtype=np.int64)

    def is_unimodular(self) -> bool:
        """Integral with unit determinant, i.e. an element of GL(n, O_F)."""
        if not self.is_square() or not self.is_integral():
            return False
        return bool(invertible_mod_p(self.residue_matrix()[None], self.spec.p)[0])

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "spec": self.spec.to_json(),
            "entries": [x.to_json() for r in self for x in r],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LocalMatrix":
        spec = FieldSpec.from_json(obj["spec"])
        r, c = int(obj["rows"]), int(obj["cols"])
        flat = [LocalElem.from_json(spec, e) for e in obj["entries"]]
        if len(flat) != r * c:
            raise ShapeError("entry count does not match shape")
        return cls(spec, [flat[i * c : (i + 1) * c] for i in range(r)])


def J_block(spec: FieldSpec) -> LocalMatrix:
    return LocalMatrix.from_values(spec, [[0, 1], [-1, 0]])


def matmul(A: LocalMatrix, B: LocalMatrix) -> LocalMatrix:
    _check_same(A.spec, B.spec)
    if A.cols != B.rows:
        raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
    cols = list(zip(*B.entries))
    out = []
    for row in A.entries:
        new = []
        for col in cols:
            s = LocalElem.zero(A.spec)
            for a, b in zip(row, col):
                if a.is_exact_zero or b.is_exact_zero:
                    continue
                s = s + a * b
            new.append(s)
        out.append(new)
    return LocalMatrix(A.spec, out)


def skew_part(X: LocalMatrix) -> LocalMatrix:
    """τ(X) = X - X^t, with exact zeros on the diagonal."""
    if not X.is_square():
        raise ShapeError("skew_part needs a square matrix")
    n = X.rows
    z = LocalElem.zero(X.spec)
    up = {(i, j): X[i, j] - X[j, i] for i in range(n) for j in range(i + 1, n)}
    return LocalMatrix(
        X.spec,
        [[z if i == j else (up[i, j] if i < j else -up[j, i]) for j in range(n)] for i in range(n)],
    )


def congruence(g: LocalMatrix, A: LocalMatrix) -> LocalMatrix:
    """g A g^t."""
    if g.cols != A.rows or not A.is_square():
        raise ShapeError(f"cannot form gAg^t for g {g.shape}, A {A.shape}")
    return matmul(matmul(g, A), g.transpose())


def assemble_block_diag(xs, total: int, spec: FieldSpec | None = None) -> LocalMatrix:
    """diag(x_1 J, ..., x_n J, 0, ...) of size ``total``.

    Each x is a LocalElem or an exponent k standing for ϖ^-k (k = -inf
    gives a zero block).
    """
    xs = list(xs)
    if 2 * len(xs) > total:
        raise ShapeError(f"{len(xs)} blocks do not fit in size {total}")
    if spec is None:
        elems = [x for x in xs if isinstance(x, LocalElem)]
        if not elems:
            raise ValueError("spec required when blocks are given as exponents")
        spec = elems[0].spec
    vals = [x if isinstance(x, LocalElem) else exponent_elem(spec, x) for x in xs]
    z = LocalElem.zero(spec)
    rows = [[z] * total for _ in range(total)]
    for b, x in enumerate(vals):
        rows[2 * b][2 * b + 1] = x
        rows[2 * b + 1][2 * b] = -x
    return LocalMatrix(spec, rows)


def exponent_elem(spec: FieldSpec, k: ExtInt) -> LocalElem:
    """ϖ^-k, with ϖ^∞ = 0."""
    if k == NEG_INF:
        return LocalElem.zero(spec)
    return spec.uniformizer_power(-int(k))


# ---------------------------------------------------------------------------
# Haar measure on GL(n, O_F)


def draw_gl_digits(spec: FieldSpec, n: int, rng: np.random.Generator, size: int, width: int | None = None) -> np.ndarray:
    """Digit arrays (size, n, n, width) of Haar-random elements of GL(n, O_F).

    Rejection: uniform Mat(n, O_F) candidates are kept iff their residue
    matrix is invertible over F_p.
    """
    kept = []
    have = 0
    while have < size:
        want = size - have
        batch = want if want == 1 else max(16, int(want * 1.3) + 8)
        cand = draw_digits(spec, rng, (batch, n, n), width)
        ok = invertible_mod_p(cand[..., 0], spec.p)
        acc = cand[ok][:want]
        kept.append(acc)
        have += len(acc)
    return np.concatenate(kept, axis=0)


def matrix_from_digits(spec: FieldSpec, digits: np.ndarray, scale: int = 0) -> LocalMatrix:
    """LocalMatrix with entries ϖ^scale · (digit expansion)."""
    return LocalMatrix(
        spec,
        [[LocalElem.from_digits(spec, scale, digits[i, j]) for j in range(digits.shape[1])] for i in range(digits.shape[0])],
    )


def sample_gl(spec: FieldSpec, n: int, rng: np.random.Generator) -> LocalMatrix:
    """Haar-random element of GL(n, O_F)."""
    if n < 1:
        raise ShapeError("n must be positive")
    return matrix_from_digits(spec, draw_gl_digits(spec, n, rng, 1)[0])


def gl_acceptance_rate(q: int, n: int) -> float:
    """|GL(n, F_q)| / q^(n^2), the rejection sampler's acceptance rate."""
    r = 1.0
    for i in range(1, n + 1):
        r *= 1.0 - q ** (-i)
    return r


# ---------------------------------------------------------------------------
# canonical form of skew-symmetric matrices


@dataclass(frozen=True)
class CanonicalSkewForm:
    """A = g · diag(ϖ^-k_1 J, ..., ϖ^-k_n J) · g^t with g ∈ GL(2n, O_F)."""

    g: LocalMatrix
    exponents: tuple[ExtInt, ...]

    def block_diag(self) -> LocalMatrix:
        return assemble_block_diag(self.exponents, self.g.rows, self.g.spec)

    def reconstruct(self) -> LocalMatrix:
        return congruence(self.g, self.block_diag())

    def to_json(self) -> dict:
        return {"g": self.g.to_json(), "exponents": [format_ext(k) for k in self.exponents]}

    @classmethod
    def from_json(cls, obj: dict) -> "CanonicalSkewForm":
        return cls(LocalMatrix.from_json(obj["g"]), tuple(parse_ext(k) for k in obj["exponents"]))


def _swap_rc(A: list, G: list, i: int, j: int):
    """Conjugate the working matrix by the transposition (i j), updating G."""
    if i == j:
        return
    A[i], A[j] = A[j], A[i]
    for row in A:
        row[i], row[j] = row[j], row[i]
    # G ← G · M^t; M is an involution so this swaps columns of G
    for row in G:
        row[i], row[j] = row[j], row[i]


def _pivot(A: list, start: int, size: int, strict: bool):
    """Lexicographically first (i, j), i < j, of maximal absolute value."""
    best = None
    best_v = INF
    inexact_floor = INF
    for i in range(start, size):
        row = A[i]
        for j in range(i + 1, size):
            x = row[j]
            if x.is_zero:
                if not x.is_exact_zero:
                    inexact_floor = min(inexact_floor, x.prec)
                continue
            if x.valuation < best_v:
                best, best_v = (i, j), x.valuation
    if not strict:
        return best
    if best is None:
        if inexact_floor < INF:
            raise InsufficientPrecision("complement is zero only to finite precision")
        return None
    if inexact_floor <= best_v:
        raise InsufficientPrecision(
            f"pivot ϖ^{best_v} not distinguishable from an entry known only mod ϖ^{inexact_floor}"
        )
    return best


def skew_canonical_form(A: LocalMatrix, strict: bool = True) -> CanonicalSkewForm:
    """Canonical form of a 2n×2n skew-symmetric matrix.

    Works by recursion on block pivots: bring an entry of maximal absolute
    value to the (1,2) slot by permutation congruences, clear the first
    block row and column with a unipotent congruence, split off the unit
    of the pivot, and recurse on the complement.  Exponents are finally
    sorted nonincreasing by a block permutation.

    With ``strict`` (the default) a complement that vanishes only to
    finite precision raises InsufficientPrecision; otherwise entries that
    are zero to their tracked precision count as zero and give -inf
    exponents.
    """
    if not A.is_square() or A.rows % 2:
        raise ShapeError("canonical form needs an even square matrix")
    if not A.is_skew():
        raise NotSkewError("matrix is not skew-symmetric")
    spec = A.spec
    size = A.rows
    n = size // 2
    one, zero = spec.one(), LocalElem.zero(spec)
    W = [list(r) for r in A.entries]
    for i in range(size):
        W[i][i] = zero
        for j in range(i + 1, size):
            W[j][i] = -W[i][j]
    # invariant: A = G · W · G^t
    G = [[one if i == j else zero for j in range(size)] for i in range(size)]
    exps: list = []

    for b in range(n):
        s = 2 * b
        piv = _pivot(W, s, size, strict)
        if piv is None:
            exps.extend([NEG_INF] * (n - b))
            break
        i0, j0 = piv
        # covers the three placements: i0 = s, i0 = s+1, and {i0, j0} disjoint from {s, s+1}
        _swap_rc(W, G, s, i0)
        _swap_rc(W, G, s + 1, j0)
        x = W[s][s + 1]
        xinv = inv(x)
        rest = range(s + 2, size)
        # C^t = x^-1 J A_12, where (J B)[0] = B[1] and (J B)[1] = -B[0]
        ct0 = {v: xinv * W[s + 1][v] for v in rest}
        ct1 = {v: -(xinv * W[s][v]) for v in rest}
        # Schur complement A' = A_22 + x^-1 A_21 J A_12
        for u in rest:
            a_u0, a_u1 = W[u][s], W[u][s + 1]
            for v in range(u + 1, size):
                corr = xinv * (a_u0 * W[s + 1][v] - a_u1 * W[s][v])
                W[u][v] = W[u][v] + corr
                W[v][u] = -W[u][v]
        for v in rest:
            W[s][v] = W[s + 1][v] = zero
            W[v][s] = W[v][s + 1] = zero
        # G ← G · E^-1 with E^-1 = [[I, 0], [-C, I]]
        for row in G:
            c0, c1 = row[s], row[s + 1]
            for v in rest:
                gv = row[v]
                if gv.is_exact_zero:
                    continue
                c0 = c0 - gv * ct0[v]
                c1 = c1 - gv * ct1[v]
            row[s], row[s + 1] = c0, c1
        # xJ = diag(u, 1) · ϖ^-k J · diag(u, 1)
        k = -x.valuation
        u = x.shift(k)
        for row in G:
            row[s] = row[s] * u
        W[s][s + 1] = spec.uniformizer_power(-k)
        W[s + 1][s] = -W[s][s + 1]
        exps.append(k)

    order = sorted(range(n), key=lambda b: (-exps[b], b))
    if order != list(range(n)):
        cols = []
        for b in order:
            cols.extend([2 * b, 2 * b + 1])
        G = [[row[c] for c in cols] for row in G]
        exps = [exps[b] for b in order]
    return CanonicalSkewForm(LocalMatrix(spec, G), tuple(exps))


def canonical_exponents(A: LocalMatrix, strict: bool = True) -> tuple:
    return skew_canonical_form(A, strict=strict).exponents
