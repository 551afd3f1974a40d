"""Batched arithmetic in the finite quotient O_F / ϖ^W.

Character values only depend on an argument modulo O_F, so any quantity
``x`` with ``ϖ^E x`` integral can be carried as the residue of ``ϖ^E x``
modulo ``ϖ^W`` (``W ≥ E``) without affecting ``χ(x)``.  The Monte Carlo
estimators and enumeration oracles work in this representation, on numpy
arrays holding many samples at once.

Q_p residues are int64 arrays reduced modulo ``p^W``.  F_p((t)) residues
carry a trailing axis of W coefficients modulo p.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .local_field import FieldSpec, InsufficientPrecision, Kind, LocalElem

_INT64_BUDGET = 2**62


class ResidueRing:
    """Vectorized ``O_F / ϖ^width``."""

    def __init__(self, spec: FieldSpec, width: int):
        self.spec = spec
        self.p = spec.p
        self.width = max(1, int(width))
        self.laurent = spec.kind is Kind.LAURENT
        self.modulus = self.p**self.width
        if not self.laurent and self.modulus**2 * 64 >= _INT64_BUDGET:
            raise InsufficientPrecision(
                f"residue width {self.width} too large for int64 batches over Q_{self.p}"
            )

    def __repr__(self):
        return f"ResidueRing({self.spec}, width={self.width})"

    # construction ----------------------------------------------------------

    def from_digits(self, digits: np.ndarray) -> np.ndarray:
        """Residues of elements given by digit rows (trailing axis)."""
        W = self.width
        if digits.shape[-1] < W:
            raise InsufficientPrecision(f"need {W} digits, have {digits.shape[-1]}")
        d = digits[..., :W].astype(np.int64)
        if self.laurent:
            return d
        weights = self.p ** np.arange(W, dtype=np.int64)
        return (d * weights).sum(axis=-1) % self.modulus

    def const(self, x: LocalElem, shift: int = 0) -> np.ndarray:
        """Residue of ``ϖ^shift * x`` (which must be integral)."""
        digits = np.array(x.scaled_digits(shift, self.width), dtype=np.int64)
        return self.from_digits(digits)

    def const_matrix(self, rows, shift: int = 0) -> np.ndarray:
        """Residue array of a matrix given as nested rows of LocalElem."""
        return np.stack([np.stack([self.const(x, shift) for x in row]) for row in rows])

    def zeros(self, shape) -> np.ndarray:
        shape = tuple(shape)
        return np.zeros(shape + ((self.width,) if self.laurent else ()), dtype=np.int64)

    # elementwise ---------------------------------------------------------------

    def add(self, a, b):
        return (a + b) % (self.p if self.laurent else self.modulus)

    def sub(self, a, b):
        return (a - b) % (self.p if self.laurent else self.modulus)

    def neg(self, a):
        return (-a) % (self.p if self.laurent else self.modulus)

    def mul(self, a, b):
        if not self.laurent:
            return (a * b) % self.modulus
        a, b = np.broadcast_arrays(a, b)
        W = self.width
        out = np.zeros(a.shape, dtype=np.int64)
        for i in range(W):
            ai = a[..., i : i + 1]
            out[..., i:] += ai * b[..., : W - i]
        return out % self.p

    def scale(self, a, k: int):
        """Multiply by ϖ^k for k ≥ 0."""
        if k < 0:
            raise ValueError("scale exponent must be nonnegative")
        if not self.laurent:
            return (a * pow(self.p, k, self.modulus)) % self.modulus
        out = np.zeros_like(a)
        if k < self.width:
            out[..., k:] = a[..., : self.width - k]
        return out

    # matrices ------------------------------------------------------------------

    def transpose(self, A):
        return np.swapaxes(A, -3, -2) if self.laurent else np.swapaxes(A, -1, -2)

    def matmul(self, A, B):
        if not self.laurent:
            return np.matmul(A, B) % self.modulus
        W = self.width
        A, B = np.asarray(A), np.asarray(B)
        shape = np.broadcast_shapes(A.shape[:-3], B.shape[:-3]) + (A.shape[-3], B.shape[-2], W)
        out = np.zeros(shape, dtype=np.int64)
        for i in range(W):
            for j in range(W - i):
                out[..., i + j] += np.matmul(A[..., i], B[..., j])
        return out % self.p

    def trace(self, A):
        if not self.laurent:
            return np.trace(A, axis1=-2, axis2=-1) % self.modulus
        return np.trace(A, axis1=-3, axis2=-2) % self.p

    def entry(self, A, i: int, j: int):
        return A[..., i, j, :] if self.laurent else A[..., i, j]

    # readout ---------------------------------------------------------------------

    def residue(self, a):
        """Image in the residue field."""
        return a[..., 0] if self.laurent else a % self.p

    def valuation(self, a) -> np.ndarray:
        """Valuations, with ``width`` standing for 'at least width'."""
        W = self.width
        if self.laurent:
            nz = a != 0
            first = np.argmax(nz, axis=-1)
            return np.where(nz.any(axis=-1), first, W)
        v = np.full(np.shape(a), W, dtype=np.int64)
        r = np.asarray(a).copy()
        alive = r != 0
        v[alive] = 0
        for _ in range(W):
            step = alive & (r % self.p == 0)
            if not step.any():
                break
            v[step] += 1
            r[step] //= self.p
            alive = step
        return v

    def phase_numerators(self, a, E: int) -> np.ndarray:
        """Numerators n with χ(ϖ^-E x) = exp(2πi n / p^E), for residues a of x."""
        if E <= 0:
            return np.zeros(np.shape(a)[:-1] if self.laurent else np.shape(a), dtype=np.int64)
        if E > self.width:
            raise InsufficientPrecision(f"phase at depth {E} needs width ≥ {E}, have {self.width}")
        if self.laurent:
            return a[..., E - 1] * self.p ** (E - 1)
        return a % self.p**E


def invertible_mod_p(res: np.ndarray, p: int) -> np.ndarray:
    """Batched test that square matrices over F_p (last two axes) are invertible."""
    M = np.array(res, dtype=np.int64) % p
    batch = M.shape[:-2]
    n = M.shape[-1]
    M = M.reshape((-1, n, n))
    ok = np.ones(M.shape[0], dtype=bool)
    inv_table = np.array([0] + [pow(a, -1, p) for a in range(1, p)], dtype=np.int64)
    idx = np.arange(M.shape[0])
    for c in range(n):
        nz = M[:, c:, c] != 0
        has = nz.any(axis=1)
        ok &= has
        piv = c + np.argmax(nz, axis=1)
        rows_c = M[idx, c].copy()
        M[idx, c] = M[idx, piv]
        M[idx, piv] = rows_c
        scale = inv_table[M[:, c, c]]
        M[:, c] = (M[:, c] * scale[:, None]) % p
        if c + 1 < n:
            f = M[:, c + 1 :, c]
            M[:, c + 1 :] = (M[:, c + 1 :] - f[:, :, None] * M[:, c][:, None, :]) % p
    return ok.reshape(batch)


class CyclotomicSum:
    """Exact sum ``Σ_a counts[a] ζ^a`` with ζ = exp(2πi/p^E).

    Used to accumulate character sums as integer vectors so that exact
    equalities can be asserted and reduction order never matters.
    """

    def __init__(self, p: int, E: int, counts=None):
        self.p = p
        self.E = max(0, int(E))
        size = p**self.E
        if counts is None:
            counts = np.zeros(size, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (size,):
            raise ValueError(f"counts must have length {size}")
        self.counts = counts

    @classmethod
    def from_numerators(cls, p: int, E: int, numerators) -> "CyclotomicSum":
        E = max(0, int(E))
        c = np.bincount(np.ravel(numerators).astype(np.int64), minlength=p**E)
        return cls(p, E, c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def lift(self, E: int) -> "CyclotomicSum":
        if E < self.E:
            raise ValueError("cannot lower the exponent")
        if E == self.E:
            return self
        out = np.zeros(self.p**E, dtype=np.int64)
        out[np.arange(self.p**self.E) * self.p ** (E - self.E)] = self.counts
        return CyclotomicSum(self.p, E, out)

    def __add__(self, other: "CyclotomicSum") -> "CyclotomicSum":
        if self.p != other.p:
            raise ValueError("different primes")
        E = max(self.E, other.E)
        return CyclotomicSum(self.p, E, self.lift(E).counts + other.lift(E).counts)

    def value(self) -> complex:
        """The (unnormalized) sum as a complex double."""
        if self.E == 0:
            return complex(int(self.counts[0]))
        n = self.p**self.E
        nz = np.nonzero(self.counts)[0]
        angles = 2 * np.pi * nz / n
        c = self.counts[nz]
        return complex(float(np.dot(c, np.cos(angles))), float(np.dot(c, np.sin(angles))))

    def mean(self) -> complex:
        return self.value() / self.total

    def reduced(self) -> np.ndarray:
        """Coordinates in the power basis 1, ζ, ..., ζ^(φ-1)."""
        c = self.counts.copy()
        if self.E == 0:
            return c
        p, E = self.p, self.E
        step = p ** (E - 1)
        phi = p**E - step
        for a in range(phi, p**E):
            if c[a]:
                b = a - phi
                for j in range(p - 1):
                    c[b + j * step] -= c[a]
                c[a] = 0
        return c[:phi]

    def is_rational(self) -> bool:
        return not self.reduced()[1:].any()

    def to_fraction(self) -> Fraction:
        """Exact normalized value, when it is rational."""
        red = self.reduced()
        if red[1:].any():
            raise ValueError("character sum is not rational")
        return Fraction(int(red[0]), self.total)
