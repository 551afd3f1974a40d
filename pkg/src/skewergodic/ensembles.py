"""Samplers for the ergodic measures μ_k and related invariant laws.

Every sampler draws raw residue digits first and builds elements from
them afterwards.  The same draw can therefore be materialized either as
LocalMatrix objects or as batched residues, and both views describe
the very same random matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .linalg import LocalMatrix, assemble_block_diag, congruence, draw_gl_digits, matrix_from_digits
from .local_field import (
    INF,
    NEG_INF,
    ExtInt,
    FieldSpec,
    LocalElem,
    draw_digits,
    format_ext,
    parse_ext,
)
from .residue import ResidueRing


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for the independent stream ``(seed, *stream)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream)))


def resolve_rng(rng) -> tuple[np.random.Generator, Optional[int]]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    return make_rng(int(rng)), int(rng)


@dataclass(frozen=True)
class Signature:
    """An eventually constant element of Δ: spikes k_1 ≥ ... ≥ k_m, then the tail forever.

    Spikes equal to the tail are absorbed into it, so that two signatures
    compare equal exactly when they describe the same sequence.
    """

    spikes: tuple = ()
    tail: ExtInt = NEG_INF

    def __post_init__(self):
        spikes = tuple(int(k) for k in self.spikes)
        if self.tail == INF:
            raise ValueError("tail must be an integer or -inf")
        tail = self.tail if self.tail == NEG_INF else int(self.tail)
        if any(a < b for a, b in zip(spikes, spikes[1:])):
            raise ValueError(f"spikes must be nonincreasing: {spikes}")
        if spikes and spikes[-1] < tail:
            raise ValueError("spikes must not fall below the tail")
        while spikes and spikes[-1] == tail:
            spikes = spikes[:-1]
        object.__setattr__(self, "spikes", spikes)
        object.__setattr__(self, "tail", tail)

    @classmethod
    def parse(cls, spikes: Sequence = (), tail="-inf") -> "Signature":
        return cls(tuple(int(k) for k in spikes), parse_ext(tail))

    def sequence(self, length: int) -> list:
        """The first ``length`` terms k_1, k_2, ..."""
        return [self.spikes[i] if i < len(self.spikes) else self.tail for i in range(length)]

    @property
    def top(self) -> ExtInt:
        """k_1, the largest term."""
        return self.spikes[0] if self.spikes else self.tail

    def truncated(self, prec: int) -> "Signature":
        """Drop terms whose contribution sits entirely below a window of ``prec`` digits."""
        top = self.top
        if top == NEG_INF:
            return self
        spikes = tuple(k for k in self.spikes if top - k < prec)
        tail = self.tail if (self.tail != NEG_INF and top - self.tail < prec) else NEG_INF
        return Signature(spikes, tail)

    def __str__(self):
        return f"({', '.join(map(str, self.spikes))}; tail {format_ext(self.tail)})"

    def to_json(self) -> dict:
        return {"spikes": list(self.spikes), "tail": format_ext(self.tail)}

    @classmethod
    def from_json(cls, obj: dict) -> "Signature":
        return cls.parse(obj.get("spikes", ()), obj.get("tail", "-inf"))


@dataclass(frozen=True)
class EnsembleSample:
    matrix: LocalMatrix
    signature: Signature
    corner: int
    seed: Optional[int] = None
    stream: tuple = ()

    def to_json(self) -> dict:
        out = self.matrix.to_json()
        out["signature"] = self.signature.to_json()
        out["seed"] = self.seed
        out["stream"] = list(self.stream)
        return out


def _outer_skew(ring: ResidueRing, x, y):
    """x_i y_j - x_j y_i over the last vector axis (batched)."""
    if ring.laurent:
        xi, yj = x[..., :, None, :], y[..., None, :, :]
        xj, yi = x[..., None, :, :], y[..., :, None, :]
    else:
        xi, yj = x[..., :, None], y[..., None, :]
        xj, yi = x[..., None, :], y[..., :, None]
    return ring.sub(ring.mul(xi, yj), ring.mul(xj, yi))


def _upper_pairs(m: int):
    return [(i, j) for i in range(m) for j in range(i + 1, m)]


@dataclass
class ErgodicDraw:
    """Raw digits behind ``size`` samples of the m×m corner of A_k."""

    signature: Signature
    m: int
    spec: FieldSpec
    X: Optional[np.ndarray]  # (size, spikes, m, prec)
    Y: Optional[np.ndarray]
    Z: Optional[np.ndarray]  # (size, m(m-1)/2, prec), upper triangle row-major
    size: int = field(default=0)

    def local_matrix(self, t: int) -> LocalMatrix:
        spec, m = self.spec, self.m
        zero = LocalElem.zero(spec)
        up = {(i, j): zero for (i, j) in _upper_pairs(m)}
        if self.X is not None:
            for s, k in enumerate(self.signature.spikes):
                xs = [LocalElem.from_digits(spec, 0, self.X[t, s, i]) for i in range(m)]
                ys = [LocalElem.from_digits(spec, 0, self.Y[t, s, i]) for i in range(m)]
                c = spec.uniformizer_power(-k)
                for (i, j) in up:
                    up[i, j] = up[i, j] + c * (xs[i] * ys[j] - xs[j] * ys[i])
        if self.Z is not None:
            c = spec.uniformizer_power(-self.signature.tail)
            for e, (i, j) in enumerate(_upper_pairs(m)):
                up[i, j] = up[i, j] + c * LocalElem.from_digits(spec, 0, self.Z[t, e])
        rows = [[zero] * m for _ in range(m)]
        for (i, j), x in up.items():
            rows[i][j] = x
            rows[j][i] = -x
        return LocalMatrix(spec, rows)

    def residues(self, ring: ResidueRing, shift: int) -> np.ndarray:
        """Residues of ϖ^shift · A for every sample; shift must be ≥ k_1."""
        sig, m = self.signature, self.m
        if sig.top != NEG_INF and shift < sig.top:
            raise ValueError(f"shift {shift} below top exponent {sig.top}")
        out = ring.zeros((self.size, m, m))
        if self.X is not None:
            Xr = ring.from_digits(self.X)
            Yr = ring.from_digits(self.Y)
            terms = _outer_skew(ring, Xr, Yr)  # (size, S, m, m[, W])
            for s, k in enumerate(sig.spikes):
                out = ring.add(out, ring.scale(terms[:, s], shift - k))
        if self.Z is not None:
            zr = ring.scale(ring.from_digits(self.Z), shift - sig.tail)
            Zm = ring.zeros((self.size, m, m))
            for e, (i, j) in enumerate(_upper_pairs(m)):
                Zm[:, i, j] = zr[:, e]
                Zm[:, j, i] = ring.neg(zr[:, e])
            out = ring.add(out, Zm)
        return out


def draw_skew_ergodic(sig: Signature, m: int, spec: FieldSpec, rng: np.random.Generator, size: int) -> ErgodicDraw:
    S = len(sig.spikes)
    X = Y = Z = None
    if S:
        X = draw_digits(spec, rng, (size, S, m))
        Y = draw_digits(spec, rng, (size, S, m))
    if sig.tail != NEG_INF:
        Z = draw_digits(spec, rng, (size, m * (m - 1) // 2))
    return ErgodicDraw(sig, m, spec, X, Y, Z, size)


def sample_skew_ergodic(sig: Signature, m: int, spec: FieldSpec, rng) -> EnsembleSample:
    """The m×m corner of a μ_k-distributed skew matrix.

    A_k = Σ_{k_n > k} ϖ^-k_n (X^(n) Y^(n)t - Y^(n) X^(n)t) + ϖ^-k Z with all
    X, Y, Z entries independent and uniform on O_F.
    """
    gen, seed = resolve_rng(rng)
    draw = draw_skew_ergodic(sig, m, spec, gen, 1)
    return EnsembleSample(draw.local_matrix(0), sig, m, seed)


def sample_orbital(exponents: Sequence[ExtInt], spec: FieldSpec, rng) -> LocalMatrix:
    """g D g^t for g Haar on GL(2n, O_F) and D = diag(ϖ^-x_1 J, ..., ϖ^-x_n J)."""
    gen, _ = resolve_rng(rng)
    n = len(exponents)
    D = assemble_block_diag(exponents, 2 * n, spec)
    g = matrix_from_digits(spec, draw_gl_digits(spec, 2 * n, gen, 1)[0])
    return congruence(g, D)


def sample_mat_invariant(k: int, rows: int, cols: int, spec: FieldSpec, rng) -> LocalMatrix:
    """Entries i.i.d. uniform on ϖ^-k O_F; invariant under GL × GL."""
    gen, _ = resolve_rng(rng)
    return matrix_from_digits(spec, draw_digits(spec, gen, (rows, cols)), scale=-k)


def exchange_coords(A: LocalMatrix) -> list:
    """(A(1,2), A(3,4), ..., A(m-1,m))."""
    if A.rows % 2 or not A.is_square():
        raise ValueError("exchangeable coordinates need an even square matrix")
    return [A[2 * i, 2 * i + 1] for i in range(A.rows // 2)]


def exchange_residues(ring: ResidueRing, A: np.ndarray) -> np.ndarray:
    """Batched exchangeable coordinates, shape (..., m/2[, W])."""
    m = A.shape[-3] if ring.laurent else A.shape[-1]
    return np.stack([ring.entry(A, 2 * i, 2 * i + 1) for i in range(m // 2)], axis=-2 if ring.laurent else -1)
