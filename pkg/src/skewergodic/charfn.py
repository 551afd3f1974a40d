"""Characteristic functions, orbital integrals and their estimators.

Closed forms are returned as exact Fractions.  Monte Carlo estimators and
enumeration oracles evaluate character kernels on batched residues (see
:mod:`skewergodic.residue`) and accumulate exact phase counts, so their
results do not depend on summation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .ensembles import Signature, draw_skew_ergodic, make_rng
from .linalg import LocalMatrix, ShapeError, assemble_block_diag, draw_gl_digits, exponent_elem
from .local_field import (
    NEG_INF,
    ExtInt,
    FieldSpec,
    InsufficientPrecision,
    LocalElem,
    PhaseValue,
    chi,
    draw_digits,
    theta,
)
from .residue import CyclotomicSum, ResidueRing, invertible_mod_p

DEFAULT_CHUNK = 20000


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo mean of a character, with its standard error."""

    value: complex
    std_error: float
    trials: int
    seed: Optional[int] = None
    counts: Optional[CyclotomicSum] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_counts(cls, counts: CyclotomicSum, seed=None) -> "Estimate":
        T = counts.total
        mean = counts.mean()
        if T > 1:
            spread = max(0.0, 1.0 - abs(mean) ** 2)
            se = math.sqrt(T * spread / (T - 1)) / math.sqrt(T)
        else:
            se = 0.0
        return cls(mean, se, T, seed, counts)

    def to_json(self) -> dict:
        return {
            "re": self.value.real,
            "im": self.value.imag,
            "std_error": self.std_error,
            "trials": self.trials,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class BoundReport:
    experiment: str
    params: dict
    main_term: float
    bound: float
    estimate: Estimate
    passed: bool

    @classmethod
    def judge(cls, experiment: str, params: dict, main_term, bound, estimate: Estimate) -> "BoundReport":
        gap = abs(estimate.value - float(main_term))
        ok = gap <= float(bound) + 3 * estimate.std_error
        return cls(experiment, params, float(main_term), float(bound), estimate, bool(ok))

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "main_term": self.main_term,
            "bound": self.bound,
            "estimate": {"re": self.estimate.value.real, "im": self.estimate.value.imag},
            "std_error": self.estimate.std_error,
            "trials": self.estimate.trials,
            "seed": self.estimate.seed,
            "pass": self.passed,
        }


# ---------------------------------------------------------------------------
# closed forms


def pairing(X: LocalMatrix, S: LocalMatrix) -> PhaseValue:
    """χ(tr(X S)); a smaller X is read as the top-left corner of a finite-support matrix."""
    n = X.rows
    if X.rows != X.cols or S.rows != S.cols or n > S.rows:
        raise ShapeError(f"cannot pair {X.shape} with {S.shape}")
    tr = LocalElem.zero(S.spec)
    for i in range(n):
        for j in range(n):
            a = X[i, j]
            if not a.is_exact_zero:
                tr = tr + a * S[j, i]
    return chi(tr)


def test_matrix(ells: Sequence[int], m: int, spec: FieldSpec) -> LocalMatrix:
    """diag(ϖ^-ℓ_1 J, ..., ϖ^-ℓ_r J, 0, ...) of size m."""
    return assemble_block_diag(list(ells), m, spec)


def charfn_closed_form(sig: Signature, ells: Sequence[int], spec: FieldSpec) -> Fraction:
    """μ_k evaluated at the J-block matrix diag(ϖ^-ℓ_1 J, ..., ϖ^-ℓ_r J, 0, ...).

    Each block contributes exp(-2 log q · Σ_n (k_n + ℓ - ℓ0) 1{k_n + ℓ ≥ ℓ0});
    an infinite constant tail with k + ℓ > ℓ0 drives the factor to 0.
    """
    q, l0 = spec.q, spec.ell0
    out = Fraction(1)
    for ell in ells:
        if sig.tail != NEG_INF and sig.tail + ell > l0:
            return Fraction(0)
        expo = sum(k + ell - l0 for k in sig.spikes if k + ell >= l0)
        out *= Fraction(1, q ** (2 * expo))
    return out


SEPARATION_ELLS = tuple(range(-4, 5))


def charfn_fingerprint(sig: Signature, spec: FieldSpec, ells: Sequence[int] = SEPARATION_ELLS) -> tuple:
    """Closed-form values at single J-blocks ϖ^-ℓ J for every ℓ in ``ells``."""
    return tuple(charfn_closed_form(sig, [ell], spec) for ell in ells)


def separating_ell(a: Signature, b: Signature, spec: FieldSpec, ells: Sequence[int] = SEPARATION_ELLS) -> Optional[int]:
    """Smallest ℓ at which the closed forms of ``a`` and ``b`` differ, or None."""
    for ell in ells:
        if charfn_closed_form(a, [ell], spec) != charfn_closed_form(b, [ell], spec):
            return ell
    return None


def theta_product(x_exps: Sequence[ExtInt], a_exps: Sequence[ExtInt], spec: FieldSpec) -> Fraction:
    """Π_i Π_j Θ(a_i x_j), with |a_i x_j| = q^(ℓ_i + m_j)."""
    if len(a_exps) > len(x_exps):
        raise ValueError("need r ≤ n")
    out = Fraction(1)
    for a in a_exps:
        for x in x_exps:
            out *= theta(a + x, spec)
    return out


def _one_minus_prod(n: int, r: int, q: int) -> Fraction:
    prod = Fraction(1)
    for w in range(r):
        prod *= 1 - Fraction(q) ** (w - n)
    return 1 - prod


def orbital_error_bound_exact(n: int, r: int, q: int) -> Fraction:
    """2 (1 - Π_{w=0}^{2r-1} (1 - q^(w-2n))) as an exact rational."""
    if not 1 <= r <= n:
        raise ValueError(f"need 1 ≤ r ≤ n, got r={r}, n={n}")
    return 2 * _one_minus_prod(2 * n, 2 * r, q)


def orbital_error_bound(n: int, r: int, q: int) -> float:
    return float(orbital_error_bound_exact(n, r, q))


def gl_vs_mat_gap_bound_exact(n: int, r: int, q: int) -> Fraction:
    """2 (1 - Π_{w=0}^{r-1} (1 - q^(w-n))) for a kernel of sup norm 1."""
    if not 1 <= r <= n:
        raise ValueError(f"need 1 ≤ r ≤ n, got r={r}, n={n}")
    return 2 * _one_minus_prod(n, r, q)


def gl_vs_mat_gap_bound(n: int, r: int, q: int) -> float:
    return float(gl_vs_mat_gap_bound_exact(n, r, q))


# ---------------------------------------------------------------------------
# character kernels on batched residues


def _shift_for(exps) -> int:
    finite = [int(e) for e in exps if e != NEG_INF]
    return max([0] + finite)


class ThetaKernel:
    """Y ↦ χ(x · tr(Y J Y^t J)) on 2×2 matrices."""

    size = 2

    def __init__(self, x: LocalElem):
        self.x = x

    def depth(self, spec: FieldSpec) -> int:
        return 0 if self.x.is_zero else max(0, -self.x.valuation)

    def phases(self, ring: ResidueRing, Y: np.ndarray) -> tuple[np.ndarray, int]:
        E = self.depth(ring.spec)
        J = ring.const_matrix(assemble_block_diag([0], 2, ring.spec).entries)
        YJ = ring.matmul(Y, J)
        inner = ring.trace(ring.matmul(ring.matmul(YJ, ring.transpose(Y)), J))
        arg = ring.mul(ring.const(self.x, E), inner)
        return ring.phase_numerators(arg, E), E

    def params(self):
        return {"kernel": "theta", "x": self.x.to_json()}


class RowKernel:
    """X ↦ χ(Σ_{i<r, j} c_ij X_ij): depends on the first r rows only."""

    def __init__(self, coeffs: LocalMatrix):
        self.coeffs = coeffs
        self.size = coeffs.cols
        self.r = coeffs.rows

    def depth(self, spec: FieldSpec) -> int:
        v = self.coeffs.min_valuation()
        return 0 if v == math.inf else max(0, -int(v))

    def phases(self, ring: ResidueRing, X: np.ndarray) -> tuple[np.ndarray, int]:
        E = self.depth(ring.spec)
        c = ring.const_matrix(self.coeffs.entries, E)
        acc = None
        for i in range(self.r):
            for j in range(self.size):
                term = ring.mul(ring.entry(c, i, j), ring.entry(X, i, j))
                acc = term if acc is None else ring.add(acc, term)
        return ring.phase_numerators(acc, E), E

    def params(self):
        return {"kernel": "row", "r": self.r, "n": self.size, "coeffs": [x.to_json() for r in self.coeffs for x in r]}


class OrbitalKernel:
    """g ↦ χ(tr(g D g^t A)) with D, A block diagonal in J."""

    def __init__(self, d_exps: Sequence[ExtInt], a_exps: Sequence[ExtInt]):
        if len(a_exps) > len(d_exps):
            raise ValueError("need r ≤ n")
        self.d_exps = list(d_exps)
        self.a_exps = list(a_exps)
        self.size = 2 * len(d_exps)

    def depth(self, spec: FieldSpec) -> int:
        if all(e == NEG_INF for e in self.d_exps) or all(e == NEG_INF for e in self.a_exps):
            return 0
        return _shift_for(self.d_exps) + _shift_for(self.a_exps)

    def phases(self, ring: ResidueRing, g: np.ndarray) -> tuple[np.ndarray, int]:
        spec = ring.spec
        b, a = _shift_for(self.d_exps), _shift_for(self.a_exps)
        D = ring.const_matrix(assemble_block_diag(self.d_exps, self.size, spec).entries, b)
        A = ring.const_matrix(assemble_block_diag(self.a_exps, self.size, spec).entries, a)
        M = ring.matmul(ring.matmul(g, D), ring.transpose(g))
        E = self.depth(spec)
        if E == 0:
            return ring.phase_numerators(ring.trace(ring.matmul(M, A)), 0), 0
        return ring.phase_numerators(ring.trace(ring.matmul(M, A)), a + b), a + b

    def params(self):
        from .local_field import format_ext

        return {"kernel": "orbital", "D": [format_ext(e) for e in self.d_exps], "A": [format_ext(e) for e in self.a_exps]}


class BudgetExceeded(RuntimeError):
    pass


def _enumerate_digits(p: int, n: int, depth: int, start: int, stop: int) -> np.ndarray:
    """Digit arrays (count, n, n, depth) for points start..stop-1 of Mat(n, O/ϖ^depth)."""
    t = np.arange(start, stop, dtype=np.int64)
    cells = n * n * depth
    out = np.empty((len(t), cells), dtype=np.int64)
    for c in range(cells):
        t, out[:, c] = np.divmod(t, p)
    return out.reshape(len(out), n, n, depth)


def exact_quotient_integral(
    kernel,
    domain: str,
    spec: FieldSpec,
    depth: Optional[int] = None,
    budget: int = 10**7,
    chunk: int = 1 << 16,
) -> CyclotomicSum:
    """Exact average of a kernel over Mat(n, O_F) or GL(n, O_F).

    The kernel factors through O/ϖ^depth, so the integral is the average
    over the finite quotient; for GL the points are those with invertible
    residue matrix, which is the image of the Haar measure.
    """
    if domain not in ("mat", "gl"):
        raise ValueError("domain must be 'mat' or 'gl'")
    need = kernel.depth(spec)
    m = need if depth is None else int(depth)
    if m < need:
        raise InsufficientPrecision(f"kernel is not determined mod ϖ^{m} (needs depth {need})")
    n = kernel.size
    points = spec.p ** (m * n * n)
    if points > budget:
        raise BudgetExceeded(f"{points} points exceed the enumeration budget {budget}")
    ring = ResidueRing(spec, max(m, need, 1))
    total = CyclotomicSum(spec.p, need)
    for start in range(0, points, chunk):
        digits = _enumerate_digits(spec.p, n, m, start, min(points, start + chunk))
        if digits.shape[-1] < ring.width:
            pad = np.zeros(digits.shape[:-1] + (ring.width - digits.shape[-1],), dtype=np.int64)
            digits = np.concatenate([digits, pad], axis=-1)
        if domain == "gl":
            if m == 0:
                raise ValueError("GL enumeration needs depth ≥ 1")
            digits = digits[invertible_mod_p(digits[..., 0], spec.p)]
        nums, E = kernel.phases(ring, ring.from_digits(digits))
        total = total + CyclotomicSum.from_numerators(spec.p, E, nums)
    return total


def _split(trials: int, streams: int):
    base, extra = divmod(trials, streams)
    return [base + (1 if s < extra else 0) for s in range(streams)]


def mc_kernel_average(kernel, domain: str, spec: FieldSpec, trials: int, seed: int, streams: int = 1, chunk: int = DEFAULT_CHUNK, stream_prefix=()) -> Estimate:
    """Monte Carlo mean of a kernel over Haar-random Mat(n, O_F) or GL(n, O_F)."""
    E = kernel.depth(spec)
    ring = ResidueRing(spec, max(E, 1))
    total = CyclotomicSum(spec.p, E)
    for s, count in enumerate(_split(trials, streams)):
        rng = make_rng(seed, *stream_prefix, s)
        done = 0
        while done < count:
            size = min(chunk, count - done)
            if domain == "gl":
                digits = draw_gl_digits(spec, kernel.size, rng, size, ring.width)
            else:
                digits = draw_digits(spec, rng, (size, kernel.size, kernel.size), ring.width)
            nums, E2 = kernel.phases(ring, ring.from_digits(digits))
            total = total + CyclotomicSum.from_numerators(spec.p, E2, nums)
            done += size
    return Estimate.from_counts(total, seed)


# ---------------------------------------------------------------------------
# Monte Carlo estimators


def charfn_phase_numerators(draw, ells: Sequence[int], ring_width_hint: int = 0):
    """Phase numerators of χ(tr(X S)) for every sample of an ergodic draw."""
    sig, m, spec = draw.signature, draw.m, draw.spec
    a = _shift_for(ells)
    b = max(0, sig.top) if sig.top != NEG_INF else 0
    E = a + b
    ring = ResidueRing(spec, max(E, 1, ring_width_hint))
    X = ring.const_matrix(test_matrix(ells, m, spec).entries, a)
    S = draw.residues(ring, b)
    tr = ring.trace(ring.matmul(X, S))
    return ring.phase_numerators(tr, E), E


def mc_charfn(
    sig: Signature,
    ells: Sequence[int],
    m: Optional[int],
    trials: int,
    spec: FieldSpec,
    seed: int,
    streams: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> Estimate:
    """Monte Carlo estimate of μ_k at diag(ϖ^-ℓ_1 J, ..., ϖ^-ℓ_r J, 0, ...)."""
    ells = [int(e) for e in ells]
    m = 2 * len(ells) if m is None else int(m)
    if m < 2 * len(ells) or m % 2:
        raise ValueError("corner size must be even and at least 2r")
    total = None
    for s, count in enumerate(_split(trials, streams)):
        rng = make_rng(seed, s)
        done = 0
        while done < count:
            size = min(chunk, count - done)
            draw = draw_skew_ergodic(sig, m, spec, rng, size)
            nums, E = charfn_phase_numerators(draw, ells)
            part = CyclotomicSum.from_numerators(spec.p, E, nums)
            total = part if total is None else total + part
            done += size
    if total is None:
        raise ValueError("need at least one trial")
    return Estimate.from_counts(total, seed)


def mc_orbital(
    d_exps: Sequence[ExtInt],
    a_exps: Sequence[ExtInt],
    trials: int,
    spec: FieldSpec,
    seed: int,
    streams: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> BoundReport:
    """Monte Carlo orbital integral ∫ χ(tr(g D g^t A)) dg over GL(2n, O_F), judged against the bound."""
    n, r = len(d_exps), len(a_exps)
    kernel = OrbitalKernel(d_exps, a_exps)
    est = mc_kernel_average(kernel, "gl", spec, trials, seed, streams, chunk)
    main = theta_product(d_exps, a_exps, spec)
    bound = orbital_error_bound(n, r, spec.q)
    return BoundReport.judge("orbital", {"field": spec.to_json(), **kernel.params()}, main, bound, est)


def tau_identity_analytic(k_scale: int, x_exp: int, y_exp: int, spec: FieldSpec) -> int:
    """σ̂(diag(x, y, 0, ...)) for σ Haar on ϖ^-k Mat(O_F), |x| = q^x_exp, |y| = q^y_exp."""
    return int(k_scale + x_exp <= 0 and k_scale + y_exp <= 0)


def _mat_scale_average(spec: FieldSpec, E: int, phase_fn, trials: int, seed: int, streams: int, chunk: int, stream_prefix) -> Estimate:
    ring = ResidueRing(spec, max(E, 1))
    total = CyclotomicSum(spec.p, E)
    for s, count in enumerate(_split(trials, streams)):
        rng = make_rng(seed, *stream_prefix, s)
        done = 0
        while done < count:
            size = min(chunk, count - done)
            U = ring.from_digits(draw_digits(spec, rng, (size, 2, 2), ring.width))
            total = total + CyclotomicSum.from_numerators(spec.p, E, phase_fn(ring, U))
            done += size
    return Estimate.from_counts(total, seed)


def sigma_hat_mc(k_scale: int, x_exp: int, y_exp: int, trials: int, spec: FieldSpec, seed: int,
                 streams: int = 1, chunk: int = DEFAULT_CHUNK, stream_prefix=(0,)) -> Estimate:
    """E χ(M11 x + M22 y) for M Haar on ϖ^-k Mat(O_F), |x| = q^x_exp, |y| = q^y_exp."""
    scale = exponent_elem(spec, k_scale)
    cx, cy = exponent_elem(spec, x_exp) * scale, exponent_elem(spec, y_exp) * scale
    E = max(0, -cx.valuation, -cy.valuation)

    def phases(ring, U):
        kx, ky = ring.const(cx, E), ring.const(cy, E)
        arg = ring.add(ring.mul(kx, ring.entry(U, 0, 0)), ring.mul(ky, ring.entry(U, 1, 1)))
        return ring.phase_numerators(arg, E)

    return _mat_scale_average(spec, E, phases, trials, seed, streams, chunk, stream_prefix)


def tau_pushforward_mc(k_scale: int, x_exp: int, trials: int, spec: FieldSpec, seed: int,
                       streams: int = 1, chunk: int = DEFAULT_CHUNK, stream_prefix=(1,)) -> Estimate:
    """E χ(2^-1 x tr((M - M^t) J)) for M Haar on ϖ^-k Mat(O_F)."""
    half = spec.one() / spec(2)
    c = half * exponent_elem(spec, x_exp) * exponent_elem(spec, k_scale)
    E = max(0, -c.valuation)

    def phases(ring, U):
        J = ring.const_matrix(assemble_block_diag([0], 2, spec).entries)
        B = ring.sub(U, ring.transpose(U))
        return ring.phase_numerators(ring.mul(ring.const(c, E), ring.trace(ring.matmul(B, J))), E)

    return _mat_scale_average(spec, E, phases, trials, seed, streams, chunk, stream_prefix)


def tau_identity_check(
    k_scale: int,
    x_exp: int,
    y_exp: int,
    trials: int,
    spec: FieldSpec,
    seed: int,
    streams: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> tuple[Estimate, Estimate]:
    """Both sides of σ̂(diag(x, y, 0, ...)) = τ_*(σ)^(2^-1 x J) by Monte Carlo.

    σ is Haar on ϖ^-k Mat(O_F).  The two sides use independent streams.
    """
    if y_exp > x_exp:
        raise ValueError("need |y| ≤ |x|")
    left = sigma_hat_mc(k_scale, x_exp, y_exp, trials, spec, seed, streams, chunk)
    right = tau_pushforward_mc(k_scale, x_exp, trials, spec, seed, streams, chunk)
    return left, right


def estimates_agree(a: Estimate, b: Estimate, sigmas: float = 3.0) -> bool:
    return abs(a.value - b.value) <= sigmas * math.hypot(a.std_error, b.std_error)
