"""Verification suites: configs, case runners and reports.

A suite expands its grid into independent cases.  Each case gets its own
seed derived from the suite seed and the case index, so results do not
depend on the order or the process in which cases are executed.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import field as dc_field
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Any, Optional

import numpy as np
import scipy
from scipy import stats

from . import __version__
from .charfn import (
    BoundReport,
    Estimate,
    OrbitalKernel,
    RowKernel,
    charfn_closed_form,
    estimates_agree,
    exact_quotient_integral,
    gl_vs_mat_gap_bound_exact,
    mc_charfn,
    mc_orbital,
    pairing,
    tau_identity_analytic,
    tau_identity_check,
    test_matrix,
)
from .ensembles import Signature, draw_skew_ergodic, make_rng, sample_mat_invariant
from .linalg import (
    LocalMatrix,
    assemble_block_diag,
    canonical_exponents,
    congruence,
    draw_gl_digits,
    exponent_elem,
    sample_gl,
    skew_canonical_form,
    skew_part,
)
from .local_field import NEG_INF, FieldSpec, InsufficientPrecision, Kind, LocalElem, draw_digits, format_ext
from .residue import CyclotomicSum, ResidueRing

SCHEMA = "1"
SUITES = ("canonical", "charfn", "orbital", "glmat", "correspondence", "invariance", "exchangeability")
MIN_TRIALS = 1000


def _sigs(*items):
    return [{"spikes": list(s), "tail": format_ext(t)} for s, t in items]


DEFAULT_GRIDS: dict[str, dict] = {
    "canonical": {"sizes": [1, 2, 3, 4], "primes": [3, 5], "count": 500, "valuations": [-6, 6], "congruences": 5},
    "charfn": {
        "signatures": _sigs(
            ((), NEG_INF), ((1,), NEG_INF), ((2,), NEG_INF), ((0,), NEG_INF), ((-1,), NEG_INF),
            ((2, 1), NEG_INF), ((1, 1), NEG_INF), ((2, 0, -1), NEG_INF), ((), -2), ((), 0),
            ((1,), -2), ((2, -1), -2), ((1, 0), 0), ((2, 2, 1), 0),
        ),
        "ells": [-2, -1, 0, 1, 2],
        "blocks": [[0, 0], [1, -1]],
    },
    "orbital": {"sizes": [1, 2, 3], "r": 1, "primes": [3, 5], "exponents": [-1, 2], "exact_max_points": 10**6},
    "glmat": {"cases": [[1, 1, 3, 1], [2, 1, 3, 1], [3, 1, 3, 1], [2, 2, 3, 1]], "max_kernels": 4096},
    "correspondence": {"k": [0, 1], "exponents": [-1, 1], "object_trials": 2000},
    "invariance": {
        "signatures": _sigs(((), NEG_INF), ((1,), NEG_INF), ((2, 0), NEG_INF), ((), 0), ((1,), -1), ((2, 1), 0)),
        "corner": 4,
        "bins": 7,
        "alpha": 0.01,
        "controls": True,
    },
    "exchangeability": {
        "signatures": _sigs(((), 0), ((2, 1), NEG_INF), ((1,), -1), ((1, 0), NEG_INF), ((2,), 0)),
        "corner": 4,
        "bins": 7,
        "alpha": 0.01,
        "controls": True,
    },
}

DEFAULT_TRIALS = {"invariance": 10**4}


@dataclass
class ExperimentConfig:
    suite: str
    field: FieldSpec = dc_field(default_factory=lambda: FieldSpec.padic(3))
    seed: int = 0
    trials: int = 10**5
    grid: dict = dc_field(default_factory=dict)
    threads: int = 1

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if self.trials < MIN_TRIALS:
            raise ValueError(f"trial counts must be at least {MIN_TRIALS}")
        merged = dict(DEFAULT_GRIDS[self.suite])
        merged.update(self.grid)
        self.grid = merged
        self._check_window()

    @classmethod
    def default(cls, suite: str, **kw) -> "ExperimentConfig":
        kw.setdefault("trials", DEFAULT_TRIALS.get(suite, 10**5))
        return cls(suite, **kw)

    def _check_window(self):
        N = self.field.prec
        vals = []
        g = self.grid
        for key in ("exponents", "valuations", "ells"):
            vals += list(g.get(key, []))
        for s in g.get("signatures", []):
            sig = Signature.from_json(s)
            vals += list(sig.spikes) + ([] if sig.tail == NEG_INF else [sig.tail])
        if any(abs(int(v)) >= N for v in vals):
            raise ValueError(f"grid exponents must lie within the precision window {N}")

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "field": self.field.to_json(),
            "seed": self.seed,
            "trials": self.trials,
            "grid": self.grid,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        suite = obj["suite"]
        spec = FieldSpec.from_json(obj["field"]) if "field" in obj else FieldSpec.padic(3)
        return cls(
            suite,
            spec,
            int(obj.get("seed", 0)),
            int(obj.get("trials", DEFAULT_TRIALS.get(suite, 10**5))),
            dict(obj.get("grid", {})),
            int(obj.get("threads", 1)),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        """Read a JSON config, or TOML where the interpreter ships a TOML parser."""
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError as exc:  # Python < 3.11
                raise ValueError("TOML configs need Python 3.11+; use JSON instead") from exc
            return cls.from_json(tomllib.loads(text))
        return cls.from_json(json.loads(text))

    def spec_for(self, p: int) -> FieldSpec:
        return FieldSpec(self.field.kind, p, self.field.prec)


def environment_stamp() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "skewergodic": __version__,
    }


@dataclass
class SuiteReport:
    suite: str
    config: dict
    cases: list
    wall_clock: float = 0.0
    environment: dict = dc_field(default_factory=environment_stamp)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.cases)

    def to_json(self, timing: bool = False) -> dict:
        out = {
            "schema": SCHEMA,
            "suite": self.suite,
            "config": self.config,
            "environment": self.environment,
            "cases": self.cases,
            "pass": self.passed,
        }
        if timing:
            out["wall_clock"] = self.wall_clock
        return out

    def dumps(self, timing: bool = False) -> str:
        return json.dumps(self.to_json(timing), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        cols = ["case", "experiment", "pass", "expect", "main_term", "bound", "estimate_re", "estimate_im",
                "std_error", "trials", "seed", "statistic", "dof", "p_value", "threshold", "params"]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for i, c in enumerate(self.cases):
            row = {k: c.get(k, "") for k in cols}
            row["case"] = i
            if isinstance(c.get("estimate"), dict):
                row["estimate_re"] = c["estimate"]["re"]
                row["estimate_im"] = c["estimate"]["im"]
            row["params"] = json.dumps(c.get("params", {}), sort_keys=True)
            w.writerow(row)
        return buf.getvalue()

    def write(self, path, fmt: str = "json", timing: bool = False):
        Path(path).write_text(self.to_csv() if fmt == "csv" else self.dumps(timing))


def case_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(int(index),)).generate_state(1, np.uint64)[0])


def _run_task(task):
    name, kwargs = task
    return CASE_RUNNERS[name](**kwargs)


def _execute(cfg: ExperimentConfig, tasks: list) -> SuiteReport:
    start = time.perf_counter()
    if cfg.threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            cases = list(pool.map(_run_task, tasks))
    else:
        cases = [_run_task(t) for t in tasks]
    for i, c in enumerate(cases):
        c["case"] = i
    return SuiteReport(cfg.suite, cfg.to_json(), cases, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# canonical forms


def random_skew(spec: FieldSpec, size: int, vmin: int, vmax: int, rng: np.random.Generator) -> LocalMatrix:
    """Skew matrix whose upper entries have valuations uniform in [vmin, vmax] and random unit digits."""
    zero = LocalElem.zero(spec)
    rows = [[zero] * size for _ in range(size)]
    for i in range(size):
        for j in range(i + 1, size):
            d = draw_digits(spec, rng, (1,))[0]
            d[0] = rng.integers(1, spec.p)
            x = LocalElem.from_digits(spec, int(rng.integers(vmin, vmax + 1)), d)
            rows[i][j], rows[j][i] = x, -x
    return LocalMatrix(spec, rows)


def canonical_case(spec_json: dict, n: int, count: int, valuations, congruences: int, seed: int) -> dict:
    spec = FieldSpec.from_json(spec_json)
    rng = make_rng(seed)
    fails = {"roundtrip": 0, "unimodular": 0, "order": 0, "congruence": 0, "precision": 0}
    for _ in range(count):
        A = random_skew(spec, 2 * n, valuations[0], valuations[1], rng)
        try:
            form = skew_canonical_form(A)
            fails["roundtrip"] += not form.reconstruct().equals_within(A)
            fails["unimodular"] += not form.g.is_unimodular()
            e = form.exponents
            fails["order"] += any(a < b for a, b in zip(e, e[1:]))
            for _ in range(congruences):
                h = sample_gl(spec, 2 * n, rng)
                fails["congruence"] += canonical_exponents(congruence(h, A)) != e
        except InsufficientPrecision:
            fails["precision"] += 1
    return {
        "experiment": "canonical",
        "params": {"field": spec_json, "n": n, "count": count, "valuations": list(valuations), "congruences": congruences},
        "failures": fails,
        "seed": seed,
        "pass": not any(fails.values()),
    }


def run_canonical_suite(cfg: ExperimentConfig) -> SuiteReport:
    g = cfg.grid
    tasks = []
    for p, n in product(g["primes"], g["sizes"]):
        kw = dict(spec_json=cfg.spec_for(p).to_json(), n=n, count=int(g["count"]), valuations=list(g["valuations"]),
                  congruences=int(g["congruences"]), seed=case_seed(cfg.seed, len(tasks)))
        tasks.append(("canonical", kw))
    return _execute(cfg, tasks)


# ---------------------------------------------------------------------------
# characteristic functions


def charfn_case(spec_json: dict, sig_json: dict, ells: list, trials: int, seed: int) -> dict:
    spec = FieldSpec.from_json(spec_json)
    sig = Signature.from_json(sig_json)
    exact = charfn_closed_form(sig, ells, spec)
    est = mc_charfn(sig, ells, None, trials, spec, seed)
    rep = BoundReport.judge("charfn", {"field": spec_json, "signature": sig_json, "ells": ells}, exact, 0.0, est)
    out = rep.to_json()
    out["main_term_exact"] = str(exact)
    if len(ells) > 1:
        factors = [charfn_closed_form(sig, [e], spec) for e in ells]
        mult = math.prod(factors) == exact
        out["multiplicative"] = mult
        out["pass"] = out["pass"] and mult
    return out


def run_charfn_suite(cfg: ExperimentConfig) -> SuiteReport:
    g = cfg.grid
    tasks = []
    ells_list = [[e] for e in g["ells"]] + [list(b) for b in g.get("blocks", [])]
    for s in g["signatures"]:
        for ells in ells_list:
            kw = dict(spec_json=cfg.field.to_json(), sig_json=s, ells=ells, trials=cfg.trials,
                      seed=case_seed(cfg.seed, len(tasks)))
            tasks.append(("charfn", kw))
    return _execute(cfg, tasks)


# ---------------------------------------------------------------------------
# orbital integrals and the GL-vs-Mat gap


def orbital_case(spec_json: dict, d_exps: list, a_exps: list, trials: int, seed: int, exact_max_points: int) -> dict:
    spec = FieldSpec.from_json(spec_json)
    rep = mc_orbital(d_exps, a_exps, trials, spec, seed)
    out = rep.to_json()
    kernel = OrbitalKernel(d_exps, a_exps)
    depth = max(1, kernel.depth(spec))
    if spec.p ** (depth * kernel.size**2) <= exact_max_points:
        exact = exact_quotient_integral(kernel, "gl", spec, depth=depth, budget=exact_max_points).mean()
        agrees = abs(exact - rep.estimate.value) <= 3 * rep.estimate.std_error + 1e-12
        out["exact"] = {"re": exact.real, "im": exact.imag}
        out["exact_agrees"] = bool(agrees)
        out["exact_within_bound"] = bool(abs(exact - rep.main_term) <= rep.bound + 1e-12)
        out["pass"] = out["pass"] and out["exact_agrees"] and out["exact_within_bound"]
    return out


def run_bound_sweep(cfg: ExperimentConfig) -> SuiteReport:
    if cfg.suite not in ("orbital", "glmat"):
        raise ValueError("bound sweeps cover the orbital and glmat suites")
    g = cfg.grid
    tasks = []
    if cfg.suite == "orbital":
        lo, hi = g["exponents"]
        r = int(g["r"])
        for p, n in product(g["primes"], g["sizes"]):
            for d, a in product(range(lo, hi + 1), repeat=2):
                kw = dict(spec_json=cfg.spec_for(p).to_json(), d_exps=[d] * n, a_exps=[a] * r, trials=cfg.trials,
                          seed=case_seed(cfg.seed, len(tasks)), exact_max_points=int(g["exact_max_points"]))
                tasks.append(("orbital", kw))
    else:
        for n, r, p, m in g["cases"]:
            kw = dict(spec_json=cfg.spec_for(p).to_json(), n=n, r=r, depth=m, max_kernels=int(g["max_kernels"]))
            tasks.append(("glmat", kw))
    return _execute(cfg, tasks)


def _exact(s: CyclotomicSum):
    return s.to_fraction() if s.is_rational() else None


def glmat_case(spec_json: dict, n: int, r: int, depth: int, max_kernels: int) -> dict:
    """Largest |GL average - Mat average| over all row kernels with coefficients in ϖ^-depth O / O."""
    spec = FieldSpec.from_json(spec_json)
    choices = spec.p ** (depth * r * n)
    if choices > max_kernels:
        raise ValueError(f"{choices} coefficient choices exceed max_kernels={max_kernels}")
    scale = exponent_elem(spec, depth)
    worst = None
    for t in range(choices):
        vals = []
        for _ in range(r * n):
            t, d = divmod(t, spec.p**depth)
            vals.append(spec(d) * scale if d else LocalElem.zero(spec))
        coeffs = LocalMatrix(spec, [vals[i * n : (i + 1) * n] for i in range(r)])
        kernel = RowKernel(coeffs)
        mat = exact_quotient_integral(kernel, "mat", spec, depth=depth)
        gl = exact_quotient_integral(kernel, "gl", spec, depth=depth)
        fm, fg = _exact(mat), _exact(gl)
        gap = abs(fg - fm) if fm is not None and fg is not None else abs(gl.mean() - mat.mean())
        if worst is None or gap > worst[0]:
            worst = (gap, coeffs, mat, gl)
    gap, coeffs, mat, gl = worst
    bound = gl_vs_mat_gap_bound_exact(n, r, spec.q)
    fm, fg = _exact(mat), _exact(gl)
    est = Estimate(complex(fg) if fg is not None else gl.mean(), 0.0, gl.total)
    return {
        "experiment": "glmat",
        "params": {"field": spec_json, "n": n, "r": r, "depth": depth, "kernels": choices,
                   "worst_coeffs": [x.to_json() for row in coeffs for x in row]},
        "main_term": float(fm) if fm is not None else mat.mean().real,
        "main_term_exact": str(fm) if fm is not None else None,
        "estimate_exact": str(fg) if fg is not None else None,
        "bound": float(bound),
        "bound_exact": str(bound),
        "estimate": {"re": est.value.real, "im": est.value.imag},
        "std_error": 0.0,
        "trials": est.trials,
        "seed": None,
        "gap": float(gap),
        "gap_exact": str(gap) if isinstance(gap, Fraction) else None,
        "pass": bool(gap <= bound),
    }


# ---------------------------------------------------------------------------
# correspondence


def _tau_object_estimate(spec: FieldSpec, k: int, x_exp: int, trials: int, seed: int) -> Estimate:
    """E χ(tr(X S)) with S the skew part of ϖ^-k Mat(O_F) samples and X = 2^-1 x J, on LocalMatrix objects."""
    rng = make_rng(seed, 2)
    half = spec.one() / spec(2)
    X = assemble_block_diag([half * exponent_elem(spec, x_exp)], 2, spec)
    vals = np.empty(trials, dtype=complex)
    for t in range(trials):
        S = skew_part(sample_mat_invariant(k, 2, 2, spec, rng))
        vals[t] = pairing(X, S).to_complex()
    mean = complex(vals.mean())
    se = float(np.sqrt(np.sum(np.abs(vals - mean) ** 2) / (trials - 1) / trials))
    return Estimate(mean, se, trials, seed)


def correspondence_case(spec_json: dict, k: int, x_exp: int, y_exp: int, trials: int, object_trials: int, seed: int) -> dict:
    spec = FieldSpec.from_json(spec_json)
    left, right = tau_identity_check(k, x_exp, y_exp, trials, spec, seed)
    analytic = tau_identity_analytic(k, x_exp, y_exp, spec)
    obj = _tau_object_estimate(spec, k, x_exp, object_trials, seed)
    checks = {
        "sides_agree": estimates_agree(left, right),
        "left_matches_analytic": abs(left.value - analytic) <= 3 * left.std_error,
        "right_matches_analytic": abs(right.value - analytic) <= 3 * right.std_error,
        "skew_part_matches_analytic": abs(obj.value - analytic) <= 3 * obj.std_error,
    }
    return {
        "experiment": "correspondence",
        "params": {"field": spec_json, "k": k, "x_exp": x_exp, "y_exp": y_exp},
        "main_term": float(analytic),
        "bound": 0.0,
        "left": left.to_json(),
        "right": right.to_json(),
        "skew_part": obj.to_json(),
        "estimate": {"re": right.value.real, "im": right.value.imag},
        "std_error": math.hypot(left.std_error, right.std_error),
        "trials": trials,
        "seed": seed,
        "checks": {k_: bool(v) for k_, v in checks.items()},
        "pass": bool(all(checks.values())),
    }


def run_correspondence_suite(cfg: ExperimentConfig) -> SuiteReport:
    g = cfg.grid
    lo, hi = g["exponents"]
    tasks = []
    for k in g["k"]:
        for x, y in product(range(lo, hi + 1), repeat=2):
            if y > x:
                continue
            kw = dict(spec_json=cfg.field.to_json(), k=k, x_exp=x, y_exp=y, trials=cfg.trials,
                      object_trials=int(g["object_trials"]), seed=case_seed(cfg.seed, len(tasks)))
            tasks.append(("correspondence", kw))
    return _execute(cfg, tasks)


# ---------------------------------------------------------------------------
# invariance and exchangeability


def _pfaffian(ring: ResidueRing, A, idx: tuple, memo: dict):
    if idx in memo:
        return memo[idx]
    if len(idx) == 2:
        out = ring.entry(A, idx[0], idx[1])
    else:
        first, rest = idx[0], idx[1:]
        out = None
        for pos, j in enumerate(rest):
            term = ring.mul(ring.entry(A, first, j), _pfaffian(ring, A, rest[:pos] + rest[pos + 1 :], memo))
            if out is None:
                out = term
            else:
                out = ring.sub(out, term) if pos % 2 else ring.add(out, term)
    memo[idx] = out
    return out


def pfaffian_exponents(ring: ResidueRing, A, m: int, shift: int) -> np.ndarray:
    """Canonical exponents of the m×m corner from the residues of ϖ^shift · A.

    Uses e_1 + ... + e_i = i·shift - min val Pf(A_II) over principal
    2i×2i minors.  Returns the exponents and a mask that is False where
    the residue width was too small to resolve them.
    """
    memo: dict = {}
    h = m // 2
    size = A.shape[0]
    sums = np.zeros((size, h), dtype=np.int64)
    known = np.zeros((size, h), dtype=bool)
    for i in range(1, h + 1):
        vals = [ring.valuation(_pfaffian(ring, A, I, memo)) for I in itertools.combinations(range(m), 2 * i)]
        v = np.min(np.stack(vals), axis=0)
        known[:, i - 1] = v < ring.width
        sums[:, i - 1] = i * shift - v
    ex = np.diff(np.concatenate([np.zeros((size, 1), dtype=np.int64), sums], axis=1), axis=1)
    known = np.logical_and.accumulate(known, axis=1)
    return ex, known


def _bin(values: np.ndarray, known: np.ndarray, top: int, bins: int) -> np.ndarray:
    """Index 0..bins-1 for exponents top, top-1, ..., bins for overflow."""
    idx = top - values
    ok = known & (idx >= 0) & (idx < bins)
    return np.where(ok, idx, bins)


def nested_corner_codes(ring: ResidueRing, A, m: int, shift: int, top: int, bins: int) -> np.ndarray:
    """Category code of the canonical exponents of every leading corner 2×2, 4×4, ..., m×m."""
    code = np.zeros(A.shape[0], dtype=np.int64)
    for c in range(2, m + 1, 2):
        sub = A[:, :c, :c]
        ex, known = pfaffian_exponents(ring, sub, c, shift)
        for j in range(c // 2):
            code = code * (bins + 1) + _bin(ex[:, j], known[:, j], top, bins)
    return code


def chi2_homogeneity(a: np.ndarray, b: np.ndarray, min_count: int = 10) -> tuple[float, int, float]:
    """Two-sample chi-square test on category codes; sparse categories are pooled."""
    cats, inv = np.unique(np.concatenate([a, b]), return_inverse=True)
    table = np.zeros((2, len(cats)), dtype=np.int64)
    np.add.at(table[0], inv[: len(a)], 1)
    np.add.at(table[1], inv[len(a) :], 1)
    tot = table.sum(axis=0)
    small = tot < min_count
    if small.any():
        pooled = table[:, small].sum(axis=1, keepdims=True)
        table = np.concatenate([table[:, ~small], pooled], axis=1)
        if pooled.sum() < min_count and table.shape[1] > 2:
            order = np.argsort(table[:, :-1].sum(axis=0))
            table[:, order[0]] += table[:, -1]
            table = table[:, :-1]
    if table.shape[1] < 2:
        return 0.0, 0, 1.0
    stat, pval, dof, _ = stats.chi2_contingency(table, correction=False)
    return float(stat), int(dof), float(pval)


def bowker_symmetry(table: np.ndarray) -> tuple[float, int, float]:
    """Bowker's test that a square contingency table is symmetric."""
    stat, dof = 0.0, 0
    K = table.shape[0]
    for i in range(K):
        for j in range(i + 1, K):
            s = table[i, j] + table[j, i]
            if s:
                stat += (table[i, j] - table[j, i]) ** 2 / s
                dof += 1
    if dof == 0:
        return 0.0, 0, 1.0
    return float(stat), dof, float(stats.chi2.sf(stat, dof))


def _window(sig: Signature, control_exp: Optional[int]) -> int:
    tops = [] if sig.top == NEG_INF else [int(sig.top)]
    if control_exp is not None:
        tops.append(control_exp)
    return max(tops) if tops else 0


def _draw_batches(sig, m, spec, rng, trials, chunk=20000):
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        yield draw_skew_ergodic(sig, m, spec, rng, size)
        done += size


CORNER_CONTROL_EXP = 5


def invariance_case(spec_json: dict, sig_json: dict, m: int, bins: int, trials: int, seed: int,
                    threshold: float, control: bool) -> dict:
    spec = FieldSpec.from_json(spec_json)
    sig = Signature.from_json(sig_json)
    ctrl = CORNER_CONTROL_EXP if control else None
    shift = _window(sig, ctrl)
    ring = ResidueRing(spec, (bins - 1) * (m // 2) + 1)
    forced = ring.const(exponent_elem(spec, CORNER_CONTROL_EXP), shift) if control else None

    def sample(stream):
        for draw in _draw_batches(sig, m, spec, make_rng(seed, stream), trials):
            R = draw.residues(ring, shift)
            if control:
                R[:, 0, 1] = forced
                R[:, 1, 0] = ring.neg(forced)
            yield R

    plain = np.concatenate([nested_corner_codes(ring, R, m, shift, shift, bins) for R in sample(0)])
    hrng = make_rng(seed, 2)
    moved = []
    for R in sample(1):
        h = ring.from_digits(draw_gl_digits(spec, m, hrng, R.shape[0], ring.width))
        moved.append(nested_corner_codes(ring, ring.matmul(ring.matmul(h, R), ring.transpose(h)), m, shift, shift, bins))
    stat, dof, pval = chi2_homogeneity(plain, np.concatenate(moved))
    rejected = pval < threshold
    return {
        "experiment": "invariance",
        "params": {"field": spec_json, "signature": sig_json, "corner": m, "bins": bins,
                   "control": "corner entry forced to ϖ^-5" if control else None},
        "trials": trials,
        "seed": seed,
        "statistic": stat,
        "dof": dof,
        "p_value": pval,
        "threshold": threshold,
        "expect": "reject" if control else "pass",
        "pass": bool(rejected == control),
    }


def exchangeability_case(spec_json: dict, sig_json: dict, m: int, bins: int, trials: int, seed: int,
                         threshold: float, control: bool) -> dict:
    spec = FieldSpec.from_json(spec_json)
    sig = Signature.from_json(sig_json)
    shift = _window(sig, None)
    ring = ResidueRing(spec, bins)
    table = np.zeros((bins + 1, bins + 1), dtype=np.int64)
    for draw in _draw_batches(sig, m, spec, make_rng(seed), trials):
        R = draw.residues(ring, shift)
        a, b = ring.entry(R, 0, 1), ring.entry(R, 2, 3)
        if control:
            a = ring.scale(a, 1)
        va = np.minimum(ring.valuation(a), bins)
        vb = np.minimum(ring.valuation(b), bins)
        np.add.at(table, (va, vb), 1)
    stat, dof, pval = bowker_symmetry(table)
    rejected = pval < threshold
    return {
        "experiment": "exchangeability",
        "params": {"field": spec_json, "signature": sig_json, "corner": m, "bins": bins,
                   "control": "A(1,2) scaled by ϖ" if control else None},
        "trials": trials,
        "seed": seed,
        "statistic": stat,
        "dof": dof,
        "p_value": pval,
        "threshold": threshold,
        "expect": "reject" if control else "pass",
        "pass": bool(rejected == control),
    }


def _statistical_tasks(cfg: ExperimentConfig, name: str, control_sig: dict) -> list:
    g = cfg.grid
    sigs = list(g["signatures"])
    threshold = float(g["alpha"]) / len(sigs)
    tasks = []
    runs = [(s, False) for s in sigs] + ([(control_sig, True)] if g.get("controls", True) else [])
    for s, control in runs:
        kw = dict(spec_json=cfg.field.to_json(), sig_json=s, m=int(g["corner"]), bins=int(g["bins"]),
                  trials=cfg.trials, seed=case_seed(cfg.seed, len(tasks)), threshold=threshold, control=control)
        tasks.append((name, kw))
    return tasks


def run_invariance_suite(cfg: ExperimentConfig) -> SuiteReport:
    control = cfg.grid.get("control_signature", {"spikes": [1], "tail": "-inf"})
    return _execute(cfg, _statistical_tasks(cfg, "invariance", control))


def run_exchangeability_suite(cfg: ExperimentConfig) -> SuiteReport:
    control = cfg.grid.get("control_signature", {"spikes": [], "tail": "0"})
    return _execute(cfg, _statistical_tasks(cfg, "exchangeability", control))


CASE_RUNNERS = {
    "canonical": canonical_case,
    "charfn": charfn_case,
    "orbital": orbital_case,
    "glmat": glmat_case,
    "correspondence": correspondence_case,
    "invariance": invariance_case,
    "exchangeability": exchangeability_case,
}

SUITE_RUNNERS = {
    "canonical": run_canonical_suite,
    "charfn": run_charfn_suite,
    "orbital": run_bound_sweep,
    "glmat": run_bound_sweep,
    "correspondence": run_correspondence_suite,
    "invariance": run_invariance_suite,
    "exchangeability": run_exchangeability_suite,
}


def run_suite(cfg: ExperimentConfig) -> SuiteReport:
    return SUITE_RUNNERS[cfg.suite](cfg)
