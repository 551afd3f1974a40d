"""Acceptance criteria, each run at its stated scale and tolerance.

Every test prints one ``PASS``/``FAIL`` line.  Run on its own with
``pytest tests/test_acceptance.py -v`` (a few minutes on one core).
"""
import itertools
import time
from fractions import Fraction

import pytest

from skewergodic.charfn import ThetaKernel, charfn_closed_form, charfn_fingerprint, exact_quotient_integral
from skewergodic.ensembles import Signature
from skewergodic.experiments import ExperimentConfig, run_suite
from skewergodic.linalg import exponent_elem
from skewergodic.local_field import NEG_INF, FieldSpec, theta

SEED = 20240611
REPORTS: dict = {}


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return emit


def suite(name, **kw):
    cfg = ExperimentConfig.default(name, seed=SEED, threads=1, **kw)
    start = time.perf_counter()
    rep = run_suite(cfg)
    REPORTS[name] = (cfg, rep.dumps())
    return rep, time.perf_counter() - start


def failing(rep):
    return [c["case"] for c in rep.cases if not c["pass"]]


def test_criterion_1_theta_exact(report):
    cases = [(FieldSpec.padic(3), e) for e in (0, 1, 2, 3)] + [(FieldSpec.padic(2), e) for e in (1, 2)]
    bad, slowest = [], 0.0
    for spec, e in cases:
        t = time.perf_counter()
        got = exact_quotient_integral(ThetaKernel(exponent_elem(spec, e)), "mat", spec).to_fraction()
        dt = time.perf_counter() - t
        slowest = max(slowest, dt)
        if got != theta(e, spec) or dt >= 1.0:
            bad.append((str(spec), e, got, dt))
    assert theta(1, FieldSpec.padic(3)) == Fraction(1, 9)
    report(1, not bad, f"{len(cases)} theta cases exact, slowest {slowest:.3f}s" if not bad else f"mismatches {bad}")


def test_criterion_2_charfn(report):
    rep, dt = suite("charfn")
    sigs = [Signature.from_json(s) for s in rep.config["grid"]["signatures"]]
    grid_ok = (len(sigs) >= 12
               and all(-2 <= k <= 2 for s in sigs for k in s.spikes)
               and all(s.tail in (NEG_INF, -2, 0) for s in sigs)
               and set(rep.config["grid"]["ells"]) == set(range(-2, 3)))
    blocks = [c for c in rep.cases if len(c["params"]["ells"]) == 2]
    mult = all(c["multiplicative"] for c in blocks) and len(blocks) == 2 * len(sigs)
    tight = all(3 * c["std_error"] <= 0.0095 for c in rep.cases)
    ok = grid_ok and mult and tight and rep.passed
    report(2, ok, f"{len(rep.cases)} cases over {len(sigs)} signatures, failing {failing(rep)}, "
                  f"multiplicative {mult}, 3SE<=0.0095 {tight} ({dt:.0f}s)")


def test_criterion_3_orbital(report):
    rep, dt = suite("orbital")
    g = rep.config["grid"]
    grid_ok = g["sizes"] == [1, 2, 3] and g["r"] == 1 and g["primes"] == [3, 5] and g["exponents"] == [-1, 2]
    ok = grid_ok and rep.passed and len(rep.cases) == 96 and dt <= 300
    report(3, ok, f"{len(rep.cases)} cases, failing {failing(rep)}, {dt:.0f}s (limit 300s)")


def test_criterion_4_glmat(report):
    rep, dt = suite("glmat")
    n1 = rep.cases[0]
    exact_ok = n1["gap_exact"] == "1/2" and n1["bound_exact"] == "2/3" \
        and n1["main_term_exact"] == "0" and n1["estimate_exact"] == "-1/2"
    dims = [(c["params"]["n"], c["params"]["r"]) for c in rep.cases]
    ok = rep.passed and exact_ok and dims == [(1, 1), (2, 1), (3, 1), (2, 2)]
    gaps = ", ".join(f"{c['gap_exact']}<={c['bound_exact']}" for c in rep.cases)
    report(4, ok, f"gaps {gaps} ({dt:.0f}s)")


def test_criterion_5_canonical(report):
    rep, dt = suite("canonical")
    g = rep.config["grid"]
    grid_ok = g["count"] == 500 and g["sizes"] == [1, 2, 3, 4] and g["primes"] == [3, 5] \
        and g["valuations"] == [-6, 6] and g["congruences"] == 5
    fails = {k: sum(c["failures"][k] for c in rep.cases) for k in rep.cases[0]["failures"]}
    report(5, grid_ok and rep.passed, f"{len(rep.cases)} cases x 500 matrices, failures {fails} ({dt:.0f}s)")


def test_criterion_6_correspondence(report):
    rep, dt = suite("correspondence")
    trivial = [c for c in rep.cases if c["params"] == {**c["params"], "k": 0, "x_exp": 0, "y_exp": 0}][0]
    exact = trivial["left"]["re"] == 1.0 and trivial["right"]["re"] == 1.0 and trivial["std_error"] == 0
    covered = {(c["params"]["k"], c["params"]["x_exp"], c["params"]["y_exp"]) for c in rep.cases}
    want = {(k, x, y) for k in (0, 1) for x in (-1, 0, 1) for y in (-1, 0, 1) if y <= x}
    ok = rep.passed and exact and covered == want
    report(6, ok, f"{len(rep.cases)} cases, failing {failing(rep)}, trivial case exact {exact} ({dt:.0f}s)")


def test_criterion_7_invariance_exchangeability(report):
    lines, ok = [], True
    for name in ("invariance", "exchangeability"):
        rep, dt = suite(name)
        controls = [c for c in rep.cases if c["expect"] == "reject"]
        rejected = all(c["p_value"] < c["threshold"] for c in controls) and len(controls) == 1
        thr = {c["threshold"] for c in rep.cases}
        bonf = thr == {0.01 / (len(rep.cases) - 1)}
        ok &= rep.passed and rejected and bonf
        pv = min(c["p_value"] for c in rep.cases if c["expect"] == "pass")
        lines.append(f"{name}: {len(rep.cases) - 1} cases pass (min p {pv:.3g}), control rejected {rejected} ({dt:.0f}s)")
    report(7, ok, "; ".join(lines))


def _signatures(max_spikes=4):
    out = []
    for tail in [NEG_INF] + list(range(-3, 4)):
        lo = -3 if tail == NEG_INF else tail
        for n in range(max_spikes + 1):
            for spikes in itertools.combinations_with_replacement(range(3, lo - 1, -1), n):
                out.append(Signature(spikes, tail))
    return sorted(set(out), key=str)


def test_criterion_8_separation(report):
    sigs = _signatures()
    ok = True
    for spec in (FieldSpec.padic(3), FieldSpec.padic(5), FieldSpec.laurent(3)):
        prints = {}
        for s in sigs:
            prints.setdefault(charfn_fingerprint(s, spec), []).append(s)
        clashes = [v for v in prints.values() if len(v) > 1]
        ok &= not clashes
    pairs = len(sigs) * (len(sigs) - 1) // 2
    assert charfn_closed_form(Signature((3,)), [4], FieldSpec.padic(3)) != charfn_closed_form(Signature((3,), -3), [4], FieldSpec.padic(3))
    report(8, ok, f"{len(sigs)} signatures ({pairs} pairs) separated by l in [-4, 4] over Q_3, Q_5, F_3((t))")


def test_criterion_9_reproducible(report):
    missing = [n for n in ("charfn", "orbital", "glmat", "canonical", "correspondence", "invariance", "exchangeability")
               if n not in REPORTS]
    for name in missing:
        suite(name, trials=1000) if name != "canonical" else suite(name, grid={"count": 20})
    diffs = []
    for name, (cfg, text) in REPORTS.items():
        cfg.threads = 2
        if run_suite(cfg).dumps() != text:
            diffs.append(name)
    report(9, not diffs, f"{len(REPORTS)} suites rerun with the same seed (2 workers): "
                         + ("byte-identical" if not diffs else f"differ: {diffs}"))
