"""Command-line front end.

Every subcommand is seeded; when ``--seed`` is omitted a fresh seed is
generated.  The effective seed always goes to standard error so that any
run can be repeated.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import secrets
import sys
import time
from pathlib import Path

from .charfn import BoundReport, charfn_closed_form, mc_charfn, mc_orbital
from .ensembles import Signature, make_rng, sample_skew_ergodic
from .experiments import (
    MIN_TRIALS,
    SCHEMA,
    SUITES,
    ExperimentConfig,
    correspondence_case,
    glmat_case,
    run_suite,
)
from .linalg import LocalMatrix, skew_canonical_form
from .local_field import DEFAULT_PRECISION, FieldSpec, InsufficientPrecision, Kind, parse_ext

OUTPUT_DIR_ENV = "SKEWERGODIC_OUTPUT_DIR"


class UsageError(Exception):
    pass


def _int_list(text: str) -> list:
    if text.strip() == "":
        return []
    return [int(t) for t in text.split(",")]


def _ext_list(text: str) -> list:
    if text.strip() == "":
        return []
    return [parse_ext(t) for t in text.split(",")]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--field", choices=[k.value for k in Kind], default=None, help="padic (default) or laurent")
    p.add_argument("--p", type=int, default=None, help="residue characteristic (default 3)")
    p.add_argument("--prec", type=int, default=None, help="relative precision in digits (default 24)")
    p.add_argument("--seed", type=int, default=None, help="rng seed (generated and printed when omitted)")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", default=None, help=f"output file (default: stdout, or ${OUTPUT_DIR_ENV}/<name>)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--timing", action="store_true", help="report wall-clock on stderr")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="skewergodic", description="Skew-symmetric matrices over local fields.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", parents=[common], help="sample corners of an ergodic measure")
    s.add_argument("--spikes", type=_int_list, default=[], help="comma-separated spikes, e.g. 2,1")
    s.add_argument("--tail", default="-inf")
    s.add_argument("--sig", default=None, help="signature JSON file (overrides --spikes/--tail)")
    s.add_argument("--corner", type=int, default=4)
    s.add_argument("--count", type=int, default=1)

    c = sub.add_parser("canon", parents=[common], help="canonical skew form of a matrix file")
    c.add_argument("--in", dest="infile", required=True, help="matrix JSON file")
    c.add_argument("--lenient", action="store_true", help="treat unresolved zeros as zero")

    f = sub.add_parser("charfn", parents=[common], help="Monte Carlo characteristic function vs closed form")
    f.add_argument("--spikes", type=_int_list, default=[])
    f.add_argument("--tail", default="-inf")
    f.add_argument("--sig", default=None)
    f.add_argument("--ells", type=_int_list, default=[0])
    f.add_argument("--corner", type=int, default=None)

    o = sub.add_parser("orbital", parents=[common], help="orbital integral against its bound")
    o.add_argument("--D", dest="d_exps", type=_ext_list, required=True, help="exponents of D, e.g. 1,0")
    o.add_argument("--A", dest="a_exps", type=_ext_list, required=True, help="exponents of A, e.g. 0")

    g = sub.add_parser("glmat", parents=[common], help="exact GL-vs-Mat gap for row kernels")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--r", type=int, default=1)
    g.add_argument("--depth", type=int, default=1)

    t = sub.add_parser("correspond", parents=[common], help="Mat/Skew correspondence identity")
    t.add_argument("--k", type=int, default=0)
    t.add_argument("--x", dest="x_exp", type=int, required=True)
    t.add_argument("--y", dest="y_exp", type=int, required=True)
    t.add_argument("--object-trials", type=int, default=2000)

    u = sub.add_parser("suite", parents=[common], help="run a verification suite")
    u.add_argument("--name", choices=SUITES, default=None)
    u.add_argument("--config", default=None, help="JSON (or TOML on Python 3.11+) config file")
    return parser


def _merge_negative_values(argv: list) -> list:
    """Let values such as ``-inf`` or ``-1,0`` follow an option without ``=``."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--") and "=" not in tok and nxt and nxt.startswith("-") and not nxt.startswith("--") and len(nxt) > 1:
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def _spec(args) -> FieldSpec:
    try:
        return FieldSpec(
            Kind(args.field or "padic"),
            3 if args.p is None else args.p,
            DEFAULT_PRECISION if args.prec is None else args.prec,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _signature(args) -> Signature:
    if args.sig:
        return Signature.from_json(json.loads(Path(args.sig).read_text()))
    try:
        return Signature(tuple(args.spikes), parse_ext(args.tail))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _flatten(obj, prefix="") -> dict:
    out = {}
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def _csv(rows: list) -> str:
    flat = [_flatten(r) for r in rows]
    cols = []
    for r in flat:
        cols += [k for k in r if k not in cols]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(flat)
    return buf.getvalue()


def _emit(args, name: str, payload: dict, csv_text: str | None = None):
    if args.format == "csv":
        text = csv_text if csv_text is not None else _csv([payload])
    else:
        payload = {"schema": SCHEMA, **payload}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    target = args.out
    if target is None and os.environ.get(OUTPUT_DIR_ENV):
        target = str(Path(os.environ[OUTPUT_DIR_ENV]) / f"{name}.{args.format}")
    if target is None:
        sys.stdout.write(text)
    else:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        Path(target).write_text(text)
        print(f"wrote {target}", file=sys.stderr)


def _trials(args, default: int) -> int:
    trials = default if args.trials is None else args.trials
    if trials < MIN_TRIALS:
        raise UsageError(f"--trials must be at least {MIN_TRIALS}")
    return trials


def cmd_sample(args, seed):
    spec, sig = _spec(args), _signature(args)
    rng = make_rng(seed)
    samples = []
    for i in range(args.count):
        s = sample_skew_ergodic(sig, args.corner, spec, rng)
        d = s.to_json()
        d["seed"], d["index"] = seed, i
        samples.append(d)
    _emit(args, f"sample-{seed}", {"samples": samples}, _csv(samples) if args.format == "csv" else None)
    return 0


def cmd_canon(args, seed):
    A = LocalMatrix.from_json(json.loads(Path(args.infile).read_text()))
    form = skew_canonical_form(A, strict=not args.lenient)
    payload = {"g": form.g.to_json(), "exponents": [e if isinstance(e, int) else str(e) for e in form.exponents]}
    _emit(args, "canon", _jsonable(payload))
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return "inf" if obj > 0 else "-inf"
    return obj


def cmd_charfn(args, seed):
    spec, sig = _spec(args), _signature(args)
    est = mc_charfn(sig, args.ells, args.corner, _trials(args, 10**5), spec, seed)
    exact = charfn_closed_form(sig, args.ells, spec)
    rep = BoundReport.judge("charfn", {"field": spec.to_json(), "signature": sig.to_json(), "ells": args.ells}, exact, 0.0, est)
    out = rep.to_json()
    out["main_term_exact"] = str(exact)
    _emit(args, f"charfn-{seed}", out)
    return 0 if rep.passed else 1


def cmd_orbital(args, seed):
    spec = _spec(args)
    rep = mc_orbital(args.d_exps, args.a_exps, _trials(args, 10**5), spec, seed)
    _emit(args, f"orbital-{seed}", rep.to_json())
    return 0 if rep.passed else 1


def cmd_glmat(args, seed):
    spec = _spec(args)
    out = glmat_case(spec.to_json(), args.n, args.r, args.depth, 4096)
    _emit(args, "glmat", out)
    return 0 if out["pass"] else 1


def cmd_correspond(args, seed):
    spec = _spec(args)
    if args.y_exp > args.x_exp:
        raise UsageError("need |y| ≤ |x|, i.e. --y at most --x")
    out = correspondence_case(spec.to_json(), args.k, args.x_exp, args.y_exp, _trials(args, 10**5), args.object_trials, seed)
    _emit(args, f"correspond-{seed}", out)
    return 0 if out["pass"] else 1


def _read_config(path: str) -> dict:
    return ExperimentConfig.load(path).to_json()


def _config_seed(path: str):
    text = Path(path).read_text()
    if path.endswith(".toml"):
        return None
    return json.loads(text).get("seed")


def cmd_suite(args, seed):
    if args.config:
        obj = _read_config(args.config)
        if args.name and args.name != obj["suite"]:
            raise UsageError(f"--name {args.name} disagrees with config suite {obj['suite']}")
    elif args.name:
        obj = {"suite": args.name, "field": FieldSpec.padic(3).to_json()}
    else:
        raise UsageError("suite needs --name or --config")
    obj["seed"] = seed
    field = dict(obj["field"])
    if args.field is not None:
        field["kind"] = args.field
    if args.p is not None:
        field["p"] = args.p
    if args.prec is not None:
        field["prec"] = args.prec
    obj["field"] = field
    grid = dict(obj.get("grid", {}))
    if args.p is not None and obj["suite"] in ("canonical", "orbital"):
        grid["primes"] = [args.p]
    obj["grid"] = grid
    if args.trials is not None:
        obj["trials"] = args.trials
    obj["threads"] = args.threads
    try:
        cfg = ExperimentConfig.from_json(obj)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = run_suite(cfg)
    if args.timing:
        print(f"wall-clock: {report.wall_clock:.2f}s", file=sys.stderr)
    text = report.to_csv() if args.format == "csv" else report.dumps()
    name = f"suite-{cfg.suite}-{seed}.{args.format}"
    target = args.out
    if target is None and os.environ.get(OUTPUT_DIR_ENV):
        target = str(Path(os.environ[OUTPUT_DIR_ENV]) / name)
    if target is None:
        sys.stdout.write(text)
    else:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        Path(target).write_text(text)
        print(f"wrote {target}", file=sys.stderr)
    failed = [c["case"] for c in report.cases if not c["pass"]]
    print(f"suite {cfg.suite}: {'pass' if report.passed else 'FAIL'} ({len(report.cases)} cases"
          + (f", failing: {failed}" if failed else "") + ")", file=sys.stderr)
    return 0 if report.passed else 1


COMMANDS = {
    "sample": cmd_sample,
    "canon": cmd_canon,
    "charfn": cmd_charfn,
    "orbital": cmd_orbital,
    "glmat": cmd_glmat,
    "correspond": cmd_correspond,
    "suite": cmd_suite,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_merge_negative_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    seed = args.seed
    try:
        if seed is None and args.command == "suite" and args.config:
            seed = _config_seed(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    if seed is None:
        seed = secrets.randbelow(2**32)
    print(f"seed: {seed}", file=sys.stderr)
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, seed)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InsufficientPrecision as exc:
        print(f"precision error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    if args.timing and args.command != "suite":
        print(f"wall-clock: {time.perf_counter() - start:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
