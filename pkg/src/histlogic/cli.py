"""Command-line entry point: ``histlogic check|run|builtin``."""

from __future__ import annotations

import argparse
import os
import sys
from collections.abc import Sequence

from .dsl import (
    DslError,
    Environment,
    Report,
    build_environment,
    environment_from_model,
    evaluate,
    parse_expression,
    parse_model,
    parse_query,
    render_json,
    render_text,
    run_query,
)
from .errors import HistLogicError
from .models import BUILTIN_MODELS

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

DEFAULT_QUERIES = {
    "spin-measurement": [
        "prob alpha @ t1 given X+ @ t2 in F1",
        "prob beta @ t1 given X+ @ t2 in F1",
        "prob X+ @ t2 given gamma*X @ t1 in F2",
        "prob X- @ t2 given gamma*X @ t1 in F2",
        "prob G @ t2 given gamma*X @ t1 in F3",
        "consistent F4",
        "prob alpha @ t1.5 given gamma*X @ t1, X+ @ t2 in F4",
    ],
    "two-device": [
        "prob X+Z+ @ t3 given psi1 @ t1 in F1",
        "infer {(F2, psi1 @ t1) (F2, X+Z+ @ t3)} => {(F2, alpha @ t2)}",
        "infer {(F3, psi1 @ t1) (F3, X+Z+ @ t3)} => {(F3, gamma @ t2)}",
        "prob (gamma @ t2, gamma @ t2.5) or (delta @ t2, delta @ t2.5) given psi1 @ t1, X+Z+ @ t3 in F4",
    ],
    "double-slit": [
        "consistent F2",
        "consistent F3",
        "prob P @ t2 given Psi1 @ t1 in F2",
        "prob PA @ t2 and PB @ t2 given Psi1 @ t1 in F3",
    ],
}
INT_PARAMS = {"num_detectors", "alternate_completion"}


class UsageError(Exception):
    pass


def _float(text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"{what} must be a number, got {text!r}") from None
    if not value >= 0:
        raise UsageError(f"{what} must be non-negative")
    return value


def _tolerances(args) -> tuple[float | None, float | None]:
    eps = None
    env_eps = os.environ.get("HISTLOGIC_EPS")
    if env_eps:
        eps = _float(env_eps, "HISTLOGIC_EPS")
    if args.eps is not None:
        eps = _float(args.eps, "--eps")
    eps_c = _float(args.eps_consistency, "--eps-consistency") if args.eps_consistency is not None else None
    return eps, eps_c


def _param(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise UsageError(f"--param expects key=value, got {text!r}")
    key = key.strip().replace("-", "_")
    try:
        value = Environment().value(parse_expression(raw))
    except (DslError, HistLogicError):
        return key, raw.strip()
    if not isinstance(value, complex) or value.imag != 0:
        return key, raw.strip()
    if key in INT_PARAMS:
        if value.real != int(value.real):
            raise UsageError(f"{key} must be an integer")
        return key, int(value.real)
    return key, value.real


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _emit(report: Report, fmt: str) -> int:
    sys.stdout.write(render_json(report) if fmt == "json" else render_text(report))
    return report.exit_code


def cmd_check(args) -> int:
    text = _read(args.file)
    try:
        spec = parse_model(text)
    except DslError as exc:
        print(f"{args.file}:{exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{args.file}: ok ({len(spec.statements) - len(spec.queries)} declarations, {len(spec.queries)} queries)")
    return EXIT_OK


def cmd_run(args) -> int:
    text = _read(args.file)
    eps, eps_c = _tolerances(args)
    try:
        spec = parse_model(text)
        env = build_environment(spec, eps, eps_c)
    except DslError as exc:
        print(f"{args.file}:{exc}", file=sys.stderr)
        return EXIT_USAGE
    return _emit(evaluate(spec, env=env), args.format)


def cmd_builtin(args) -> int:
    eps, eps_c = _tolerances(args)
    params = dict(_param(p) for p in args.param)
    if eps is not None:
        params["eps"] = eps
    if eps_c is not None:
        params["eps_consistency"] = eps_c
    builder = BUILTIN_MODELS[args.model]
    try:
        model = builder(**params)
    except TypeError as exc:
        raise UsageError(f"bad parameter for {args.model}: {exc}") from None
    except (ValueError, HistLogicError) as exc:
        raise UsageError(f"cannot build {args.model}: {exc}") from None
    env = environment_from_model(model)
    texts = args.query or DEFAULT_QUERIES[args.model]
    queries = []
    for k, q in enumerate(texts, start=1):
        try:
            queries.append(parse_query(q))
        except DslError as exc:
            print(f"query {k}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    results = tuple(run_query(env, q, k) for k, q in enumerate(queries, start=1))
    return _emit(Report(results, env.eps, env.eps_consistency), args.format)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="histlogic", description="Consistent-histories reasoning on model files.")
    sub = parser.add_subparsers(dest="command", required=True)

    def tolerance_flags(p):
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--eps", help="linear-algebra tolerance (overrides HISTLOGIC_EPS)")
        p.add_argument("--eps-consistency", dest="eps_consistency", help="relative consistency threshold")

    p = sub.add_parser("check", help="parse and statically check a model file")
    p.add_argument("file")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="evaluate every query in a model file")
    p.add_argument("file")
    tolerance_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("builtin", help="query a built-in model")
    p.add_argument("model", choices=sorted(BUILTIN_MODELS))
    p.add_argument("--query", action="append", default=[], help="query text (repeatable)")
    p.add_argument("--param", action="append", default=[], help="model parameter key=value (repeatable)")
    tolerance_flags(p)
    p.set_defaults(func=cmd_builtin)
    return parser


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"histlogic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())
