"""``dst-eval`` command line.

Exit codes: 0 success, 1 evaluation error (unparseable input, schema
violation, unknown dialogue), 2 usage error. Reports go to stdout,
diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DomainError, DSTEvalError
from .formats import (
    REPORT_FORMATS,
    build_report,
    digest,
    dump_ontology,
    dump_predictions,
    parse_ontology,
    parse_predictions,
    render_report,
)
from .metrics import DEFAULT_LAMBDAS, MetricConfig, evaluate_dataset, lambda_from_forgetting
from .model import DEFAULT_EMPTY_VALUES, NormalizationPolicy
from .synth import SynthConfig, generate, synth_ontology
from .tracing import render_trace_json, render_trace_text, trace_conversation

EXIT_OK, EXIT_EVAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def warn(message: str) -> None:
    print(f"dst-eval: warning: {message}", file=sys.stderr)


def error(message: str) -> None:
    print(f"dst-eval: error: {message}", file=sys.stderr)


def parse_lambdas(specs):
    """Parse ``["0.25,0.5", "1"]`` style flag values, dropping duplicates."""
    if not specs:
        return list(DEFAULT_LAMBDAS)
    values = []
    for spec in specs:
        for part in spec.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                lam = float(part)
            except ValueError:
                raise UsageError(f"lambda {part!r} is not a number") from None
            if math.isnan(lam) or lam < 0:
                raise UsageError(f"lambda must be a non-negative real, got {part!r}")
            if lam in values:
                warn(f"duplicate lambda {part} ignored")
                continue
            values.append(lam)
    if not values:
        raise UsageError("no lambda values given")
    return values


def read_input(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p.read_bytes()


def _policy(args) -> NormalizationPolicy:
    empty = DEFAULT_EMPTY_VALUES if args.empty_values is None else frozenset(
        v for v in args.empty_values.split(","))
    return NormalizationPolicy(lowercase=not args.keep_case, trim_whitespace=not args.keep_whitespace,
                               empty_values=empty)


def _config(args) -> MetricConfig:
    policy = _policy(args)
    ontology = None
    if args.ontology:
        ontology = parse_ontology(read_input(args.ontology), policy)
    kwargs = {}
    if getattr(args, "backend", None):
        kwargs["backend"] = args.backend
    return MetricConfig(lambdas=tuple(parse_lambdas(args.lambdas)), policy=policy, ontology=ontology, **kwargs)


def _load(path, policy, label=None):
    data = read_input(path)
    warnings = []
    try:
        convs = parse_predictions(data, policy, warnings)
    except DSTEvalError as exc:
        raise DSTEvalError(f"{label or path}: {exc}") from None
    for w in warnings[:20]:
        warn(f"{label or path}: {w}")
    if len(warnings) > 20:
        warn(f"{label or path}: {len(warnings) - 20} more warnings suppressed")
    return convs, digest(data)


def cmd_evaluate(args) -> int:
    config = _config(args)
    convs, dig = _load(args.predictions, config.policy)
    name = args.name or ("stdin" if args.predictions == "-" else Path(args.predictions).stem)
    scores = evaluate_dataset(convs, config)
    report = build_report([(name, scores)], config, {name: dig})
    sys.stdout.write(render_report(report, args.format).decode("utf-8"))
    return EXIT_OK


def cmd_compare(args) -> int:
    entries = []
    for spec in args.predictions:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"--predictions expects NAME=PATH, got {spec!r}")
        entries.append((name, path))
    if len(entries) < 2:
        raise UsageError("compare needs at least two --predictions NAME=PATH entries")
    names = [n for n, _ in entries]
    if len(set(names)) != len(names):
        raise UsageError("model names must be unique")
    config = _config(args)
    scored, digests = [], {}
    for name, path in entries:
        convs, digests[name] = _load(path, config.policy, label=name)
        scored.append((name, evaluate_dataset(convs, config)))
    counts = {s.n_turns for _, s in scored}
    if len(counts) > 1:
        detail = ", ".join(f"{n}={s.n_turns}" for n, s in scored)
        warn(f"models were scored on different numbers of turns ({detail}); rows are not directly comparable")
    report = build_report(scored, config, digests)
    sys.stdout.write(render_report(report, args.format).decode("utf-8"))
    return EXIT_OK


def cmd_trace(args) -> int:
    policy = _policy(args)
    lambdas = parse_lambdas(args.lambdas)
    convs, _ = _load(args.predictions, policy)
    match = [c for c in convs if c.id == args.dialogue_id]
    if not match:
        error(f"dialogue {args.dialogue_id!r} not found in {args.predictions}")
        return EXIT_EVAL
    trace = trace_conversation(match[0], lambdas)
    sys.stdout.write(render_trace_json(trace) if args.format == "json" else render_trace_text(trace))
    return EXIT_OK


def cmd_lambda(args) -> int:
    try:
        lam = lambda_from_forgetting(args.tf, args.p)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(f"lambda = {lam!r}\nlambda (3 d.p.) = {lam:.3f}\n")
    return EXIT_OK


def _turn_range(text):
    lo, sep, hi = text.partition("..")
    try:
        return (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise UsageError(f"--turns expects N or MIN..MAX, got {text!r}") from None


def cmd_synth(args) -> int:
    try:
        config = SynthConfig(
            seed=args.seed, conversations=args.conversations, turns_per_conversation=_turn_range(args.turns),
            n_domains=args.domains, n_slots=args.slots, n_values=args.values,
            p_type1=args.p_type1, p_drop=args.p_drop, p_spurious=args.p_spurious,
            p_overwrite=args.p_overwrite, p_empty_value=args.p_empty,
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    data = dump_predictions(generate(config))
    if args.ontology_out:
        Path(args.ontology_out).write_bytes(dump_ontology(synth_ontology(config)))
    if args.output and args.output != "-":
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return EXIT_OK


def cmd_stats(args) -> int:
    convs, _ = _load(args.predictions, _policy(args))
    n_turns = sum(len(c) for c in convs)
    sys.stdout.write(
        f"conversations: {len(convs)}\nturns: {n_turns}\n"
        f"avg_turns: {n_turns / len(convs):.2f}\n" if convs else "conversations: 0\nturns: 0\navg_turns: n/a\n"
    )
    return EXIT_OK


def _add_policy_flags(p):
    p.add_argument("--empty-values", default=None,
                   help="comma-separated slot values meaning 'no assignment' (default: ',none')")
    p.add_argument("--keep-case", action="store_true", help="do not lowercase triplet fields")
    p.add_argument("--keep-whitespace", action="store_true", help="do not trim triplet fields")


def _add_lambda_flag(p):
    p.add_argument("--lambdas", action="append", default=None,
                   help="comma-separated FGA lambdas (default: 0.25,0.5,0.75,1); may repeat")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dst-eval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score one prediction file")
    p.add_argument("--predictions", required=True, help="prediction file, or - for stdin")
    p.add_argument("--name", default=None, help="model name shown in the report")
    p.add_argument("--ontology", default=None, help="ontology file (required for slot accuracy)")
    p.add_argument("--format", choices=REPORT_FORMATS, default="table")
    p.add_argument("--backend", choices=("numba", "numpy"), default=None)
    _add_lambda_flag(p)
    _add_policy_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="score several models side by side")
    p.add_argument("--predictions", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--ontology", default=None)
    p.add_argument("--format", choices=REPORT_FORMATS, default="table")
    p.add_argument("--backend", choices=("numba", "numpy"), default=None)
    _add_lambda_flag(p)
    _add_policy_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("trace", help="per-turn error trace of one dialogue")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dialogue-id", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_lambda_flag(p)
    _add_policy_flags(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("lambda", help="lambda that forgets a mistake by factor p after tf turns")
    p.add_argument("--tf", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("synth", help="write a synthetic prediction file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--conversations", type=int, default=100)
    p.add_argument("--turns", default="3..8", help="turns per conversation, N or MIN..MAX")
    p.add_argument("--domains", type=int, default=5)
    p.add_argument("--slots", type=int, default=6)
    p.add_argument("--values", type=int, default=5)
    p.add_argument("--p-type1", type=float, default=0.1)
    p.add_argument("--p-drop", type=float, default=0.05)
    p.add_argument("--p-spurious", type=float, default=0.05)
    p.add_argument("--p-overwrite", type=float, default=0.1)
    p.add_argument("--p-empty", type=float, default=0.0)
    p.add_argument("--output", default=None, help="output path (default: stdout)")
    p.add_argument("--ontology-out", default=None, help="also write the matching ontology here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="conversation and turn counts of a prediction file")
    p.add_argument("--predictions", required=True)
    _add_policy_flags(p)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        error(str(exc))
        return EXIT_USAGE
    except DSTEvalError as exc:
        error(str(exc))
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
