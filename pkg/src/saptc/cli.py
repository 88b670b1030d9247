"""Command-line front end.

Exit codes: 0 success (matches_spec / equivalent), 1 negative verdict
(deviates / not equivalent), 2 error.  Errors are one line on stderr:

    saptc: error[<code>] <message>

where a parse error message starts with ``line:col:``.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from .dsl import ParseError, parse, parse_term
from .equivalence import check, minimize
from .model import validate
from .protocols import CATEGORIES, UnknownProtocol, builtin, catalogue, verify_model
from .rewriter import ContainsRecursion, NotClosed, RewriteBudgetExceeded, to_basic_term
from .semantics import (
    BuildConfig, FRESHNESS_MODES, Lts, StateSpaceExceeded, UngroundAction, UngroundGuard,
    generate_lts, spec_lts,
)
from .terms import GuardednessError, ModelError, UnknownDomain, show_term

SCHEMA_VERSION = 1


class CliError(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _line_col(text, offset):
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _parse_error(text, err):
    line, col = _line_col(text, err.position)
    msg = str(err).split(": ", 1)[-1]
    return CliError("parse", f"{line}:{col}: {msg}")


def _is_file(arg):
    return arg.endswith((".saptc", ".json")) or os.sep in arg or Path(arg).is_file()


def _read(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CliError("io", f"cannot read {path}: {e.strerror}") from None


def load_model(arg, delta=None):
    """A built-in name or a path to a model file; ``delta`` resizes Delta."""
    if not _is_file(arg):
        if arg not in CATEGORIES:
            raise CliError("unknown-protocol", str(UnknownProtocol(arg)))
        return builtin(arg, delta or 1)
    text = _read(arg)
    try:
        model = parse(text)
    except ParseError as e:
        raise _parse_error(text, e) from None
    if delta is not None:
        model = model.with_delta(delta)
    validate(model)
    return model


def _config(args):
    try:
        max_states = args.max_states
        if max_states is None:
            return BuildConfig(freshness=args.freshness)
        return BuildConfig(max_states=max_states, freshness=args.freshness)
    except ValueError as e:
        raise CliError("config", str(e)) from None


def _dump(data):
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def _write(path, text, out):
    if path == "-":
        out.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise CliError("io", f"cannot write {path}: {e.strerror}") from None


# -- subcommands -------------------------------------------------------------------

def cmd_verify(args, out):
    model = load_model(args.model, args.delta)
    report = verify_model(model, _config(args))
    if args.json:
        data = {"schema_version": SCHEMA_VERSION, **report.as_dict(timing=args.timing)}
        out.write(_dump(data))
    else:
        out.write(f"{report.name}: {report.verdict}\n")
        out.write(f"  lts: {report.lts_states} states, {report.lts_transitions} transitions; "
                  f"minimized: {report.minimized_states}; spec: {report.spec_states}\n")
        if args.timing:
            out.write(f"  time: {report.wall_time:.3f}s\n")
        if report.counterexample is not None:
            out.write("  counterexample: " + json.dumps(report.counterexample, sort_keys=True)
                      + "\n")
    return 0 if report.matches else 1


def _lts_of(arg, args, spec=False):
    if arg.endswith(".json"):
        try:
            return Lts.from_json(_read(arg))
        except (ValueError, KeyError, TypeError) as e:
            raise CliError("io", f"{arg} is not an LTS export: {e}") from None
    model = load_model(arg, getattr(args, "delta", None))
    cfg = _config(args)
    return spec_lts(model, cfg) if spec else generate_lts(model, cfg)


def cmd_lts(args, out):
    lts = _lts_of(args.model, args, spec=args.spec)
    if args.dot:
        _write(args.dot, lts.to_dot(), out)
    if args.json:
        _write(args.json, lts.to_json(), out)
    if not args.dot and not args.json:
        out.write(f"{lts.n_states} states, {lts.n_transitions} transitions, "
                  f"{len(lts.term)} terminating\n")
    return 0


def cmd_minimize(args, out):
    lts = _lts_of(args.file, args)
    _write(args.output, minimize(lts, args.mode).to_json(), out)
    return 0


def cmd_diff(args, out):
    a = _lts_of(args.a, args)
    b = _lts_of(args.b, args)
    verdict = check(a, b, args.mode)
    if args.json:
        out.write(_dump({"schema_version": SCHEMA_VERSION, **verdict.as_dict()}))
    else:
        word = "equivalent" if verdict.equivalent else "not equivalent"
        out.write(f"{word} ({args.mode})\n")
        if verdict.counterexample is not None:
            out.write("  counterexample: " + json.dumps(verdict.counterexample, sort_keys=True)
                      + "\n")
    return 0 if verdict.equivalent else 1


def cmd_normalize(args, out):
    try:
        t = parse_term(args.term)
    except ParseError as e:
        raise _parse_error(args.term, e) from None
    out.write(show_term(to_basic_term(t, args.mode)) + "\n")
    return 0


def cmd_list(args, out):
    entries = catalogue()
    if args.json:
        out.write(_dump({"schema_version": SCHEMA_VERSION, "protocols": entries}))
        return 0
    width = max(len(e["name"]) for e in entries)
    cat_width = max(len(e["category"]) for e in entries)
    for e in entries:
        out.write(f"{e['name']:<{width}}  {e['category']:<{cat_width}}  {e['summary']}\n")
    return 0


def _build_options(p, delta=True):
    if delta:
        p.add_argument("--delta", type=int, help="size of the data domain Delta")
    p.add_argument("--max-states", type=int, default=None,
                   help="state bound (default: $SAPTC_MAX_STATES or 100000)")
    p.add_argument("--freshness", choices=FRESHNESS_MODES, default="nondet")


def build_parser():
    parser = _Parser(prog="saptc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", help="check a protocol against its expected behaviour")
    p.add_argument("model", help="built-in name or .saptc file")
    _build_options(p)
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.add_argument("--timing", action="store_true", help="include wall-clock time")
    p.set_defaults(run=cmd_verify)

    p = sub.add_parser("lts", help="explore and export a state space")
    p.add_argument("model", help="built-in name or .saptc file")
    _build_options(p)
    p.add_argument("--spec", action="store_true", help="export the expected-behaviour LTS instead")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--dot", metavar="OUT", help="write Graphviz DOT ('-' for stdout)")
    fmt.add_argument("--json", metavar="OUT", help="write JSON ('-' for stdout)")
    p.set_defaults(run=cmd_lts)

    p = sub.add_parser("minimize", help="quotient an exported LTS")
    p.add_argument("file", help="LTS JSON export")
    p.add_argument("--mode", choices=("strong", "branching"), default="branching")
    p.add_argument("-o", "--output", default="-", help="output path ('-' for stdout)")
    p.set_defaults(run=cmd_minimize)

    p = sub.add_parser("diff", help="compare two state spaces")
    p.add_argument("a", help="built-in name, .saptc model or LTS JSON export")
    p.add_argument("b")
    p.add_argument("--mode", choices=("strong", "branching", "rooted"), default="rooted")
    _build_options(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_diff)

    p = sub.add_parser("normalize", help="basic-term normal form of a closed term")
    p.add_argument("term")
    p.add_argument("--mode", choices=("strong", "rooted_branching"), default="strong")
    p.set_defaults(run=cmd_normalize)

    p = sub.add_parser("list", help="list the built-in protocols")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_list)
    return parser


_ERRORS = (
    (StateSpaceExceeded, "state-limit"),
    (GuardednessError, "unguarded"),
    (UnknownDomain, "unknown-domain"),
    (ModelError, "model"),
    (UngroundGuard, "unground"),
    (UngroundAction, "unground"),
    (NotClosed, "not-closed"),
    (ContainsRecursion, "recursion"),
    (RewriteBudgetExceeded, "rewrite-budget"),
    (ValueError, "value"),
)


def run(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.run(args, out)
    except CliError as e:
        code, msg = e.code, str(e)
    except Exception as e:
        for kind, name in _ERRORS:
            if isinstance(e, kind):
                code, msg = name, str(e)
                break
        else:
            raise
    msg = " ".join(msg.split())
    err.write(f"saptc: error[{code}] {msg}\n")
    return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
