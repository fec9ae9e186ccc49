"""Command-line entry point.

Exit status: 0 when consistent, 1 when conflicts or violations were found,
2 on usage, read or parse errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import kif, lexicon, ontology
from .kif import KifError
from .ontology import KnowledgeBase, LoadError, OntologyError
from .rules import ClosureBudgetExceeded, SkolemRegistry, detect_conflicts, infer_closure
from .scenarios import EngineScenario, IgnitionScenario, run_engine, run_ignition
from .transitions import Deadlock, HaltReason, ValidationPolicy, standard_probes

OK, FOUND, ERROR = 0, 1, 2


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(f"{self.prog}: error: {message}")


def _where(path, err) -> str:
    span = getattr(err, "span", None)
    if span is None:
        return f"{path}: {err}"
    return f"{path}:{span.line}:{span.column}: {err}"


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def cmd_parse(args, out, err) -> int:
    try:
        terms = kif.parse(_read(args.file))
    except OSError as e:
        print(f"{args.file}: {e.strerror or e}", file=err)
        return ERROR
    except KifError as e:
        print(_where(args.file, e), file=err)
        return ERROR
    for t in terms:
        print(kif.print_term(t), file=out)
    return OK


def _load(paths, bare: bool, err) -> KnowledgeBase | None:
    try:
        kb = KnowledgeBase() if bare else ontology.load_shipped()
    except (KifError, OntologyError) as e:  # pragma: no cover - shipped data is consistent
        print(f"shipped data: {e}", file=err)
        return None
    for path in paths:
        try:
            ontology.load_text(_read(path), kb)
        except OSError as e:
            print(f"{path}: {e.strerror or e}", file=err)
            return None
        except (KifError, LoadError) as e:
            print(_where(path, e), file=err)
            return None
    for warning in kb.warnings:
        print(f"warning: {warning}", file=err)
    return kb


def cmd_validate(args, out, err) -> int:
    kb = _load(args.files, args.bare, err)
    if kb is None:
        return ERROR
    try:
        closure = infer_closure(kb.ground_facts(), kb.rules, kb, SkolemRegistry())
    except ClosureBudgetExceeded as e:
        print(f"closure: {e}", file=err)
        return ERROR
    reports = detect_conflicts(closure.store, standard_probes(kb), kb)
    for report in reports:
        print(report, file=out)
    return FOUND if reports else OK


def _emit_trace(text: str, path: str | None, out):
    if path is None:
        out.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_run(args, out, err) -> int:
    policy = ValidationPolicy(args.policy)
    try:
        if args.scenario == "ignition":
            scenario = IgnitionScenario.toggles(args.toggles, args.sabotage_at)
            result = run_ignition(scenario, seed=args.seed, policy=policy, max_steps=args.max_steps)
        else:
            scenario = EngineScenario(args.fuel, args.switch_off_at, args.seed, args.max_steps)
            result = run_engine(scenario, policy=policy)
    except ValueError as e:
        print(f"run: {e}", file=err)
        return ERROR
    except (Deadlock, ClosureBudgetExceeded) as e:
        print(f"run: {e}", file=err)
        return ERROR
    _emit_trace(result.trace.render(), args.trace, out)
    print(result.summary(), file=out)
    return FOUND if result.halt is HaltReason.CONFLICT_DETECTED else OK


def cmd_lex(args, out, err) -> int:
    kb = _load(args.ontology, args.bare, err)
    if kb is None:
        return ERROR
    try:
        entries = lexicon.parse_lexicon(_read(args.file))
    except OSError as e:
        print(f"{args.file}: {e.strerror or e}", file=err)
        return ERROR
    except (KifError, lexicon.LexiconError) as e:
        print(_where(args.file, e), file=err)
        return ERROR
    by_head = {e.headword: e for e in entries}
    found = False
    for entry in entries:
        for v in lexicon.validate_entry(entry, kb, by_head):
            found = True
            print(v, file=out)
    if args.emit_rules:
        for entry in entries:
            try:
                print(lexicon.entry_to_rule(entry).to_kif(), file=out)
            except lexicon.MissingQualia as e:
                print(_where(args.file, e), file=err)
    return FOUND if found else OK


def _nonneg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text} is negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sumosim", description="SUO-KIF microworld simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("parse", help="print every term of a KIF file canonically")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_parse)

    sv = sub.add_parser("validate", help="load KIF files and report conflicts")
    sv.add_argument("files", nargs="*")
    sv.add_argument("--bare", action="store_true", help="do not preload the shipped fragments")
    sv.set_defaults(func=cmd_validate)

    sr = sub.add_parser("run", help="run a scenario and write its trace")
    runs = sr.add_subparsers(dest="scenario", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--trace", help="trace file (default: standard output)")
    common.add_argument("--policy", choices=[p.value for p in ValidationPolicy], default="always")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--max-steps", type=int, default=10000)
    si = runs.add_parser("ignition", parents=[common])
    si.add_argument("--toggles", type=_nonneg, required=True)
    si.add_argument("--sabotage-at", type=_nonneg, default=None,
                    help="connect EngineOn without removing EngineOff at this step")
    se = runs.add_parser("engine", parents=[common])
    se.add_argument("--fuel", type=_nonneg, required=True)
    se.add_argument("--switch-off-at", type=_nonneg, default=None)
    sr.set_defaults(func=cmd_run)

    sl = sub.add_parser("lex", help="validate generative-lexicon entries")
    sl.add_argument("file")
    sl.add_argument("--emit-rules", action="store_true")
    sl.add_argument("--ontology", nargs="*", default=[], metavar="FILE",
                    help="extra KIF files loaded after the shipped fragments")
    sl.add_argument("--bare", action="store_true")
    sl.set_defaults(func=cmd_lex)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except _Usage as e:
        print(e, file=err)
        return ERROR
    except SystemExit as e:  # --help
        return OK if not e.code else ERROR
    return args.func(args, out, err)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
