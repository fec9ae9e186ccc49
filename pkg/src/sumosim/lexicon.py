"""Structured term definitions (argument structure, event structure, qualia,
lexical inheritance) and hyper-partonomy narrowing.

Entries are written in the ordinary KIF surface syntax::

    (lexentry Bakery (formal Business) (telic Selling direct)
              (constitutive Oven) (agentive Constructing)
              (event PROCESS) (args (agent Organization)))
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from . import kif
from .kif import Atom, Compound, SourceSpan, Term, Variable
from .ontology import KnowledgeBase, UnknownTerm
from .rules import Rule

SUBLISTS = ("formal", "telic", "constitutive", "agentive", "event", "args", "inherits")


class LexiconError(Exception):
    def __init__(self, message: str, span: SourceSpan | None = None):
        super().__init__(message)
        self.span = span


class MissingQualia(LexiconError):
    pass


class UnknownPart(LexiconError, KeyError):
    def __str__(self):
        return self.args[0]


class EventSort(enum.Enum):
    STATE = "STATE"
    PROCESS = "PROCESS"
    TRANSITION = "TRANSITION"


class TelicMode(enum.Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"


@dataclass(frozen=True)
class LexicalEntry:
    headword: str
    formal: str | None = None
    telic: str | None = None
    telic_mode: TelicMode = TelicMode.DIRECT
    constitutive: frozenset = frozenset()
    agentive: str | None = None
    event_sort: EventSort = EventSort.STATE
    subevents: tuple = ()
    argument_structure: tuple = ()   # (role, class) pairs
    inheritance: frozenset = frozenset()
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class LexiconViolation:
    headword: str
    field: str
    message: str

    def __str__(self):
        return f"LexiconViolation: {self.headword} {self.field}: {self.message}"


def _names(items: Iterable[Term], what: str, span) -> list[str]:
    out = []
    for item in items:
        if not isinstance(item, Atom):
            raise LexiconError(f"{what} must be a constant, got {kif.print_term(item)}", span)
        out.append(item.name)
    return out


def entry_from_term(t: Term) -> LexicalEntry:
    span = getattr(t, "span", None)
    if not (isinstance(t, Compound) and t.head == Atom("lexentry") and len(t.args) >= 1):
        raise LexiconError("expected (lexentry Headword ...)", span)
    headword = _names(t.args[:1], "headword", span)[0]
    fields: dict = {}
    seen = set()
    for part in t.args[1:]:
        pspan = getattr(part, "span", span)
        if not (isinstance(part, Compound) and isinstance(part.head, Atom)
                and part.head.name in SUBLISTS):
            raise LexiconError(f"unknown lexentry field {kif.print_term(part)}", pspan)
        key = part.head.name
        if key in seen:
            raise LexiconError(f"{headword}: field {key} given twice", pspan)
        seen.add(key)
        args = part.args
        if key in ("formal", "agentive"):
            if len(args) != 1:
                raise LexiconError(f"({key} ...) takes exactly one class", pspan)
            fields[key] = _names(args, key, pspan)[0]
        elif key == "telic":
            if len(args) not in (1, 2):
                raise LexiconError("(telic Process [direct|indirect])", pspan)
            names = _names(args, key, pspan)
            fields["telic"] = names[0]
            if len(names) == 2:
                try:
                    fields["telic_mode"] = TelicMode(names[1])
                except ValueError:
                    raise LexiconError(f"telic mode must be direct or indirect, got {names[1]}",
                                       pspan) from None
        elif key == "constitutive":
            fields["constitutive"] = frozenset(_names(args, key, pspan))
        elif key == "inherits":
            fields["inheritance"] = frozenset(_names(args, key, pspan))
        elif key == "event":
            names = _names(args, key, pspan)
            if not names:
                raise LexiconError("(event SORT subevent...) needs a sort", pspan)
            try:
                fields["event_sort"] = EventSort(names[0])
            except ValueError:
                raise LexiconError(f"event sort must be STATE, PROCESS or TRANSITION, "
                                   f"got {names[0]}", pspan) from None
            fields["subevents"] = tuple(names[1:])
        elif key == "args":
            pairs = []
            for arg in args:
                if not (isinstance(arg, Compound) and len(arg.elements) == 2):
                    raise LexiconError("(args (role Class) ...)", pspan)
                pairs.append(tuple(_names(arg.elements, "argument", pspan)))
            fields["argument_structure"] = tuple(pairs)
    return LexicalEntry(headword, span=span, **fields)


def parse_lexicon(text: str) -> list[LexicalEntry]:
    return [entry_from_term(t) for t in kif.parse(text)]


def validate_entry(e: LexicalEntry, kb: KnowledgeBase,
                   entries: dict | None = None) -> list[LexiconViolation]:
    """Referential checks of one entry against the knowledge base.

    ``entries`` maps headwords to entries and resolves inheritance parents
    and subevents.  An empty list means the entry is valid.
    """
    entries = entries or {}
    out: list[LexiconViolation] = []

    def bad(where, message):
        out.append(LexiconViolation(e.headword, where, message))

    def known_class(where, name) -> bool:
        if not kb.is_class(name):
            bad(where, f"{name} is not a known class")
            return False
        return True

    known_class("headword", e.headword)
    formal_ok = False
    if e.formal is None:
        bad("formal", "no formal quale")
    else:
        formal_ok = known_class("formal", e.formal)
    if e.telic is not None and known_class("telic", e.telic):
        if "Process" not in kb.ancestors(e.telic):
            bad("telic", f"{e.telic} is not a Process")
    for part in sorted(e.constitutive):
        known_class("constitutive", part)
    if e.constitutive and formal_ok and "Object" not in kb.ancestors(e.formal):
        bad("constitutive", f"{e.formal} is not a physical object, so it has no parts")
    if e.agentive is not None:
        known_class("agentive", e.agentive)
    for role, cls in e.argument_structure:
        if role not in kb.predicates:
            bad("args", f"{role} is not a declared case role")
        known_class("args", cls)
    for parent in sorted(e.inheritance):
        if parent not in entries:
            bad("inherits", f"no lexical entry for {parent}")
    for sub in e.subevents:
        if sub not in entries:
            bad("event", f"no lexical entry for subevent {sub}")
    return out


def entry_to_rule(e: LexicalEntry) -> Rule:
    """Compile qualia into a rule shaped like the hand-written ontology rules.

    A direct telic makes the instance the agent of its purpose process; an
    indirect telic makes it the patient.
    """
    if e.formal is None:
        raise MissingQualia(f"{e.headword} has no formal quale", e.span)
    x = Variable("X")
    consequent = [("instance", x, e.formal)]
    existentials = []
    if e.telic is not None:
        telic = Variable("TELIC")
        existentials.append(telic.name)
        role = "agent" if e.telic_mode is TelicMode.DIRECT else "patient"
        consequent += [("instance", telic, e.telic), (role, telic, x)]
    for i, part_class in enumerate(sorted(e.constitutive), start=1):
        part = Variable(f"PART{i}")
        existentials.append(part.name)
        consequent += [("instance", part, part_class), ("part", part, x)]
    return Rule(f"lex:{e.headword}", [("instance", x, e.headword)], existentials, consequent, e.span)


# -- hyper-partonomy --------------------------------------------------------

@dataclass(frozen=True)
class PartonomyNode:
    cls: str
    distinguishing_parts: frozenset = frozenset()
    children: tuple = ()


class Partonomy:
    """A taxonomy subtree annotated with the parts that distinguish each class."""

    def __init__(self, root: PartonomyNode):
        self.root = root
        self.nodes: dict = {}
        self.parent: dict = {}
        stack = [root]
        while stack:
            node = stack.pop()
            self.nodes[node.cls] = node
            for child in node.children:
                if child.cls in self.nodes or child.cls in self.parent:
                    raise ValueError(f"{child.cls} appears twice in the partonomy")
                self.parent[child.cls] = node.cls
                stack.append(child)

    @property
    def classes(self) -> set:
        return set(self.nodes)

    @property
    def parts(self) -> set:
        out = set()
        for node in self.nodes.values():
            out |= node.distinguishing_parts
        return out

    def inherited_parts(self, cls: str) -> set:
        """Parts of ``cls`` and of every ancestor up to the root."""
        out = set()
        while cls is not None:
            out |= self.nodes[cls].distinguishing_parts
            cls = self.parent.get(cls)
        return out

    def descendants(self, cls: str) -> set:
        out = set()
        stack = [self.nodes[cls]]
        while stack:
            node = stack.pop()
            out.add(node.cls)
            stack.extend(node.children)
        return out


def build_partonomy(kb: KnowledgeBase, root: str, relation: str = "distinguishingPart") -> Partonomy:
    """Partonomy over every subclass of ``root``, with parts from ``(relation Class Part)`` facts."""
    if not kb.is_class(root):
        raise UnknownTerm(root)
    parts: dict = {}
    for fact in kb.facts:
        if len(fact) == 3 and fact[0] == relation:
            parts.setdefault(fact[1], set()).add(fact[2])
    scope = {c for c in kb.classes if root in kb.ancestors(c)}

    def node(cls):
        kids = sorted(c for c in scope if cls in kb.subclass_edges.get(c, ()))
        for kid in kids:
            if not kb.ancestors(kid) >= {cls}:
                raise ValueError(f"{kid} is not a subclass of {cls}")
        return PartonomyNode(cls, frozenset(parts.get(cls, ())), tuple(node(k) for k in kids))

    return Partonomy(node(root))


def narrow(candidates: Iterable[str], observed_part: str, partonomy: Partonomy) -> set:
    """Keep the candidate classes whose own or inherited parts include ``observed_part``."""
    candidates = set(candidates)
    if observed_part not in partonomy.parts:
        raise UnknownPart(f"{observed_part} distinguishes no class in the partonomy")
    unknown = candidates - partonomy.classes
    if unknown:
        raise UnknownTerm(sorted(unknown)[0])
    return {c for c in candidates if observed_part in partonomy.inherited_parts(c)}
