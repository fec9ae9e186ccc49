"""Knowledge base built from parsed SUO-KIF axioms.

Structural axioms (``subclass``, ``instance``, ``domain``, ``partition``,
``documentation``, ``subrelation``) are interpreted into dedicated tables.
Implications and biconditionals become :class:`~sumosim.rules.Rule` objects.
Any other ground atomic sentence is kept as an opaque fact, so scenario
relations such as ``distinguishingPart`` need no extra declarations.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from decimal import Decimal
from importlib import resources
from typing import Callable, Iterable

from . import kif
from .facts import is_ground, show, to_fact
from .kif import Atom, Compound, FormulaKind, NumberLiteral, SourceSpan, StringLiteral, Term
from .rules import Rule, compile_rules

log = logging.getLogger(__name__)

ROOT = "Entity"
CLASS = "Class"
SHIPPED = ("structural.kif", "engine.kif", "dining.kif", "vehicles.kif")
LEXICON = "lexicon.kif"

_ARITY_CLASSES = {
    "UnaryPredicate": 1, "BinaryPredicate": 2, "TernaryPredicate": 3,
    "QuaternaryPredicate": 4, "QuintaryPredicate": 5,
    "BinaryRelation": 2, "TernaryRelation": 3,
}


class OntologyError(Exception):
    pass


class LoadError(OntologyError):
    def __init__(self, message: str, span: SourceSpan | None = None):
        super().__init__(message)
        self.span = span


class SubclassCycle(LoadError):
    def __init__(self, path: list[str], span: SourceSpan | None = None):
        super().__init__("subclass cycle " + " -> ".join(path), span)
        self.path = path


class ArityMismatch(LoadError):
    def __init__(self, predicate: str, message: str, span: SourceSpan | None = None):
        super().__init__(f"{predicate}: {message}", span)
        self.predicate = predicate


class DuplicatePartition(LoadError):
    def __init__(self, parent: str, span: SourceSpan | None = None):
        super().__init__(f"{parent} is already partitioned differently", span)
        self.parent = parent


class ConflictingDomain(LoadError):
    pass


class UnknownTerm(OntologyError, KeyError):
    def __init__(self, name):
        super().__init__(f"unknown term {name!r}")
        self.name = name

    def __str__(self):
        return self.args[0]


class NoPartition(OntologyError, KeyError):
    def __init__(self, parent):
        super().__init__(f"no partition declared for {parent!r}")
        self.parent = parent

    def __str__(self):
        return self.args[0]


@dataclass
class PredicateDecl:
    name: str
    arity: int | None = None
    domain_map: dict = field(default_factory=dict)

    @property
    def effective_arity(self) -> int:
        return self.arity or max(self.domain_map, default=0)

    @property
    def domains(self) -> list:
        """Expected class per argument position; ``None`` where undeclared."""
        return [self.domain_map.get(i) for i in range(1, self.effective_arity + 1)]


@dataclass(frozen=True)
class Partition:
    parent: str
    members: tuple
    disjoint: bool = True
    exhaustive: bool = True

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError(f"partition of {self.parent} needs at least two members")
        if len(set(self.members)) != len(self.members):
            raise ValueError(f"partition of {self.parent} repeats a member")


@dataclass(frozen=True)
class DomainViolation:
    predicate: str
    position: int
    expected: str
    actual: tuple
    argument: object

    def __str__(self):
        got = ", ".join(self.actual) or "nothing"
        article = "an" if self.expected[:1] in "AEIOU" else "a"
        return (f"DomainViolation: {self.predicate} argument {self.position} "
                f"({show(self.argument)}) should be {article} {self.expected}, is {got}")


@dataclass(frozen=True)
class DomainCheck:
    violations: tuple = ()
    undeclared: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


@dataclass
class KnowledgeBase:
    subclass_edges: dict = field(default_factory=dict)
    instance_of: dict = field(default_factory=dict)
    predicates: dict = field(default_factory=dict)
    partitions: dict = field(default_factory=dict)
    rules: list = field(default_factory=list)
    documentation: dict = field(default_factory=dict)
    facts: set = field(default_factory=set)
    subrelations: dict = field(default_factory=dict)
    formulas: list = field(default_factory=list)
    warnings: list = field(default_factory=list, compare=False, repr=False)
    _fact_spans: dict = field(default_factory=dict, compare=False, repr=False)
    _ancestor_cache: dict = field(default_factory=dict, compare=False, repr=False)
    _class_cache: frozenset | None = field(default=None, compare=False, repr=False)

    # -- taxonomy -----------------------------------------------------------

    @property
    def classes(self) -> frozenset:
        if self._class_cache is None:
            self._class_cache = frozenset(self._collect_classes())
        return self._class_cache

    def _collect_classes(self) -> set:
        out = {ROOT, CLASS}
        for child, parents in self.subclass_edges.items():
            out.add(child)
            out |= parents
        for classes in self.instance_of.values():
            out |= {c for c in classes if isinstance(c, str)}
        out |= set(self.partitions)
        for decl in self.predicates.values():
            out |= set(decl.domain_map.values())
        return out

    def is_class(self, name) -> bool:
        return isinstance(name, str) and name in self.classes

    def is_known(self, name) -> bool:
        return (self.is_class(name) or name in self.instance_of or name in self.predicates)

    def ancestors(self, cls) -> frozenset:
        """Reflexive-transitive superclasses of ``cls`` (just ``{cls}`` if unknown)."""
        cached = self._ancestor_cache.get(cls)
        if cached is not None:
            return cached
        seen = {cls}
        stack = [cls]
        while stack:
            for parent in self.subclass_edges.get(stack.pop(), ()):
                if parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
        result = frozenset(seen)
        self._ancestor_cache[cls] = result
        return result

    def classes_of(self, term, extra: Iterable = ()) -> set:
        """Classes a term belongs to, for domain checking."""
        if isinstance(term, bool):
            return set()
        if isinstance(term, int):
            return {"Integer"}
        if isinstance(term, Decimal):
            return {"RealNumber"}
        if isinstance(term, StringLiteral):
            return {"SymbolicString"}
        out = set(self.instance_of.get(term, ())) | set(extra)
        if self.is_class(term):
            out.add(CLASS)
        return out

    def ground_facts(self) -> set:
        """Instance assertions plus every stored ground fact."""
        out = set(self.facts)
        for entity, classes in self.instance_of.items():
            out |= {("instance", entity, c) for c in classes}
        return out

    def _invalidate(self):
        self._ancestor_cache.clear()
        self._class_cache = None

    def _warn(self, message: str):
        self.warnings.append(message)
        log.warning(message)


def _atom(t: Term, what: str, span) -> str:
    if not isinstance(t, Atom):
        raise LoadError(f"{what} must be a constant, got {kif.print_term(t)}", span)
    return t.name


def _cycle_path(kb: KnowledgeBase, start: str, goal: str) -> list[str] | None:
    """A path start -> ... -> goal along subclass edges, if one exists."""
    stack = [(start, [start])]
    seen = set()
    while stack:
        node, path = stack.pop()
        if node == goal:
            return path
        if node in seen:
            continue
        seen.add(node)
        for parent in sorted(kb.subclass_edges.get(node, ()), reverse=True):
            stack.append((parent, path + [parent]))
    return None


def _add_subclass(kb, child, parent, span):
    path = _cycle_path(kb, parent, child)
    if path is not None:
        raise SubclassCycle([child] + path, span)
    kb.subclass_edges.setdefault(child, set()).add(parent)
    kb._invalidate()


def _decl(kb, name) -> PredicateDecl:
    return kb.predicates.setdefault(name, PredicateDecl(name))


def _add_domain(kb, args, span):
    if len(args) != 3:
        raise ArityMismatch("domain", "expects (domain predicate position class)", span)
    pred = _atom(args[0], "domain predicate", span)
    pos = args[1]
    if not isinstance(pos, NumberLiteral) or pos.value != pos.value.to_integral_value() or pos.value < 1:
        raise ArityMismatch(pred, "domain position must be a positive integer", span)
    position = int(pos.value)
    cls = _atom(args[2], "domain class", span)
    decl = _decl(kb, pred)
    if decl.arity is not None and position > decl.arity:
        raise ArityMismatch(pred, f"position {position} exceeds arity {decl.arity}", span)
    known = decl.domain_map.get(position)
    if known is not None and known != cls:
        raise ConflictingDomain(f"{pred} argument {position} declared as both {known} and {cls}", span)
    decl.domain_map[position] = cls
    kb._invalidate()


def _add_instance(kb, args, span):
    entity = _atom(args[0], "instance subject", span)
    cls = to_fact(args[1])
    kb.instance_of.setdefault(entity, set()).add(cls)
    kb._invalidate()
    arity = _ARITY_CLASSES.get(cls) if isinstance(cls, str) else None
    if arity is not None:
        decl = _decl(kb, entity)
        if decl.arity not in (None, arity) or max(decl.domain_map, default=0) > arity:
            raise ArityMismatch(entity, f"declared {cls} but has wider domains", span)
        decl.arity = arity


def _add_partition(kb, args, span):
    parent = _atom(args[0], "partitioned class", span)
    members = tuple(_atom(a, "partition member", span) for a in args[1:])
    try:
        partition = Partition(parent, members)
    except ValueError as exc:
        raise LoadError(str(exc), span) from None
    existing = kb.partitions.get(parent)
    if existing is not None and existing != partition:
        raise DuplicatePartition(parent, span)
    kb.partitions[parent] = partition
    kb._invalidate()


def _add_rules(kb, form):
    for rule in compile_rules(form):
        if any(r.body == rule.body for r in kb.rules):
            continue
        taken = {r.name for r in kb.rules}
        name, n = rule.name, 1
        while name in taken:
            n += 1
            name = f"{rule.name}#{n}"
        kb.rules.append(Rule(name, rule.antecedent, rule.existentials, rule.consequent, rule.origin))


def _add_sentence(kb, form: Compound):
    span = form.span
    head = form.head.name if isinstance(form.head, Atom) else None
    args = form.args
    if head == "subclass" and len(args) == 2:
        _add_subclass(kb, _atom(args[0], "subclass", span), _atom(args[1], "superclass", span), span)
    elif head == "instance" and len(args) == 2 and kif.variables(form) == set():
        _add_instance(kb, args, span)
    elif head == "domain":
        _add_domain(kb, args, span)
    elif head == "partition":
        _add_partition(kb, args, span)
    elif head == "documentation" and args and isinstance(args[-1], StringLiteral):
        kb.documentation[_atom(args[0], "documented term", span)] = args[-1].value
    elif head == "subrelation" and len(args) == 2:
        kb.subrelations.setdefault(_atom(args[0], "subrelation", span), set()).add(
            _atom(args[1], "relation", span))
    else:
        fact = to_fact(form, allow_variables=True)
        if not is_ground(fact):
            kb._warn(f"{span}: non-ground sentence {kif.print_term(form)} kept as a formula")
            if form not in kb.formulas:
                kb.formulas.append(form)
            return
        if head not in kb.predicates:
            kb._warn(f"{span}: {head} has no domain declaration; kept as an opaque fact")
        kb.facts.add(fact)
        kb._fact_spans.setdefault(fact, span)


def load_axioms(forms: Iterable[Term], kb: KnowledgeBase | None = None) -> KnowledgeBase:
    """Interpret parsed forms into ``kb`` (created if absent) and return it."""
    if kb is None:
        kb = KnowledgeBase()
    for form in forms:
        kind = kif.classify(form)
        if kind in (FormulaKind.IMPLICATION, FormulaKind.BICONDITIONAL):
            _add_rules(kb, form)
        elif kind is FormulaKind.ATOMIC_SENTENCE and isinstance(form, Compound):
            _add_sentence(kb, form)
        else:
            kb._warn(f"{getattr(form, 'span', '?')}: {kind.value} form kept unevaluated")
            if form not in kb.formulas:
                kb.formulas.append(form)
    for fact in kb.facts:
        decl = kb.predicates.get(fact[0])
        if decl is not None and decl.arity is not None and len(fact) - 1 != decl.arity:
            raise ArityMismatch(fact[0], f"{len(fact) - 1} arguments given, arity is {decl.arity}",
                                kb._fact_spans.get(fact))
    return kb


def load_text(text: str, kb: KnowledgeBase | None = None) -> KnowledgeBase:
    return load_axioms(kif.parse(text), kb)


def shipped_path(name: str):
    return resources.files("sumosim") / "data" / name


def shipped_text(name: str) -> str:
    return shipped_path(name).read_text(encoding="utf-8")


def load_shipped(*names: str, kb: KnowledgeBase | None = None) -> KnowledgeBase:
    for name in names or SHIPPED:
        kb = load_text(shipped_text(name), kb)
    return kb


def _require_class(kb, name):
    if not kb.is_class(name):
        raise UnknownTerm(name)


def is_subclass(a: str, b: str, kb: KnowledgeBase) -> bool:
    _require_class(kb, a)
    _require_class(kb, b)
    return b in kb.ancestors(a)


def is_instance_of(entity: str, cls: str, kb: KnowledgeBase) -> bool:
    if entity not in kb.instance_of:
        raise UnknownTerm(entity)
    _require_class(kb, cls)
    return any(cls in kb.ancestors(c) for c in kb.instance_of[entity])


def instance_index(store: Iterable) -> dict:
    """entity -> asserted classes, from the ``instance`` facts of a store."""
    out: dict = {}
    for fact in store:
        if len(fact) == 3 and fact[0] == "instance":
            out.setdefault(fact[1], set()).add(fact[2])
    return out


def check_domains(fact, kb: KnowledgeBase,
                  classes_of: Callable[[object], set] | None = None) -> DomainCheck:
    """Check each argument of a ground fact against its predicate's declared domain.

    Function terms such as ``(FoodForFn Human)`` are not checked, and every
    argument satisfies an ``Entity`` domain.
    """
    if isinstance(fact, Compound):
        fact = to_fact(fact)
    if classes_of is None:
        classes_of = kb.classes_of
    decl = kb.predicates.get(fact[0])
    if decl is None:
        return DomainCheck(undeclared=True)
    violations = []
    for position, expected in sorted(decl.domain_map.items()):
        if position >= len(fact):
            violations.append(DomainViolation(fact[0], position, expected, (), None))
            continue
        arg = fact[position]
        if expected == ROOT or isinstance(arg, tuple):
            continue
        actual = classes_of(arg)
        if not any(expected in kb.ancestors(c) for c in actual):
            violations.append(DomainViolation(fact[0], position, expected,
                                              tuple(sorted(map(str, actual))), arg))
    return DomainCheck(tuple(violations))


def partition_members(cls: str, kb: KnowledgeBase) -> frozenset:
    try:
        return frozenset(kb.partitions[cls].members)
    except KeyError:
        raise NoPartition(cls) from None


def partition_of(member: str, kb: KnowledgeBase) -> Partition | None:
    for partition in kb.partitions.values():
        if member in partition.members:
            return partition
    return None
