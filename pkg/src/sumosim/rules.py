"""Forward-chaining over implication rules with skolemized existentials.

Rules are compiled from ``=>`` / ``<=>`` forms whose bodies are conjunctions
of atomic sentences, optionally wrapped in a single ``exists`` on the
consequent side.  Matching treats ``(instance ?x C)`` taxonomically: a stored
``(instance e D)`` satisfies it whenever ``D`` is a subclass of ``C``.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .facts import fact_key, is_ground, pattern_variables, show, substitute, to_fact
from .kif import (
    Compound, FormulaKind, SourceSpan, Term, Variable, classify,
)

DEFAULT_MAX_ROUNDS = 32
SKOLEM_PREFIX = "sk_"


class RuleError(Exception):
    pass


class UnsupportedRuleForm(RuleError):
    def __init__(self, message: str, span: SourceSpan | None = None):
        super().__init__(message)
        self.span = span


class MalformedRule(RuleError):
    pass


class UnboundVariable(RuleError):
    def __init__(self, name: str):
        super().__init__(f"consequent variable ?{name} is not bound")
        self.name = name


class ClosureBudgetExceeded(RuleError):
    def __init__(self, max_rounds: int):
        super().__init__(f"no fixpoint after {max_rounds} productive rounds; "
                         "a rule is probably generating facts without bound")
        self.max_rounds = max_rounds


class Provenance(enum.Enum):
    EXPLICIT = "explicit"
    INFERRED = "inferred"


@dataclass(frozen=True)
class Rule:
    name: str
    antecedent: tuple
    existentials: tuple
    consequent: tuple
    origin: SourceSpan | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "antecedent", tuple(self.antecedent))
        object.__setattr__(self, "existentials", tuple(self.existentials))
        object.__setattr__(self, "consequent", tuple(self.consequent))
        if not self.antecedent:
            raise MalformedRule(f"rule {self.name}: empty antecedent")
        bound = set(self.existentials)
        for pattern in self.antecedent:
            bound |= pattern_variables(pattern)
        for template in self.consequent:
            free = pattern_variables(template) - bound
            if free:
                raise MalformedRule(f"rule {self.name}: ?{sorted(free)[0]} is neither "
                                    "bound by the antecedent nor existential")

    @property
    def body(self):
        """Content used for identity: two rules with equal bodies are the same rule."""
        return (self.antecedent, self.existentials, self.consequent)

    def to_kif(self) -> str:
        def conj(items):
            parts = [show(i) for i in items]
            return parts[0] if len(parts) == 1 else "(and " + " ".join(parts) + ")"

        then = conj(self.consequent)
        if self.existentials:
            then = "(exists (" + " ".join("?" + v for v in self.existentials) + ") " + then + ")"
        return f"(=> {conj(self.antecedent)} {then})"


def _atomic_patterns(t: Term, where: str) -> list:
    kind = classify(t)
    if kind is FormulaKind.CONJUNCTION:
        out = []
        for arg in t.args:
            out.extend(_atomic_patterns(arg, where))
        return out
    if kind is FormulaKind.ATOMIC_SENTENCE and isinstance(t, Compound):
        return [to_fact(t, allow_variables=True)]
    raise UnsupportedRuleForm(f"{kind.value} is not supported in a rule {where}",
                              getattr(t, "span", None))


def _consequent(t: Term) -> tuple[list[str], list]:
    if classify(t) is FormulaKind.EXISTENTIAL:
        names = [v.name for v in t.args[0].elements]
        return names, _atomic_patterns(t.args[1], "consequent")
    return [], _atomic_patterns(t, "consequent")


def rule_name_hint(antecedent) -> str:
    for pattern in antecedent:
        if len(pattern) == 3 and pattern[0] == "instance" and isinstance(pattern[2], str):
            return pattern[2]
    return str(antecedent[0][0])


def compile_rules(t: Term, name: str | None = None) -> list[Rule]:
    """Turn an implication or biconditional into one or two rules."""
    kind = classify(t)
    span = getattr(t, "span", None)
    if kind is FormulaKind.IMPLICATION:
        antecedent = _atomic_patterns(t.args[0], "antecedent")
        existentials, consequent = _consequent(t.args[1])
        rule_name = name or rule_name_hint(antecedent)
        try:
            return [Rule(rule_name, antecedent, existentials, consequent, span)]
        except MalformedRule as exc:
            raise UnsupportedRuleForm(str(exc), span) from None
    if kind is FormulaKind.BICONDITIONAL:
        left = _atomic_patterns(t.args[0], "biconditional")
        right = _atomic_patterns(t.args[1], "biconditional")
        base = name or rule_name_hint(left)
        try:
            return [Rule(base + ":fwd", left, (), right, span),
                    Rule(base + ":rev", right, (), left, span)]
        except MalformedRule as exc:
            raise UnsupportedRuleForm(str(exc), span) from None
    raise UnsupportedRuleForm(f"{kind.value} is not a rule", span)


class SkolemRegistry:
    """Deterministic witnesses for existential variables.

    The same (rule, trigger binding) always maps to the same generated ids,
    so re-running a closure never invents a second bakery for one bakery.
    """

    def __init__(self):
        self._witnesses: dict[tuple, dict[str, str]] = {}
        self._counters: dict[str, int] = {}

    def resolve(self, rule_name: str, trigger: tuple, variable: str) -> str:
        slot = self._witnesses.setdefault((rule_name, trigger), {})
        if variable not in slot:
            n = self._counters.get(variable, 0) + 1
            self._counters[variable] = n
            slot[variable] = f"{SKOLEM_PREFIX}{variable}_{n}"
        return slot[variable]

    def copy(self) -> "SkolemRegistry":
        other = SkolemRegistry()
        other._witnesses = {k: dict(v) for k, v in self._witnesses.items()}
        other._counters = dict(self._counters)
        return other

    def __len__(self):
        return sum(len(v) for v in self._witnesses.values())

    def __eq__(self, other):
        if not isinstance(other, SkolemRegistry):
            return NotImplemented
        return self._witnesses == other._witnesses and self._counters == other._counters


def _ancestors(kb, cls) -> set:
    if kb is None:
        return {cls}
    return kb.ancestors(cls)


def _unify(pattern, fact, binding: dict):
    if isinstance(pattern, Variable):
        bound = binding.get(pattern.name, _MISSING)
        if bound is _MISSING:
            out = dict(binding)
            out[pattern.name] = fact
            return out
        return binding if bound == fact else None
    if isinstance(pattern, tuple):
        if not isinstance(fact, tuple) or len(fact) != len(pattern):
            return None
        for p, f in zip(pattern, fact):
            binding = _unify(p, f, binding)
            if binding is None:
                return None
        return binding
    return binding if pattern == fact and type(pattern) is type(fact) else None


_MISSING = object()


def _index(store) -> dict:
    index: dict = {}
    for fact in store:
        if isinstance(fact, tuple) and fact:
            index.setdefault((fact[0], len(fact)), []).append(fact)
    for facts in index.values():
        facts.sort(key=fact_key)
    return index


def binding_key(binding: dict) -> tuple:
    return tuple(sorted((name, fact_key(value)) for name, value in binding.items()))


def _match_indexed(antecedent, index: dict, kb) -> list[dict]:
    results: dict = {}

    def extend(i: int, binding: dict):
        if i == len(antecedent):
            results.setdefault(binding_key(binding), binding)
            return
        pattern = antecedent[i]
        head = pattern[0]
        if isinstance(head, Variable):
            candidates = [f for (p, n), fs in sorted(index.items(), key=lambda kv: fact_key(kv[0][0]))
                          if n == len(pattern) for f in fs]
        else:
            candidates = index.get((head, len(pattern)), ())
        # only a constant class reads through the taxonomy, so that results
        # never depend on the order of the antecedent patterns
        taxonomic = head == "instance" and len(pattern) == 3 and isinstance(pattern[2], str)
        for fact in candidates:
            if taxonomic:
                if not isinstance(fact[2], str) or pattern[2] not in _ancestors(kb, fact[2]):
                    continue
                b = _unify(pattern[1], fact[1], binding)
            else:
                b = _unify(pattern, fact, binding)
            if b is not None:
                extend(i + 1, b)

    extend(0, {})
    return [results[k] for k in sorted(results)]


def match(antecedent, store: Iterable, kb=None) -> list[dict]:
    """All bindings that satisfy every antecedent pattern at once, in canonical order."""
    return _match_indexed(tuple(antecedent), _index(store), kb)


_TIME_FUNCTIONS = {"BeginFn": "beginInterval", "EndFn": "endInterval"}


def _evaluate(item, intervals: dict) -> list:
    """Every reading of ``item``: as written, and with each ``(BeginFn (WhenFn p))``
    or ``(EndFn (WhenFn p))`` replaced by a known interval of ``p``.

    Keeping the literal reading makes closure monotone: learning an interval
    adds conclusions but never takes one back.
    """
    if not isinstance(item, tuple):
        return [item]
    variants = [item]
    if (len(item) == 2 and item[0] in _TIME_FUNCTIONS and isinstance(item[1], tuple)
            and len(item[1]) == 2 and item[1][0] == "WhenFn"):
        variants += intervals.get((_TIME_FUNCTIONS[item[0]], item[1][1]), [])
        return variants
    parts = [_evaluate(e, intervals) for e in item]
    return [tuple(combo) for combo in itertools.product(*parts)]


def _intervals(index: dict) -> dict:
    out: dict = {}
    for pred in _TIME_FUNCTIONS.values():
        for fact in index.get((pred, 3), ()):
            out.setdefault((pred, fact[1]), []).append(fact[2])
    return out


def _apply(rule: Rule, store: frozenset, index: dict, registry: SkolemRegistry, kb) -> set:
    intervals = _intervals(index)
    new = set()
    for binding in _match_indexed(rule.antecedent, index, kb):
        trigger = binding_key(binding)
        full = dict(binding)
        for var in rule.existentials:
            full[var] = registry.resolve(rule.name, trigger, var)
        for template in rule.consequent:
            fact = substitute(template, full)
            if not is_ground(fact):
                raise UnboundVariable(sorted(pattern_variables(fact))[0])
            new.update(f for f in _evaluate(fact, intervals) if f not in store)
    return new


def apply_rule(rule: Rule, store: Iterable, registry: SkolemRegistry, kb=None) -> set:
    """Ground consequents of ``rule`` that are not already in ``store``."""
    store = frozenset(store)
    return _apply(rule, store, _index(store), registry, kb)


class Closure(NamedTuple):
    store: frozenset
    provenance: dict
    rounds: int


def infer_closure(store: Iterable, rules: Iterable[Rule], kb=None,
                  registry: SkolemRegistry | None = None,
                  max_rounds: int = DEFAULT_MAX_ROUNDS,
                  provenance: dict | None = None) -> Closure:
    """Apply every rule until nothing new appears.

    ``rounds`` counts productive rounds.  Each round matches against the
    store as it stood at the start of the round, with rules taken in name
    order, so skolem numbering does not depend on how ``rules`` is ordered.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    if registry is None:
        registry = SkolemRegistry()
    facts = set(store)
    prov = {f: Provenance.EXPLICIT for f in facts}
    if provenance:
        prov.update((f, p) for f, p in provenance.items() if f in prov)
    ordered = sorted(rules, key=lambda r: r.name)
    rounds = 0
    while ordered:
        snapshot = frozenset(facts)
        index = _index(snapshot)
        added: set = set()
        for rule in ordered:
            added |= _apply(rule, snapshot, index, registry, kb)
        if not added:
            break
        if rounds == max_rounds:
            raise ClosureBudgetExceeded(max_rounds)
        rounds += 1
        facts |= added
        for f in added:
            prov[f] = Provenance.INFERRED
    return Closure(frozenset(facts), prov, rounds)


def detect_conflicts(store: Iterable, probes, kb, tick: int = 0) -> list:
    store = frozenset(store)
    reports = []
    for probe in probes:
        reports.extend(probe.run(store, kb, tick))
    return reports
