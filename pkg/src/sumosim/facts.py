"""Ground facts and patterns as plain tuples.

A fact is a tuple ``(predicate, arg, ...)`` whose items are atom names
(``str``), numbers (``int`` or ``Decimal``), :class:`~sumosim.kif.StringLiteral`
values, or nested fact-shaped tuples for function terms such as
``(FoodForFn Human)``.  Patterns are the same shape but may contain
:class:`~sumosim.kif.Variable` items.
"""
from __future__ import annotations

from decimal import Decimal

from .kif import Atom, Compound, NumberLiteral, StringLiteral, Term, Variable, print_term


def to_fact(term: Term, allow_variables: bool = False):
    if isinstance(term, Atom):
        return term.name
    if isinstance(term, NumberLiteral):
        value = term.value
        return int(value) if value == value.to_integral_value() else value
    if isinstance(term, StringLiteral):
        return StringLiteral(term.value)
    if isinstance(term, Variable):
        if not allow_variables:
            raise ValueError(f"?{term.name} in a ground fact")
        return Variable(term.name)
    if isinstance(term, Compound):
        return tuple(to_fact(e, allow_variables) for e in term.elements)
    raise TypeError(f"not a KIF term: {term!r}")


def to_term(item) -> Term:
    if isinstance(item, str):
        return Atom(item)
    if isinstance(item, bool):
        raise TypeError("booleans are not KIF terms")
    if isinstance(item, (int, Decimal)):
        return NumberLiteral(Decimal(item))
    if isinstance(item, (StringLiteral, Variable)):
        return item
    if isinstance(item, tuple):
        return Compound(tuple(to_term(e) for e in item))
    raise TypeError(f"cannot render {item!r} as a KIF term")


def show(item) -> str:
    return print_term(to_term(item))


def is_ground(item) -> bool:
    if isinstance(item, Variable):
        return False
    if isinstance(item, tuple):
        return all(is_ground(e) for e in item)
    return True


def pattern_variables(item) -> set[str]:
    if isinstance(item, Variable):
        return {item.name}
    if isinstance(item, tuple):
        out: set[str] = set()
        for e in item:
            out |= pattern_variables(e)
        return out
    return set()


def substitute(item, binding: dict):
    """Replace bound variables; unbound variables are left in place."""
    if isinstance(item, Variable):
        return binding.get(item.name, item)
    if isinstance(item, tuple):
        return tuple(substitute(e, binding) for e in item)
    return item


def fact_key(item):
    """Total order over fact items, used wherever iteration order must be canonical."""
    if isinstance(item, str):
        return (1, item)
    if isinstance(item, (int, Decimal)):
        return (0, Decimal(item))
    if isinstance(item, StringLiteral):
        return (2, item.value)
    if isinstance(item, Variable):
        return (3, item.name)
    if isinstance(item, tuple):
        return (4, len(item), tuple(fact_key(e) for e in item))
    raise TypeError(f"unorderable fact item {item!r}")


def sorted_facts(facts) -> list:
    return sorted(facts, key=fact_key)


def atoms_of(item) -> set:
    """All non-tuple items occurring in a fact (predicate included)."""
    if isinstance(item, tuple):
        out: set = set()
        for e in item:
            out |= atoms_of(e)
        return out
    return {item}
