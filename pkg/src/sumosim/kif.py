"""Tokenizer, parser and printer for the SUO-KIF subset used by the engine.

Terms are immutable and hashable.  Every term carries the span of its first
token for error reporting, but spans never take part in equality or hashing,
so ``parse(print_term(t)) == [t]`` holds for any parsed term.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterator, Union

__all__ = [
    "SourceSpan", "Atom", "Variable", "NumberLiteral", "StringLiteral",
    "Compound", "Term", "Token", "FormulaKind", "KifError",
    "UnterminatedString", "IllegalCharacter", "UnbalancedParenthesis",
    "EmptyCompound", "UnsupportedSyntax", "tokenize", "parse", "parse_file",
    "print_term", "classify", "variables",
]


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 1

    def __post_init__(self):
        if self.line < 1 or self.column < 1 or self.length < 1:
            raise ValueError(f"invalid span {self.line}:{self.column}+{self.length}")

    def __str__(self):
        return f"{self.line}:{self.column}"


_NOWHERE = SourceSpan(1, 1)


@dataclass(frozen=True)
class Atom:
    name: str
    span: SourceSpan = field(default=_NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class Variable:
    """A ``?NAME`` query variable; ``name`` is stored without the sigil."""
    name: str
    span: SourceSpan = field(default=_NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class NumberLiteral:
    value: Decimal
    span: SourceSpan = field(default=_NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class StringLiteral:
    value: str
    span: SourceSpan = field(default=_NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class Compound:
    elements: tuple
    span: SourceSpan = field(default=_NOWHERE, compare=False, repr=False)

    def __post_init__(self):
        if not self.elements:
            raise EmptyCompound("empty compound term", self.span)
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def head(self):
        return self.elements[0]

    @property
    def args(self) -> tuple:
        return self.elements[1:]


Term = Union[Atom, Variable, NumberLiteral, StringLiteral, Compound]


class KifError(Exception):
    """Base class for lexical and syntactic errors; carries a source span."""

    def __init__(self, message: str, span: SourceSpan):
        super().__init__(message)
        self.message = message
        self.span = span

    def __str__(self):
        return f"{type(self).__name__}: {self.message}"


class UnterminatedString(KifError):
    pass


class IllegalCharacter(KifError):
    pass


class UnbalancedParenthesis(KifError):
    pass


class EmptyCompound(KifError):
    pass


class UnsupportedSyntax(KifError):
    pass


class TokenKind(enum.Enum):
    LPAREN = "("
    RPAREN = ")"
    STRING = "string"
    SYMBOL = "symbol"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    span: SourceSpan


_WHITESPACE = " \t\r\n\f\v"
_DELIMITERS = _WHITESPACE + '();"'
_NUMBER = re.compile(r"-?\d+(\.\d+)?\Z")


def _is_control(ch: str) -> bool:
    return (ord(ch) < 32 and ch not in _WHITESPACE) or ord(ch) == 127


def tokenize(text: str) -> list[Token]:
    return list(_tokens(text))


def _tokens(text: str) -> Iterator[Token]:
    i, n = 0, len(text)
    line, col = 1, 1

    def advance(k: int):
        nonlocal i, line, col
        for ch in text[i:i + k]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += k

    while i < n:
        ch = text[i]
        if ch in _WHITESPACE:
            advance(1)
        elif ch == ";":
            end = text.find("\n", i)
            advance((n if end < 0 else end) - i)
        elif ch in "()":
            yield Token(TokenKind(ch), ch, SourceSpan(line, col, 1))
            advance(1)
        elif ch == '"':
            start = SourceSpan(line, col, 1)
            j = i + 1
            chars = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                chars.append(text[j])
                j += 1
            if j >= n:
                raise UnterminatedString("string literal is never closed", start)
            length = j + 1 - i
            yield Token(TokenKind.STRING, "".join(chars),
                        SourceSpan(start.line, start.column, length))
            advance(length)
        elif _is_control(ch):
            raise IllegalCharacter(f"control character {ord(ch):#04x}", SourceSpan(line, col, 1))
        else:
            j = i
            while j < n and text[j] not in _DELIMITERS:
                if _is_control(text[j]):
                    advance(j - i)
                    raise IllegalCharacter(f"control character {ord(text[j]):#04x}",
                                           SourceSpan(line, col, 1))
                j += 1
            yield Token(TokenKind.SYMBOL, text[i:j], SourceSpan(line, col, j - i))
            advance(j - i)


def _symbol(tok: Token) -> Term:
    text = tok.text
    if text.startswith("@"):
        raise UnsupportedSyntax(f"row variable {text!r} is not supported", tok.span)
    if text[0] in "'`,":
        raise UnsupportedSyntax(f"quoted term {text!r} is not supported", tok.span)
    if text.startswith("?"):
        name = text[1:]
        if not name or "?" in name:
            raise UnsupportedSyntax(f"malformed variable {text!r}", tok.span)
        return Variable(name, tok.span)
    if _NUMBER.match(text):
        return NumberLiteral(Decimal(text), tok.span)
    return Atom(text, tok.span)


def parse(text: str) -> list[Term]:
    """Parse every top-level form in ``text``."""
    forms: list[Term] = []
    stack: list[tuple[Token, list]] = []
    for tok in _tokens(text):
        if tok.kind is TokenKind.LPAREN:
            stack.append((tok, []))
            continue
        if tok.kind is TokenKind.RPAREN:
            if not stack:
                raise UnbalancedParenthesis("unexpected ')'", tok.span)
            opener, elements = stack.pop()
            if not elements:
                raise EmptyCompound("empty compound term '()'", opener.span)
            term: Term = Compound(tuple(elements), opener.span)
        elif tok.kind is TokenKind.STRING:
            term = StringLiteral(tok.text, tok.span)
        else:
            term = _symbol(tok)
        if stack:
            stack[-1][1].append(term)
        else:
            forms.append(term)
    if stack:
        raise UnbalancedParenthesis("'(' is never closed", stack[-1][0].span)
    return forms


def parse_file(path) -> list[Term]:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def _format_number(value: Decimal) -> str:
    text = format(value, "f")
    return "0" if text == "-0" else text


def print_term(t: Term) -> str:
    if isinstance(t, Atom):
        return t.name
    if isinstance(t, Variable):
        return "?" + t.name
    if isinstance(t, NumberLiteral):
        return _format_number(t.value)
    if isinstance(t, StringLiteral):
        return '"' + t.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(t, Compound):
        return "(" + " ".join(print_term(e) for e in t.elements) + ")"
    raise TypeError(f"not a KIF term: {t!r}")


class FormulaKind(enum.Enum):
    ATOMIC_SENTENCE = "AtomicSentence"
    IMPLICATION = "Implication"
    BICONDITIONAL = "Biconditional"
    CONJUNCTION = "Conjunction"
    DISJUNCTION = "Disjunction"
    NEGATION = "Negation"
    EXISTENTIAL = "Existential"
    UNIVERSAL = "Universal"
    OTHER = "Other"


_OPERATORS = {"=>", "<=>", "and", "or", "not", "exists", "forall"}


def _is_variable_list(t: Term) -> bool:
    return isinstance(t, Compound) and all(isinstance(e, Variable) for e in t.elements)


def classify(t: Term) -> FormulaKind:
    if isinstance(t, Atom):
        return FormulaKind.OTHER if t.name in _OPERATORS else FormulaKind.ATOMIC_SENTENCE
    if not isinstance(t, Compound):
        return FormulaKind.OTHER
    head, args = t.head, t.args
    if not isinstance(head, Atom) or head.name not in _OPERATORS:
        return FormulaKind.ATOMIC_SENTENCE
    op = head.name
    if op == "=>":
        return FormulaKind.IMPLICATION if len(args) == 2 else FormulaKind.OTHER
    if op == "<=>":
        return FormulaKind.BICONDITIONAL if len(args) == 2 else FormulaKind.OTHER
    if op == "not":
        return FormulaKind.NEGATION if len(args) == 1 else FormulaKind.OTHER
    if op in ("and", "or"):
        if not args:
            return FormulaKind.OTHER
        return FormulaKind.CONJUNCTION if op == "and" else FormulaKind.DISJUNCTION
    if len(args) == 2 and _is_variable_list(args[0]):
        return FormulaKind.EXISTENTIAL if op == "exists" else FormulaKind.UNIVERSAL
    return FormulaKind.OTHER


def variables(t: Term) -> set[str]:
    """Names of all variables occurring anywhere in ``t``."""
    if isinstance(t, Variable):
        return {t.name}
    if isinstance(t, Compound):
        out: set[str] = set()
        for e in t.elements:
            out |= variables(e)
        return out
    return set()
