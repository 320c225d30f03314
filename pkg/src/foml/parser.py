"""Text syntax for formulas: parser and pretty-printer.

Grammar, loosest to tightest: `<->`, `->` (both right-associative), `|`, `&`,
then the prefix operators `~`, `[]`, `<>` and dot-scoped quantifiers
`forall x.` / `exists x.`, whose body extends as far right as possible.
Predicates start uppercase, variables lowercase; arity is inferred from the
first occurrence and checked globally. Unicode connectives are accepted as
aliases. `#` starts a line comment.
"""

from __future__ import annotations

from dataclasses import dataclass

from .formulas import (
    And,
    Box,
    Diamond,
    Exists,
    Forall,
    Formula,
    FomlError,
    Iff,
    Implies,
    Not,
    Or,
    Pred,
)


@dataclass(frozen=True)
class SourceSpan:
    """Half-open offsets into the input text."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start > self.end or self.start < 0:
            raise ValueError(f"bad span {self.start}..{self.end}")


class ParseError(FomlError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{message} at {span.start}..{span.end}")
        self.span = span


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    start: int
    end: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.start, self.end)


_SIMPLE = {
    "(": "lparen",
    ")": "rparen",
    ",": "comma",
    ".": "dot",
    "&": "and",
    "|": "or",
    "~": "not",
    "¬": "not",
    "∧": "and",
    "∨": "or",
    "→": "implies",
    "↔": "iff",
    "∀": "forall",
    "∃": "exists",
    "□": "box",
    "◇": "diamond",
    "◊": "diamond",
}

_KEYWORDS = {"forall": "forall", "exists": "exists"}


def _tokenize(text: str) -> list[_Token]:
    toks: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "<":
            if text.startswith("<->", i):
                toks.append(_Token("iff", "<->", i, i + 3))
                i += 3
                continue
            if text.startswith("<>", i):
                toks.append(_Token("diamond", "<>", i, i + 2))
                i += 2
                continue
            raise ParseError("stray '<'", SourceSpan(i, i + 1))
        if c == "-":
            if text.startswith("->", i):
                toks.append(_Token("implies", "->", i, i + 2))
                i += 2
                continue
            raise ParseError("stray '-'", SourceSpan(i, i + 1))
        if c == "[":
            if text.startswith("[]", i):
                toks.append(_Token("box", "[]", i, i + 2))
                i += 2
                continue
            raise ParseError("stray '['", SourceSpan(i, i + 1))
        if c in _SIMPLE:
            toks.append(_Token(_SIMPLE[c], c, i, i + 1))
            i += 1
            continue
        if c.isalpha() and c.isascii():
            j = i + 1
            while j < n and (text[j].isalnum() and text[j].isascii() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in _KEYWORDS:
                toks.append(_Token(_KEYWORDS[word], word, i, j))
            elif word[0].isupper():
                toks.append(_Token("pred", word, i, j))
            else:
                toks.append(_Token("var", word, i, j))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", SourceSpan(i, i + 1))
    toks.append(_Token("eof", "", n, n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.arities: dict[str, int] = {}

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self, kind: str, what: str | None = None) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != kind:
            expected = what or f"'{kind}'"
            raise ParseError(
                f"expected {expected}, found {tok.text or 'end of input'!r}", tok.span
            )
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        phi = self.iff()
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(f"unexpected {tok.text!r} after formula", tok.span)
        return phi

    def iff(self) -> Formula:
        left = self.implies()
        if self.peek().kind == "iff":
            self.pos += 1
            return Iff(left, self.iff())
        return left

    def implies(self) -> Formula:
        left = self.disjunction()
        if self.peek().kind == "implies":
            self.pos += 1
            return Implies(left, self.implies())
        return left

    def disjunction(self) -> Formula:
        phi = self.conjunction()
        while self.peek().kind == "or":
            self.pos += 1
            phi = Or(phi, self.conjunction())
        return phi

    def conjunction(self) -> Formula:
        phi = self.unary()
        while self.peek().kind == "and":
            self.pos += 1
            phi = And(phi, self.unary())
        return phi

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "not":
            self.pos += 1
            return Not(self.unary())
        if tok.kind == "box":
            self.pos += 1
            return Box(self.unary())
        if tok.kind == "diamond":
            self.pos += 1
            return Diamond(self.unary())
        if tok.kind in ("forall", "exists"):
            self.pos += 1
            var = self.take("var", "a variable")
            self.take("dot", "'.'")
            body = self.iff()
            return (Forall if tok.kind == "forall" else Exists)(var.text, body)
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if tok.kind == "lparen":
            self.pos += 1
            phi = self.iff()
            self.take("rparen", "')'")
            return phi
        if tok.kind == "pred":
            self.pos += 1
            args: list[str] = []
            end = tok.end
            if self.peek().kind == "lparen":
                self.pos += 1
                args.append(self.take("var", "a variable").text)
                while self.peek().kind == "comma":
                    self.pos += 1
                    args.append(self.take("var", "a variable").text)
                end = self.take("rparen", "')'").end
            known = self.arities.setdefault(tok.text, len(args))
            if known != len(args):
                raise ParseError(
                    f"predicate {tok.text!r} used with arity {len(args)},"
                    f" earlier with arity {known}",
                    SourceSpan(tok.start, end),
                )
            return Pred(tok.text, tuple(args))
        raise ParseError(
            f"expected a formula, found {tok.text or 'end of input'!r}", tok.span
        )


def parse_formula(text: str) -> Formula:
    """Parse one formula. Raises ParseError with a span on bad input."""
    return _Parser(text).parse()


_LEVEL_IFF = 1
_LEVEL_IMPLIES = 2
_LEVEL_OR = 3
_LEVEL_AND = 4
_LEVEL_UNARY = 5


def _render(phi: Formula) -> tuple[str, int, bool]:
    """Returns (text, precedence level, ends-in-open-quantifier-scope)."""
    if isinstance(phi, Pred):
        if phi.args:
            return f"{phi.name}({', '.join(phi.args)})", 6, False
        return phi.name, 6, False
    if isinstance(phi, (Not, Box, Diamond)):
        op = {"Not": "~", "Box": "[] ", "Diamond": "<> "}[type(phi).__name__]
        text, level, open_scope = _render(phi.body)
        if level < _LEVEL_UNARY:
            text, open_scope = f"({text})", False
        return op + text, _LEVEL_UNARY, open_scope
    if isinstance(phi, (Exists, Forall)):
        kw = "exists" if isinstance(phi, Exists) else "forall"
        body, _, _ = _render(phi.body)
        return f"{kw} {phi.var}. {body}", _LEVEL_UNARY, True
    if isinstance(phi, And):
        return _binary(phi, "&", _LEVEL_AND, right_assoc=False)
    if isinstance(phi, Or):
        return _binary(phi, "|", _LEVEL_OR, right_assoc=False)
    if isinstance(phi, Implies):
        return _binary(phi, "->", _LEVEL_IMPLIES, right_assoc=True)
    return _binary(phi, "<->", _LEVEL_IFF, right_assoc=True)


def _binary(phi, op: str, level: int, right_assoc: bool) -> tuple[str, int, bool]:
    ltext, llevel, lopen = _render(phi.left)
    # The operator follows the left child, so an open quantifier scope there
    # would swallow it on re-parse.
    lmin = level + 1 if right_assoc else level
    if llevel < lmin or lopen:
        ltext = f"({ltext})"
    rtext, rlevel, ropen = _render(phi.right)
    rmin = level if right_assoc else level + 1
    if rlevel < rmin:
        rtext, ropen = f"({rtext})", False
    return f"{ltext} {op} {rtext}", level, ropen


def print_formula(phi: Formula) -> str:
    """Render with minimal parentheses; parse_formula inverts it exactly."""
    return _render(phi)[0]
