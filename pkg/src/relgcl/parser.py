"""Concrete syntax for programs, expressions, and assertion formulas.

Program text::

    x := y @1;
    do @2 x > 0 ->
      if @3 x % 2 == 0 -> x := x - 1 @4 [] x % 2 != 0 -> x := x - 2 @5 fi
    od

``@n`` annotates the atom it follows (or the if/do keyword); unlabeled
atoms receive fresh positive labels after parsing.

Assertion text: unprimed identifiers read the left store, primed (``x'``)
the right, ``$k`` names a logical variable, ``<| e |>`` / ``<| e |>'``
embed a boolean program expression on the left/right, ``?n`` / ``?'n``
abbreviate pc = n on the indicated side, ``==>`` is implication, and the
one-sided quantifiers are written ``forall x|. F`` and ``exists |x'. F``.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import formulas, syntax
from .formulas import (FQuant, Formula, RVar, FCmp, RLit, LEFT, RIGHT, PLAIN,
                       LOGIC, embed_expr)
from .syntax import (And, Arith, Assign, BoolLit, Cmp, Command, Do, Expr,
                     Guarded, Havoc, If, Lit, Not, Or, Seq, Skip, Var)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str  # "int" "ident" "op" "eof"
    text: str
    line: int
    col: int


_KEYWORDS = {"skip", "havoc", "if", "fi", "do", "od", "true", "false",
             "forall", "exists"}

_OPS = ["==>", "<|", "|>", ":=", "==", "!=", "<=", ">=", "&&", "||", "[]",
        "->", "?'", "+", "-", "*", "%", "<", ">", "!", "=", "(", ")", ";",
        "@", "?", "|", ".", "'", "$", ","]


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for op in _OPS:
            if text.startswith(op, i):
                toks.append(Token("op", op, line, col))
                i += len(op)
                col += len(op)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.pos += 1
            return True
        return False

    def error(self, msg: str) -> ParseError:
        t = self.peek()
        return ParseError(msg + f" (found {t.text!r})", t.line, t.col)


# ---------------------------------------------------------------------------
# Expressions (shared precedence climbing)

def _parse_or(p: _Parser) -> Expr:
    e = _parse_and(p)
    if p.accept("||"):
        return Or(e, _parse_or(p))
    return e


def _parse_and(p: _Parser) -> Expr:
    e = _parse_not(p)
    if p.accept("&&"):
        return And(e, _parse_and(p))
    return e


def _parse_not(p: _Parser) -> Expr:
    if p.accept("!"):
        return Not(_parse_not(p))
    return _parse_cmp(p)


def _parse_cmp(p: _Parser) -> Expr:
    e = _parse_add(p)
    if p.peek().text in syntax.CMP_OPS:
        op = p.next().text
        return Cmp(op, e, _parse_add(p))
    return e


def _parse_add(p: _Parser) -> Expr:
    e = _parse_mul(p)
    while p.peek().text in ("+", "-"):
        op = p.next().text
        e = Arith(op, e, _parse_mul(p))
    return e


def _parse_mul(p: _Parser) -> Expr:
    e = _parse_atom(p)
    while p.peek().text in ("*", "%"):
        op = p.next().text
        e = Arith(op, e, _parse_atom(p))
    return e


def _parse_atom(p: _Parser) -> Expr:
    t = p.peek()
    if t.kind == "int":
        p.next()
        return Lit(int(t.text))
    if t.text == "true":
        p.next()
        return BoolLit(True)
    if t.text == "false":
        p.next()
        return BoolLit(False)
    if t.kind == "ident" and t.text not in _KEYWORDS:
        p.next()
        return Var(t.text)
    if p.accept("("):
        e = _parse_or(p)
        p.expect(")")
        return e
    raise p.error("expected expression")


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    e = _parse_or(p)
    if p.peek().kind != "eof":
        raise p.error("trailing input after expression")
    return e


# ---------------------------------------------------------------------------
# Commands

def _parse_label(p: _Parser) -> int | None:
    if p.accept("@"):
        t = p.next()
        if t.kind != "int":
            raise ParseError("label must be an integer", t.line, t.col)
        return int(t.text)
    return None


def _parse_guards(p: _Parser) -> tuple[Guarded, ...]:
    out = []
    while True:
        guard = _parse_or(p)
        p.expect("->")
        body = _parse_command(p)
        out.append(Guarded(guard, body))
        if not p.accept("[]"):
            return tuple(out)


def _parse_command(p: _Parser) -> Command:
    c = _parse_stmt(p)
    if p.accept(";"):
        return Seq(c, _parse_command(p))
    return c


_UNLABELED = -1  # placeholder replaced by the auto-labeler


def _parse_stmt(p: _Parser) -> Command:
    t = p.peek()
    if t.text == "(":
        p.next()
        c = _parse_command(p)
        p.expect(")")
        return c
    if t.text == "skip":
        p.next()
        n = _parse_label(p)
        return Skip(n if n is not None else _UNLABELED)
    if t.text == "havoc":
        p.next()
        v = p.next()
        if v.kind != "ident":
            raise ParseError("havoc needs a variable", v.line, v.col)
        n = _parse_label(p)
        return Havoc(n if n is not None else _UNLABELED, v.text)
    if t.text == "if":
        p.next()
        n = _parse_label(p)
        gcs = _parse_guards(p)
        p.expect("fi")
        return If(n if n is not None else _UNLABELED, gcs)
    if t.text == "do":
        p.next()
        n = _parse_label(p)
        gcs = _parse_guards(p)
        p.expect("od")
        return Do(n if n is not None else _UNLABELED, gcs)
    if t.kind == "ident" and t.text not in _KEYWORDS:
        p.next()
        p.expect(":=")
        e = _parse_or(p)
        n = _parse_label(p)
        return Assign(n if n is not None else _UNLABELED, t.text, e)
    raise p.error("expected statement")


def _assign_labels(c: Command, strict: bool) -> Command:
    explicit: dict[int, int] = {}

    def collect(d: Command) -> None:
        match d:
            case Skip(n) | Assign(n, _, _) | Havoc(n, _) | If(n, _) | Do(n, _):
                if n != _UNLABELED:
                    explicit[n] = explicit.get(n, 0) + 1
        match d:
            case Seq(a, b):
                collect(a)
                collect(b)
            case If(_, gcs) | Do(_, gcs):
                for g in gcs:
                    collect(g.body)

    collect(c)
    if strict:
        dupes = sorted(n for n, k in explicit.items() if k > 1)
        if dupes:
            raise ParseError(f"duplicate label(s) {dupes}: each labeled point "
                             "must be unique in the program")
    counter = [1]

    def fresh() -> int:
        while counter[0] in explicit:
            counter[0] += 1
        explicit[counter[0]] = 1
        return counter[0]

    def fill(d: Command) -> Command:
        match d:
            case Skip(n):
                return Skip(fresh() if n == _UNLABELED else n)
            case Assign(n, x, e):
                return Assign(fresh() if n == _UNLABELED else n, x, e)
            case Havoc(n, x):
                return Havoc(fresh() if n == _UNLABELED else n, x)
            case Seq(a, b):
                a2 = fill(a)
                return Seq(a2, fill(b))
            case If(n, gcs):
                m = fresh() if n == _UNLABELED else n
                return If(m, tuple(Guarded(g.guard, fill(g.body)) for g in gcs))
            case Do(n, gcs):
                m = fresh() if n == _UNLABELED else n
                return Do(m, tuple(Guarded(g.guard, fill(g.body)) for g in gcs))
        raise AssertionError

    return fill(c)


def parse_program(text: str) -> Command:
    """Parse program text, auto-labeling unlabeled atoms; explicit labels
    must be unique."""
    p = _Parser(text)
    c = _parse_command(p)
    if p.peek().kind != "eof":
        raise p.error("trailing input after program")
    c = _assign_labels(c, strict=True)
    syntax.typecheck(c)
    return c


def parse_command_lenient(text: str) -> Command:
    """Like parse_program but tolerating repeated labels; proof files
    carry normal-form commands whose labels are all 0."""
    p = _Parser(text)
    c = _parse_command(p)
    if p.peek().kind != "eof":
        raise p.error("trailing input after program")
    c = _assign_labels(c, strict=False)
    syntax.typecheck(c)
    return c


# ---------------------------------------------------------------------------
# Assertion formulas

class _FormulaParser(_Parser):
    def __init__(self, text: str, pcvar: str, unary: bool):
        super().__init__(text)
        self.pcvar = pcvar
        self.unary = unary
        self.default_side = PLAIN if unary else LEFT

    def parse(self) -> Formula:
        f = self.imp()
        if self.peek().kind != "eof":
            raise self.error("trailing input after formula")
        return f

    def imp(self) -> Formula:
        f = self.f_or()
        if self.accept("==>"):
            return formulas.FImp(f, self.imp())
        return f

    def f_or(self) -> Formula:
        f = self.f_and()
        if self.accept("||"):
            return formulas.FOr(f, self.f_or())
        return f

    def f_and(self) -> Formula:
        f = self.f_not()
        if self.accept("&&"):
            return formulas.FAnd(f, self.f_and())
        return f

    def f_not(self) -> Formula:
        if self.accept("!"):
            return formulas.FNot(self.f_not())
        return self.f_atom()

    def f_atom(self) -> Formula:
        t = self.peek()
        if t.text in ("forall", "exists"):
            self.next()
            var, side = self.binder()
            self.expect(".")
            return FQuant(t.text, side, var, self.imp())
        if t.text == "true":
            self.next()
            return formulas.F_TRUE
        if t.text == "false":
            self.next()
            return formulas.F_FALSE
        if t.text == "<|":
            self.next()
            e = _parse_or(self)
            self.expect("|>")
            side = RIGHT if self.accept("'") else LEFT
            if self.unary:
                raise self.error("embedding brackets are relational-only")
            return embed_expr(e, side)
        if t.text == "?":
            self.next()
            lit = self.next()
            if lit.kind != "int":
                raise ParseError("?n needs an integer", lit.line, lit.col)
            side = PLAIN if self.unary else LEFT
            return FCmp("==", RVar(self.pcvar, side), RLit(int(lit.text)))
        if t.text == "?'":
            self.next()
            lit = self.next()
            if lit.kind != "int" or self.unary:
                raise ParseError("?'n is relational-only", lit.line, lit.col)
            return FCmp("==", RVar(self.pcvar, RIGHT), RLit(int(lit.text)))
        if t.text == "(":
            self.next()
            f = self.imp()
            self.expect(")")
            return f
        # otherwise: a comparison between terms ("=" is accepted for "==")
        a = self.term_add()
        op = self.next()
        text = "==" if op.text == "=" else op.text
        if text not in syntax.CMP_OPS:
            raise ParseError(f"expected comparison, found {op.text!r}",
                             op.line, op.col)
        b = self.term_add()
        return FCmp(text, a, b)

    # quantifier binder: "x|" (left), "|x'" (right), bare "x" when unary
    def binder(self) -> tuple[str, str]:
        if self.accept("|"):
            name = self.next()
            if name.kind != "ident":
                raise self.error("expected variable in binder")
            self.accept("'")
            return name.text, RIGHT
        name = self.next()
        if name.kind != "ident":
            raise self.error("expected variable in binder")
        if self.accept("|"):
            return name.text, LEFT
        if self.unary:
            return name.text, PLAIN
        raise self.error("relational binder needs a side bar: x| or |x'")

    def term_add(self):
        t = self.term_mul()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            t = formulas.ROp(op, t, self.term_mul())
        return t

    def term_mul(self):
        t = self.term_atom()
        while self.peek().text in ("*", "%"):
            op = self.next().text
            t = formulas.ROp(op, t, self.term_atom())
        return t

    def term_atom(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            return RLit(int(t.text))
        if t.text == "$":
            self.next()
            name = self.next()
            if name.kind != "ident":
                raise self.error("expected logical variable name after $")
            return RVar(name.text, LOGIC)
        if t.kind == "ident" and t.text not in _KEYWORDS:
            self.next()
            if self.accept("'"):
                if self.unary:
                    raise self.error("primed variables are relational-only")
                return RVar(t.text, RIGHT)
            return RVar(t.text, self.default_side)
        if self.accept("("):
            inner = self.term_add()
            self.expect(")")
            return inner
        raise self.error("expected term")


def parse_formula(text: str, pcvar: str = "pc") -> Formula:
    """Parse a relational assertion."""
    return _FormulaParser(text, pcvar, unary=False).parse()


def parse_unary_formula(text: str, pcvar: str = "pc") -> Formula:
    """Parse a single-store assertion (unprimed variables, PLAIN side)."""
    return _FormulaParser(text, pcvar, unary=True).parse()
