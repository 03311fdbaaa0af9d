"""Labeled guarded-command abstract syntax and structural helpers.

Commands carry integer labels on atoms and on if/do headers.  Positive
labels name control points; negative labels only appear in intermediate
configurations produced by the small-step semantics, never in source.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

# ---------------------------------------------------------------------------
# Expressions

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Arith:
    op: str  # one of + - * %
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Cmp:
    op: str  # one of == != < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    arg: "Expr"


Expr = Union[Var, Lit, Arith, Cmp, BoolLit, And, Or, Not]

TRUE = BoolLit(True)
FALSE = BoolLit(False)

ARITH_OPS = ("+", "-", "*", "%")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


class TypeError_(Exception):
    """Ill-typed expression or command."""


def is_bool(e: Expr) -> bool:
    """True if ``e`` is a boolean expression; raises on ill-typed trees."""
    match e:
        case Var() | Lit():
            return False
        case Arith(op, a, b):
            if is_bool(a) or is_bool(b):
                raise TypeError_(f"arithmetic on boolean operand in {expr_str(e)}")
            return False
        case Cmp(op, a, b):
            if is_bool(a) or is_bool(b):
                raise TypeError_(f"comparison of booleans in {expr_str(e)}")
            return True
        case BoolLit():
            return True
        case And(a, b) | Or(a, b):
            if not (is_bool(a) and is_bool(b)):
                raise TypeError_(f"logical operator on integers in {expr_str(e)}")
            return True
        case Not(a):
            if not is_bool(a):
                raise TypeError_(f"negation of integer in {expr_str(e)}")
            return True
    raise TypeError_(f"unknown expression {e!r}")


def expr_vars(e: Expr) -> frozenset[str]:
    match e:
        case Var(x):
            return frozenset((x,))
        case Lit() | BoolLit():
            return frozenset()
        case Arith(_, a, b) | Cmp(_, a, b) | And(a, b) | Or(a, b):
            return expr_vars(a) | expr_vars(b)
        case Not(a):
            return expr_vars(a)
    raise TypeError_(f"unknown expression {e!r}")


def subst_expr(e: Expr, x: str, repl: Expr) -> Expr:
    """Substitute ``repl`` for program variable ``x`` in ``e``."""
    match e:
        case Var(y):
            return repl if y == x else e
        case Lit() | BoolLit():
            return e
        case Arith(op, a, b):
            return Arith(op, subst_expr(a, x, repl), subst_expr(b, x, repl))
        case Cmp(op, a, b):
            return Cmp(op, subst_expr(a, x, repl), subst_expr(b, x, repl))
        case And(a, b):
            return And(subst_expr(a, x, repl), subst_expr(b, x, repl))
        case Or(a, b):
            return Or(subst_expr(a, x, repl), subst_expr(b, x, repl))
        case Not(a):
            return Not(subst_expr(a, x, repl))
    raise TypeError_(f"unknown expression {e!r}")


# Precedence levels for printing: higher binds tighter.
_PREC = {"||": 1, "&&": 2, "!": 3, "cmp": 4, "+": 5, "-": 5, "*": 6, "%": 6}


def expr_str(e: Expr, parent: int = 0) -> str:
    match e:
        case Var(x):
            return x
        case Lit(v):
            return str(v) if v >= 0 else f"({v})"
        case BoolLit(v):
            return "true" if v else "false"
        case Arith(op, a, b):
            p = _PREC[op]
            # - and % are left-associative; right operand needs parens at equal level
            s = f"{expr_str(a, p)} {op} {expr_str(b, p + 1)}"
            return f"({s})" if p < parent else s
        case Cmp(op, a, b):
            p = _PREC["cmp"]
            s = f"{expr_str(a, p)} {op} {expr_str(b, p)}"
            return f"({s})" if p < parent else s
        case And(a, b):
            # parses right-associatively, so a left-nested And needs parens
            p = _PREC["&&"]
            s = f"{expr_str(a, p + 1)} && {expr_str(b, p)}"
            return f"({s})" if p < parent else s
        case Or(a, b):
            p = _PREC["||"]
            s = f"{expr_str(a, p + 1)} || {expr_str(b, p)}"
            return f"({s})" if p < parent else s
        case Not(a):
            return f"!{expr_str(a, _PREC['cmp'] + 1)}"
    raise TypeError_(f"unknown expression {e!r}")


def conj(parts: list[Expr]) -> Expr:
    """Right-folded conjunction; empty list is true."""
    if not parts:
        return TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def disj(parts: list[Expr]) -> Expr:
    """Right-folded disjunction; empty list is false."""
    if not parts:
        return FALSE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Or(p, out)
    return out


# ---------------------------------------------------------------------------
# Commands

@dataclass(frozen=True)
class Guarded:
    guard: Expr
    body: "Command"


GuardedList = tuple[Guarded, ...]


@dataclass(frozen=True)
class Skip:
    label: int


@dataclass(frozen=True)
class Assign:
    label: int
    var: str
    expr: Expr


@dataclass(frozen=True)
class Havoc:
    label: int
    var: str


@dataclass(frozen=True)
class Seq:
    first: "Command"
    second: "Command"


@dataclass(frozen=True)
class If:
    label: int
    guards: GuardedList


@dataclass(frozen=True)
class Do:
    label: int
    guards: GuardedList


Command = Union[Skip, Assign, Havoc, Seq, If, Do]


def enab(gcs: GuardedList) -> Expr:
    """Disjunction of the guards, in list order."""
    return disj([g.guard for g in gcs])


def lab(c: Command) -> int:
    """The entry label of a command."""
    match c:
        case Skip(n) | Assign(n, _, _) | Havoc(n, _) | If(n, _) | Do(n, _):
            return n
        case Seq(a, _):
            return lab(a)
    raise TypeError_(f"unknown command {c!r}")


def labs(c: Command) -> list[int]:
    """All labels of ``c`` in syntactic order (may contain duplicates)."""
    out: list[int] = []

    def walk(d: Command) -> None:
        match d:
            case Skip(n) | Assign(n, _, _) | Havoc(n, _):
                out.append(n)
            case Seq(a, b):
                walk(a)
                walk(b)
            case If(n, gcs) | Do(n, gcs):
                out.append(n)
                for g in gcs:
                    walk(g.body)

    walk(c)
    return out


def ok(c: Command) -> bool:
    """Labels all positive and pairwise distinct."""
    ls = labs(c)
    return all(n > 0 for n in ls) and len(set(ls)) == len(ls)


def okf(c: Command, f: int) -> bool:
    return ok(c) and f not in labs(c)


def sub(n: int, c: Command) -> Command:
    """The sub-command of ``c`` labeled ``n``."""
    match c:
        case Skip(m) | Assign(m, _, _) | Havoc(m, _):
            if m == n:
                return c
        case Seq(a, b):
            if n in labs(a):
                return sub(n, a)
            return sub(n, b)
        case If(m, gcs) | Do(m, gcs):
            if m == n:
                return c
            for g in gcs:
                if n in labs(g.body):
                    return sub(n, g.body)
    raise KeyError(f"no sub-command labeled {n}")


def cmd_vars(c: Command) -> frozenset[str]:
    match c:
        case Skip():
            return frozenset()
        case Assign(_, x, e):
            return frozenset((x,)) | expr_vars(e)
        case Havoc(_, x):
            return frozenset((x,))
        case Seq(a, b):
            return cmd_vars(a) | cmd_vars(b)
        case If(_, gcs) | Do(_, gcs):
            out: frozenset[str] = frozenset()
            for g in gcs:
                out |= expr_vars(g.guard) | cmd_vars(g.body)
            return out
    raise TypeError_(f"unknown command {c!r}")


def seq_all(cmds: list[Command]) -> Command:
    """Right-nested sequence of one or more commands."""
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = Seq(c, out)
    return out


def seq_parts(c: Command) -> list[Command]:
    """Flatten nested sequences into the list of sequenced commands."""
    match c:
        case Seq(a, b):
            return seq_parts(a) + seq_parts(b)
        case _:
            return [c]


def strip_skips(c: Command, label: int | None = 0) -> Command:
    """Remove skip commands (with the given label; None means any) that are
    redundant inside sequences.  A lone skip is kept."""

    def is_strippable(d: Command) -> bool:
        return isinstance(d, Skip) and (label is None or d.label == label)

    match c:
        case Seq(a, b):
            a2 = strip_skips(a, label)
            b2 = strip_skips(b, label)
            if is_strippable(a2):
                return b2
            if is_strippable(b2):
                return a2
            return Seq(a2, b2)
        case If(n, gcs):
            return If(n, tuple(Guarded(g.guard, strip_skips(g.body, label)) for g in gcs))
        case Do(n, gcs):
            return Do(n, tuple(Guarded(g.guard, strip_skips(g.body, label)) for g in gcs))
        case _:
            return c


def cmd_str(c: Command) -> str:
    """Concrete syntax; round-trips through the parser including labels."""
    match c:
        case Skip(n):
            return f"skip @{n}"
        case Assign(n, x, e):
            return f"{x} := {expr_str(e)} @{n}"
        case Havoc(n, x):
            return f"havoc {x} @{n}"
        case Seq(a, b):
            # sequences parse right-nested; parenthesize a left-nested head
            head = f"({cmd_str(a)})" if isinstance(a, Seq) else cmd_str(a)
            return f"{head}; {cmd_str(b)}"
        case If(n, gcs):
            inner = " [] ".join(f"{expr_str(g.guard)} -> {cmd_str(g.body)}" for g in gcs)
            return f"if @{n} {inner} fi"
        case Do(n, gcs):
            inner = " [] ".join(f"{expr_str(g.guard)} -> {cmd_str(g.body)}" for g in gcs)
            return f"do @{n} {inner} od"
    raise TypeError_(f"unknown command {c!r}")


def typecheck(c: Command) -> None:
    """Raise TypeError_ unless all guards are boolean and all assignment
    right-hand sides are integer expressions."""
    match c:
        case Skip() | Havoc():
            pass
        case Assign(_, _, e):
            if is_bool(e):
                raise TypeError_(f"boolean assigned to integer variable in {cmd_str(c)}")
        case Seq(a, b):
            typecheck(a)
            typecheck(b)
        case If(_, gcs) | Do(_, gcs):
            for g in gcs:
                if not is_bool(g.guard):
                    raise TypeError_(f"integer guard {expr_str(g.guard)}")
                typecheck(g.body)


def iter_subcommands(c: Command) -> Iterator[Command]:
    yield c
    match c:
        case Seq(a, b):
            yield from iter_subcommands(a)
            yield from iter_subcommands(b)
        case If(_, gcs) | Do(_, gcs):
            for g in gcs:
                yield from iter_subcommands(g.body)
