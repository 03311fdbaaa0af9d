"""Two-store relational assertions with one-sided quantifiers.

Atoms compare mixed terms whose variable references carry a side tag:
LEFT and RIGHT read the two stores of a pair, PLAIN is the single store
of a unary formula, and LOGIC names a specification-only variable bound
by an external valuation.  Bounded validity checking enumerates stores
over a finite domain; variables whose every occurrence is an equality
with integer literals are eliminated exactly (the usual case for a
program-counter variable).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from . import syntax
from .syntax import Expr

LEFT = "left"
RIGHT = "right"
PLAIN = "plain"
LOGIC = "logic"

SIDES = (LEFT, RIGHT, PLAIN, LOGIC)


class FormulaError(Exception):
    pass


# ---------------------------------------------------------------------------
# Terms and formulas

@dataclass(frozen=True)
class RVar:
    name: str
    side: str


@dataclass(frozen=True)
class RLit:
    value: int


@dataclass(frozen=True)
class ROp:
    op: str
    left: "Term"
    right: "Term"


Term = Union[RVar, RLit, ROp]


@dataclass(frozen=True)
class FBool:
    value: bool


@dataclass(frozen=True)
class FCmp:
    op: str
    left: Term
    right: Term


@dataclass(frozen=True)
class FNot:
    arg: "Formula"


@dataclass(frozen=True)
class FAnd:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class FOr:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class FImp:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class FQuant:
    kind: str  # "forall" | "exists"
    side: str  # LEFT | RIGHT | PLAIN
    var: str
    body: "Formula"


Formula = Union[FBool, FCmp, FNot, FAnd, FOr, FImp, FQuant]

F_TRUE = FBool(True)
F_FALSE = FBool(False)


def fand(parts: list[Formula]) -> Formula:
    if not parts:
        return F_TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = FAnd(p, out)
    return out


def forr(parts: list[Formula]) -> Formula:
    if not parts:
        return F_FALSE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = FOr(p, out)
    return out


# ---------------------------------------------------------------------------
# Embedding program expressions

def embed_term(e: Expr, side: str) -> Term:
    match e:
        case syntax.Var(x):
            return RVar(x, side)
        case syntax.Lit(v):
            return RLit(v)
        case syntax.Arith(op, a, b):
            return ROp(op, embed_term(a, side), embed_term(b, side))
    raise FormulaError(f"not an integer expression: {syntax.expr_str(e)}")


def embed_expr(e: Expr, side: str) -> Formula:
    """Lift a boolean program expression to a formula reading one store."""
    match e:
        case syntax.BoolLit(v):
            return FBool(v)
        case syntax.Cmp(op, a, b):
            return FCmp(op, embed_term(a, side), embed_term(b, side))
        case syntax.And(a, b):
            return FAnd(embed_expr(a, side), embed_expr(b, side))
        case syntax.Or(a, b):
            return FOr(embed_expr(a, side), embed_expr(b, side))
        case syntax.Not(a):
            return FNot(embed_expr(a, side))
    raise FormulaError(f"not a boolean expression: {syntax.expr_str(e)}")


def embed(p: Formula, side: str) -> Formula:
    """Annotate every PLAIN variable of a unary formula with ``side``."""
    if side not in (LEFT, RIGHT):
        raise FormulaError(f"embedding side must be left or right, got {side}")
    if any(s in (LEFT, RIGHT) for _, s in free_vars(p)):
        raise FormulaError("formula already carries left/right annotations")
    return _retag(p, side)


def _retag_term(t: Term, side: str) -> Term:
    match t:
        case RVar(x, s):
            return RVar(x, side) if s == PLAIN else t
        case RLit():
            return t
        case ROp(op, a, b):
            return ROp(op, _retag_term(a, side), _retag_term(b, side))
    raise FormulaError(f"unknown term {t!r}")


def _retag(p: Formula, side: str) -> Formula:
    match p:
        case FBool():
            return p
        case FCmp(op, a, b):
            return FCmp(op, _retag_term(a, side), _retag_term(b, side))
        case FNot(a):
            return FNot(_retag(a, side))
        case FAnd(a, b):
            return FAnd(_retag(a, side), _retag(b, side))
        case FOr(a, b):
            return FOr(_retag(a, side), _retag(b, side))
        case FImp(a, b):
            return FImp(_retag(a, side), _retag(b, side))
        case FQuant(k, s, v, body):
            return FQuant(k, side if s == PLAIN else s, v, _retag(body, side))
    raise FormulaError(f"unknown formula {p!r}")


# ---------------------------------------------------------------------------
# Free variables, substitution, quantification

def term_vars(t: Term) -> frozenset[tuple[str, str]]:
    match t:
        case RVar(x, s):
            return frozenset(((x, s),))
        case RLit():
            return frozenset()
        case ROp(_, a, b):
            return term_vars(a) | term_vars(b)
    raise FormulaError(f"unknown term {t!r}")


def free_vars(p: Formula) -> frozenset[tuple[str, str]]:
    match p:
        case FBool():
            return frozenset()
        case FCmp(_, a, b):
            return term_vars(a) | term_vars(b)
        case FNot(a):
            return free_vars(a)
        case FAnd(a, b) | FOr(a, b) | FImp(a, b):
            return free_vars(a) | free_vars(b)
        case FQuant(_, s, v, body):
            return free_vars(body) - {(v, s)}
    raise FormulaError(f"unknown formula {p!r}")


def fresh_name(base: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    if base not in taken:
        return base
    i = 0
    while f"{base}_{i}" in taken:
        i += 1
    return f"{base}_{i}"


def subst_term(t: Term, var: str, side: str, repl: Term) -> Term:
    match t:
        case RVar(x, s):
            return repl if (x, s) == (var, side) else t
        case RLit():
            return t
        case ROp(op, a, b):
            return ROp(op, subst_term(a, var, side, repl), subst_term(b, var, side, repl))
    raise FormulaError(f"unknown term {t!r}")


def subst_formula(p: Formula, var: str, side: str, repl: Term) -> Formula:
    """Capture-avoiding substitution of a term for a sided variable."""
    match p:
        case FBool():
            return p
        case FCmp(op, a, b):
            return FCmp(op, subst_term(a, var, side, repl), subst_term(b, var, side, repl))
        case FNot(a):
            return FNot(subst_formula(a, var, side, repl))
        case FAnd(a, b):
            return FAnd(subst_formula(a, var, side, repl), subst_formula(b, var, side, repl))
        case FOr(a, b):
            return FOr(subst_formula(a, var, side, repl), subst_formula(b, var, side, repl))
        case FImp(a, b):
            return FImp(subst_formula(a, var, side, repl), subst_formula(b, var, side, repl))
        case FQuant(k, s, v, body):
            if (v, s) == (var, side):
                return p
            if (v, s) in term_vars(repl):
                # rename the bound variable away from the replacement's support
                taken = {x for x, _ in free_vars(body) | term_vars(repl)}
                v2 = fresh_name(v, taken)
                body = subst_formula(body, v, s, RVar(v2, s))
                return FQuant(k, s, v2, subst_formula(body, var, side, repl))
            return FQuant(k, s, v, subst_formula(body, var, side, repl))
    raise FormulaError(f"unknown formula {p!r}")


def subst_many_term(t: Term, mapping: dict[tuple[str, str], Term]) -> Term:
    match t:
        case RVar(x, s):
            return mapping.get((x, s), t)
        case RLit():
            return t
        case ROp(op, a, b):
            return ROp(op, subst_many_term(a, mapping),
                       subst_many_term(b, mapping))
    raise FormulaError(f"unknown term {t!r}")


def subst_many(p: Formula, mapping: dict[tuple[str, str], Term]) -> Formula:
    """Simultaneous substitution; images are not themselves substituted.
    Bound variables shadow their keys and keys whose image would be
    captured are dropped within the binder."""
    if not mapping:
        return p
    match p:
        case FBool():
            return p
        case FCmp(op, a, b):
            return FCmp(op, subst_many_term(a, mapping),
                        subst_many_term(b, mapping))
        case FNot(a):
            return FNot(subst_many(a, mapping))
        case FAnd(a, b):
            return FAnd(subst_many(a, mapping), subst_many(b, mapping))
        case FOr(a, b):
            return FOr(subst_many(a, mapping), subst_many(b, mapping))
        case FImp(a, b):
            return FImp(subst_many(a, mapping), subst_many(b, mapping))
        case FQuant(k, s, v, body):
            inner = {key: t for key, t in mapping.items()
                     if key != (v, s) and (v, s) not in term_vars(t)}
            return FQuant(k, s, v, subst_many(body, inner))
    raise FormulaError(f"unknown formula {p!r}")


def substitute(p: Formula, side: str, var: str, e: Expr,
               var2: Optional[str] = None, e2: Optional[Expr] = None) -> Formula:
    """Substitute a program expression for a variable on one or both sides.

    ``side`` is "left", "right", or "both"; the two-variable form applies
    the left substitution to ``var`` and the right one to ``var2``.
    """
    if side == "both":
        assert var2 is not None and e2 is not None
        out = subst_formula(p, var2, RIGHT, embed_term(e2, RIGHT))
        return subst_formula(out, var, LEFT, embed_term(e, LEFT))
    if side not in (LEFT, RIGHT, PLAIN):
        raise FormulaError(f"bad substitution side {side}")
    return subst_formula(p, var, side, embed_term(e, side))


def indep(p: Formula, var: str, side: str) -> bool:
    """Syntactic independence: the sided variable does not occur free."""
    return (var, side) not in free_vars(p)


def quantify(p: Formula, side: str, kind: str, var: str) -> Formula:
    """Build a one-sided quantifier, simplifying when independent."""
    if kind not in ("forall", "exists"):
        raise FormulaError(f"bad quantifier kind {kind}")
    if indep(p, var, side):
        return p
    return FQuant(kind, side, var, p)


# ---------------------------------------------------------------------------
# Evaluation

def eval_term(t: Term, s, s_, env: dict[str, int]) -> int:
    match t:
        case RVar(x, side):
            if side == LEFT:
                return s.get(x)
            if side == RIGHT:
                return s_.get(x)
            if side == PLAIN:
                return s.get(x)
            if x not in env:
                raise FormulaError(f"unbound logical variable {x}")
            return env[x]
        case RLit(v):
            return v
        case ROp(op, a, b):
            x, y = eval_term(a, s, s_, env), eval_term(b, s, s_, env)
            if op == "+":
                return x + y
            if op == "-":
                return x - y
            if op == "*":
                return x * y
            if op == "%":
                return x % abs(y) if y != 0 else x
    raise FormulaError(f"unknown term {t!r}")


_CMP = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_rel(p: Formula, s, s_, env: Optional[dict[str, int]] = None,
             quant_values: Optional[Iterable[int]] = None) -> bool:
    """Satisfaction at a store pair.  Quantifiers range over
    ``quant_values`` (callers pick the domain; symbolic transformations
    never need this, bounded checking passes the check domain)."""
    env = env or {}

    def go(q: Formula, s, s_) -> bool:
        match q:
            case FBool(v):
                return v
            case FCmp(op, a, b):
                return _CMP[op](eval_term(a, s, s_, env), eval_term(b, s, s_, env))
            case FNot(a):
                return not go(a, s, s_)
            case FAnd(a, b):
                return go(a, s, s_) and go(b, s, s_)
            case FOr(a, b):
                return go(a, s, s_) or go(b, s, s_)
            case FImp(a, b):
                return (not go(a, s, s_)) or go(b, s, s_)
            case FQuant(kind, side, v, body):
                if quant_values is None:
                    raise FormulaError("quantifier met without a value domain")
                vals = list(quant_values)
                if side in (LEFT, PLAIN):
                    results = (go(body, s.set(v, x), s_) for x in vals)
                else:
                    results = (go(body, s, s_.set(v, x)) for x in vals)
                return all(results) if kind == "forall" else any(results)
        raise FormulaError(f"unknown formula {q!r}")

    return go(p, s, s_)


def eval_unary(p: Formula, s, env: Optional[dict[str, int]] = None,
               quant_values: Optional[Iterable[int]] = None) -> bool:
    return eval_rel(p, s, s, env, quant_values)


# ---------------------------------------------------------------------------
# Printing (inverse of the assertion parser in parser.py)

def term_str(t: Term, parent: int = 0) -> str:
    match t:
        case RVar(x, s):
            if s == RIGHT:
                return f"{x}'"
            if s == LOGIC:
                return f"${x}"
            return x
        case RLit(v):
            return str(v) if v >= 0 else f"({v})"
        case ROp(op, a, b):
            p = syntax._PREC[op]
            s = f"{term_str(a, p)} {op} {term_str(b, p + 1)}"
            return f"({s})" if p < parent else s
    raise FormulaError(f"unknown term {t!r}")


def formula_str(p: Formula, parent: int = 0) -> str:
    # precedence: ==> (0) < || (1) < && (2) < ! (3) < atoms
    match p:
        case FBool(v):
            return "true" if v else "false"
        case FCmp(op, a, b):
            s = f"{term_str(a, 4)} {op} {term_str(b, 4)}"
            return f"({s})" if parent > 4 else s
        case FNot(a):
            return f"!{formula_str(a, 5)}"
        case FAnd(a, b):
            # parses right-associatively, so a left-nested And needs parens
            s = f"{formula_str(a, 3)} && {formula_str(b, 2)}"
            return f"({s})" if parent > 2 else s
        case FOr(a, b):
            s = f"{formula_str(a, 2)} || {formula_str(b, 1)}"
            return f"({s})" if parent > 1 else s
        case FImp(a, b):
            s = f"{formula_str(a, 1)} ==> {formula_str(b, 0)}"
            return f"({s})" if parent > 0 else s
        case FQuant(kind, side, v, body):
            if side in (LEFT, PLAIN):
                binder = f"{v}|" if side == LEFT else v
            else:
                binder = f"|{v}'"
            s = f"{kind} {binder}. {formula_str(body, 0)}"
            return f"({s})" if parent > 0 else s
    raise FormulaError(f"unknown formula {p!r}")


# ---------------------------------------------------------------------------
# Folding and bounded validity

def fold_term(t: Term) -> Term:
    match t:
        case ROp(op, a, b):
            a, b = fold_term(a), fold_term(b)
            if isinstance(a, RLit) and isinstance(b, RLit):
                x, y = a.value, b.value
                if op == "+":
                    return RLit(x + y)
                if op == "-":
                    return RLit(x - y)
                if op == "*":
                    return RLit(x * y)
                if op == "%":
                    return RLit(x % abs(y) if y != 0 else x)
            return ROp(op, a, b)
        case _:
            return t


def fold(p: Formula) -> Formula:
    """Constant folding; leaves quantifiers over non-constant bodies alone."""
    match p:
        case FBool():
            return p
        case FCmp(op, a, b):
            a, b = fold_term(a), fold_term(b)
            if isinstance(a, RLit) and isinstance(b, RLit):
                return FBool(_CMP[op](a.value, b.value))
            if a == b:
                return FBool(op in ("==", "<=", ">="))
            return FCmp(op, a, b)
        case FNot(a):
            a = fold(a)
            if isinstance(a, FBool):
                return FBool(not a.value)
            return FNot(a)
        case FAnd(a, b):
            a, b = fold(a), fold(b)
            if isinstance(a, FBool):
                return b if a.value else F_FALSE
            if isinstance(b, FBool):
                return a if b.value else F_FALSE
            return FAnd(a, b)
        case FOr(a, b):
            a, b = fold(a), fold(b)
            if isinstance(a, FBool):
                return F_TRUE if a.value else b
            if isinstance(b, FBool):
                return F_TRUE if b.value else a
            return FOr(a, b)
        case FImp(a, b):
            a, b = fold(a), fold(b)
            if isinstance(a, FBool):
                return b if a.value else F_TRUE
            if isinstance(b, FBool) and b.value:
                return F_TRUE
            return FImp(a, b)
        case FQuant(k, s, v, body):
            body = fold(body)
            if isinstance(body, FBool):
                return body
            if (v, s) not in free_vars(body):
                return body
            return FQuant(k, s, v, body)
    raise FormulaError(f"unknown formula {p!r}")


def _subst_value(p: Formula, var: str, side: str, value: int) -> Formula:
    return subst_formula(p, var, side, RLit(value))


def _eq_literals(p: Formula, var: str, side: str) -> tuple[set[int], bool]:
    """Literals equality-compared with the sided variable, and whether every
    occurrence of the variable is such a comparison (then enumeration over
    those literals plus one fresh value is exact)."""
    lits: set[int] = set()
    only_eq = True

    def is_target(t: Term) -> bool:
        return isinstance(t, RVar) and (t.name, t.side) == (var, side)

    def walk(q: Formula) -> None:
        nonlocal only_eq
        match q:
            case FBool():
                pass
            case FCmp(op, a, b):
                if is_target(a) and isinstance(b, RLit) and op in ("==", "!="):
                    lits.add(b.value)
                elif is_target(b) and isinstance(a, RLit) and op in ("==", "!="):
                    lits.add(a.value)
                elif (var, side) in term_vars(a) | term_vars(b):
                    only_eq = False
                    for t in (a, b):
                        for other in _compared_literals(t):
                            lits.add(other)
            case FNot(a):
                walk(a)
            case FAnd(a, b) | FOr(a, b) | FImp(a, b):
                walk(a)
                walk(b)
            case FQuant(_, s, v, body):
                if (v, s) != (var, side):
                    walk(body)

    def _compared_literals(t: Term) -> list[int]:
        # literals adjacent to the variable in a non-equality atom; used to
        # widen the bounded candidate set, not for exactness
        match t:
            case RLit(v):
                return [v]
            case _:
                return []

    walk(p)
    return lits, only_eq


@dataclass
class Verdict:
    status: str  # "valid" | "invalid"
    counterexample: Optional[dict] = None
    caveats: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.status == "valid"

    @property
    def exact(self) -> bool:
        return not self.caveats


def _presolve(p: Formula) -> Formula:
    """Use antecedent equalities of implications to pin variables.

    ``A && x == 3 ==> B`` is valid iff ``(A ==> B)[x := 3]`` is; likewise a
    variable-variable equality lets one side replace the other.  Applied to
    nested implications and under quantifiers (where it is sound because the
    pinned conjunct itself is retained until it folds to true).
    """

    def conjuncts(q: Formula) -> list[Formula]:
        if isinstance(q, FAnd):
            return conjuncts(q.left) + conjuncts(q.right)
        return [q]

    def occurs_elsewhere(v: RVar, pin_atom: Formula, ant: Formula,
                         cons: Formula) -> bool:
        rest = [c for c in conjuncts(ant) if c is not pin_atom]
        key = (v.name, v.side)
        return any(key in free_vars(c) for c in rest) or key in free_vars(cons)

    def literal_pass(ant: Formula, cons: Formula) -> tuple[Formula, Formula, bool]:
        # batch all variable = literal pins in one simultaneous substitution,
        # keeping the pin atoms themselves (soundness under any quantifier)
        cs = conjuncts(ant)
        pins: dict[tuple[str, str], Term] = {}
        pin_atoms = []
        for c in cs:
            if isinstance(c, FCmp) and c.op == "==":
                a, b = c.left, c.right
                if isinstance(a, RVar) and isinstance(b, RLit):
                    if (a.name, a.side) not in pins:
                        pins[(a.name, a.side)] = b
                        pin_atoms.append(c)
                        continue
                elif isinstance(b, RVar) and isinstance(a, RLit):
                    if (b.name, b.side) not in pins:
                        pins[(b.name, b.side)] = a
                        pin_atoms.append(c)
                        continue
        if not pins:
            return ant, cons, False
        rest = [fold(subst_many(c, pins)) for c in cs if c not in pin_atoms]
        ant2 = fand(pin_atoms + rest)
        cons2 = fold(subst_many(cons, pins))
        return ant2, cons2, (ant2, cons2) != (ant, cons)

    def varvar_pass(ant: Formula, cons: Formula) -> tuple[Formula, Formula, bool]:
        for c in conjuncts(ant):
            if not (isinstance(c, FCmp) and c.op == "=="):
                continue
            a, b = c.left, c.right
            if not (isinstance(a, RVar) and isinstance(b, RVar) and a != b):
                continue
            v, t = b, a
            if not occurs_elsewhere(v, c, ant, cons):
                continue
            rest = [fold(subst_formula(d, v.name, v.side, t))
                    for d in conjuncts(ant) if d is not c]
            return fand([c] + rest), fold(subst_formula(cons, v.name, v.side, t)), True
        return ant, cons, False

    def pin(q: Formula) -> Formula:
        if isinstance(q, FQuant):
            return FQuant(q.kind, q.side, q.var, pin(q.body))
        if not isinstance(q, FImp):
            return q
        ant, cons = q.left, pin(q.right)
        for _ in range(6):
            ant, cons, ch1 = literal_pass(ant, cons)
            ant, cons, ch2 = varvar_pass(ant, cons)
            if not (ch1 or ch2):
                break
        return FImp(ant, cons)

    return fold(pin(fold(p)))


def _occurrences(p: Formula, counts: dict[tuple[str, str], int]) -> None:
    match p:
        case FCmp(_, a, b):
            for t in (a, b):
                for key in term_vars(t):
                    counts[key] = counts.get(key, 0) + 1
        case FNot(a):
            _occurrences(a, counts)
        case FAnd(a, b) | FOr(a, b) | FImp(a, b):
            _occurrences(a, counts)
            _occurrences(b, counts)
        case FQuant(_, _, _, body):
            _occurrences(body, counts)
        case _:
            pass


def _free_in_order(p: Formula) -> list[tuple[str, str]]:
    """Logical variables last (antecedent equalities pin them once stores
    are fixed); otherwise most-occurring first, so substitution folds the
    formula fastest."""
    fv = free_vars(p)
    counts: dict[tuple[str, str], int] = {}
    _occurrences(p, counts)
    return sorted(fv, key=lambda vs: (vs[1] == LOGIC, -counts.get(vs, 0), vs))


def validity(p: Formula, dom, max_quant_caveat: bool = True) -> Verdict:
    """Bounded validity over ``dom``.

    Free variables are enumerated one at a time with folding after each
    substitution; a variable compared only by equality against literals is
    settled exactly (each literal plus one representative other value).
    Logical variables are implicitly universally quantified and enumerated
    last, so values pinned by antecedent equalities are found.  Residual
    quantifiers range over the domain plus compared literals.
    """
    caveats: list[str] = []
    dom_values = list(dom.values())

    def enumerate_free(q: Formula, trail: dict) -> Optional[dict]:
        # returns a counterexample assignment or None
        q = _presolve(q)
        if isinstance(q, FBool):
            return None if q.value else dict(trail)
        order = _free_in_order(q)
        if not order:
            return eval_residual(q, trail)
        var, side = order[0]
        lits, only_eq = _eq_literals(q, var, side)
        if only_eq and lits:
            candidates = sorted(lits) + [max(lits) + 1]
        else:
            candidates = sorted(set(dom_values) | lits)
            caveats.append(f"enumeration of {_pretty_var(var, side)} bounded to domain")
        for val in candidates:
            trail[_pretty_var(var, side)] = val
            sub_q = fold(_subst_value(q, var, side, val))
            cex = enumerate_free(sub_q, trail)
            if cex is not None:
                return cex
            del trail[_pretty_var(var, side)]
        return None

    def eval_residual(q: Formula, trail: dict) -> Optional[dict]:
        # closed except for quantifiers
        from .semantics import Store

        empty = Store()
        qvals: set[int] = set(dom_values)
        has_quant = [False]

        def scan(r: Formula) -> None:
            match r:
                case FQuant(_, s, v, body):
                    has_quant[0] = True
                    more, _ = _eq_literals(body, v, s)
                    qvals.update(more)
                    scan(body)
                case FNot(a):
                    scan(a)
                case FAnd(a, b) | FOr(a, b) | FImp(a, b):
                    scan(a)
                    scan(b)
                case _:
                    pass

        scan(q)
        if has_quant[0] and max_quant_caveat:
            caveats.append("quantifier range bounded to domain")
        ok = eval_rel(q, empty, empty, {}, sorted(qvals))
        return None if ok else dict(trail)

    cex = enumerate_free(p, {})
    # deduplicate caveats, preserving order
    seen: set[str] = set()
    dedup = [c for c in caveats if not (c in seen or seen.add(c))]
    if cex is not None:
        return Verdict("invalid", counterexample=cex, caveats=dedup)
    return Verdict("valid", caveats=dedup)


def _pretty_var(var: str, side: str) -> str:
    if side == RIGHT:
        return f"{var}'"
    if side == LOGIC:
        return f"${var}"
    return var


# ---------------------------------------------------------------------------
# SMT-LIB export

def _smt_sym(var: str, side: str) -> str:
    prefix = {LEFT: "l", RIGHT: "r", PLAIN: "l", LOGIC: "k"}[side]
    return f"|{prefix}.{var}|"


def _smt_term(t: Term, bound: dict[tuple[str, str], str]) -> str:
    match t:
        case RVar(x, s):
            return bound.get((x, s), _smt_sym(x, s))
        case RLit(v):
            return str(v) if v >= 0 else f"(- {-v})"
        case ROp(op, a, b):
            return f"({op if op != '%' else 'mod'} {_smt_term(a, bound)} {_smt_term(b, bound)})"
    raise FormulaError(f"unknown term {t!r}")


def _smt_formula(p: Formula, bound: dict[tuple[str, str], str]) -> str:
    match p:
        case FBool(v):
            return "true" if v else "false"
        case FCmp(op, a, b):
            smt_op = {"==": "=", "!=": "distinct"}.get(op, op)
            return f"({smt_op} {_smt_term(a, bound)} {_smt_term(b, bound)})"
        case FNot(a):
            return f"(not {_smt_formula(a, bound)})"
        case FAnd(a, b):
            return f"(and {_smt_formula(a, bound)} {_smt_formula(b, bound)})"
        case FOr(a, b):
            return f"(or {_smt_formula(a, bound)} {_smt_formula(b, bound)})"
        case FImp(a, b):
            return f"(=> {_smt_formula(a, bound)} {_smt_formula(b, bound)})"
        case FQuant(kind, side, v, body):
            sym = _smt_sym(v, side)
            inner = _smt_formula(body, {**bound, (v, side): sym})
            q = "forall" if kind == "forall" else "exists"
            return f"({q} (({sym} Int)) {inner})"
    raise FormulaError(f"unknown formula {p!r}")


def export_smtlib(p: Formula) -> str:
    """SMT-LIB 2 script asserting the negation; unsat means valid."""
    lines = ["(set-logic ALL)"]
    for x, s in sorted(free_vars(p)):
        lines.append(f"(declare-const {_smt_sym(x, s)} Int)")
    lines.append(f"(assert (not {_smt_formula(p, {})}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"
