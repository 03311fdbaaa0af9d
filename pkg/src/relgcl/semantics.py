"""Stores, small-step execution, bounded runs, and the brute-force oracle.

Stores are finitely supported maps defaulting to zero, so the object
language's total stores are representable; all enumeration is restricted
to variables that occur in the programs and specification.  The oracle
is bounded-sound: "holds" means holds over the finite domain, and any
exhausted search downgrades the verdict to inconclusive rather than
silently passing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import formulas, syntax
from .formulas import Formula
from .syntax import (Assign, Command, Do, Expr, Havoc, If, Seq, Skip,
                     cmd_vars, enab, lab)


class Store:
    """Immutable, finitely-supported variable store (default value 0)."""

    __slots__ = ("_items", "_hash")

    def __init__(self, mapping: Optional[dict[str, int]] = None):
        items = {k: v for k, v in (mapping or {}).items() if v != 0}
        self._items = items
        self._hash = hash(frozenset(items.items()))

    def get(self, var: str) -> int:
        return self._items.get(var, 0)

    def set(self, var: str, value: int) -> "Store":
        new = dict(self._items)
        if value == 0:
            new.pop(var, None)
        else:
            new[var] = value
        return Store(new)

    def support(self) -> frozenset[str]:
        return frozenset(self._items)

    def __eq__(self, other) -> bool:
        return isinstance(other, Store) and self._items == other._items

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self._items.items()))
        return f"{{{inner}}}"


@dataclass(frozen=True)
class Domain:
    """Finite instantiation for enumeration: value range, variables of
    interest, and a step bound for loop execution."""

    lo: int
    hi: int
    variables: frozenset[str] = frozenset()
    steps: int = 64

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("domain range is empty")
        if self.steps <= 0:
            raise ValueError("step bound must be positive")
        if not isinstance(self.variables, frozenset):
            object.__setattr__(self, "variables", frozenset(self.variables))

    def values(self) -> range:
        return range(self.lo, self.hi + 1)

    def stores(self, variables: Iterable[str]) -> Iterable[Store]:
        vs = sorted(set(variables))
        for vals in itertools.product(self.values(), repeat=len(vs)):
            yield Store(dict(zip(vs, vals)))


def eval_expr(e: Expr, s: Store):
    """Total evaluation; % is Euclidean (result in [0, |divisor|)), and
    mod by zero returns the dividend to keep evaluation total."""
    match e:
        case syntax.Var(x):
            return s.get(x)
        case syntax.Lit(v):
            return v
        case syntax.Arith(op, a, b):
            x, y = eval_expr(a, s), eval_expr(b, s)
            if op == "+":
                return x + y
            if op == "-":
                return x - y
            if op == "*":
                return x * y
            if op == "%":
                return x % abs(y) if y != 0 else x
        case syntax.Cmp(op, a, b):
            return formulas._CMP[op](eval_expr(a, s), eval_expr(b, s))
        case syntax.BoolLit(v):
            return v
        case syntax.And(a, b):
            return eval_expr(a, s) and eval_expr(b, s)
        case syntax.Or(a, b):
            return eval_expr(a, s) or eval_expr(b, s)
        case syntax.Not(a):
            return not eval_expr(a, s)
    raise syntax.TypeError_(f"unknown expression {e!r}")


@dataclass(frozen=True)
class Config:
    command: Command
    store: Store


def step(cfg: Config, havoc_values: Iterable[int]) -> list[Config]:
    """All one-step successors.  Assignment, havoc, and loop exit continue
    as a negatively-labeled skip; havoc successors enumerate the given
    values.  The result is empty iff the command is a skip."""
    c, s = cfg.command, cfg.store
    match c:
        case Skip():
            return []
        case Assign(n, x, e):
            return [Config(Skip(-n), s.set(x, eval_expr(e, s)))]
        case Havoc(n, x):
            return [Config(Skip(-n), s.set(x, v)) for v in havoc_values]
        case Seq(a, b):
            if isinstance(a, Skip):
                return [Config(b, s)]
            return [Config(Seq(d.command, b), d.store)
                    for d in step(Config(a, s), havoc_values)]
        case If(_, gcs):
            return [Config(g.body, s) for g in gcs if eval_expr(g.guard, s)]
        case Do(n, gcs):
            if not eval_expr(enab(gcs), s):
                return [Config(Skip(-n), s)]
            return [Config(Seq(g.body, c), s)
                    for g in gcs if eval_expr(g.guard, s)]
    raise syntax.TypeError_(f"unknown command {c!r}")


def run_bounded(c: Command, s: Store, dom: Domain,
                bound: Optional[int] = None) -> tuple[set[Store], bool]:
    """Final stores reachable within the step bound, plus an exhaustion
    flag set when some path was still running at the bound."""
    bound = dom.steps if bound is None else bound
    values = list(dom.values())
    frontier: set[Config] = {Config(c, s)}
    seen: set[Config] = set(frontier)
    finals: set[Store] = set()
    exhausted = False
    for _ in range(bound + 1):
        nxt: set[Config] = set()
        for cfg in frontier:
            if isinstance(cfg.command, Skip):
                finals.add(cfg.store)
                continue
            for succ in step(cfg, values):
                if succ not in seen:
                    seen.add(succ)
                    nxt.add(succ)
        frontier = nxt
        if not frontier:
            return finals, False
    if any(not isinstance(cfg.command, Skip) for cfg in frontier):
        exhausted = True
    for cfg in frontier:
        if isinstance(cfg.command, Skip):
            finals.add(cfg.store)
    return finals, exhausted


# ---------------------------------------------------------------------------
# Judgments and the oracle

@dataclass(frozen=True)
class Judgment:
    """A unary, forall-forall, or forall-exists correctness judgment."""

    kind: str  # "unary" | "aa" | "ae"
    left: Command
    right: Optional[Command]
    pre: Formula
    post: Formula

    def __post_init__(self):
        if self.kind not in ("unary", "aa", "ae"):
            raise ValueError(f"bad judgment kind {self.kind}")
        if (self.right is None) != (self.kind == "unary"):
            raise ValueError("relational judgments need two programs")


@dataclass
class OracleVerdict:
    status: str  # "holds" | "counterexample" | "inconclusive"
    counterexample: Optional[tuple] = None
    domain: Optional[Domain] = None
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.status == "holds"


def _formula_vars(p: Formula, side: str) -> set[str]:
    return {x for x, s in formulas.free_vars(p) if s == side}


def oracle_judgment(j: Judgment, dom: Domain) -> OracleVerdict:
    """Enumerate store (pairs) over the domain satisfying the precondition
    and check the judgment against bounded runs."""
    values = list(dom.values())
    if j.kind == "unary":
        vs = (cmd_vars(j.left) | _formula_vars(j.pre, formulas.PLAIN)
              | _formula_vars(j.post, formulas.PLAIN) | dom.variables)
        sometimes_exhausted = False
        for s in dom.stores(vs):
            if not formulas.eval_unary(j.pre, s, {}, values):
                continue
            finals, exhausted = run_bounded(j.left, s, dom)
            sometimes_exhausted |= exhausted
            for t in finals:
                if not formulas.eval_unary(j.post, t, {}, values):
                    return OracleVerdict("counterexample", (s, t), dom)
        if sometimes_exhausted:
            return OracleVerdict("inconclusive", None, dom,
                                 "step bound exhausted on some run")
        return OracleVerdict("holds", None, dom)

    assert j.right is not None
    lvs = (cmd_vars(j.left) | _formula_vars(j.pre, formulas.LEFT)
           | _formula_vars(j.post, formulas.LEFT) | dom.variables)
    rvs = (cmd_vars(j.right) | _formula_vars(j.pre, formulas.RIGHT)
           | _formula_vars(j.post, formulas.RIGHT) | dom.variables)
    left_runs: dict[Store, tuple[set[Store], bool]] = {}
    right_runs: dict[Store, tuple[set[Store], bool]] = {}

    def runs(cache, c, s):
        if s not in cache:
            cache[s] = run_bounded(c, s, dom)
        return cache[s]

    inconclusive = False
    for s in dom.stores(lvs):
        for s_ in dom.stores(rvs):
            if not formulas.eval_rel(j.pre, s, s_, {}, values):
                continue
            lfin, lex = runs(left_runs, j.left, s)
            rfin, rex = runs(right_runs, j.right, s_)
            if j.kind == "aa":
                inconclusive |= lex or rex
                for t in lfin:
                    for t_ in rfin:
                        if not formulas.eval_rel(j.post, t, t_, {}, values):
                            return OracleVerdict("counterexample",
                                                 (s, s_, t, t_), dom)
            else:  # ae
                inconclusive |= lex
                for t in lfin:
                    if any(formulas.eval_rel(j.post, t, t_, {}, values)
                           for t_ in rfin):
                        continue
                    if rex:
                        # a witness may exist beyond the bound
                        inconclusive = True
                        continue
                    return OracleVerdict("counterexample", (s, s_, t), dom)
    if inconclusive:
        return OracleVerdict("inconclusive", None, dom,
                             "step bound exhausted on some run")
    return OracleVerdict("holds", None, dom)


# ---------------------------------------------------------------------------
# Well-formedness reporting

@dataclass
class WellFormedReport:
    issues: list[str] = field(default_factory=list)
    caveats: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


def _total_if_syntactic(gcs: syntax.GuardedList) -> bool:
    """Exact sufficient check: a single guard true, or the last guard is
    literally the negation of the disjunction of the others."""
    if len(gcs) == 1 and gcs[0].guard == syntax.TRUE:
        return True
    if len(gcs) >= 2:
        rest = enab(gcs[:-1])
        return gcs[-1].guard == syntax.Not(rest)
    return False


def check_well_formed(c: Command, f: int, dom: Domain) -> WellFormedReport:
    """Typability, total-if (bounded unless syntactically exact), label
    uniqueness/positivity, and freshness of the exit label."""
    report = WellFormedReport()
    try:
        syntax.typecheck(c)
    except syntax.TypeError_ as exc:
        report.issues.append(f"typing: {exc}")
        return report

    for d in syntax.iter_subcommands(c):
        if isinstance(d, If):
            if _total_if_syntactic(d.guards):
                continue
            g = enab(d.guards)
            witness = None
            for s in dom.stores(syntax.expr_vars(g)):
                if not eval_expr(g, s):
                    witness = s
                    break
            if witness is not None:
                report.issues.append(
                    f"total-if: guards of if @{d.label} can all be false, "
                    f"e.g. in store {witness}")
            else:
                report.caveats.append(
                    f"total-if of if @{d.label} checked over domain "
                    f"[{dom.lo},{dom.hi}] only")

    ls = syntax.labs(c)
    seen: set[int] = set()
    for n in ls:
        if n <= 0:
            report.issues.append(f"label {n} is not positive")
        if n in seen:
            report.issues.append(f"label {n} occurs more than once")
        seen.add(n)
    if f in seen:
        report.issues.append(f"exit label {f} already occurs in the program")
    return report
