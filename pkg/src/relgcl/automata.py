"""Program automata, alignment products, and bounded exploration.

A program automaton's control points are the labels of the command plus
one fresh exit label.  Transitions exist in two synchronized forms: a
concrete successor function driven by the small-step semantics, and a
list of symbolic edge summaries (one per statement effect) that the VC
generator works from.  Alignment products gate left-only / right-only /
joint steps on pc-encoded condition formulas and optionally filter
post-states through a keep-set formula.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import formulas, syntax
from .formulas import (FAnd, FBool, FCmp, FNot, Formula, RLit, RVar, LEFT,
                       RIGHT, fand, fold, subst_formula)
from .semantics import Config, Domain, Store, eval_expr, run_bounded, step
from .syntax import (Assign, Command, Do, Expr, Guarded, GuardedList, Havoc,
                     If, Seq, Skip, enab, lab, labs, okf, sub)


class AutomatonError(Exception):
    pass


def fsuc(n: int, c: Command, f: int) -> int:
    """Following successor of label ``n`` in the control flow of ``c``
    with exit label ``f``; for a loop label this is the label reached on
    loop termination."""
    if n not in labs(c):
        raise AutomatonError(f"label {n} not in program")
    match c:
        case Skip() | Assign() | Havoc():
            return f
        case Seq(a, b):
            if n in labs(a):
                return fsuc(n, a, lab(b))
            return fsuc(n, b, f)
        case If(m, gcs):
            if n == m:
                return f
            for g in gcs:
                if n in labs(g.body):
                    return fsuc(n, g.body, f)
        case Do(m, gcs):
            if n == m:
                return f
            for g in gcs:
                if n in labs(g.body):
                    return fsuc(n, g.body, m)
    raise AssertionError("unreachable")


# Edge summary kinds
SKIP = "skip"
ASSIGN = "assign"
HAVOC = "havoc"
BRANCH = "branch"
LOOP_EXIT = "loop-exit"


@dataclass(frozen=True)
class EdgeSummary:
    """Symbolic description of all transitions from ``src`` to ``dst``."""

    src: int
    dst: int
    kind: str
    guard: Expr = syntax.TRUE         # branch condition or negated enab
    var: Optional[str] = None          # assign/havoc target
    expr: Optional[Expr] = None        # assign right-hand side
    gcs: Optional[GuardedList] = None  # loop guards, for loop-exit edges

    def describe(self) -> str:
        if self.kind == SKIP:
            return "skip"
        if self.kind == ASSIGN:
            return f"{self.var} := {syntax.expr_str(self.expr)}"
        if self.kind == HAVOC:
            return f"havoc {self.var}"
        if self.kind == BRANCH:
            return syntax.expr_str(self.guard)
        return syntax.expr_str(self.guard)  # loop exit: negated enab


@dataclass(frozen=True)
class Automaton:
    command: Command
    init: int
    fin: int
    control: frozenset[int]
    edges: tuple[EdgeSummary, ...]

    def successors(self, n: int, s: Store, values: Iterable[int]) -> list[tuple[int, Store]]:
        """Concrete transition relation at control point ``n``."""
        if n == self.fin:
            return []
        cmd = sub(n, self.command)
        if isinstance(cmd, Skip):
            return [(fsuc(n, self.command, self.fin), s)]
        out = []
        for succ in step(Config(cmd, s), values):
            m = lab(succ.command)
            if m > 0:
                out.append((m, succ.store))
            else:
                out.append((fsuc(n, self.command, self.fin), succ.store))
        return out

    def edges_from(self, n: int) -> list[EdgeSummary]:
        return [e for e in self.edges if e.src == n]

    def reachable(self, s0: Store, dom: Domain,
                  bound: Optional[int] = None) -> tuple[set[tuple[int, Store]], bool]:
        """States reachable from (init, s0) within the step bound."""
        bound = dom.steps if bound is None else bound
        values = list(dom.values())
        frontier = {(self.init, s0)}
        seen = set(frontier)
        exhausted = False
        for _ in range(bound):
            nxt = set()
            for (n, s) in frontier:
                for succ in self.successors(n, s, values):
                    if succ not in seen:
                        seen.add(succ)
                        nxt.add(succ)
            frontier = nxt
            if not frontier:
                break
        else:
            exhausted = bool(frontier)
        return seen, exhausted


def _summaries(c: Command, f: int) -> list[EdgeSummary]:
    out: list[EdgeSummary] = []
    for d in syntax.iter_subcommands(c):
        match d:
            case Skip(n):
                out.append(EdgeSummary(n, fsuc(n, c, f), SKIP))
            case Assign(n, x, e):
                out.append(EdgeSummary(n, fsuc(n, c, f), ASSIGN, var=x, expr=e))
            case Havoc(n, x):
                out.append(EdgeSummary(n, fsuc(n, c, f), HAVOC, var=x))
            case If(n, gcs):
                for g in gcs:
                    out.append(EdgeSummary(n, lab(g.body), BRANCH, guard=g.guard))
            case Do(n, gcs):
                for g in gcs:
                    out.append(EdgeSummary(n, lab(g.body), BRANCH, guard=g.guard))
                out.append(EdgeSummary(n, fsuc(n, c, f), LOOP_EXIT,
                                       guard=syntax.Not(enab(gcs)), gcs=gcs))
    return out


def build_aut(c: Command, f: int) -> Automaton:
    """The automaton of ``c`` with exit label ``f``; requires okf(c, f)."""
    if not okf(c, f):
        raise AutomatonError(f"program is not ok for exit label {f}")
    control = frozenset(labs(c)) | {f}
    return Automaton(command=c, init=lab(c), fin=f, control=control,
                     edges=tuple(_summaries(c, f)))


def to_dot(aut: Automaton) -> str:
    lines = ["digraph program {", "  rankdir=LR;",
             f'  "{aut.init}" [shape=circle, style=bold];',
             f'  "{aut.fin}" [shape=doublecircle];']
    for n in sorted(aut.control - {aut.init, aut.fin}):
        lines.append(f'  "{n}" [shape=circle];')
    for e in aut.edges:
        label = e.describe().replace('"', r"\"")
        lines.append(f'  "{e.src}" -> "{e.dst}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Alignment products

def pc_eq(pcvar: str, n: int, side: str) -> Formula:
    return FCmp("==", RVar(pcvar, side), RLit(n))


@dataclass(frozen=True)
class ProductSpec:
    """Alignment condition bundle over pc-encoded state formulas.

    ``left_only``, ``right_only``, ``joint`` gate the respective step
    kinds; the optional ``keep`` formula filters states the product steps
    to.  Formulas mention the two programs' stores plus the designated
    pc variable on each side.  Accessors return liveness-trimmed forms:
    left steps cannot start at the left exit, right steps at the right
    exit, and joint steps at either exit.
    """

    left: Automaton
    right: Automaton
    left_only: Formula
    right_only: Formula
    joint: Formula
    keep: Optional[Formula] = None
    pcvar: str = "pc"

    def _not_fin(self, side: str) -> Formula:
        aut = self.left if side == LEFT else self.right
        return FNot(pc_eq(self.pcvar, aut.fin, side))

    def trimmed_left(self) -> Formula:
        return fold(FAnd(self.left_only, self._not_fin(LEFT)))

    def trimmed_right(self) -> Formula:
        return fold(FAnd(self.right_only, self._not_fin(RIGHT)))

    def trimmed_joint(self) -> Formula:
        # both components must be able to move, so both exits are excluded
        return fold(fand([self.joint, self._not_fin(LEFT), self._not_fin(RIGHT)]))

    def keep_at(self, n: int, n_: int) -> Formula:
        """The keep set at a control pair: pc literals substituted in."""
        if self.keep is None:
            return formulas.F_TRUE
        out = subst_formula(self.keep, self.pcvar, LEFT, RLit(n))
        out = subst_formula(out, self.pcvar, RIGHT, RLit(n_))
        return fold(out)

    def final_pair(self) -> Formula:
        return FAnd(pc_eq(self.pcvar, self.left.fin, LEFT),
                    pc_eq(self.pcvar, self.right.fin, RIGHT))


@dataclass(frozen=True)
class ProductState:
    ctrl: tuple[int, int]
    stores: tuple[Store, Store]


@dataclass
class Product:
    """Alignment product; states materialize only during exploration."""

    spec: ProductSpec

    def _holds(self, cond: Formula, st: ProductState, values) -> bool:
        (n, n_), (s, s_) = st.ctrl, st.stores
        pv = self.spec.pcvar
        return formulas.eval_rel(cond, s.set(pv, n), s_.set(pv, n_), {}, values)

    def successors(self, st: ProductState, dom: Domain) -> list[tuple[str, ProductState]]:
        values = list(dom.values())
        (n, n_), (s, s_) = st.ctrl, st.stores
        out: list[tuple[str, ProductState]] = []
        if self._holds(self.spec.trimmed_left(), st, values):
            for (m, t) in self.spec.left.successors(n, s, values):
                out.append(("LO", ProductState((m, n_), (t, s_))))
        if self._holds(self.spec.trimmed_right(), st, values):
            for (m_, t_) in self.spec.right.successors(n_, s_, values):
                out.append(("RO", ProductState((n, m_), (s, t_))))
        if self._holds(self.spec.trimmed_joint(), st, values):
            for (m, t) in self.spec.left.successors(n, s, values):
                for (m_, t_) in self.spec.right.successors(n_, s_, values):
                    out.append(("JO", ProductState((m, m_), (t, t_))))
        if self.spec.keep is not None:
            kept = []
            for tag, succ in out:
                (m, m_), (t, t_) = succ.ctrl, succ.stores
                pv = self.spec.pcvar
                if formulas.eval_rel(self.spec.keep, t.set(pv, m),
                                     t_.set(pv, m_), {}, values):
                    kept.append((tag, succ))
            out = kept
        return out


def build_product(left: Automaton, right: Automaton, spec: ProductSpec) -> Product:
    if spec.left is not left or spec.right is not right:
        spec = ProductSpec(left, right, spec.left_only, spec.right_only,
                           spec.joint, spec.keep, spec.pcvar)
    for name, cond in (("left_only", spec.left_only),
                       ("right_only", spec.right_only),
                       ("joint", spec.joint)):
        for var, side in formulas.free_vars(cond):
            if side not in (LEFT, RIGHT):
                continue
            prog_vars = syntax.cmd_vars(left.command if side == LEFT
                                        else right.command)
            if var != spec.pcvar and var not in prog_vars:
                # tolerated: condition constrains a variable neither program
                # touches (often spec-only); evaluation defaults it to zero
                pass
    return Product(spec)


@dataclass
class ExploreReport:
    reachable_pairs: set[tuple[int, int]] = field(default_factory=set)
    stuck: list[ProductState] = field(default_factory=list)
    adequacy: str = "unknown"  # "adequate" | "inadequate" | "unknown"
    adequacy_witness: Optional[tuple] = None
    bound_exhausted: bool = False
    trimming_note: str = ""

    @property
    def adequate(self) -> bool:
        return self.adequacy == "adequate"


def explore(product: Product, pre: Formula, dom: Domain,
            bound: Optional[int] = None, mode: str = "aa") -> ExploreReport:
    """Bounded breadth-first exploration from all in-domain initial pairs
    satisfying ``pre``, with an empirical adequacy check: every pair of
    terminating component runs must be covered by a product run (mode
    "aa"), or every terminating left run must have a kept completion
    (mode "ae")."""
    spec = product.spec
    bound = dom.steps if bound is None else bound
    values = list(dom.values())
    report = ExploreReport()
    report.trimming_note = ("left/right/joint conditions conjoined with "
                            "non-exit guards before exploration")

    lvars = syntax.cmd_vars(spec.left.command) | dom.variables
    rvars = syntax.cmd_vars(spec.right.command) | dom.variables
    pre_vars_l = {x for x, s in formulas.free_vars(pre) if s == LEFT}
    pre_vars_r = {x for x, s in formulas.free_vars(pre) if s == RIGHT}

    initial: list[ProductState] = []
    for s in dom.stores(lvars | pre_vars_l):
        for s_ in dom.stores(rvars | pre_vars_r):
            if formulas.eval_rel(pre, s, s_, {}, values):
                initial.append(ProductState((spec.left.init, spec.right.init),
                                            (s, s_)))

    succ_cache: dict[ProductState, list[tuple[str, ProductState]]] = {}

    def successors(st: ProductState) -> list[tuple[str, ProductState]]:
        if st not in succ_cache:
            succ_cache[st] = product.successors(st, dom)
        return succ_cache[st]

    final = (spec.left.fin, spec.right.fin)
    exhausted_any = False
    witness = None
    stuck_seen: set[ProductState] = set()

    for st0 in initial:
        # per-initial reachability: adequacy quantifies over each start pair
        seen: set[ProductState] = {st0}
        frontier = {st0}
        for _ in range(bound):
            nxt: set[ProductState] = set()
            for st in frontier:
                succs = successors(st)
                if not succs and st.ctrl != final and st not in stuck_seen:
                    stuck_seen.add(st)
                    report.stuck.append(st)
                for _, succ in succs:
                    if succ not in seen:
                        seen.add(succ)
                        nxt.add(succ)
            frontier = nxt
            if not frontier:
                break
        else:
            if frontier:
                exhausted_any = True
                report.bound_exhausted = True

        report.reachable_pairs |= {st.ctrl for st in seen}
        covered = {st.stores for st in seen if st.ctrl == final}
        s, s_ = st0.stores
        lfin, lex = run_bounded(spec.left.command, s, dom, bound)
        exhausted_any |= lex
        if witness is not None:
            continue
        if mode == "aa":
            rfin, rex = run_bounded(spec.right.command, s_, dom, bound)
            exhausted_any |= rex
            for t in lfin:
                for t_ in rfin:
                    if (t, t_) not in covered:
                        witness = (s, s_, t, t_)
                        break
                if witness:
                    break
        else:
            for t in lfin:
                if not any(ct == t for (ct, _) in covered):
                    witness = (s, s_, t)
                    break

    if witness is not None:
        report.adequacy = "inadequate"
        report.adequacy_witness = witness
    elif exhausted_any:
        report.adequacy = "unknown"
    else:
        report.adequacy = "adequate"
    return report


def product_dot(report: ExploreReport, spec: ProductSpec) -> str:
    lines = ["digraph product {", "  rankdir=LR;"]
    for (n, n_) in sorted(report.reachable_pairs):
        shape = ("doublecircle" if (n, n_) == (spec.left.fin, spec.right.fin)
                 else "circle")
        lines.append(f'  "{n},{n_}" [shape={shape}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
