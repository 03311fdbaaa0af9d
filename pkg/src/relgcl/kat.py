"""KAT expressions, GCL embedding, hypotheses, and equivalence deciding.

Expressions are interned so equality is identity and memo tables stay
cheap.  Equivalence is decided over guarded strings: atoms are truth
assignments (bitmasks) to the primitive tests of the instance, states
are sets of partial-derivative expressions, and two expressions are
equal iff the determinized derivative automata are bisimilar.

Hypotheses all have the shape t = 0.  They are eliminated with the
classical reduction: decide p + u = q + u where u = Top;(sum of
hypothesis sides);Top and Top is the star of the sum of all primitives,
so any guarded string containing a forbidden factor is absorbed by u on
both sides.  Two exact shortcuts keep this tractable: atoms that satisfy
a test-only hypothesis are skipped outright (every string through them
lies in u's language on both sides), and any state containing Top
collapses to Top (u's arm after a violating factor), so dead branches
cost one lookup.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from . import formulas, syntax
from .semantics import Domain, _total_if_syntactic
from .syntax import Command, Expr


class KatError(Exception):
    pass


# ---------------------------------------------------------------------------
# Interned test and expression nodes

class _Interned:
    __slots__ = ("key", "_hash")

    def __init__(self, key):
        self.key = key
        self._hash = hash(key)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other


class Test(_Interned):
    """Boolean-subalgebra element over primitive tests."""
    __slots__ = ("kind", "args")

    def __init__(self, key, kind, args):
        super().__init__(key)
        self.kind = kind  # "tt" "ff" "prim" "not" "and" "or"
        self.args = args


class KatExpr(_Interned):
    __slots__ = ("kind", "args")

    def __init__(self, key, kind, args):
        super().__init__(key)
        self.kind = kind  # "test" "act" "seq" "sum" "star"
        self.args = args


_tests: dict = {}
_exprs: dict = {}


def _mk_test(kind, args) -> Test:
    key = (kind, args)
    t = _tests.get(key)
    if t is None:
        t = Test(key, kind, args)
        _tests[key] = t
    return t


def _mk_expr(kind, args) -> KatExpr:
    key = (kind, args)
    e = _exprs.get(key)
    if e is None:
        e = KatExpr(key, kind, args)
        _exprs[key] = e
    return e


T_TRUE = _mk_test("tt", ())
T_FALSE = _mk_test("ff", ())


def tprim(name: str) -> Test:
    return _mk_test("prim", (name,))


def tnot(t: Test) -> Test:
    if t is T_TRUE:
        return T_FALSE
    if t is T_FALSE:
        return T_TRUE
    if t.kind == "not":
        return t.args[0]
    return _mk_test("not", (t,))


def tand(a: Test, b: Test) -> Test:
    if a is T_FALSE or b is T_FALSE:
        return T_FALSE
    if a is T_TRUE:
        return b
    if b is T_TRUE:
        return a
    if a is b:
        return a
    return _mk_test("and", (a, b))


def tor(a: Test, b: Test) -> Test:
    if a is T_TRUE or b is T_TRUE:
        return T_TRUE
    if a is T_FALSE:
        return b
    if b is T_FALSE:
        return a
    if a is b:
        return a
    return _mk_test("or", (a, b))


def test(t: Test) -> KatExpr:
    return _mk_expr("test", (t,))


ONE = test(T_TRUE)
ZERO = test(T_FALSE)


def act(name: str) -> KatExpr:
    return _mk_expr("act", (name,))


def seq(*parts: KatExpr) -> KatExpr:
    flat: list[KatExpr] = []
    for p in parts:
        if p.kind == "seq":
            flat.extend(p.args)
        else:
            flat.append(p)
    # merge adjacent tests (test ; test = conjunction) and drop units
    merged: list[KatExpr] = []
    for p in flat:
        if p is ZERO:
            return ZERO
        if p is ONE:
            continue
        if merged and merged[-1].kind == "test" and p.kind == "test":
            t = tand(merged[-1].args[0], p.args[0])
            merged[-1] = test(t)
            if merged[-1] is ZERO:
                return ZERO
            if merged[-1] is ONE:
                merged.pop()
            continue
        merged.append(p)
    if not merged:
        return ONE
    if len(merged) == 1:
        return merged[0]
    return _mk_expr("seq", tuple(merged))


def ksum(*parts: KatExpr) -> KatExpr:
    flat: set[KatExpr] = set()
    for p in parts:
        if p.kind == "sum":
            flat.update(p.args)
        elif p is not ZERO:
            flat.add(p)
    if not flat:
        return ZERO
    if len(flat) == 1:
        return next(iter(flat))
    # tests merge by disjunction
    ts = [p for p in flat if p.kind == "test"]
    if len(ts) > 1:
        t = T_FALSE
        for p in ts:
            t = tor(t, p.args[0])
        flat.difference_update(ts)
        merged = test(t)
        if merged is not ZERO:
            flat.add(merged)
        if len(flat) == 1:
            return next(iter(flat))
        if not flat:
            return ZERO
    return _mk_expr("sum", tuple(sorted(flat, key=lambda e: id(e))))


def star(p: KatExpr) -> KatExpr:
    if p is ZERO or p is ONE:
        return ONE
    if p.kind == "star":
        return p
    return _mk_expr("star", (p,))


def kneg(p: KatExpr) -> KatExpr:
    if p.kind != "test":
        raise KatError("negation applies to tests only")
    return test(tnot(p.args[0]))


def kat_str(e: KatExpr) -> str:
    def ts(t: Test) -> str:
        if t is T_TRUE:
            return "1"
        if t is T_FALSE:
            return "0"
        if t.kind == "prim":
            return f'"{t.args[0]}"'
        if t.kind == "not":
            return f"~{ts(t.args[0])}"
        if t.kind == "and":
            return f"({ts(t.args[0])};{ts(t.args[1])})"
        return f"({ts(t.args[0])}+{ts(t.args[1])})"

    match e.kind:
        case "test":
            return ts(e.args[0])
        case "act":
            return f'"{e.args[0]}"'
        case "seq":
            return "(" + ";".join(kat_str(p) for p in e.args) + ")"
        case "sum":
            return "(" + "+".join(kat_str(p) for p in e.args) + ")"
        case "star":
            return f"{kat_str(e.args[0])}*"
    raise KatError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# GCL-to-KAT translation

def _prim_key_expr(e: Expr) -> str:
    return syntax.expr_str(e)


def action_key(c: Command) -> str:
    match c:
        case syntax.Assign(_, x, e):
            return f"{x} := {syntax.expr_str(e)}"
        case syntax.Havoc(_, x):
            return f"havoc {x}"
    raise KatError(f"not a primitive action: {c!r}")


def translate_bool(e: Expr) -> Test:
    """Boolean expressions map homomorphically; comparisons and other
    primitives become tests identified by their printed form."""
    match e:
        case syntax.BoolLit(v):
            return T_TRUE if v else T_FALSE
        case syntax.And(a, b):
            return tand(translate_bool(a), translate_bool(b))
        case syntax.Or(a, b):
            return tor(translate_bool(a), translate_bool(b))
        case syntax.Not(a):
            return tnot(translate_bool(a))
        case syntax.Cmp():
            return tprim(_prim_key_expr(e))
    raise KatError(f"not a boolean expression: {syntax.expr_str(e)}")


def translate_kat(c: Union[Command, Expr]) -> KatExpr:
    """Commands and boolean expressions into KAT terms; loops become
    (sum of guard;body)* ; ~enab."""
    if not isinstance(c, (syntax.Skip, syntax.Assign, syntax.Havoc,
                          syntax.Seq, syntax.If, syntax.Do)):
        return test(translate_bool(c))
    match c:
        case syntax.Skip():
            return ONE
        case syntax.Assign():
            return act(action_key(c))
        case syntax.Havoc():
            return act(action_key(c))
        case syntax.Seq(a, b):
            return seq(translate_kat(a), translate_kat(b))
        case syntax.If(_, gcs):
            return ksum(*(seq(test(translate_bool(g.guard)), translate_kat(g.body))
                          for g in gcs))
        case syntax.Do(_, gcs):
            body = ksum(*(seq(test(translate_bool(g.guard)), translate_kat(g.body))
                          for g in gcs))
            return seq(star(body), test(tnot(translate_bool(syntax.enab(gcs)))))
    raise KatError(f"unknown command {c!r}")


# ---------------------------------------------------------------------------
# Hypotheses (all of the shape lhs = 0)

@dataclass(frozen=True)
class Contradiction:
    expr: Expr  # boolean expression that is never true


@dataclass(frozen=True)
class AssignPost:
    pre: Expr          # e0
    var: str           # x
    rhs: Expr          # e        (the action is x := rhs)
    post: Expr         # e1, with e0 ==> e1[x := rhs] valid


@dataclass(frozen=True)
class HavocPost:
    pre: Expr
    var: str
    post: Expr         # e0 ==> forall x. e1 valid


Justification = Union[Contradiction, AssignPost, HavocPost]


@dataclass(frozen=True)
class Hypothesis:
    lhs: KatExpr
    justification: Justification
    exact: bool = True      # side condition discharged syntactically
    note: str = ""

    def test_only(self) -> bool:
        return self.lhs.kind == "test"


def _side_condition_formula(j: Justification) -> formulas.Formula:
    P = formulas.PLAIN
    match j:
        case Contradiction(e):
            return formulas.FImp(formulas.embed_expr(e, P), formulas.F_FALSE)
        case AssignPost(pre, var, rhs, post):
            target = formulas.embed_expr(syntax.subst_expr(post, var, rhs), P)
            return formulas.FImp(formulas.embed_expr(pre, P), target)
        case HavocPost(pre, var, post):
            body = formulas.quantify(formulas.embed_expr(post, P), P, "forall", var)
            return formulas.FImp(formulas.embed_expr(pre, P), body)
    raise KatError(f"unknown justification {j!r}")


def make_hypothesis(j: Justification, dom: Optional[Domain] = None,
                    note: str = "") -> Hypothesis:
    """Build a hypothesis, discharging the side condition.

    Syntactic cases (substitution leaves the postcondition untouched, or
    literal contradictions) are exact; anything else needs a domain for a
    bounded validity check and is flagged.
    """
    exact = False
    match j:
        case Contradiction(e):
            f = formulas.fold(formulas.FImp(formulas.embed_expr(e, formulas.PLAIN),
                                            formulas.F_FALSE))
            exact = f == formulas.F_TRUE
            lhs = test(translate_bool(e))
        case AssignPost(pre, var, rhs, post):
            substituted = syntax.subst_expr(post, var, rhs)
            folded = formulas.fold(_side_condition_formula(j))
            exact = substituted == post and pre == post or folded == formulas.F_TRUE
            lhs = seq(test(translate_bool(pre)),
                      act(f"{var} := {syntax.expr_str(rhs)}"),
                      kneg(test(translate_bool(post))))
        case HavocPost(pre, var, post):
            exact = var not in syntax.expr_vars(post) and pre == post
            lhs = seq(test(translate_bool(pre)), act(f"havoc {var}"),
                      kneg(test(translate_bool(post))))
        case _:
            raise KatError(f"unknown justification {j!r}")
    if not exact:
        if dom is None:
            raise KatError("hypothesis side condition needs a domain to check")
        v = formulas.validity(_side_condition_formula(j), dom)
        if not v.valid:
            raise KatError(f"hypothesis side condition fails: {v.counterexample}")
        return Hypothesis(lhs, j, exact=False,
                          note=note or "side condition checked over bounded domain")
    return Hypothesis(lhs, j, exact=True, note=note)


def generate_hyps(commands: Iterable[Command], pcvar: str,
                  extra_labels: Iterable[int] = (),
                  dom: Optional[Domain] = None) -> list[Hypothesis]:
    """The finite instance set that normal-form equivalence proofs need.

    Emitted families:
      * pc-literal exclusions:   (pc=n);(pc=m) = 0 for distinct n, m
      * establishment:           (pc:=n);~(pc=n) = 0
      * preservation:            t;a;~t = 0 and ~t;a;t = 0 whenever the
        action a does not write a variable of the primitive test t
      * if-totality:             ~enab(gcs) = 0 for each if in the source

    The first three have syntactically exact side conditions.  If-totality
    is the well-formedness condition itself: exact when the guards end in
    the literal complement of the rest, otherwise checked over ``dom``
    when one is supplied and flagged as assumed otherwise.
    """
    commands = list(commands)
    prim_tests: dict[str, Expr] = {}
    actions: dict[str, tuple[str, Optional[Expr]]] = {}
    if_guards: dict[str, syntax.GuardedList] = {}

    def collect_expr(e: Expr) -> None:
        match e:
            case syntax.Cmp():
                prim_tests.setdefault(_prim_key_expr(e), e)
            case syntax.And(a, b) | syntax.Or(a, b):
                collect_expr(a)
                collect_expr(b)
            case syntax.Not(a):
                collect_expr(a)
            case _:
                pass

    def collect_cmd(c: Command) -> None:
        for d in syntax.iter_subcommands(c):
            match d:
                case syntax.Assign(_, x, e):
                    actions.setdefault(action_key(d), (x, e))
                case syntax.Havoc(_, x):
                    actions.setdefault(action_key(d), (x, None))
                case syntax.If(_, gcs):
                    for g in gcs:
                        collect_expr(g.guard)
                    e = syntax.enab(gcs)
                    if_guards.setdefault(syntax.expr_str(e), gcs)
                case syntax.Do(_, gcs):
                    for g in gcs:
                        collect_expr(g.guard)

    for c in commands:
        collect_cmd(c)

    pc_labels: set[int] = set(extra_labels)
    for key, (x, e) in actions.items():
        if x == pcvar and isinstance(e, syntax.Lit):
            pc_labels.add(e.value)
    for key, e in prim_tests.items():
        match e:
            case syntax.Cmp("==", syntax.Var(v), syntax.Lit(n)) if v == pcvar:
                pc_labels.add(n)

    hyps: list[Hypothesis] = []
    labels = sorted(pc_labels)
    for i, n in enumerate(labels):
        for m in labels[i + 1:]:
            e = syntax.And(syntax.Cmp("==", syntax.Var(pcvar), syntax.Lit(n)),
                           syntax.Cmp("==", syntax.Var(pcvar), syntax.Lit(m)))
            lhs = test(tand(tprim(f"{pcvar} == {n}"), tprim(f"{pcvar} == {m}")))
            hyps.append(Hypothesis(lhs, Contradiction(e), exact=True,
                                   note="distinct pc literals"))
    for n in labels:
        eq = syntax.Cmp("==", syntax.Var(pcvar), syntax.Lit(n))
        lhs = seq(act(f"{pcvar} := {n}"), kneg(test(tprim(f"{pcvar} == {n}"))))
        hyps.append(Hypothesis(lhs, AssignPost(syntax.TRUE, pcvar, syntax.Lit(n), eq),
                               exact=True, note="pc establishment"))
        # ensure the assignment exists as an instance action even if only
        # hypotheses mention it
        actions.setdefault(f"{pcvar} := {n}", (pcvar, syntax.Lit(n)))

    for tkey, texpr in sorted(prim_tests.items()):
        tvars = syntax.expr_vars(texpr)
        for akey, (x, e) in sorted(actions.items()):
            if x in tvars:
                continue
            pos = seq(test(tprim(tkey)), act(akey), kneg(test(tprim(tkey))))
            neg = seq(kneg(test(tprim(tkey))), act(akey), test(tprim(tkey)))
            if e is None:
                j_pos = HavocPost(texpr, x, texpr)
                j_neg = HavocPost(syntax.Not(texpr), x, syntax.Not(texpr))
            else:
                j_pos = AssignPost(texpr, x, e, texpr)
                j_neg = AssignPost(syntax.Not(texpr), x, e, syntax.Not(texpr))
            hyps.append(Hypothesis(pos, j_pos, exact=True, note="preservation"))
            hyps.append(Hypothesis(neg, j_neg, exact=True, note="preservation"))

    for _, gcs in sorted(if_guards.items()):
        e = syntax.Not(syntax.enab(gcs))
        j = Contradiction(e)
        lhs = test(translate_bool(e))
        if _total_if_syntactic(gcs):
            hyps.append(Hypothesis(lhs, j, exact=True, note="if-totality"))
        elif dom is not None:
            v = formulas.validity(_side_condition_formula(j), dom)
            if not v.valid:
                raise KatError(f"if guards are not total: {v.counterexample}")
            hyps.append(Hypothesis(lhs, j, exact=v.exact,
                                   note="if-totality checked over domain"))
        else:
            hyps.append(Hypothesis(lhs, j, exact=False,
                                   note="if-totality assumed from well-formedness"))
    return hyps


# ---------------------------------------------------------------------------
# Guarded-string equivalence engine

class _Engine:
    def __init__(self, prims: list[str], actions: list[str],
                 dead_tests: list[Test], top: Optional[KatExpr]):
        self.prims = prims
        self.index = {p: i for i, p in enumerate(prims)}
        self.actions = actions
        self.top = top
        self._test_memo: dict = {}
        self._null_memo: dict = {}
        self._deriv_memo: dict = {}
        self.atoms = [a for a in range(1 << len(prims))
                      if not any(self.eval_test(t, a) for t in dead_tests)]

    def eval_test(self, t: Test, atom: int) -> bool:
        key = (t, atom)
        v = self._test_memo.get(key)
        if v is None:
            if t.kind == "tt":
                v = True
            elif t.kind == "ff":
                v = False
            elif t.kind == "prim":
                v = bool(atom >> self.index[t.args[0]] & 1)
            elif t.kind == "not":
                v = not self.eval_test(t.args[0], atom)
            elif t.kind == "and":
                v = self.eval_test(t.args[0], atom) and self.eval_test(t.args[1], atom)
            else:
                v = self.eval_test(t.args[0], atom) or self.eval_test(t.args[1], atom)
            self._test_memo[key] = v
        return v

    def nullable(self, e: KatExpr, atom: int) -> bool:
        key = (e, atom)
        v = self._null_memo.get(key)
        if v is None:
            if e.kind == "test":
                v = self.eval_test(e.args[0], atom)
            elif e.kind == "act":
                v = False
            elif e.kind == "seq":
                v = all(self.nullable(p, atom) for p in e.args)
            elif e.kind == "sum":
                v = any(self.nullable(p, atom) for p in e.args)
            else:  # star
                v = True
            self._null_memo[key] = v
        return v

    def deriv(self, e: KatExpr, atom: int, ai: int) -> frozenset[KatExpr]:
        key = (e, atom, ai)
        v = self._deriv_memo.get(key)
        if v is None:
            if e.kind == "test":
                v = frozenset()
            elif e.kind == "act":
                v = frozenset((ONE,)) if e.args[0] == self.actions[ai] else frozenset()
            elif e.kind == "seq":
                head, rest = e.args[0], e.args[1:]
                tail = seq(*rest) if rest else ONE
                out = {seq(d, tail) for d in self.deriv(head, atom, ai)}
                if self.nullable(head, atom):
                    out |= self.deriv(tail, atom, ai)
                v = frozenset(out)
            elif e.kind == "sum":
                out = set()
                for p in e.args:
                    out |= self.deriv(p, atom, ai)
                v = frozenset(out)
            else:  # star
                v = frozenset(seq(d, e) for d in self.deriv(e.args[0], atom, ai))
            self._deriv_memo[key] = v
        return v

    def norm_state(self, s: frozenset[KatExpr]) -> frozenset[KatExpr]:
        s = frozenset(p for p in s if p is not ZERO)
        if self.top is not None and self.top in s:
            return frozenset((self.top,))
        return s

    def state_nullable(self, s: frozenset[KatExpr], atom: int) -> bool:
        return any(self.nullable(p, atom) for p in s)

    def state_deriv(self, s: frozenset[KatExpr], atom: int, ai: int) -> frozenset[KatExpr]:
        out: set[KatExpr] = set()
        for p in s:
            out |= self.deriv(p, atom, ai)
        return self.norm_state(frozenset(out))

    def bisimilar(self, p: KatExpr, q: KatExpr) -> bool:
        start = (self.norm_state(frozenset((p,))), self.norm_state(frozenset((q,))))
        visited: set = set()
        stack = [start]
        n_actions = len(self.actions)
        while stack:
            sl, sr = stack.pop()
            if sl == sr or (sl, sr) in visited:
                continue
            visited.add((sl, sr))
            for atom in self.atoms:
                if self.state_nullable(sl, atom) != self.state_nullable(sr, atom):
                    return False
                for ai in range(n_actions):
                    dl = self.state_deriv(sl, atom, ai)
                    dr = self.state_deriv(sr, atom, ai)
                    if dl != dr and (dl, dr) not in visited:
                        stack.append((dl, dr))
        return True


def _collect_alphabet(es: Iterable[KatExpr]) -> tuple[list[str], list[str]]:
    prims: set[str] = set()
    actions: set[str] = set()
    seen: set[KatExpr] = set()

    def walk_test(t: Test) -> None:
        if t.kind == "prim":
            prims.add(t.args[0])
        elif t.kind in ("not",):
            walk_test(t.args[0])
        elif t.kind in ("and", "or"):
            walk_test(t.args[0])
            walk_test(t.args[1])

    def walk(e: KatExpr) -> None:
        if e in seen:
            return
        seen.add(e)
        if e.kind == "test":
            walk_test(e.args[0])
        elif e.kind == "act":
            actions.add(e.args[0])
        elif e.kind in ("seq", "sum"):
            for p in e.args:
                walk(p)
        else:
            walk(e.args[0])

    for e in es:
        walk(e)
    return sorted(prims), sorted(actions)


def decide_kat(p: KatExpr, q: KatExpr) -> bool:
    """Pure KAT equality over the alphabet of the two expressions."""
    prims, actions = _collect_alphabet([p, q])
    eng = _Engine(prims, actions, dead_tests=[], top=None)
    return eng.bisimilar(p, q)


def decide_kat_hyp(p: KatExpr, q: KatExpr, hyps: list[Hypothesis]) -> bool:
    """Equality under hypotheses of the shape t = 0, via the elimination
    decide(p + u, q + u) with u = Top;(sum of sides);Top."""
    if not hyps:
        return decide_kat(p, q)
    prims, actions = _collect_alphabet([p, q] + [h.lhs for h in hyps])
    all_prims = [test(tprim(name)) for name in prims] + [act(a) for a in actions]
    top = star(ksum(*all_prims)) if all_prims else ONE
    u = seq(top, ksum(*(h.lhs for h in hyps)), top)
    dead = [h.lhs.args[0] for h in hyps if h.test_only()]
    eng = _Engine(prims, actions, dead_tests=dead, top=top)
    return eng.bisimilar(ksum(p, u), ksum(q, u))


def kateq(c: Command, d: Command, hyps: list[Hypothesis]) -> bool:
    """Command equivalence: KAT equality of the translations under the
    hypothesis set."""
    return decide_kat_hyp(translate_kat(c), translate_kat(d), hyps)
