"""Derivation trees and the proof checker for the three systems.

A node names a rule, states its conclusion judgment, carries any
rule-specific payload, and lists premise subtrees.  Checking is
schema-directed: the checker recomputes the expected premise judgments
from the conclusion and payload and compares structurally, discharging
side conditions by literal folding, bounded validity (flagged), or the
KAT engine for rewrite steps.  Derived rules are checked by expanding
them into base-rule derivations first.

Rule names: the unary system uses bare names (Skip, Asgn, Havoc, Seq,
If, Do, Conseq, Disj, False, Rewrite, Ghost); the forall-forall system
prefixes r; the forall-exists system prefixes e.  eSkipHav's
precondition quantifies the havocked variable existentially on the
right; eDo carries a variant with snapshot variables for right-only
progress.  Derived macros: rAsgnAsgn, rHavHav, rLRseq, rRLseq,
eAsgnAsgn, eHavHav, and n-ary Disj/rDisj/eDisj.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import formulas, kat, normform, parser, syntax, vcgen
from .formulas import (FAnd, FNot, FOr, Formula, LEFT, PLAIN, RIGHT, fand,
                       fold, formula_str, free_vars, quantify)
from .kat import Hypothesis, generate_hyps, kateq
from .semantics import Domain, Judgment
from .syntax import (Assign, Command, Do, Guarded, Havoc, If, Seq, Skip,
                     cmd_str, enab)


class ProofError(Exception):
    pass


@dataclass(frozen=True)
class ProofNode:
    rule: str
    judgment: Judgment
    data: tuple = ()  # sorted (key, value) pairs; see _mk_data
    premises: tuple["ProofNode", ...] = ()

    def get(self, key, default=None):
        for k, v in self.data:
            if k == key:
                return v
        return default


def _mk_data(**kwargs) -> tuple:
    return tuple(sorted((k, v) for k, v in kwargs.items() if v is not None))


def node(rule: str, judgment: Judgment, premises=(), **data) -> ProofNode:
    return ProofNode(rule, judgment, _mk_data(**data), tuple(premises))


# ---------------------------------------------------------------------------
# Shared schema builders (used by both the checker and the translators)

def side_for(kind: str) -> tuple[str, str]:
    """Formula sides for the left/right program of a judgment kind."""
    return (PLAIN, PLAIN) if kind == "unary" else (LEFT, RIGHT)


def guard_formula(e, side: str) -> Formula:
    return formulas.embed_expr(e, side)


def do_post(kind: str, pre: Formula, gcs, gcs_) -> Formula:
    ls, rs = side_for(kind)
    if kind == "unary":
        return fand([pre, FNot(guard_formula(enab(gcs), ls))])
    return fand([pre, FNot(guard_formula(enab(gcs), ls)),
                 FNot(guard_formula(enab(gcs_), rs))])


def enab_agreement(gcs, gcs_) -> Formula:
    le = guard_formula(enab(gcs), LEFT)
    re = guard_formula(enab(gcs_), RIGHT)
    return FOr(FAnd(le, re), FAnd(FNot(le), FNot(re)))


def rdo_side_condition(q: Formula, l: Formula, r: Formula, gcs, gcs_) -> Formula:
    le = guard_formula(enab(gcs), LEFT)
    re = guard_formula(enab(gcs_), RIGHT)
    return formulas.FImp(q, formulas.forr([
        enab_agreement(gcs, gcs_), FAnd(l, le), FAnd(r, re)]))


def rdo_premise_judgments(kind: str, q: Formula, l: Formula, r: Formula,
                          gcs, gcs_, vdata=None) -> list[Judgment]:
    """Expected premises of rDo/eDo in order: left-only per guarded
    command, right-only per guarded command, then joint per pair."""
    out = []
    for g in gcs:
        pre = fand([q, guard_formula(g.guard, LEFT), l])
        out.append(Judgment(kind, g.body, Skip(0), pre, q))
    for g_ in gcs_:
        pre = fand([q, guard_formula(g_.guard, RIGHT), r])
        post = q
        if vdata is not None:
            variant, pcvar, kvars = vdata
            pre = fand([q, guard_formula(g_.guard, RIGHT), r,
                        vcgen.variant_eq_snapshot(variant, pcvar, kvars)])
            post = fand([q, vcgen.variant_lt_snapshot(variant, pcvar, kvars)])
        out.append(Judgment(kind, Skip(0), g_.body, pre, post))
    for g in gcs:
        for g_ in gcs_:
            pre = fand([q, guard_formula(g.guard, LEFT),
                        guard_formula(g_.guard, RIGHT), FNot(l), FNot(r)])
            out.append(Judgment(kind, g.body, g_.body, pre, q))
    return out


# ---------------------------------------------------------------------------
# Reports

@dataclass
class NodeResult:
    path: str
    rule: str
    ok: bool
    messages: list[str] = field(default_factory=list)
    caveats: list[str] = field(default_factory=list)


@dataclass
class CheckReport:
    nodes: list[NodeResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(n.ok for n in self.nodes)

    def failures(self) -> list[NodeResult]:
        return [n for n in self.nodes if not n.ok]

    def summary(self) -> str:
        lines = []
        for n in self.nodes:
            if not n.ok:
                lines.append(f"[FAIL] {n.path} {n.rule}: " + "; ".join(n.messages))
        lines.append("proof accepted" if self.ok else
                     f"proof rejected ({len(self.failures())} bad node(s))")
        return "\n".join(lines)


DERIVED_RULES = {"rAsgnAsgn", "rHavHav", "rLRseq", "rRLseq",
                 "eAsgnAsgn", "eHavHav"}


# ---------------------------------------------------------------------------
# The checker

class _Checker:
    def __init__(self, dom: Domain):
        self.dom = dom
        self.report = CheckReport()

    # -- helpers ----------------------------------------------------------

    def fail(self, res: NodeResult, msg: str) -> None:
        res.ok = False
        res.messages.append(msg)

    def check_validity(self, res: NodeResult, p: Formula, what: str) -> None:
        folded = fold(p)
        if folded == formulas.F_TRUE:
            return
        if isinstance(folded, formulas.FImp) and folded.left == folded.right:
            return
        v = formulas.validity(p, self.dom)
        if not v.valid:
            self.fail(res, f"{what} invalid; counterexample {v.counterexample}")
        elif v.caveats:
            res.caveats.append(f"{what} checked by bounded validity")

    def expect(self, res: NodeResult, cond: bool, msg: str) -> None:
        if not cond:
            self.fail(res, msg)

    def expect_judgment(self, res: NodeResult, got: Judgment,
                        want: Judgment, what: str) -> None:
        if got.kind != want.kind:
            self.fail(res, f"{what}: kind {got.kind} != {want.kind}")
            return
        if got.left != want.left or got.right != want.right:
            self.fail(res, f"{what}: commands differ")
            return
        if fold(got.pre) != fold(want.pre):
            self.fail(res, f"{what}: precondition differs; expected "
                      f"{formula_str(want.pre)}")
        if fold(got.post) != fold(want.post):
            self.fail(res, f"{what}: postcondition differs; expected "
                      f"{formula_str(want.post)}")

    def indep_ok(self, res: NodeResult, p: Formula, x: str, side: str,
                 what: str) -> bool:
        if formulas.indep(p, x, side):
            return True
        # semantic fallback: p equivalent to p with the variable forced
        q = formulas.FQuant("forall", side, x, p)
        v = formulas.validity(FAnd(formulas.FImp(p, q), formulas.FImp(q, p)),
                              self.dom)
        if v.valid:
            res.caveats.append(f"{what} independence checked by bounded validity")
            return True
        self.fail(res, f"{what} depends on {x}")
        return False

    # -- rule dispatch ------------------------------------------------------

    def check(self, pnode: ProofNode, path: str = "root") -> None:
        res = NodeResult(path=path, rule=pnode.rule, ok=True)
        self.report.nodes.append(res)
        if pnode.rule in DERIVED_RULES or \
           (pnode.rule in ("Disj", "rDisj", "eDisj") and len(pnode.premises) > 2):
            expanded = expand_derived(pnode)
            res.messages.append("checked via expansion to base rules")
            self.check(expanded, path + f"/[{pnode.rule}-expanded]")
            # the expansion check contributes its own node results; this
            # node mirrors their combined outcome
            res.ok = all(n.ok for n in self.report.nodes
                         if n.path.startswith(path + f"/[{pnode.rule}-expanded]"))
            return
        method = getattr(self, f"rule_{pnode.rule}", None)
        if method is None:
            self.fail(res, f"unknown rule {pnode.rule}")
            return
        j = pnode.judgment
        expected_kind = ("unary" if not pnode.rule[0].islower() else
                         {"r": "aa", "e": "ae"}.get(pnode.rule[0]))
        if expected_kind and j.kind != expected_kind:
            self.fail(res, f"rule {pnode.rule} proves {expected_kind} "
                      f"judgments, got {j.kind}")
            return
        try:
            method(pnode, res)
        except (ProofError, formulas.FormulaError, kat.KatError,
                normform.NormFormError, syntax.TypeError_) as exc:
            self.fail(res, str(exc))
        for i, p in enumerate(pnode.premises):
            self.check(p, f"{path}/{i}")

    # -- axioms -------------------------------------------------------------

    def _axiom(self, pnode, res, n_premises=0):
        self.expect(res, len(pnode.premises) == n_premises,
                    f"{pnode.rule} takes {n_premises} premise(s)")

    def rule_Skip(self, pnode, res):
        self._axiom(pnode, res)
        j = pnode.judgment
        self.expect(res, isinstance(j.left, Skip), "command must be skip")
        self.expect(res, fold(j.pre) == fold(j.post),
                    "pre and post must coincide")

    def rule_rSkip(self, pnode, res):
        self._axiom(pnode, res)
        j = pnode.judgment
        self.expect(res, isinstance(j.left, Skip) and isinstance(j.right, Skip),
                    "both commands must be skip")
        self.expect(res, fold(j.pre) == fold(j.post),
                    "pre and post must coincide")

    rule_eSkip = rule_rSkip

    def _asgn(self, pnode, res, side):
        self._axiom(pnode, res)
        j = pnode.judgment
        cmd = j.left if side in (PLAIN, LEFT) else j.right
        other = j.right if side in (LEFT,) else (j.left if side == RIGHT else None)
        self.expect(res, isinstance(cmd, Assign), "command must be an assignment")
        if other is not None:
            self.expect(res, isinstance(other, Skip),
                        "the other command must be skip")
        if not isinstance(cmd, Assign):
            return
        want = formulas.substitute(j.post, side, cmd.var, cmd.expr)
        self.expect(res, fold(j.pre) == fold(want),
                    f"precondition must be the substituted postcondition "
                    f"{formula_str(want)}")

    def rule_Asgn(self, pnode, res):
        self._asgn(pnode, res, PLAIN)

    def rule_rAsgnSkip(self, pnode, res):
        self._asgn(pnode, res, LEFT)

    def rule_rSkipAsgn(self, pnode, res):
        self._asgn(pnode, res, RIGHT)

    rule_eAsgnSkip = rule_rAsgnSkip
    rule_eSkipAsgn = rule_rSkipAsgn

    def _havoc(self, pnode, res, side, kind):
        self._axiom(pnode, res)
        j = pnode.judgment
        cmd = j.left if side in (PLAIN, LEFT) else j.right
        other = j.right if side == LEFT else (j.left if side == RIGHT else None)
        self.expect(res, isinstance(cmd, Havoc), "command must be a havoc")
        if other is not None:
            self.expect(res, isinstance(other, Skip),
                        "the other command must be skip")
        if not isinstance(cmd, Havoc):
            return
        want = quantify(j.post, side, kind, cmd.var)
        alt = formulas.FQuant(kind, side, cmd.var, j.post)
        self.expect(res, fold(j.pre) in (fold(want), fold(alt)),
                    f"precondition must quantify ({kind}) the havocked variable")

    def rule_Havoc(self, pnode, res):
        self._havoc(pnode, res, PLAIN, "forall")

    def rule_rHavSkip(self, pnode, res):
        self._havoc(pnode, res, LEFT, "forall")

    def rule_rSkipHav(self, pnode, res):
        self._havoc(pnode, res, RIGHT, "forall")

    rule_eHavSkip = rule_rHavSkip

    def rule_eSkipHav(self, pnode, res):
        # the forall-exists judgment lets the right havoc pick a value
        self._havoc(pnode, res, RIGHT, "exists")

    def rule_False(self, pnode, res):
        self._axiom(pnode, res)
        self.expect(res, fold(pnode.judgment.pre) == formulas.F_FALSE,
                    "precondition must be false")

    rule_rFalse = rule_False
    rule_eFalse = rule_False

    # -- structural rules ----------------------------------------------------

    def rule_Seq(self, pnode, res):
        j = pnode.judgment
        self.expect(res, len(pnode.premises) == 2, "Seq takes two premises")
        if len(pnode.premises) != 2 or not isinstance(j.left, Seq):
            self.fail(res, "conclusion command must be a sequence")
            return
        p1, p2 = pnode.premises
        if j.kind == "unary":
            want1 = Judgment("unary", j.left.first, None, j.pre, p1.judgment.post)
            want2 = Judgment("unary", j.left.second, None, p1.judgment.post, j.post)
        else:
            if not isinstance(j.right, Seq):
                self.fail(res, "both commands must be sequences")
                return
            want1 = Judgment(j.kind, j.left.first, j.right.first, j.pre,
                             p1.judgment.post)
            want2 = Judgment(j.kind, j.left.second, j.right.second,
                             p1.judgment.post, j.post)
        self.expect_judgment(res, p1.judgment, want1, "first premise")
        self.expect_judgment(res, p2.judgment, want2, "second premise")

    rule_rSeq = rule_Seq
    rule_eSeq = rule_Seq

    def rule_If(self, pnode, res):
        j = pnode.judgment
        if not isinstance(j.left, If):
            self.fail(res, "conclusion command must be an if")
            return
        gcs = j.left.guards
        if j.kind == "unary":
            want = [Judgment("unary", g.body, None,
                             fand([guard_formula(g.guard, PLAIN), j.pre]),
                             j.post) for g in gcs]
        else:
            if not isinstance(j.right, If):
                self.fail(res, "both commands must be ifs")
                return
            gcs_ = j.right.guards
            want = [Judgment(j.kind, g.body, g_.body,
                             fand([j.pre, guard_formula(g.guard, LEFT),
                                   guard_formula(g_.guard, RIGHT)]), j.post)
                    for g in gcs for g_ in gcs_]
        self.expect(res, len(pnode.premises) == len(want),
                    f"if needs {len(want)} premises (one per guard combination), "
                    f"got {len(pnode.premises)}")
        for i, (p, w) in enumerate(zip(pnode.premises, want)):
            self.expect_judgment(res, p.judgment, w, f"premise {i}")

    rule_rIf = rule_If
    rule_eIf = rule_If

    def rule_Do(self, pnode, res):
        j = pnode.judgment
        if not isinstance(j.left, Do):
            self.fail(res, "conclusion command must be a loop")
            return
        gcs = j.left.guards
        want_post = do_post("unary", j.pre, gcs, None)
        self.expect(res, fold(j.post) == fold(want_post),
                    f"postcondition must be {formula_str(want_post)}")
        want = [Judgment("unary", g.body, None,
                         fand([guard_formula(g.guard, PLAIN), j.pre]), j.pre)
                for g in gcs]
        self.expect(res, len(pnode.premises) == len(want),
                    f"loop needs {len(want)} premises, got {len(pnode.premises)}")
        for i, (p, w) in enumerate(zip(pnode.premises, want)):
            self.expect_judgment(res, p.judgment, w, f"premise {i}")

    def _rel_do(self, pnode, res, kind):
        j = pnode.judgment
        if not (isinstance(j.left, Do) and isinstance(j.right, Do)):
            self.fail(res, "both commands must be loops")
            return
        gcs, gcs_ = j.left.guards, j.right.guards
        l, r = pnode.get("l"), pnode.get("r")
        if l is None or r is None:
            self.fail(res, "loop rule needs :l and :r alignment formulas")
            return
        vdata = None
        if kind == "ae":
            variant, kvars = pnode.get("variant"), pnode.get("kvars")
            if variant is None or not kvars:
                self.fail(res, "eDo needs :variant and :kvars")
                return
            pcvar = pnode.get("pcvar", "pc")
            vdata = (variant, pcvar, tuple(kvars))
            taken = {x for x, _ in free_vars(j.pre) | free_vars(l) | free_vars(r)}
            taken |= syntax.cmd_vars(j.left) | syntax.cmd_vars(j.right)
            for ve in variant.entries.values():
                for e in ve:
                    taken |= syntax.expr_vars(e)
            for k in kvars:
                self.expect(res, k not in taken,
                            f"snapshot variable {k} is not fresh")
            self.check_validity(
                res, formulas.FImp(fand([j.pre, r]),
                                   vcgen.variant_nonneg(variant, pcvar)),
                "variant nonnegativity at right-enabled states")
        want_post = do_post(kind, j.pre, gcs, gcs_)
        self.expect(res, fold(j.post) == fold(want_post),
                    f"postcondition must be {formula_str(want_post)}")
        want = rdo_premise_judgments(kind, j.pre, l, r, gcs, gcs_, vdata)
        self.expect(res, len(pnode.premises) == len(want),
                    f"loop rule needs {len(want)} premises "
                    f"(left-only, right-only, then joint), got {len(pnode.premises)}")
        for i, (p, w) in enumerate(zip(pnode.premises, want)):
            self.expect_judgment(res, p.judgment, w, f"premise {i}")
        self.check_validity(res, rdo_side_condition(j.pre, l, r, gcs, gcs_),
                            "loop enabledness side condition")

    def rule_rDo(self, pnode, res):
        self._rel_do(pnode, res, "aa")

    def rule_eDo(self, pnode, res):
        self._rel_do(pnode, res, "ae")

    # -- logical rules --------------------------------------------------------

    def rule_Conseq(self, pnode, res):
        j = pnode.judgment
        self.expect(res, len(pnode.premises) == 1, "Conseq takes one premise")
        if len(pnode.premises) != 1:
            return
        pj = pnode.premises[0].judgment
        self.expect(res, pj.kind == j.kind and pj.left == j.left
                    and pj.right == j.right,
                    "premise must concern the same command(s)")
        self.check_validity(res, formulas.FImp(j.pre, pj.pre),
                            "precondition weakening")
        self.check_validity(res, formulas.FImp(pj.post, j.post),
                            "postcondition strengthening")

    rule_rConseq = rule_Conseq
    rule_eConseq = rule_Conseq

    def rule_Disj(self, pnode, res):
        j = pnode.judgment
        self.expect(res, len(pnode.premises) == 2, "Disj takes two premises")
        if len(pnode.premises) != 2:
            return
        p1, p2 = (p.judgment for p in pnode.premises)
        for pj in (p1, p2):
            self.expect(res, pj.kind == j.kind and pj.left == j.left
                        and pj.right == j.right,
                        "premises must concern the same command(s)")
            self.expect(res, fold(pj.post) == fold(j.post),
                        "premise postconditions must match the conclusion")
        self.expect(res, fold(j.pre) == fold(FOr(p1.pre, p2.pre)),
                    "precondition must be the disjunction of the premises'")

    rule_rDisj = rule_Disj
    rule_eDisj = rule_Disj

    def rule_Rewrite(self, pnode, res):
        j = pnode.judgment
        self.expect(res, len(pnode.premises) == 1, "Rewrite takes one premise")
        if len(pnode.premises) != 1:
            return
        pj = pnode.premises[0].judgment
        self.expect(res, pj.kind == j.kind, "judgment kinds must match")
        self.expect(res, fold(pj.pre) == fold(j.pre)
                    and fold(pj.post) == fold(j.post),
                    "Rewrite preserves the specification")
        hyps = self._hyps_for(pnode, pj)
        if not kateq(pj.left, j.left, hyps):
            self.fail(res, "left commands are not KAT-equal under the hypotheses")
        if j.kind != "unary" and not kateq(pj.right, j.right, hyps):
            self.fail(res, "right commands are not KAT-equal under the hypotheses")
        inexact = [h for h in hyps if not h.exact]
        if inexact:
            res.caveats.append(
                f"{len(inexact)} hypothesis side condition(s) checked "
                "over a bounded domain only")

    rule_rRewrite = rule_Rewrite
    rule_eRewrite = rule_Rewrite

    def _hyps_for(self, pnode: ProofNode, pj: Judgment) -> list[Hypothesis]:
        spec = pnode.get("hyps", ("none",))
        if spec[0] == "none":
            return []
        if spec[0] == "auto":
            pcvar = spec[1] if len(spec) > 1 else "pc"
            extra = tuple(spec[2]) if len(spec) > 2 else ()
            cmds = [pj.left, pnode.judgment.left]
            if pj.kind != "unary":
                cmds += [pj.right, pnode.judgment.right]
            return generate_hyps(cmds, pcvar, extra_labels=extra, dom=self.dom)
        if spec[0] == "list":
            return list(spec[1])
        raise ProofError(f"unknown hypothesis spec {spec!r}")

    def rule_Ghost(self, pnode, res):
        j = pnode.judgment
        self.expect(res, len(pnode.premises) == 1, "Ghost takes one premise")
        if len(pnode.premises) != 1:
            return
        pj = pnode.premises[0].judgment
        x = pnode.get("x")
        if x is None:
            self.fail(res, "Ghost needs :x")
            return
        self.expect(res, pj.kind == j.kind, "judgment kinds must match")
        self.expect(res, fold(pj.pre) == fold(j.pre)
                    and fold(pj.post) == fold(j.post),
                    "Ghost preserves the specification")
        if j.kind == "unary":
            if not normform.is_ghost(x, pj.left):
                self.fail(res, f"{x} is read in the premise command")
                return
            self.expect(res, j.left == normform.erase_ghost(x, pj.left),
                        "conclusion must be the premise with the ghost erased")
            self.indep_ok(res, j.pre, x, PLAIN, "precondition")
            self.indep_ok(res, j.post, x, PLAIN, "postcondition")
        else:
            x2 = pnode.get("x2", x)
            if not (normform.is_ghost(x, pj.left) and
                    normform.is_ghost(x2, pj.right)):
                self.fail(res, f"{x}/{x2} is read in a premise command")
                return
            self.expect(res, j.left == normform.erase_ghost(x, pj.left)
                        and j.right == normform.erase_ghost(x2, pj.right),
                        "conclusion must be the premises with ghosts erased")
            for form, what in ((j.pre, "precondition"), (j.post, "postcondition")):
                self.indep_ok(res, form, x, LEFT, what)
                self.indep_ok(res, form, x2, RIGHT, what)

    rule_rGhost = rule_Ghost
    rule_eGhost = rule_Ghost


def check_proof(pnode: ProofNode, dom: Domain) -> CheckReport:
    checker = _Checker(dom)
    checker.check(pnode)
    return checker.report


# ---------------------------------------------------------------------------
# Derived-rule expansion

def _seq_pair_expansion(kind: str, j: Judgment, first: ProofNode,
                        second: ProofNode, prefix: str) -> ProofNode:
    """rSeq on padded commands followed by a rewrite removing the skips."""
    mid_l = Seq(first.judgment.left, second.judgment.left)
    mid_r = Seq(first.judgment.right, second.judgment.right)
    seq_j = Judgment(kind, mid_l, mid_r, first.judgment.pre,
                     second.judgment.post)
    seq_node = node(prefix + "Seq", seq_j, [first, second])
    return node(prefix + "Rewrite", j, [seq_node], hyps=("none",))


def expand_derived(pnode: ProofNode) -> ProofNode:
    """Rewrite a derived-rule node into base rules, reusing its premises."""
    j = pnode.judgment
    kind = j.kind
    prefix = {"aa": "r", "ae": "e", "unary": ""}[kind]
    rule = pnode.rule

    if rule in ("Disj", "rDisj", "eDisj") and len(pnode.premises) > 2:
        # n-ary disjunction nests to the right, matching forr()
        first, rest = pnode.premises[0], pnode.premises[1:]
        rest_pre = formulas.forr([p.judgment.pre for p in rest])
        inner_j = Judgment(kind, j.left, j.right, rest_pre, j.post)
        if len(rest) == 2:
            inner = node(prefix + "Disj", inner_j, rest)
        else:
            inner = expand_derived(node(rule, inner_j, rest))
        return node(prefix + "Disj", j, [first, inner])

    if rule in ("rAsgnAsgn", "eAsgnAsgn"):
        if not (isinstance(j.left, Assign) and isinstance(j.right, Assign)):
            raise ProofError(f"{rule} needs two assignments")
        mid = formulas.substitute(j.post, RIGHT, j.right.var, j.right.expr)
        p1 = node(prefix + "AsgnSkip",
                  Judgment(kind, j.left, Skip(0),
                           formulas.substitute(mid, LEFT, j.left.var, j.left.expr),
                           mid))
        p2 = node(prefix + "SkipAsgn",
                  Judgment(kind, Skip(0), j.right, mid, j.post))
        return _seq_pair_expansion(kind, j, p1, p2, prefix)

    if rule in ("rHavHav", "eHavHav"):
        if not (isinstance(j.left, Havoc) and isinstance(j.right, Havoc)):
            raise ProofError(f"{rule} needs two havocs")
        right_kind = "exists" if rule == "eHavHav" else "forall"
        mid = quantify(j.post, RIGHT, right_kind, j.right.var)
        p1 = node(prefix + "HavSkip",
                  Judgment(kind, j.left, Skip(0),
                           quantify(mid, LEFT, "forall", j.left.var), mid))
        p2 = node(prefix + ("SkipHav"),
                  Judgment(kind, Skip(0), j.right, mid, j.post))
        return _seq_pair_expansion(kind, j, p1, p2, prefix)

    if rule in ("rLRseq", "rRLseq"):
        if len(pnode.premises) != 2:
            raise ProofError(f"{rule} takes two premises")
        p1, p2 = pnode.premises
        return _seq_pair_expansion(kind, j, p1, p2, prefix)

    raise ProofError(f"{rule} is not a derived rule")


# ---------------------------------------------------------------------------
# Proof files: `(rule :key value ... premises...)`

def _sexp_tokens(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            yield ch
            i += 1
            continue
        if ch == '"':
            j = i + 1
            out = []
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    j += 1
                out.append(text[j])
                j += 1
            if j >= n:
                raise ProofError("unterminated string in proof file")
            yield ("str", "".join(out))
            i = j + 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in "();":
            j += 1
        yield ("sym", text[i:j])
        i = j
    yield None


def _parse_sexp(tokens):
    tok = next(tokens)
    return _parse_sexp_tok(tok, tokens)


def _parse_sexp_tok(tok, tokens):
    if tok == "(":
        items = []
        while True:
            t = next(tokens)
            if t == ")":
                return items
            items.append(_parse_sexp_tok(t, tokens))
    if tok is None or tok == ")":
        raise ProofError("malformed proof file")
    kind, text = tok
    if kind == "str":
        return ("str", text)
    if text.lstrip("-").isdigit():
        return int(text)
    return text


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _judgment_sexp(j: Judgment) -> str:
    parts = [j.kind, _quote(cmd_str(j.left))]
    if j.right is not None:
        parts.append(_quote(cmd_str(j.right)))
    parts += [_quote(formula_str(j.pre)), _quote(formula_str(j.post))]
    return "(" + " ".join(parts) + ")"


def print_proof(pnode: ProofNode, indent: int = 0) -> str:
    pad = "  " * indent
    parts = [f"{pad}({pnode.rule}", f"{pad}  :judgment {_judgment_sexp(pnode.judgment)}"]
    for key, value in pnode.data:
        if key in ("l", "r"):
            parts.append(f"{pad}  :{key} {_quote(formula_str(value))}")
        elif key == "hyps":
            if value[0] == "auto":
                extra = " ".join(str(n) for n in value[2]) if len(value) > 2 else ""
                inner = f"auto {value[1]}" + (f" ({extra})" if extra else "")
                parts.append(f"{pad}  :hyps ({inner})")
            else:
                parts.append(f"{pad}  :hyps (none)")
        elif key == "x" or key == "x2" or key == "pcvar":
            parts.append(f"{pad}  :{key} {value}")
        elif key == "kvars":
            parts.append(f"{pad}  :kvars (" + " ".join(value) + ")")
        elif key == "variant":
            entries = []
            for label in sorted(value.entries):
                es = " ".join(_quote(syntax.expr_str(e)) for e in value.entries[label])
                entries.append(f"({label} ({es}))")
            controls = " ".join(str(c) for c in value.controls)
            parts.append(f"{pad}  :variant (({controls}) " + " ".join(entries) + ")")
        else:
            raise ProofError(f"cannot serialize data key {key}")
    for p in pnode.premises:
        parts.append(print_proof(p, indent + 1))
    return "\n".join(parts) + ")"


def _formula_of(item, pcvar="pc") -> Formula:
    if not (isinstance(item, tuple) and item[0] == "str"):
        raise ProofError(f"expected a quoted formula, got {item!r}")
    return parser.parse_formula(item[1], pcvar)


def _judgment_of(items) -> Judgment:
    kind = items[0]
    if kind == "unary":
        _, cmd, pre, post = items
        return Judgment("unary", parser.parse_command_lenient(cmd[1]), None,
                        parser.parse_unary_formula(pre[1]),
                        parser.parse_unary_formula(post[1]))
    _, cl, cr, pre, post = items
    return Judgment(kind, parser.parse_command_lenient(cl[1]),
                    parser.parse_command_lenient(cr[1]),
                    parser.parse_formula(pre[1]), parser.parse_formula(post[1]))


_KNOWN_RULES = {
    "Skip", "Asgn", "Havoc", "Seq", "If", "Do", "Conseq", "Disj", "False",
    "Rewrite", "Ghost",
    "rSkip", "rAsgnSkip", "rSkipAsgn", "rHavSkip", "rSkipHav", "rSeq", "rIf",
    "rDo", "rConseq", "rDisj", "rFalse", "rRewrite", "rGhost",
    "eSkip", "eAsgnSkip", "eSkipAsgn", "eHavSkip", "eSkipHav", "eSeq", "eIf",
    "eDo", "eConseq", "eDisj", "eFalse", "eRewrite", "eGhost",
} | DERIVED_RULES


def _node_of(items) -> ProofNode:
    rule = items[0]
    if rule not in _KNOWN_RULES:
        raise ProofError(f"unknown rule name {rule!r}")
    judgment = None
    data: dict = {}
    premises: list[ProofNode] = []
    i = 1
    while i < len(items):
        item = items[i]
        if isinstance(item, str) and item.startswith(":"):
            key = item[1:]
            value = items[i + 1]
            i += 2
            if key == "judgment":
                judgment = _judgment_of(value)
            elif key in ("l", "r"):
                data[key] = _formula_of(value)
            elif key in ("x", "x2", "pcvar"):
                data[key] = value
            elif key == "kvars":
                data[key] = tuple(value)
            elif key == "hyps":
                if value and value[0] == "auto":
                    pcvar = value[1] if len(value) > 1 else "pc"
                    extra = tuple(value[2]) if len(value) > 2 else ()
                    data[key] = ("auto", pcvar, extra)
                else:
                    data[key] = ("none",)
            elif key == "variant":
                controls = tuple(value[0])
                entries = {}
                for entry in value[1:]:
                    label, exprs = entry
                    entries[label] = tuple(parser.parse_expr(e[1]) for e in exprs)
                data[key] = vcgen.VariantSpec(entries, controls)
            else:
                raise ProofError(f"unknown data key :{key}")
        else:
            premises.append(_node_of(item))
            i += 1
    if judgment is None:
        raise ProofError(f"rule {rule} lacks a :judgment")
    return node(rule, judgment, premises, **data)


def parse_proof(text: str) -> ProofNode:
    items = _parse_sexp(_sexp_tokens(text))
    return _node_of(items)
