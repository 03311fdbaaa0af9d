"""Compile annotated-automaton proofs into checkable derivation trees.

Each translator first re-checks the verification and adequacy conditions
and refuses to emit a tree if any fails, so emitted trees always pass
the proof checker over the same domain.  The construction mirrors one
pattern: normalize both programs into single fetch-execute loops over a
fresh program counter, instantiate the loop rule with the pc-encoded
alignment conditions and the invariant

    (and over pairs: at this control pair -> its annotation)  and
    (or over pairs: at some control pair),

prove every loop premise by chaining one-sided primitive steps whose
consequence obligations are exactly the per-edge VCs, then undo the
normalization with a rewrite, erase the counter as a ghost, and clean up
the leftover skips with a final rewrite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from . import automata, formulas, normform, proofs, syntax, vcgen
from .automata import ProductSpec, pc_eq
from .formulas import (FAnd, FImp, FNot, FOr, Formula, LEFT, PLAIN, RIGHT,
                       fand, fold, formula_str, forr, free_vars, quantify)
from .proofs import Judgment, ProofNode, node
from .semantics import Domain
from .syntax import (Assign, Command, Do, Guarded, Havoc, Lit, Seq, Skip,
                     cmd_vars, enab, lab, labs, okf, seq_all, seq_parts)
from .vcgen import Annotation, VariantSpec, check_vcs


class TranslateError(Exception):
    pass


def _require(report: vcgen.VCReport, what: str) -> None:
    if not report.ok:
        bad = report.failures()[0]
        raise TranslateError(
            f"{what} fails at {bad.vc.name}: "
            f"counterexample {bad.verdict.counterexample}")


def _fresh_pcvar(base: str, *items: frozenset[str]) -> str:
    taken: set[str] = set()
    for it in items:
        taken |= set(it)
    return formulas.fresh_name(base, taken)


def _formula_vars(*fs: Formula) -> frozenset[str]:
    out: set[str] = set()
    for f in fs:
        out |= {x for x, _ in free_vars(f)}
    return frozenset(out)


# ---------------------------------------------------------------------------
# One-sided step chains

def _slot_rule(kind: str, side: str, atom: Command) -> tuple[str, Formula]:
    prefix = {"unary": "", "aa": "r", "ae": "e"}[kind]
    if kind == "unary":
        if isinstance(atom, Assign):
            return "Asgn", None
        if isinstance(atom, Havoc):
            return "Havoc", None
        return "Skip", None
    if side == LEFT:
        if isinstance(atom, Assign):
            return prefix + "AsgnSkip", None
        if isinstance(atom, Havoc):
            return prefix + "HavSkip", None
        return prefix + "Skip", None
    if isinstance(atom, Assign):
        return prefix + "SkipAsgn", None
    if isinstance(atom, Havoc):
        # the forall-exists judgment chooses right-side havoc values
        return ("eSkipHav" if kind == "ae" else "rSkipHav"), None
    return prefix + "Skip", None


def _slot_pre(kind: str, side: str, atom: Command, post: Formula) -> Formula:
    if isinstance(atom, Assign):
        s = PLAIN if kind == "unary" else side
        return formulas.substitute(post, s, atom.var, atom.expr)
    if isinstance(atom, Havoc):
        s = PLAIN if kind == "unary" else side
        q = "exists" if (kind == "ae" and side == RIGHT) else "forall"
        return quantify(post, s, q, atom.var)
    return post


def _chain(kind: str, slots: list[tuple[str, Command]], post: Formula) -> tuple[Formula, ProofNode]:
    """Derivation for the slot sequence, one primitive step at a time,
    computing preconditions backwards from ``post``.  Commands are padded
    with skips so that every step is one-sided."""
    side, atom = slots[0]
    if len(slots) == 1:
        pre = _slot_pre(kind, side, atom, post)
        rule, _ = _slot_rule(kind, side, atom)
        left = atom if (side == LEFT or kind == "unary") else Skip(0)
        right = None if kind == "unary" else (atom if side == RIGHT else Skip(0))
        return pre, node(rule, Judgment(kind, left, right, pre, post))
    rest_pre, rest_node = _chain(kind, slots[1:], post)
    head_pre, head_node = _chain(kind, slots[:1], rest_pre)
    if kind == "unary":
        cmd_l = Seq(head_node.judgment.left, rest_node.judgment.left)
        j = Judgment(kind, cmd_l, None, head_pre, post)
    else:
        cmd_l = Seq(head_node.judgment.left, rest_node.judgment.left)
        cmd_r = Seq(head_node.judgment.right, rest_node.judgment.right)
        j = Judgment(kind, cmd_l, cmd_r, head_pre, post)
    prefix = {"unary": "", "aa": "r", "ae": "e"}[kind]
    return head_pre, node(prefix + "Seq", j, [head_node, rest_node])


def _gc_source(guard, pcvar: str) -> Optional[int]:
    """Source label of a normal-form guarded command (its leading pc
    literal)."""
    probe = guard.left if isinstance(guard, syntax.And) else guard
    match probe:
        case syntax.Cmp("==", syntax.Var(v), Lit(n)) if v == pcvar:
            return n
    return None


def _vacuous_premise(kind: str, body_l: Optional[Command],
                     body_r: Optional[Command], expected_pre: Formula,
                     post: Formula) -> ProofNode:
    """Close a premise whose source pair is annotated false: the stated
    precondition implies false (the invariant excludes the pair), so a
    consequence step over the False axiom suffices."""
    prefix = {"unary": "", "aa": "r", "ae": "e"}[kind]
    left = body_l if body_l is not None else Skip(0)
    right = None if kind == "unary" else (body_r if body_r is not None else Skip(0))
    base = node(prefix + "False",
                Judgment(kind, left, right, formulas.F_FALSE, post))
    return node(prefix + "Conseq",
                Judgment(kind, left, right, expected_pre, post), [base])


def _premise_for(kind: str, body_l: Optional[Command], body_r: Optional[Command],
                 expected_pre: Formula, post: Formula) -> ProofNode:
    """Prove ``body_l | body_r : expected_pre => post`` (skip for a missing
    side): pad into one-sided slots, chain primitive rules, rewrite the
    padding away, and close with a consequence step."""
    prefix = {"unary": "", "aa": "r", "ae": "e"}[kind]
    if fold(expected_pre) == formulas.F_FALSE and kind != "unary":
        left = body_l if body_l is not None else Skip(0)
        right = body_r if body_r is not None else Skip(0)
        return node(prefix + "False",
                    Judgment(kind, left, right, formulas.F_FALSE, post))

    atoms_l = seq_parts(body_l) if body_l is not None else []
    atoms_r = seq_parts(body_r) if body_r is not None else []
    if kind == "unary":
        slots = [(PLAIN, a) for a in atoms_l]
        chain_pre, chain_node = _chain(kind, slots, post)
        inner = chain_node
        actual = seq_all(atoms_l)
        if inner.judgment.left != actual:
            j = Judgment(kind, actual, None, chain_pre, post)
            inner = node("Rewrite", j, [inner], hyps=("none",))
        jc = Judgment(kind, actual, None, expected_pre, post)
        return node("Conseq", jc, [inner])

    slots = [(LEFT, a) for a in atoms_l] + [(RIGHT, a) for a in atoms_r]
    if not slots:
        slots = [(LEFT, Skip(0))]
    chain_pre, chain_node = _chain(kind, slots, post)
    actual_l = body_l if body_l is not None else Skip(0)
    actual_r = body_r if body_r is not None else Skip(0)
    inner = chain_node
    if (inner.judgment.left, inner.judgment.right) != (actual_l, actual_r):
        j = Judgment(kind, actual_l, actual_r, chain_pre, post)
        inner = node(prefix + "Rewrite", j, [inner], hyps=("none",))
    jc = Judgment(kind, actual_l, actual_r, expected_pre, post)
    return node(prefix + "Conseq", jc, [inner])


# ---------------------------------------------------------------------------
# Invariants

def unary_invariant(an: Annotation, controls: list[int], pcvar: str) -> Formula:
    """at-some-annotated-point and every annotated point implies its
    annotation; points with a false annotation are simply left out of the
    disjunction, which is equivalent and keeps the formula small."""
    live = [i for i in controls if fold(an.at(i)) != formulas.F_FALSE]
    pins = [pc_eq(pcvar, i, PLAIN) for i in live]
    cases = [FImp(pin, an.at(i)) for pin, i in zip(pins, live)]
    return FAnd(fand(cases), forr(pins))


def relational_invariant(an: Annotation, lcontrols: list[int],
                         rcontrols: list[int], pcvar: str) -> Formula:
    pairs = [(i, j) for i in lcontrols for j in rcontrols
             if fold(an.at((i, j))) != formulas.F_FALSE]
    pins = {p: FAnd(pc_eq(pcvar, p[0], LEFT), pc_eq(pcvar, p[1], RIGHT))
            for p in pairs}
    cases = [FImp(pins[p], an.at(p)) for p in pairs]
    return FAnd(fand(cases), forr([pins[p] for p in pairs]))


# ---------------------------------------------------------------------------
# Floyd translation (unary)

def floyd_translate(c: Command, f: int, an: Annotation, pre: Formula,
                    post: Formula, dom: Domain, pcvar: str = "pc") -> ProofNode:
    """An annotated program automaton into a unary derivation tree."""
    if not okf(c, f):
        raise TranslateError(f"program is not ok for exit label {f}")
    if fold(an.at(lab(c))) != fold(pre) or fold(an.at(f)) != fold(post):
        raise TranslateError("annotation must carry the pre at the entry "
                             "label and the post at the exit label")
    _require(check_vcs(vcgen.unary_vcs(c, f, an), dom), "unary VC check")

    pcv = _fresh_pcvar(pcvar, cmd_vars(c), _formula_vars(pre, post),
                       *[_formula_vars(q) for q in an.entries.values()])
    controls = sorted(labs(c)) + [f]
    inv = unary_invariant(an, controls, pcv)
    body = normform.normalize_body(c, f, pcv)
    nf = normform.normal_form(c, f, pcv)

    premises = []
    for g in body:
        expected = fand([formulas.embed_expr(g.guard, PLAIN), inv])
        premises.append(_premise_for("unary", g.body, None, expected, inv))
    do_cmd = Do(0, body)
    do_j = Judgment("unary", do_cmd, None, inv,
                    proofs.do_post("unary", inv, body, None))
    do_node = node("Do", do_j, premises)

    init_pre, init_node = _chain("unary", [(PLAIN, Assign(0, pcv, Lit(lab(c))))], inv)
    seq_j = Judgment("unary", nf, None, init_pre, do_j.post)
    seq_node = node("Seq", seq_j, [init_node, do_node])
    conseq_j = Judgment("unary", nf, None, pre, post)
    conseq = node("Conseq", conseq_j, [seq_node])

    instrumented = Seq(normform.add_pc(c, pcv), Assign(0, pcv, Lit(f)))
    rw1 = node("Rewrite", Judgment("unary", instrumented, None, pre, post),
               [conseq], hyps=("auto", pcv, ()))
    erased = normform.erase_ghost(pcv, instrumented)
    ghost = node("Ghost", Judgment("unary", erased, None, pre, post), [rw1],
                 x=pcv)
    return node("Rewrite", Judgment("unary", c, None, pre, post), [ghost],
                hyps=("none",))


# ---------------------------------------------------------------------------
# Relational translations

@dataclass
class _RelSetup:
    kind: str
    spec: ProductSpec
    an: Annotation
    pcv: str
    inv: Formula
    body_l: syntax.GuardedList
    body_r: syntax.GuardedList
    nf_l: Command
    nf_r: Command
    lcond: Formula
    rcond: Formula


def _setup(kind: str, spec: ProductSpec, an: Annotation, pre: Formula,
           post: Formula) -> _RelSetup:
    c, c_ = spec.left.command, spec.right.command
    f, f_ = spec.left.fin, spec.right.fin
    init_pair = (spec.left.init, spec.right.init)
    fin_pair = (f, f_)
    if fold(an.at(init_pair)) != fold(pre) or fold(an.at(fin_pair)) != fold(post):
        raise TranslateError("annotation must carry the pre at the initial "
                             "control pair and the post at the final pair")
    # the alignment formulas are pc-encoded, so they mention the pc
    # variable by design; freshness is against programs and annotations
    taken = [cmd_vars(c), cmd_vars(c_), _formula_vars(pre, post)]
    taken += [_formula_vars(q) for q in an.entries.values()]
    pcv = _fresh_pcvar(spec.pcvar, *taken)
    if pcv != spec.pcvar:
        raise TranslateError(
            f"pc variable {spec.pcvar} occurs in programs or formulas; "
            f"build the product spec with a fresh name such as {pcv}")
    inv = relational_invariant(an, sorted(spec.left.control),
                               sorted(spec.right.control), pcv)
    body_l = normform.normalize_body(c, f, pcv)
    body_r = normform.normalize_body(c_, f_, pcv)
    return _RelSetup(kind, spec, an, pcv, inv, body_l, body_r,
                     normform.normal_form(c, f, pcv),
                     normform.normal_form(c_, f_, pcv),
                     spec.trimmed_left(), spec.trimmed_right())


def _one_sided(setup: _RelSetup, side: str, g: Guarded,
               post: Formula, pre_extra: list[Formula]) -> ProofNode:
    """A left-only (or right-only) loop premise, split by the disjunction
    rule over the opposite side's control points."""
    kind, inv, pcv = setup.kind, setup.inv, setup.pcv
    prefix = {"aa": "r", "ae": "e"}[kind]
    align = setup.lcond if side == LEFT else setup.rcond
    gf = proofs.guard_formula(g.guard, side)
    expected = fand([inv, gf, align] + pre_extra)
    body_l = g.body if side == LEFT else None
    body_r = g.body if side == RIGHT else None
    if fold(expected) == formulas.F_FALSE:
        return _premise_for(kind, body_l, body_r, expected, post)
    opposite = sorted(setup.spec.right.control if side == LEFT
                      else setup.spec.left.control)
    subs = []
    for j in opposite:
        pin = pc_eq(pcv, j, RIGHT if side == LEFT else LEFT)
        sub_pre = fand([inv, gf, align] + pre_extra + [pin])
        subs.append(_premise_for(kind, body_l, body_r, sub_pre, post))
    disj_pre = forr([s.judgment.pre for s in subs])
    actual_l = body_l if body_l is not None else Skip(0)
    actual_r = body_r if body_r is not None else Skip(0)
    disj = node(prefix + "Disj",
                Judgment(kind, actual_l, actual_r, disj_pre, post), subs)
    return node(prefix + "Conseq",
                Judgment(kind, actual_l, actual_r, expected, post), [disj])


def _relational_tree(setup: _RelSetup, pre: Formula, post: Formula,
                     vdata=None) -> ProofNode:
    kind, spec, inv, pcv = setup.kind, setup.spec, setup.inv, setup.pcv
    prefix = {"aa": "r", "ae": "e"}[kind]
    premises: list[ProofNode] = []
    for g in setup.body_l:
        premises.append(_one_sided(setup, LEFT, g, inv, []))
    for g_ in setup.body_r:
        if vdata is None:
            premises.append(_one_sided(setup, RIGHT, g_, inv, []))
        else:
            variant, kvars = vdata
            veq = vcgen.variant_eq_snapshot(variant, pcv, kvars)
            vlt = vcgen.variant_lt_snapshot(variant, pcv, kvars)
            premises.append(_one_sided(setup, RIGHT, g_,
                                       fand([inv, vlt]), [veq]))
    for g in setup.body_l:
        for g_ in setup.body_r:
            expected = fand([inv, proofs.guard_formula(g.guard, LEFT),
                             proofs.guard_formula(g_.guard, RIGHT),
                             FNot(setup.lcond), FNot(setup.rcond)])
            premises.append(_premise_for(kind, g.body, g_.body, expected, inv))

    do_l, do_r = Do(0, setup.body_l), Do(0, setup.body_r)
    do_post = proofs.do_post(kind, inv, setup.body_l, setup.body_r)
    do_j = Judgment(kind, do_l, do_r, inv, do_post)
    data = dict(l=setup.lcond, r=setup.rcond)
    if vdata is not None:
        data.update(variant=vdata[0], kvars=vdata[1], pcvar=pcv)
    do_node = node(prefix + "Do", do_j, premises, **data)

    n, n_ = spec.left.init, spec.right.init
    init_slots = [(LEFT, Assign(0, pcv, Lit(n))), (RIGHT, Assign(0, pcv, Lit(n_)))]
    init_pre, init_chain = _chain(kind, init_slots, inv)
    init_j = Judgment(kind, Assign(0, pcv, Lit(n)), Assign(0, pcv, Lit(n_)),
                      init_pre, inv)
    init_node = node(prefix + "Rewrite", init_j, [init_chain], hyps=("none",))

    seq_j = Judgment(kind, setup.nf_l, setup.nf_r, init_pre, do_post)
    seq_node = node(prefix + "Seq", seq_j, [init_node, do_node])
    conseq = node(prefix + "Conseq",
                  Judgment(kind, setup.nf_l, setup.nf_r, pre, post), [seq_node])

    c, c_ = spec.left.command, spec.right.command
    instr_l = Seq(normform.add_pc(c, pcv), Assign(0, pcv, Lit(spec.left.fin)))
    instr_r = Seq(normform.add_pc(c_, pcv), Assign(0, pcv, Lit(spec.right.fin)))
    rw1 = node(prefix + "Rewrite", Judgment(kind, instr_l, instr_r, pre, post),
               [conseq], hyps=("auto", pcv, ()))
    erased_l = normform.erase_ghost(pcv, instr_l)
    erased_r = normform.erase_ghost(pcv, instr_r)
    ghost = node(prefix + "Ghost",
                 Judgment(kind, erased_l, erased_r, pre, post), [rw1],
                 x=pcv, x2=pcv)
    return node(prefix + "Rewrite", Judgment(kind, c, c_, pre, post), [ghost],
                hyps=("none",))


def forall_translate(spec: ProductSpec, an: Annotation, pre: Formula,
                     post: Formula, dom: Domain) -> ProofNode:
    """An annotated forall-forall alignment product into a derivation."""
    _require(check_vcs(vcgen.relational_vcs(spec, an), dom),
             "relational VC check")
    _require(check_vcs(vcgen.adequacy_conditions("aa", spec, an), dom),
             "manifest adequacy check")
    setup = _setup("aa", spec, an, pre, post)
    return _relational_tree(setup, pre, post)


def forallexists_translate(spec: ProductSpec, an: Annotation,
                           variant: VariantSpec, pre: Formula, post: Formula,
                           dom: Domain) -> ProofNode:
    """An annotated filtered product into a forall-exists derivation."""
    if spec.keep is None:
        raise TranslateError("forall-exists translation needs a keep formula")
    _require(check_vcs(vcgen.filtered_vcs(spec, an), dom), "filtered VC check")
    _require(check_vcs(vcgen.adequacy_conditions("ae", spec, an, variant), dom),
             "adequate filtering check")
    setup = _setup("ae", spec, an, pre, post)
    taken = {x for x, _ in free_vars(setup.inv)}
    taken |= cmd_vars(spec.left.command) | cmd_vars(spec.right.command)
    for vt in variant.entries.values():
        for e in vt:
            taken |= syntax.expr_vars(e)
    kvars = []
    for i in range(variant.width):
        k = formulas.fresh_name(f"k{i}" if variant.width > 1 else "k",
                                taken)
        taken.add(k)
        kvars.append(k)
    return _relational_tree(setup, pre, post, vdata=(variant, tuple(kvars)))


# ---------------------------------------------------------------------------
# Assertion-discipline audit

def audit_assertions(tree: ProofNode, allowed_vars: set[str],
                     pcvars: set[str], kvars: set[str] = frozenset()) -> list[str]:
    """Check that every formula in the tree only mentions program
    variables, the pc variables (compared against literals only), and
    snapshot variables; returns the violations found."""
    problems: list[str] = []

    def walk_formula(p: Formula, where: str) -> None:
        match p:
            case formulas.FCmp(op, a, b):
                for t in (a, b):
                    for (x, side) in formulas.term_vars(t):
                        if side == formulas.LOGIC:
                            if x not in kvars:
                                problems.append(f"{where}: stray logical "
                                                f"variable {x}")
                        elif x not in allowed_vars and x not in pcvars:
                            problems.append(f"{where}: stray variable {x}")
                if isinstance(a, formulas.RVar) and a.name in pcvars:
                    if op != "==" or not isinstance(b, formulas.RLit):
                        problems.append(f"{where}: pc used beyond literal "
                                        "equality")
            case formulas.FNot(a):
                walk_formula(a, where)
            case formulas.FAnd(a, b) | formulas.FOr(a, b) | formulas.FImp(a, b):
                walk_formula(a, where)
                walk_formula(b, where)
            case formulas.FQuant(_, _, v, body):
                allowed_vars.add(v)
                walk_formula(body, where)
            case _:
                pass

    def walk(n: ProofNode, path: str) -> None:
        walk_formula(n.judgment.pre, f"{path}.pre")
        walk_formula(n.judgment.post, f"{path}.post")
        for i, p in enumerate(n.premises):
            walk(p, f"{path}/{i}")

    walk(tree, "root")
    return problems
