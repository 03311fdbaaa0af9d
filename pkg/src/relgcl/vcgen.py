"""Verification-condition generation for program and alignment automata.

Unary VCs relate annotations along each edge summary.  Relational VCs
are pc-encoded: the antecedent pins the control pair with pc literals
and conjoins the gating alignment condition, while the consequent is the
target annotation transformed by the composed edge effects (guards join
the antecedent; assignments substitute; havocs quantify).  Filtered VCs
additionally push the keep set, transformed the same way, into the
antecedent, with value quantifiers hoisted in front of the implication.
Adequacy conditions cover the manifest disjunction and, for the
forall-exists mode, the left-permissive / right-productive /
joint-productive obligations of an adequate filtering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import automata, formulas, syntax
from .automata import (ASSIGN, BRANCH, HAVOC, LOOP_EXIT, SKIP, Automaton,
                       EdgeSummary, ProductSpec, pc_eq)
from .formulas import (FAnd, FCmp, FImp, FOr, FQuant, Formula, LEFT, RIGHT,
                       PLAIN, RLit, RVar, Term, Verdict, embed_expr,
                       embed_term, fand, fold, forr, fresh_name,
                       free_vars, quantify, subst_formula, subst_term,
                       validity)
from .semantics import Domain
from .syntax import Command, Expr, Lit, labs


class VCError(Exception):
    pass


@dataclass(frozen=True)
class VC:
    name: str
    formula: Formula
    provenance: str = ""
    extrapolated: bool = False


@dataclass
class Annotation:
    """Map from control points (or pairs) to formulas; missing entries are
    false, which soundly marks unlisted points unreachable."""

    entries: dict

    def at(self, key) -> Formula:
        return self.entries.get(key, formulas.F_FALSE)

    def keys(self):
        return self.entries.keys()


# ---------------------------------------------------------------------------
# Unary VCs

def unary_vcs(c: Command, f: int, an: Annotation) -> list[VC]:
    aut = automata.build_aut(c, f)
    out: list[VC] = []
    for e in aut.edges:
        pre = an.at(e.src)
        post = an.at(e.dst)
        if e.kind == SKIP:
            form = FImp(pre, post)
        elif e.kind == ASSIGN:
            form = FImp(pre, formulas.substitute(post, PLAIN, e.var, e.expr))
        elif e.kind == HAVOC:
            form = FImp(pre, quantify(post, PLAIN, "forall", e.var))
        elif e.kind == BRANCH:
            form = FImp(FAnd(pre, embed_expr(e.guard, PLAIN)), post)
        else:  # loop exit; guard is already the negated enabling condition
            form = FImp(FAnd(pre, embed_expr(e.guard, PLAIN)), post)
        out.append(VC(name=f"unary {e.kind} ({e.src})->({e.dst})",
                      formula=fold(form), provenance=f"unary {e.kind}"))
    return out


# ---------------------------------------------------------------------------
# Edge-effect transforms

def _guard_ants(e: EdgeSummary, side: str) -> list[Formula]:
    if e.kind in (BRANCH, LOOP_EXIT):
        return [embed_expr(e.guard, side)]
    return []


def _consequent_tf(e: EdgeSummary, side: str, target: Formula) -> Formula:
    """Unfiltered style: substitute for assignments, quantify the store
    variable for havoc, leave guards to the antecedent."""
    if e.kind == ASSIGN:
        return formulas.substitute(target, side, e.var, e.expr)
    if e.kind == HAVOC:
        return quantify(target, side, "forall", e.var)
    return target


@dataclass
class _FilteredTf:
    """Filtered style: substitution by a fresh value variable with the
    quantifier hoisted outside the implication."""

    subst: Optional[tuple[str, str, Term]] = None   # (var, side, replacement)
    wrapper: Optional[tuple[str, str, str]] = None  # (kind, side, var)
    guards: list[Formula] = field(default_factory=list)

    def apply(self, p: Formula) -> Formula:
        if self.subst is None:
            return p
        var, side, repl = self.subst
        return subst_formula(p, var, side, repl)

    def apply_term(self, t: Term) -> Term:
        if self.subst is None:
            return t
        var, side, repl = self.subst
        return subst_term(t, var, side, repl)

    def wrap(self, p: Formula) -> Formula:
        if self.wrapper is None:
            return p
        kind, side, var = self.wrapper
        return FQuant(kind, side, var, p)


def _filtered_tf(e: EdgeSummary, side: str, taken: set[str],
                 quant_kind: str = "forall") -> _FilteredTf:
    tf = _FilteredTf(guards=_guard_ants(e, side))
    if e.kind == ASSIGN:
        tf.subst = (e.var, side, embed_term(e.expr, side))
    elif e.kind == HAVOC:
        v = fresh_name(f"{e.var}_v", taken)
        taken.add(v)
        tf.subst = (e.var, side, RVar(v, side))
        tf.wrapper = (quant_kind, side, v)
    return tf


def _pins(spec: ProductSpec, n: int, n_: int) -> list[Formula]:
    return [pc_eq(spec.pcvar, n, LEFT), pc_eq(spec.pcvar, n_, RIGHT)]


def _taken_names(spec: ProductSpec, an: Annotation) -> set[str]:
    names = set(syntax.cmd_vars(spec.left.command))
    names |= set(syntax.cmd_vars(spec.right.command))
    names.add(spec.pcvar)
    for form in list(an.entries.values()) + [spec.left_only, spec.right_only,
                                             spec.joint,
                                             spec.keep or formulas.F_TRUE]:
        names |= {x for x, _ in free_vars(form)}
    return names


_PRINTED_JOINT = {
    (SKIP, SKIP), (ASSIGN, ASSIGN), (BRANCH, BRANCH),
    (BRANCH, LOOP_EXIT), (ASSIGN, BRANCH),
}
_PRINTED_FILTERED_JOINT = {
    (ASSIGN, BRANCH), (HAVOC, SKIP), (HAVOC, ASSIGN),
    (HAVOC, BRANCH), (HAVOC, HAVOC),
}


def relational_vcs(spec: ProductSpec, an: Annotation) -> list[VC]:
    """pc-encoded left-only, right-only, and joint VCs for an unfiltered
    alignment product; generated compositionally for every edge-summary
    combination."""
    out: list[VC] = []
    left, right = spec.left, spec.right
    l_controls = sorted(left.control)
    r_controls = sorted(right.control)

    for e in left.edges:
        for n_ in r_controls:
            ant = [spec.trimmed_left()] + _pins(spec, e.src, n_) + \
                  [an.at((e.src, n_))] + _guard_ants(e, LEFT)
            cons = _consequent_tf(e, LEFT, an.at((e.dst, n_)))
            out.append(VC(f"LO {e.kind} ({e.src},{n_})->({e.dst},{n_})",
                          fold(FImp(fand(ant), cons)),
                          provenance=f"left-only {e.kind}"))
    for e_ in right.edges:
        for n in l_controls:
            ant = [spec.trimmed_right()] + _pins(spec, n, e_.src) + \
                  [an.at((n, e_.src))] + _guard_ants(e_, RIGHT)
            cons = _consequent_tf(e_, RIGHT, an.at((n, e_.dst)))
            out.append(VC(f"RO {e_.kind} ({n},{e_.src})->({n},{e_.dst})",
                          fold(FImp(fand(ant), cons)),
                          provenance=f"right-only {e_.kind} (mirror of left-only)"))
    for e in left.edges:
        for e_ in right.edges:
            ant = [spec.trimmed_joint()] + _pins(spec, e.src, e_.src) + \
                  [an.at((e.src, e_.src))] + _guard_ants(e, LEFT) + \
                  _guard_ants(e_, RIGHT)
            cons = _consequent_tf(e, LEFT,
                                  _consequent_tf(e_, RIGHT,
                                                 an.at((e.dst, e_.dst))))
            extrapolated = (e.kind, e_.kind) not in _PRINTED_JOINT
            out.append(VC(
                f"JO {e.kind}/{e_.kind} ({e.src},{e_.src})->({e.dst},{e_.dst})",
                fold(FImp(fand(ant), cons)),
                provenance=f"joint {e.kind}/{e_.kind}",
                extrapolated=extrapolated))
    return out


def filtered_vcs(spec: ProductSpec, an: Annotation) -> list[VC]:
    """VCs for the filtered product: like the unfiltered ones but with
    the keep set at the target pair, transformed by the same edge
    effects, conjoined into the antecedent; havoc transforms quantify a
    fresh value variable in front of the whole implication."""
    if spec.keep is None:
        raise VCError("filtered VCs need a keep formula")
    out: list[VC] = []
    left, right = spec.left, spec.right
    taken_base = _taken_names(spec, an)

    def build(name: str, gate: Formula, src: tuple[int, int],
              dst: tuple[int, int], tfs: list[_FilteredTf], provenance: str,
              extrapolated: bool) -> VC:
        keep = spec.keep_at(*dst)
        target = an.at(dst)
        for tf in tfs:
            keep = tf.apply(keep)
            target = tf.apply(target)
        ants = [gate] + _pins(spec, *src) + [an.at(src)]
        for tf in tfs:
            ants.extend(tf.guards)
        ants.append(keep)
        body: Formula = FImp(fand(ants), target)
        for tf in reversed(tfs):
            body = tf.wrap(body)
        return VC(name, fold(body), provenance=provenance,
                  extrapolated=extrapolated)

    for e in left.edges:
        for n_ in sorted(right.control):
            tf = _filtered_tf(e, LEFT, set(taken_base))
            out.append(build(
                f"LO {e.kind} ({e.src},{n_})->({e.dst},{n_})",
                spec.trimmed_left(), (e.src, n_), (e.dst, n_), [tf],
                provenance=f"filtered left-only {e.kind} (mirror of right-only)",
                extrapolated=True))
    for e_ in right.edges:
        for n in sorted(left.control):
            tf = _filtered_tf(e_, RIGHT, set(taken_base))
            out.append(build(
                f"RO {e_.kind} ({n},{e_.src})->({n},{e_.dst})",
                spec.trimmed_right(), (n, e_.src), (n, e_.dst), [tf],
                provenance=f"filtered right-only {e_.kind}",
                extrapolated=False))
    for e in left.edges:
        for e_ in right.edges:
            taken = set(taken_base)
            tf_l = _filtered_tf(e, LEFT, taken)
            tf_r = _filtered_tf(e_, RIGHT, taken)
            extrapolated = (e.kind, e_.kind) not in _PRINTED_FILTERED_JOINT
            out.append(build(
                f"JO {e.kind}/{e_.kind} ({e.src},{e_.src})->({e.dst},{e_.dst})",
                spec.trimmed_joint(), (e.src, e_.src), (e.dst, e_.dst),
                [tf_l, tf_r],
                provenance=f"filtered joint {e.kind}/{e_.kind}",
                extrapolated=extrapolated))
    return out


# ---------------------------------------------------------------------------
# Variants

@dataclass
class VariantSpec:
    """Per-right-control-point variant expressions over the right store.

    Values are lexicographic tuples of integer expressions; plain natural
    variants are width-1 tuples.  Unlisted control points default to the
    all-zero tuple, so the exit label needs no entry.
    """

    entries: dict[int, tuple[Expr, ...]]
    controls: tuple[int, ...]

    def __post_init__(self):
        widths = {len(v) for v in self.entries.values()}
        if len(widths) > 1:
            raise VCError("variant tuples must share one width")
        self.width = widths.pop() if widths else 1
        self.entries = {k: tuple(v) for k, v in self.entries.items()}

    def at(self, label: int) -> tuple[Expr, ...]:
        return self.entries.get(label, (Lit(0),) * self.width)

    def terms_at(self, label: int) -> list[Term]:
        return [embed_term(e, RIGHT) for e in self.at(label)]


def lex_less(smaller: list[Term], larger: list[Term]) -> Formula:
    """Strict lexicographic comparison of equal-width term tuples."""
    assert len(smaller) == len(larger) and smaller
    a, b = smaller[0], larger[0]
    head = FCmp("<", a, b)
    if len(smaller) == 1:
        return head
    return FOr(head, FAnd(FCmp("==", a, b), lex_less(smaller[1:], larger[1:])))


def lex_eq(a: list[Term], b: list[Term]) -> Formula:
    return fand([FCmp("==", x, y) for x, y in zip(a, b)])


def nonneg(ts: list[Term]) -> Formula:
    return fand([FCmp(">=", t, RLit(0)) for t in ts])


def _piecewise(variant: VariantSpec, pcvar: str, case) -> Formula:
    """Conjunction of pc'-guarded cases over the known right control
    points, plus a default case (all-zero variant) for other values."""
    parts = []
    for m in variant.controls:
        parts.append(FImp(pc_eq(pcvar, m, RIGHT), case(variant.terms_at(m))))
    none_of = fand([formulas.FNot(pc_eq(pcvar, m, RIGHT))
                    for m in variant.controls])
    zeros = [RLit(0)] * variant.width
    parts.append(FImp(none_of, case(zeros)))
    return fand(parts)


def variant_eq_snapshot(variant: VariantSpec, pcvar: str,
                        kvars: tuple[str, ...]) -> Formula:
    ks = [RVar(k, formulas.LOGIC) for k in kvars]
    return _piecewise(variant, pcvar, lambda ts: lex_eq(ts, ks))


def variant_lt_snapshot(variant: VariantSpec, pcvar: str,
                        kvars: tuple[str, ...]) -> Formula:
    ks = [RVar(k, formulas.LOGIC) for k in kvars]
    return _piecewise(variant, pcvar, lambda ts: lex_less(ts, ks))


def variant_nonneg(variant: VariantSpec, pcvar: str) -> Formula:
    return _piecewise(variant, pcvar, nonneg)


# ---------------------------------------------------------------------------
# Adequacy conditions

def _control_pairs(spec: ProductSpec) -> list[tuple[int, int]]:
    return [(i, j) for i in sorted(spec.left.control)
            for j in sorted(spec.right.control)]


def manifest_disjunction(spec: ProductSpec, an: Annotation) -> list[VC]:
    disj = forr([spec.trimmed_left(), spec.trimmed_right(),
                 spec.trimmed_joint(), spec.final_pair()])
    out = []
    for (i, j) in _control_pairs(spec):
        ant = fand(_pins(spec, i, j) + [an.at((i, j))])
        out.append(VC(f"manifest ({i},{j})", fold(FImp(ant, disj)),
                      provenance="manifest adequacy disjunction"))
    return out


def adequacy_conditions(mode: str, spec: ProductSpec, an: Annotation,
                        variant: Optional[VariantSpec] = None) -> list[VC]:
    """Manifest-adequacy disjunction for both modes; for mode "ae" also
    the adequate-filtering obligations:

      (a) left-permissive: every left step from a kept state lands in the
          keep set, for every right control point;
      (b) right-productive: some right step lands in the keep set with a
          strictly smaller variant (one disjunct per outgoing right edge);
      (c) joint-productive: after any left step, some right step lands in
          the keep set (disjunction over right edges inside the left
          universal transform).

    Right-productivity compares the successor's variant, transformed into
    the pre-state by the edge's existential pre-image, against the source
    variant evaluated at the pre-state; nonnegativity of the source
    variant is emitted separately at every annotated right-enabled pair.
    """
    out = manifest_disjunction(spec, an)
    if mode == "aa":
        return out
    if mode != "ae":
        raise VCError(f"unknown adequacy mode {mode}")
    if spec.keep is None:
        raise VCError("forall-exists adequacy needs a keep formula")
    if variant is None:
        raise VCError("forall-exists adequacy needs a variant")
    left, right = spec.left, spec.right
    taken_base = _taken_names(spec, an)

    # (a) left-permissive
    for e in left.edges:
        for n_ in sorted(right.control):
            ant = _pins(spec, e.src, n_) + [an.at((e.src, n_)),
                                            spec.trimmed_left()] + \
                _guard_ants(e, LEFT)
            cons = _consequent_tf(e, LEFT, spec.keep_at(e.dst, n_))
            out.append(VC(f"AF-a left {e.kind} ({e.src},{n_})->({e.dst},{n_})",
                          fold(FImp(fand(ant), cons)),
                          provenance="adequate filtering: left-permissive"))

    # (b) right-productive: disjunction over the outgoing right edges
    by_src: dict[int, list[EdgeSummary]] = {}
    for e_ in right.edges:
        by_src.setdefault(e_.src, []).append(e_)
    for n_ in sorted(by_src):
        edges = by_src[n_]
        v_src = variant.terms_at(n_)
        for n in sorted(left.control):
            disjuncts = []
            for e_ in edges:
                taken = set(taken_base)
                tf = _filtered_tf(e_, RIGHT, taken, quant_kind="exists")
                v_dst = [tf.apply_term(t) for t in variant.terms_at(e_.dst)]
                body = fand(tf.guards +
                            [tf.apply(spec.keep_at(n, e_.dst)),
                             lex_less(v_dst, v_src),
                             nonneg(v_dst)])
                disjuncts.append(tf.wrap(body))
            ant = _pins(spec, n, n_) + [an.at((n, n_)), spec.trimmed_right()]
            out.append(VC(f"AF-b right ({n},{n_})",
                          fold(FImp(fand(ant), forr(disjuncts))),
                          provenance="adequate filtering: right-productive "
                                     "(existence as disjunction over edges)"))
            out.append(VC(f"AF-b nonneg ({n},{n_})",
                          fold(FImp(fand(ant), nonneg(v_src))),
                          provenance="variant nonnegativity at right-enabled pair"))

    # (c) joint-productive
    for e in left.edges:
        for n_ in sorted(right.control):
            disjuncts = []
            for e_ in by_src.get(n_, []):
                taken = set(taken_base)
                tf = _filtered_tf(e_, RIGHT, taken, quant_kind="exists")
                body = fand(tf.guards + [tf.apply(spec.keep_at(e.dst, e_.dst))])
                disjuncts.append(tf.wrap(body))
            ant = _pins(spec, e.src, n_) + [an.at((e.src, n_)),
                                            spec.trimmed_joint()] + \
                _guard_ants(e, LEFT)
            cons = _consequent_tf(e, LEFT, forr(disjuncts))
            out.append(VC(f"AF-c joint {e.kind} ({e.src},{n_})",
                          fold(FImp(fand(ant), cons)),
                          provenance="adequate filtering: joint-productive "
                                     "(existence as disjunction over edges)"))
    return out


# ---------------------------------------------------------------------------
# Checking

@dataclass
class VCResult:
    vc: VC
    verdict: Verdict


@dataclass
class VCReport:
    results: list[VCResult]
    domain: Domain

    @property
    def ok(self) -> bool:
        return all(r.verdict.valid for r in self.results)

    def failures(self) -> list[VCResult]:
        return [r for r in self.results if not r.verdict.valid]

    def caveats(self) -> list[str]:
        out = []
        for r in self.results:
            for c in r.verdict.caveats:
                out.append(f"{r.vc.name}: {c}")
        return out

    def summary(self) -> str:
        lines = []
        for r in self.results:
            mark = "ok" if r.verdict.valid else "FAIL"
            extra = ""
            if not r.verdict.valid:
                extra = f"  counterexample: {r.verdict.counterexample}"
            elif r.verdict.caveats:
                extra = "  (bounded)"
            lines.append(f"[{mark}] {r.vc.name}{extra}")
        status = "all valid" if self.ok else \
            f"{len(self.failures())} of {len(self.results)} failed"
        lines.append(f"=> {status} over domain [{self.domain.lo},{self.domain.hi}]")
        return "\n".join(lines)


def check_vcs(vcs: Iterable[VC], dom: Domain) -> VCReport:
    results = [VCResult(vc, validity(vc.formula, dom)) for vc in vcs]
    return VCReport(results=results, domain=dom)
