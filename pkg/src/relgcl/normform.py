"""Program-counter instrumentation, ghost erasure, and automaton normal form.

``add_pc`` threads assignments to a fresh counter variable through a
command so that the counter always names the label about to execute;
``normalize_body`` flattens a labeled command into the guarded commands
of a single fetch-execute loop; and ``verify_normal_form`` checks the
two against each other with the KAT engine under the generated
pc-hypotheses.
"""

from __future__ import annotations

from . import kat, syntax
from .kat import Hypothesis, generate_hyps, kateq
from .syntax import (Assign, Command, Do, Expr, Guarded, GuardedList, Havoc,
                     If, Lit, Seq, Skip, Var, cmd_vars, enab, lab, labs, okf)


class NormFormError(Exception):
    pass


def _set_pc(pcvar: str, n: int) -> Command:
    return Assign(0, pcvar, Lit(n))


def _test_pc(pcvar: str, n: int) -> Expr:
    return syntax.Cmp("==", Var(pcvar), Lit(n))


def add_pc(c: Command, pcvar: str = "pc") -> Command:
    """Prefix every labeled point with ``pc := label``; loop bodies are
    additionally suffixed with an assignment back to the loop label."""
    if pcvar in cmd_vars(c):
        raise NormFormError(f"{pcvar} already occurs in the program")

    def go(d: Command) -> Command:
        match d:
            case Skip(n) | Assign(n, _, _) | Havoc(n, _):
                return Seq(_set_pc(pcvar, n), d)
            case Seq(a, b):
                return Seq(go(a), go(b))
            case If(n, gcs):
                return Seq(_set_pc(pcvar, n),
                           If(n, tuple(Guarded(g.guard, go(g.body)) for g in gcs)))
            case Do(n, gcs):
                body = tuple(Guarded(g.guard, Seq(go(g.body), _set_pc(pcvar, n)))
                             for g in gcs)
                return Seq(_set_pc(pcvar, n), Do(n, body))
        raise AssertionError

    return go(c)


def is_ghost(x: str, c: Command) -> bool:
    """True iff every occurrence of ``x`` is as an assignment or havoc
    target (so it is never read)."""
    match c:
        case Skip():
            return True
        case Assign(_, _, e):
            return x not in syntax.expr_vars(e)
        case Havoc():
            return True
        case Seq(a, b):
            return is_ghost(x, a) and is_ghost(x, b)
        case If(_, gcs) | Do(_, gcs):
            return all(x not in syntax.expr_vars(g.guard) and is_ghost(x, g.body)
                       for g in gcs)
    raise AssertionError


def erase_ghost(x: str, c: Command) -> Command:
    """Replace assignments to / havocs of ``x`` by skip (labels kept)."""
    if not is_ghost(x, c):
        raise NormFormError(f"{x} is read somewhere; not a ghost variable")

    def go(d: Command) -> Command:
        match d:
            case Assign(n, y, _) if y == x:
                return Skip(n)
            case Havoc(n, y) if y == x:
                return Skip(n)
            case Seq(a, b):
                return Seq(go(a), go(b))
            case If(n, gcs):
                return If(n, tuple(Guarded(g.guard, go(g.body)) for g in gcs))
            case Do(n, gcs):
                return Do(n, tuple(Guarded(g.guard, go(g.body)) for g in gcs))
            case _:
                return d

    return go(c)


def normalize_body(c: Command, f: int, pcvar: str = "pc") -> GuardedList:
    """The guarded commands of the automaton normal form: one per control
    edge, each guard leading with a pc literal.  Branch dispatch comes
    first, then the loop exit, then the translated branch bodies."""

    def go(d: Command, cont: int) -> list[Guarded]:
        match d:
            case Skip(n):
                return [Guarded(_test_pc(pcvar, n), _set_pc(pcvar, cont))]
            case Assign(n, x, e):
                return [Guarded(_test_pc(pcvar, n),
                                Seq(Assign(0, x, e), _set_pc(pcvar, cont)))]
            case Havoc(n, x):
                return [Guarded(_test_pc(pcvar, n),
                                Seq(Havoc(0, x), _set_pc(pcvar, cont)))]
            case Seq(a, b):
                return go(a, lab(b)) + go(b, cont)
            case If(n, gcs):
                out = [Guarded(syntax.And(_test_pc(pcvar, n), g.guard),
                               _set_pc(pcvar, lab(g.body))) for g in gcs]
                for g in gcs:
                    out.extend(go(g.body, cont))
                return out
            case Do(n, gcs):
                out = [Guarded(syntax.And(_test_pc(pcvar, n), g.guard),
                               _set_pc(pcvar, lab(g.body))) for g in gcs]
                out.append(Guarded(syntax.And(_test_pc(pcvar, n),
                                              syntax.Not(enab(gcs))),
                                   _set_pc(pcvar, cont)))
                for g in gcs:
                    out.extend(go(g.body, n))
                return out
        raise AssertionError

    return tuple(go(c, f))


def normal_form(c: Command, f: int, pcvar: str = "pc") -> Command:
    """``pc := lab(c); do <normal-form body> od`` (labels are irrelevant
    in the result and set to 0)."""
    if not okf(c, f):
        raise NormFormError(f"program not ok for exit label {f}")
    if pcvar in cmd_vars(c):
        raise NormFormError(f"{pcvar} already occurs in the program")
    return Seq(_set_pc(pcvar, lab(c)), Do(0, normalize_body(c, f, pcvar)))


def normal_form_hyps(c: Command, f: int, pcvar: str = "pc") -> list[Hypothesis]:
    return generate_hyps([c], pcvar, extra_labels=set(labs(c)) | {f})


def verify_normal_form(c: Command, f: int, pcvar: str = "pc") -> bool:
    """Check the normal-form equivalence instance for ``c``:
    the normal form equals ``add_pc(c); pc := f`` under the generated
    pc hypotheses."""
    nf = normal_form(c, f, pcvar)
    instrumented = Seq(add_pc(c, pcvar), _set_pc(pcvar, f))
    return kateq(nf, instrumented, normal_form_hyps(c, f, pcvar))
