"""Splitting parfactors and preemptive shattering.

Splitting replaces a parfactor by the direct application of a
substitution plus residual parfactors carrying the complementary
inequality constraints; together the pieces ground to exactly the same
factor multiset as the original.  Preemptive shattering splits until
every same-typed parameter pair carries an inequality and every
parameter is constrained apart from every explicitly mentioned constant.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Optional, Sequence

from .model import (
    Constant,
    ConstraintSet,
    ContradictionError,
    Model,
    Parameter,
    Parfactor,
    Substitution,
)


def split_parfactor(pf: Parfactor, theta: Substitution) -> list[Parfactor]:
    """Split `pf` on `theta`: direct application plus residual pieces.

    Pieces whose constraints become contradictory are dropped, so the
    output groundings always partition the input grounding exactly.
    """
    items = [(p, t) for p, t in theta.bindings.items() if p != t and p in pf.params]
    pieces: list[Parfactor] = []
    direct = pf.substitute(Substitution(dict(items)))
    if direct is not None:
        pieces.append(direct)
    prefix: list[tuple[Parameter, object]] = []
    for p, t in items:
        residual: Optional[Parfactor] = pf.substitute(Substitution(dict(prefix)))
        if residual is not None and p in residual.params:
            try:
                constraints = residual.constraints.with_pair(p, t)
            except ContradictionError:
                constraints = None
            if constraints is not None:
                pieces.append(Parfactor(constraints, residual.prvs, residual.table))
        prefix.append((p, t))
    return pieces


def _shatter_violation(pf: Parfactor, mentioned: Mapping[str, set[str]]):
    """First missing inequality: a same-typed parameter pair or (parameter, constant)."""
    params = pf.params
    for i, p in enumerate(params):
        for q in params[i + 1:]:
            if p.pop == q.pop and not pf.constraints.forbids(p, q):
                return (p, q)
    for p in params:
        for name in sorted(mentioned.get(p.pop, ())):
            c = Constant(name, p.pop)
            if not pf.constraints.forbids(p, c):
                return (p, c)
    return None


def preemptive_shatter(pfs: Sequence[Parfactor], model: Model,
                       extra_atoms: Iterable = ()) -> list[Parfactor]:
    """Split until every parfactor is preemptively shattered.

    `extra_atoms` adds ground atoms (observations, query targets) whose
    constants must be shattered against even when the model text does
    not mention them.
    """
    mentioned = model.mentioned_constants(extra_atoms)
    return shatter_against(pfs, mentioned)


def shatter_against(pfs: Sequence[Parfactor], mentioned: Mapping[str, set[str]]) -> list[Parfactor]:
    done: list[Parfactor] = []
    work = list(pfs)
    while work:
        pf = work.pop(0)
        violation = _shatter_violation(pf, mentioned)
        if violation is None:
            done.append(pf)
            continue
        p, t = violation
        work = split_parfactor(pf, Substitution({p: t})) + work
    return done


def is_shattered(pf: Parfactor, mentioned: Mapping[str, set[str]]) -> bool:
    return _shatter_violation(pf, mentioned) is None
