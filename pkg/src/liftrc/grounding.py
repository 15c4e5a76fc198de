"""Grounding parfactors into plain factors for the ground oracle."""

from __future__ import annotations

from typing import Mapping, Sequence

from .model import Parfactor, Population, apply_substitution, grounding_substitutions

GroundVar = tuple[str, tuple[str, ...]]


class OracleInfeasibleError(RuntimeError):
    """The grounding would exceed the configured enumeration cap."""


class GroundFactor:
    """One grounding instance of a parfactor; the table is shared."""

    __slots__ = ("uid", "scope", "table")

    def __init__(self, uid: int, scope: tuple[GroundVar, ...], table):
        self.uid = uid
        self.scope = scope
        self.table = table

    def value(self, assignment: Mapping[GroundVar, str]):
        return self.table.lookup(tuple(assignment[v] for v in self.scope))

    def __repr__(self) -> str:
        return f"GroundFactor({', '.join(f + str(list(args)) for f, args in self.scope)})"


def ground_model(pfs: Sequence[Parfactor], populations: Mapping[str, Population],
                 cap: int = 100_000) -> list[GroundFactor]:
    """One ground factor per constraint-respecting grounding substitution.

    Raises OracleInfeasibleError when the factor count would exceed `cap`.
    """
    estimate = 0
    for pf in pfs:
        count = 1
        for p in pf.params:
            count *= populations[p.pop].size
        estimate += count
        if estimate > cap:
            raise OracleInfeasibleError(
                f"grounding needs more than {cap} factors; oracle infeasible"
            )
    factors: list[GroundFactor] = []
    uid = 0
    for pf in pfs:
        for theta in grounding_substitutions(pf.params, pf.constraints, populations):
            scope = tuple(apply_substitution(prv, theta).ground_key() for prv in pf.prvs)
            factors.append(GroundFactor(uid, scope, pf.table))
            uid += 1
    return factors


def ground_variables(factors: Sequence[GroundFactor]) -> dict[GroundVar, tuple[str, ...]]:
    """All ground variables with their ranges."""
    out: dict[GroundVar, tuple[str, ...]] = {}
    for f in factors:
        for var, prv in zip(f.scope, f.table.scope):
            out[var] = prv.rng
    return out
