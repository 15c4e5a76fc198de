"""Conditional queries over either engine, with normalization and stats.

A query conditions the model on its observations plus one candidate
value of the target, evaluates the total weight with the requested
engine(s), and normalizes across the target's range.  With both engines
requested, the distributions must agree (bit-exactly in exact mode).
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .contexts import CurrentContext
from .ground_engine import GroundEngine, RunStats
from .grounding import ground_model
from .lifted_engine import DisconnectionCertificate, LiftedEngine
from .model import Model, PRV, validate_model
from .numbers import LogSpaceMode, NumericMode, make_mode
from .shatter import preemptive_shatter


class ZeroProbabilityEvidenceError(RuntimeError):
    """Every candidate value of the target has weight zero under the evidence."""


class EngineDisagreementError(RuntimeError):
    """Ground and lifted runs produced different distributions."""


ENGINE_CHOICES = ("ground", "lifted", "both")


@dataclass
class Query:
    """A conditional query: ground target atom, observations, engine choice."""

    target: PRV
    observations: dict[PRV, str] = field(default_factory=dict)
    engine: str = "lifted"
    numeric: str = "exact"
    precision: int = 50
    ground_cap: int = 100_000
    debug_check_disconnection: bool = False
    audit_branches: bool = False
    seed: Optional[int] = None

    def __post_init__(self):
        if self.engine not in ENGINE_CHOICES:
            raise ValueError(f"engine must be one of {ENGINE_CHOICES}")
        if not self.target.is_ground():
            raise ValueError(f"query target {self.target} is not ground")
        if self.target in self.observations:
            raise ValueError(f"target {self.target} is among the observations")
        for atom, value in self.observations.items():
            if not atom.is_ground():
                raise ValueError(f"observation {atom} is not ground")
            if value not in atom.rng:
                raise ValueError(f"observation {atom} = {value}: value outside range")


@dataclass
class EngineReport:
    """One engine's answer for one query."""

    engine: str
    weights: dict
    distribution: dict
    stats: RunStats
    certificates: list[DisconnectionCertificate] = field(default_factory=list)
    branch_audits: list = field(default_factory=list)


@dataclass
class QueryAnswer:
    target: PRV
    reports: dict[str, EngineReport]

    @property
    def distribution(self) -> Mapping[str, object]:
        preferred = self.reports.get("lifted") or self.reports["ground"]
        return preferred.distribution


def _normalize(mode: NumericMode, weights: dict):
    total = mode.zero()
    for w in weights.values():
        total = mode.add(total, w)
    if mode.is_zero(total):
        raise ZeroProbabilityEvidenceError(
            "all candidate values have zero weight; the evidence is inconsistent"
        )
    if isinstance(mode, LogSpaceMode):
        return {v: mode.to_fraction_of(w, total) for v, w in weights.items()}
    return {v: w / total for v, w in weights.items()}


def _ground_report(model: Model, query: Query, mode: NumericMode) -> EngineReport:
    factors = ground_model(model.parfactors, model.populations, cap=query.ground_cap)
    rng = random.Random(query.seed or 0)
    stats = RunStats()
    weights = {}
    for v in query.target.rng:
        engine = GroundEngine(factors, mode, rng=rng)
        context = {atom.ground_key(): val for atom, val in query.observations.items()}
        context[query.target.ground_key()] = v
        weights[v] = engine.evaluate(context)
        stats = stats.merged_with(engine.stats)
    return EngineReport("ground", weights, _normalize(mode, weights), stats)


def _lifted_report(model: Model, query: Query, mode: NumericMode) -> EngineReport:
    extra = [query.target] + list(query.observations)
    shattered = preemptive_shatter(model.parfactors, model, extra_atoms=extra)
    mentioned = model.mentioned_constants(extra)
    stats = RunStats()
    weights = {}
    certificates: list[DisconnectionCertificate] = []
    audits: list = []
    for v in query.target.rng:
        engine = LiftedEngine(
            shattered, model.populations, mentioned, mode,
            debug_check_disconnection=query.debug_check_disconnection,
            audit_branches=query.audit_branches,
        )
        assignments = {atom.ground_key(): val for atom, val in query.observations.items()}
        assignments[query.target.ground_key()] = v
        weights[v] = engine.evaluate(CurrentContext(assignments))
        stats = stats.merged_with(engine.stats)
        certificates.extend(engine.certificates)
        audits.extend(engine.branch_audits)
    return EngineReport("lifted", weights, _normalize(mode, weights), stats,
                        certificates, audits)


def _distributions_agree(mode: NumericMode, a: dict, b: dict) -> bool:
    if not isinstance(mode, LogSpaceMode):
        return a == b
    tolerance = Decimal(10) ** -(mode.precision // 2)
    return all(abs(a[v] - b[v]) <= tolerance for v in a)


def answer_query(model: Model, query: Query) -> QueryAnswer:
    """Normalized distribution over the target's range, per requested engine."""
    validate_model(model)
    mode = make_mode(query.numeric, query.precision)
    reports: dict[str, EngineReport] = {}
    if query.engine in ("ground", "both"):
        reports["ground"] = _ground_report(model, query, mode)
    if query.engine in ("lifted", "both"):
        reports["lifted"] = _lifted_report(model, query, mode)
    if query.engine == "both":
        if not _distributions_agree(mode, reports["ground"].distribution,
                                    reports["lifted"].distribution):
            raise EngineDisagreementError(
                f"query {query.target}: ground {reports['ground'].distribution} "
                f"!= lifted {reports['lifted'].distribution}"
            )
    return QueryAnswer(query.target, reports)


def partition_function(model: Model, engine: str = "lifted", numeric: str = "exact",
                       precision: int = 50, ground_cap: int = 100_000,
                       observations: Optional[dict[PRV, str]] = None,
                       debug_check_disconnection: bool = False,
                       audit_branches: bool = False) -> dict[str, EngineReport]:
    """Total weight of the model under the observations, per engine.

    The reports carry the unnormalized total in `weights[""]` and no
    distribution.
    """
    validate_model(model)
    if engine not in ENGINE_CHOICES:
        raise ValueError(f"engine must be one of {ENGINE_CHOICES}")
    mode = make_mode(numeric, precision)
    observations = observations or {}
    reports: dict[str, EngineReport] = {}
    if engine in ("ground", "both"):
        factors = ground_model(model.parfactors, model.populations, cap=ground_cap)
        g = GroundEngine(factors, mode)
        value = g.evaluate({atom.ground_key(): v for atom, v in observations.items()})
        reports["ground"] = EngineReport("ground", {"": value}, {}, g.stats)
    if engine in ("lifted", "both"):
        extra = list(observations)
        shattered = preemptive_shatter(model.parfactors, model, extra_atoms=extra)
        mentioned = model.mentioned_constants(extra)
        eng = LiftedEngine(shattered, model.populations, mentioned, mode,
                           debug_check_disconnection=debug_check_disconnection,
                           audit_branches=audit_branches)
        assignments = {atom.ground_key(): v for atom, v in observations.items()}
        value = eng.evaluate(CurrentContext(assignments))
        reports["lifted"] = EngineReport("lifted", {"": value}, {}, eng.stats,
                                         eng.certificates, eng.branch_audits)
    return reports
