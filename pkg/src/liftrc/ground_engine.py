"""Search-based exact inference over ground factors.

The engine conditions on one variable at a time, evaluates factors as
soon as their scope is fully assigned, solves disconnected pieces of the
factor graph independently, and caches component values keyed by the
relevant slice of the context.  It is the correctness oracle for the
lifted engine and the baseline for the scaling experiments.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .grounding import GroundFactor, GroundVar, ground_variables
from .numbers import NumericMode


@dataclass
class RunStats:
    """Counters shared by both engines."""

    calls: int = 0
    branches: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    case3_events: int = 0
    wall_ms: float = 0.0

    def merged_with(self, other: "RunStats") -> "RunStats":
        return RunStats(
            self.calls + other.calls,
            self.branches + other.branches,
            self.cache_hits + other.cache_hits,
            self.cache_misses + other.cache_misses,
            self.case3_events + other.case3_events,
            self.wall_ms + other.wall_ms,
        )


class GroundEngine:
    """Recursive conditioning over a fixed set of ground factors.

    One instance serves one evaluation; the cache and counters are
    mutable, so share instances across threads never.
    """

    def __init__(self, factors: Sequence[GroundFactor], mode: NumericMode,
                 cache_enabled: bool = True, forgetting_enabled: bool = True,
                 select: str = "most_factors", rng: Optional[random.Random] = None):
        self.factors = tuple(factors)
        self.mode = mode
        self.cache_enabled = cache_enabled
        self.forgetting_enabled = forgetting_enabled
        if select not in ("most_factors", "name", "random"):
            raise ValueError(f"unknown selection heuristic {select!r}")
        self.select = select
        self.rng = rng or random.Random(0)
        self.ranges = ground_variables(self.factors)
        self.stats = RunStats()
        self._cache: dict = {}

    def evaluate(self, context: Mapping[GroundVar, str]):
        """Sum over unassigned variables of the product of all factors."""
        started = time.perf_counter()
        value = self._rc(dict(context), frozenset(f.uid for f in self.factors),
                         {f.uid: f for f in self.factors})
        self.stats.wall_ms += (time.perf_counter() - started) * 1000.0
        return value

    # -- the conditioning cases -------------------------------------------

    def _rc(self, con: dict, fs: frozenset, by_uid: dict):
        self.stats.calls += 1
        mode = self.mode
        if not fs:
            return mode.one()

        factors = [by_uid[u] for u in fs]
        fs_vars = {v for f in factors for v in f.scope}

        # Case 0: forget context entries no remaining factor mentions.
        if self.forgetting_enabled and any(v not in fs_vars for v in con):
            con = {v: val for v, val in con.items() if v in fs_vars}

        key = None
        if self.cache_enabled:
            key = (tuple(sorted(con.items())), fs)
            # Case 1: reuse a previously computed value.
            if key in self._cache:
                self.stats.cache_hits += 1
                return self._cache[key]
            self.stats.cache_misses += 1

        # Case 2: evaluate every factor whose scope is fully assigned.
        ready = [f for f in factors if all(v in con for v in f.scope)]
        if ready:
            value = mode.one()
            for f in ready:
                value = mode.mul(value, mode.from_fraction(f.value(con)))
            rest = fs.difference(f.uid for f in ready)
            value = mode.mul(value, self._rc(con, rest, by_uid))
            if key is not None:
                self._cache[key] = value
            return value

        # Case 3: solve disconnected components of the factor graph separately.
        components = self._components(con, factors)
        if len(components) > 1:
            value = mode.one()
            for component in components:
                value = mode.mul(value, self._rc(con, frozenset(component), by_uid))
            if key is not None:
                self._cache[key] = value
            return value

        # Case 4: branch on an unassigned variable.
        x = self._select_variable(con, factors)
        total = mode.zero()
        for v in self.ranges[x]:
            self.stats.branches += 1
            child = dict(con)
            child[x] = v
            total = mode.add(total, self._rc(child, fs, by_uid))
        if key is not None:
            self._cache[key] = total
        return total

    def _components(self, con: Mapping[GroundVar, str], factors: list) -> list[list[int]]:
        by_var: dict[GroundVar, list[int]] = {}
        for i, f in enumerate(factors):
            for v in f.scope:
                if v not in con:
                    by_var.setdefault(v, []).append(i)
        seen: set[int] = set()
        components: list[list[int]] = []
        for start in range(len(factors)):
            if start in seen:
                continue
            stack = [start]
            seen.add(start)
            group: list[int] = []
            while stack:
                i = stack.pop()
                group.append(factors[i].uid)
                for v in factors[i].scope:
                    if v in con:
                        continue
                    for j in by_var[v]:
                        if j not in seen:
                            seen.add(j)
                            stack.append(j)
            components.append(group)
        return components

    def _select_variable(self, con: Mapping[GroundVar, str], factors: list) -> GroundVar:
        counts: dict[GroundVar, int] = {}
        for f in factors:
            for v in f.scope:
                if v not in con:
                    counts[v] = counts.get(v, 0) + 1
        candidates = sorted(counts)
        if self.select == "random":
            return self.rng.choice(candidates)
        if self.select == "name":
            return candidates[0]
        return sorted(candidates, key=lambda v: (-counts[v], v))[0]
