"""Counting solutions of inequality CSPs without enumerating individuals.

The count is assembled per population: sum over set partitions of the
parameters (parameters in one block take equal values, which only the
partitions without an internal inequality edge allow), where each
partition contributes the number of injective block assignments avoiding
each block's forbidden constants.  The forbidden-position part uses the
rook-polynomial identity sum_j (-1)^j r_j (n-j)_(b-j), with r_j the
number of j-matchings between blocks and forbidden constants.  Cost
depends only on the number of parameters and constraints, never on the
population sizes.
"""

from __future__ import annotations

from itertools import product as iproduct
from typing import Iterator, Mapping, Sequence

from .model import Constant, ConstraintSet, Parameter
from .numbers import falling_factorial


def _set_partitions(items: Sequence) -> Iterator[list[list]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in _set_partitions(rest):
        for i in range(len(partition)):
            yield partition[:i] + [[first] + partition[i]] + partition[i + 1:]
        yield [[first]] + partition


def _matching_counts(block_forbidden: Sequence[frozenset], constants: Sequence[str]) -> list[int]:
    """r_j = number of j-matchings block->forbidden-constant, j = 0..len(blocks)."""
    counts = [0] * (len(block_forbidden) + 1)

    def walk(i: int, used: frozenset, size: int):
        if i == len(block_forbidden):
            counts[size] += 1
            return
        walk(i + 1, used, size)
        for c in block_forbidden[i] - used:
            walk(i + 1, used | {c}, size + 1)

    walk(0, frozenset(), 0)
    return counts


def _count_one_type(params: Sequence[Parameter], edges: set[frozenset],
                    forbidden: Mapping[Parameter, frozenset], size: int) -> int:
    total = 0
    for partition in _set_partitions(list(params)):
        if any(frozenset((p, q)) in edges
               for block in partition
               for i, p in enumerate(block) for q in block[i + 1:]):
            continue
        block_forbidden = [frozenset().union(*(forbidden[p] for p in block)) for block in partition]
        b = len(partition)
        r = _matching_counts(block_forbidden, [])
        subtotal = 0
        for j in range(min(b, size) + 1):
            if r[j] == 0:
                continue
            sign = -1 if j % 2 else 1
            subtotal += sign * r[j] * falling_factorial(size - j, b - j)
        total += subtotal
    return total


def count_csp_solutions(params: Sequence[Parameter], constraints: ConstraintSet,
                        pop_sizes: Mapping[str, int]) -> int:
    """Exact number of grounding substitutions of `params` satisfying `constraints`."""
    by_type: dict[str, list[Parameter]] = {}
    for p in params:
        by_type.setdefault(p.pop, []).append(p)
    edges: dict[str, set[frozenset]] = {t: set() for t in by_type}
    forbidden: dict[Parameter, set[str]] = {p: set() for p in params}
    for a, b in constraints:
        if isinstance(a, Constant) and isinstance(b, Constant):
            continue
        if isinstance(a, Parameter) and isinstance(b, Parameter):
            if a in forbidden and b in forbidden:
                edges[a.pop].add(frozenset((a, b)))
            continue
        p, c = (a, b) if isinstance(a, Parameter) else (b, a)
        if p in forbidden:
            forbidden[p].add(c.name)
    result = 1
    for pop, ps in by_type.items():
        result *= _count_one_type(
            ps, edges[pop], {p: frozenset(forbidden[p]) for p in ps}, pop_sizes[pop]
        )
        if result == 0:
            return 0
    return result


def count_distinct_group_choices(group_sizes: Sequence[int],
                                 admissible: Sequence[Sequence[int]]) -> int:
    """Tuples of pairwise-distinct individuals, slot i drawn from its admissible groups.

    Groups are disjoint pools with the given sizes; a tuple may reuse a
    group but never an individual, so g slots landing in one group of
    size s contribute s*(s-1)*...*(s-g+1).
    """
    total = 0
    for combo in iproduct(*admissible):
        used: dict[int, int] = {}
        for g in combo:
            used[g] = used.get(g, 0) + 1
        term = 1
        for g, times in used.items():
            if group_sizes[g] < times:
                term = 0
                break
            term *= falling_factorial(group_sizes[g], times)
        total += term
    return total
