"""Lifted assignment state: counting tables and current contexts.

A counting table records, per value tuple of its columns, how many
undistinguished individuals of one population take those values.  A
column is a PRV shape with exactly one free parameter slot (plain unary
PRVs, or partially ground ones like ``r(A1, x)`` after shattering).
Explicitly mentioned individuals never enter counting tables; their
instances are fully ground atoms carried in the plain assignment map.
"""

from __future__ import annotations

from itertools import permutations
from typing import Iterable, Mapping, Optional, Sequence

from .model import Constant, Parameter, Parfactor, PRV

GroundVar = tuple[str, tuple[str, ...]]
ColumnKey = tuple[str, tuple[Optional[str], ...]]


def classify_prv(prv: PRV):
    """("ground", var) | ("column", pop, key, param) | ("multi", params)."""
    params = prv.params
    if not params:
        return ("ground", prv.ground_key())
    if len(params) == 1:
        p = params[0]
        pattern = tuple(a.name if isinstance(a, Constant) else None for a in prv.args)
        return ("column", p.pop, (prv.functor, pattern), p)
    return ("multi", params)


def column_label(key: ColumnKey) -> str:
    functor, pattern = key
    return f"{functor}({', '.join('_' if a is None else a for a in pattern)})"


def column_sort_key(key: ColumnKey):
    functor, pattern = key
    return (functor, tuple((0, "") if a is None else (1, a) for a in pattern))


class CountingTable:
    """Counts of individuals per value tuple; zero-count rows suppressed."""

    __slots__ = ("columns", "rows")

    def __init__(self, columns: Sequence[ColumnKey], rows: Mapping[tuple[str, ...], int]):
        self.columns = tuple(columns)
        for t, c in rows.items():
            if len(t) != len(self.columns):
                raise ValueError(f"row {t}: width != {len(self.columns)} columns")
            if c < 0:
                raise ValueError(f"row {t}: negative count")
        self.rows = {t: c for t, c in rows.items() if c > 0}

    def total(self) -> int:
        return sum(self.rows.values())

    def column_index(self, key: ColumnKey) -> int:
        return self.columns.index(key)

    def project(self, keep: Sequence[ColumnKey]) -> "CountingTable":
        """Sum out every column not in `keep`, merging rows that agree on `keep`."""
        idx = [self.columns.index(k) for k in keep]
        merged: dict[tuple[str, ...], int] = {}
        for row, count in self.rows.items():
            slim = tuple(row[i] for i in idx)
            merged[slim] = merged.get(slim, 0) + count
        return CountingTable(tuple(keep), merged)

    def canonical(self) -> tuple:
        order = sorted(range(len(self.columns)), key=lambda i: column_sort_key(self.columns[i]))
        cols = tuple(self.columns[i] for i in order)
        rows = tuple(sorted((tuple(row[i] for i in order), count)
                            for row, count in self.rows.items()))
        return (cols, rows)

    def __repr__(self) -> str:
        cols = ", ".join(column_label(c) for c in self.columns)
        return f"CountingTable[{cols}]{self.rows}"


class CurrentContext:
    """Zero-parameter assignments plus at most one counting table per population."""

    __slots__ = ("assignments", "counting")

    def __init__(self, assignments: Optional[Mapping[GroundVar, str]] = None,
                 counting: Optional[Mapping[str, CountingTable]] = None):
        self.assignments: dict[GroundVar, str] = dict(assignments or {})
        self.counting: dict[str, CountingTable] = dict(counting or {})

    def with_assignment(self, var: GroundVar, value: str) -> "CurrentContext":
        out = dict(self.assignments)
        out[var] = value
        return CurrentContext(out, self.counting)

    def with_table(self, pop: str, table: CountingTable) -> "CurrentContext":
        out = dict(self.counting)
        out[pop] = table
        return CurrentContext(self.assignments, out)

    def without_table(self, pop: str) -> "CurrentContext":
        out = dict(self.counting)
        out.pop(pop, None)
        return CurrentContext(self.assignments, out)

    def column_assigned(self, pop: str, key: ColumnKey) -> bool:
        table = self.counting.get(pop)
        return table is not None and key in table.columns

    def is_assigned(self, prv: PRV) -> bool:
        kind = classify_prv(prv)
        if kind[0] == "ground":
            return kind[1] in self.assignments
        if kind[0] == "column":
            return self.column_assigned(kind[1], kind[2])
        return False

    def canonical(self) -> tuple:
        ground = tuple(sorted(self.assignments.items()))
        tables = tuple(sorted((pop, t.canonical()) for pop, t in self.counting.items()))
        return (ground, tables)

    def __repr__(self) -> str:
        return f"CurrentContext({self.assignments}, {self.counting})"


def live_symbols(fs: Sequence[Parfactor]):
    """Ground variables and counting columns still referenced by `fs`."""
    ground: set[GroundVar] = set()
    columns: dict[str, set[ColumnKey]] = {}
    for pf in fs:
        for prv in pf.prvs:
            kind = classify_prv(prv)
            if kind[0] == "ground":
                ground.add(kind[1])
            elif kind[0] == "column":
                columns.setdefault(kind[1], set()).add(kind[2])
    return ground, columns


def forget_irrelevant(con: CurrentContext, fs: Sequence[Parfactor]) -> CurrentContext:
    """Drop context entries no parfactor in `fs` mentions (value-neutral)."""
    ground, columns = live_symbols(fs)
    assignments = {v: val for v, val in con.assignments.items() if v in ground}
    counting: dict[str, CountingTable] = {}
    for pop, table in con.counting.items():
        keep = [c for c in table.columns if c in columns.get(pop, ())]
        if not keep:
            continue
        counting[pop] = table if len(keep) == len(table.columns) else table.project(keep)
    if len(assignments) == len(con.assignments) and counting == con.counting:
        return con
    return CurrentContext(assignments, counting)


def forget_variable(con: CurrentContext, prv: PRV) -> CurrentContext:
    """Sum one assigned PRV out of the context.

    Ground atoms are removed from the assignment map; column PRVs are
    summed out of their counting table, dropping the table when its last
    column goes.
    """
    kind = classify_prv(prv)
    if kind[0] == "ground":
        out = dict(con.assignments)
        out.pop(kind[1], None)
        return CurrentContext(out, con.counting)
    if kind[0] == "column":
        pop, key = kind[1], kind[2]
        table = con.counting.get(pop)
        if table is None or key not in table.columns:
            return con
        keep = [c for c in table.columns if c != key]
        if not keep:
            return con.without_table(pop)
        return con.with_table(pop, table.project(keep))
    raise ValueError(f"cannot forget multi-parameter PRV {prv}")


def parfactor_canonical(pf: Parfactor) -> str:
    """A serialization invariant under parameter renaming and row order."""
    cached = getattr(pf, "_canonical_form", None)
    if cached is not None:
        return cached
    best = None
    for perm in permutations(pf.params):
        names = {p: f"v{i + 1}" for i, p in enumerate(perm)}
        prv_strs = []
        for prv in pf.prvs:
            args = ",".join(names[a] if isinstance(a, Parameter) else a.name for a in prv.args)
            prv_strs.append(f"{prv.functor}({args}):{','.join(prv.rng)}")
        order = sorted(range(len(prv_strs)), key=lambda i: prv_strs[i])
        scope = tuple(prv_strs[i] for i in order)
        rows = tuple(sorted((tuple(row[i] for i in order), str(value))
                            for row, value in pf.table.rows.items()))
        cons = tuple(sorted(
            "!=".join(sorted(names[t] if isinstance(t, Parameter) else t.name for t in (a, b)))
            for a, b in pf.constraints
        ))
        candidate = repr((scope, cons, rows))
        if best is None or candidate < best:
            best = candidate
    pf._canonical_form = best
    return best


def canonical_key(con: CurrentContext, fs: Iterable[Parfactor]) -> tuple:
    """Cache key for (context, parfactor set), stable across renamings."""
    return (con.canonical(), tuple(sorted(parfactor_canonical(pf) for pf in fs)))
