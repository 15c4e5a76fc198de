"""Lifted recursive conditioning over preemptively shattered parfactors.

The engine mirrors the ground search case for case: forget, cache,
evaluate fully assigned parfactors, exploit disconnection, branch.  Two
things are lifted.  Branching on a single-parameter PRV splits the
counts of a counting table instead of enumerating individuals, weighting
each split by its multinomial coefficient.  And when the instances of a
parameter are provably disconnected in the grounding, one generic
connected component is evaluated and raised to the number of copies,
n!/((n-k)! * c), instead of multiplying the copies out.

Branching is only defined for PRVs with zero or one free parameter;
when progress would require branching on anything wider, the engine
raises NotLiftableError rather than silently grounding.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .contexts import (
    ColumnKey,
    CountingTable,
    CurrentContext,
    canonical_key,
    classify_prv,
    column_sort_key,
    forget_irrelevant,
)
from .counting import count_distinct_group_choices
from .ground_engine import RunStats
from .model import Constant, Parameter, Parfactor, Population, PRV, Substitution
from .numbers import NumericMode, compositions, falling_factorial, multinomial

RESERVED_MARK = "$"


class NotLiftableError(RuntimeError):
    """Progress would require branching on a PRV with two or more free parameters."""

    def __init__(self, prv: PRV):
        self.prv = prv
        super().__init__(
            f"cannot branch on {prv}: it has {len(prv.params)} free parameters; "
            "lifted branching handles at most one"
        )


class LiftedInternalError(AssertionError):
    """An internal consistency check of the lifted engine failed."""


@dataclass(frozen=True)
class DisconnectionCertificate:
    """Why one generic component was raised to `exponent`."""

    pop: str
    variables: tuple[str, ...]
    k: int
    copies_per_component: int
    exponent: int
    component_size: int

    def __post_init__(self):
        if self.exponent < 0:
            raise LiftedInternalError("negative disconnection exponent")


class _UnionFind:
    """Union-find over terms; a class may contain at most one constant."""

    def __init__(self):
        self.parent: dict = {}

    def find(self, t):
        path = []
        while t in self.parent:
            path.append(t)
            t = self.parent[t]
        for p in path:
            self.parent[p] = t
        return t

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return True
        if isinstance(ra, Constant) and isinstance(rb, Constant):
            return False
        if isinstance(ra, Constant):
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb
        return True


def _rename_params(pf: Parfactor, tag: str):
    """Fresh copies of pf's parameters plus the renamed PRV arg lists and constraints."""
    mapping = {p: Parameter(f"~{tag}~{p.name}", p.pop) for p in pf.params}

    def ren(t):
        return mapping.get(t, t)

    prvs = [(prv, tuple(ren(a) for a in prv.args)) for prv in pf.prvs]
    constraints = [(ren(a), ren(b)) for a, b in pf.constraints]
    return mapping, prvs, constraints


def _unify_args(args1, args2, constraints) -> Optional[_UnionFind]:
    """Positional unification; None when it fails or violates a constraint."""
    uf = _UnionFind()
    for a, b in zip(args1, args2):
        if not uf.union(a, b):
            return None
    for a, b in constraints:
        if uf.find(a) == uf.find(b):
            return None
    return uf


class LiftedEngine:
    """One evaluation instance: mutable cache and counters, single-threaded."""

    def __init__(self, parfactors: Sequence[Parfactor], populations: Mapping[str, Population],
                 mentioned: Mapping[str, set[str]], mode: NumericMode,
                 cache_enabled: bool = True, forgetting_enabled: bool = True,
                 debug_check_disconnection: bool = False, audit_branches: bool = False):
        self.parfactors = tuple(parfactors)
        self.populations = dict(populations)
        self.mentioned = {pop: set(names) for pop, names in mentioned.items()}
        self.mode = mode
        self.cache_enabled = cache_enabled
        self.forgetting_enabled = forgetting_enabled
        self.debug_check_disconnection = debug_check_disconnection
        self.audit_branches = audit_branches
        self.stats = RunStats()
        self.certificates: list[DisconnectionCertificate] = []
        self.branch_audits: list[tuple[int, int, tuple[int, ...]]] = []
        self._cache: dict = {}

    def evaluate(self, context: Optional[CurrentContext] = None):
        started = time.perf_counter()
        value = self._lrc(context or CurrentContext(), self.parfactors)
        self.stats.wall_ms += (time.perf_counter() - started) * 1000.0
        return value

    # -- main recursion ----------------------------------------------------

    def _lrc(self, con: CurrentContext, fs: tuple[Parfactor, ...]):
        self.stats.calls += 1
        mode = self.mode
        # A parfactor with no constraint-respecting groundings denotes an
        # empty factor set; it contributes an empty product.
        live = tuple(pf for pf in fs if not self._is_empty(pf))
        if len(live) != len(fs):
            fs = live
        if not fs:
            return mode.one()

        # Case 0: forget context entries the remaining parfactors ignore.
        if self.forgetting_enabled:
            con = forget_irrelevant(con, fs)

        key = None
        if self.cache_enabled:
            key = canonical_key(con, fs)
            # Case 1: recall a previously computed value.
            if key in self._cache:
                self.stats.cache_hits += 1
                return self._cache[key]
            self.stats.cache_misses += 1

        # Case 2: multiply out every parfactor whose scope is fully assigned.
        ready = [pf for pf in fs if all(con.is_assigned(prv) for prv in pf.prvs)]
        if ready:
            value = mode.one()
            for pf in ready:
                value = mode.mul(value, self.eval_parfactor(pf, con))
            rest = tuple(pf for pf in fs if pf not in ready)
            value = mode.mul(value, self._lrc(con, rest))
            if key is not None:
                self._cache[key] = value
            return value

        # Case 3a: independent groups of parfactors multiply.
        components = self._parfactor_components(con, fs)
        if len(components) > 1:
            value = mode.one()
            for component in components:
                value = mode.mul(value, self._lrc(con, component))
            if key is not None:
                self._cache[key] = value
            return value

        # Case 3b: a parameter whose instances are disconnected in the grounding.
        disconnect = self._try_disconnect(con, fs)
        if disconnect is not None:
            if key is not None:
                self._cache[key] = disconnect
            return disconnect

        # Case 4: branch on an unassigned PRV.
        value = self._branch_case(con, fs)
        if key is not None:
            self._cache[key] = value
        return value

    def _is_empty(self, pf: Parfactor) -> bool:
        """True when the parfactor's grounding has no instances.

        After shattering, every parameter of a population avoids the same
        constants (all mentioned ones plus any reserved constants in its
        constraints), so the instance count per population is a falling
        factorial that hits zero once the parameter count exceeds the
        available block.
        """
        by_pop: dict[str, int] = {}
        for p in pf.params:
            by_pop[p.pop] = by_pop.get(p.pop, 0) + 1
        if not by_pop:
            return False
        excluded: dict[str, set[str]] = {pop: set(self.mentioned.get(pop, ())) for pop in by_pop}
        for a, b in pf.constraints:
            for t in (a, b):
                if isinstance(t, Constant) and t.pop in excluded:
                    excluded[t.pop].add(t.name)
        for pop, k in by_pop.items():
            if k > self.populations[pop].size - len(excluded[pop]):
                return True
        return False

    # -- case 2: parfactor evaluation ---------------------------------------

    def eval_parfactor(self, pf: Parfactor, con: CurrentContext):
        """Product over table rows of value ** (number of matching groundings).

        A row's power is the exact number of constraint-respecting
        grounding substitutions whose induced instance assignment equals
        the row, computed from the counting tables: same-typed parameters
        draw pairwise-distinct individuals from the rows matching their
        required column values, and independent types multiply.
        """
        mode = self.mode
        ground_req: list[tuple[int, tuple]] = []
        column_req: dict[Parameter, list[tuple[int, ColumnKey]]] = {}
        for i, prv in enumerate(pf.prvs):
            kind = classify_prv(prv)
            if kind[0] == "ground":
                if kind[1] not in con.assignments:
                    raise LiftedInternalError(f"evaluating {pf!r} with unassigned {prv}")
                ground_req.append((i, kind[1]))
            elif kind[0] == "column":
                if not con.column_assigned(kind[1], kind[2]):
                    raise LiftedInternalError(f"evaluating {pf!r} with unassigned {prv}")
                column_req.setdefault(kind[3], []).append((i, kind[2]))
            else:
                raise LiftedInternalError(f"evaluating {pf!r} with multi-parameter {prv}")

        by_pop: dict[str, list[Parameter]] = {}
        for p in pf.params:
            by_pop.setdefault(p.pop, []).append(p)

        result = mode.one()
        for row, potential in pf.table.rows.items():
            if any(con.assignments[var] != row[i] for i, var in ground_req):
                continue
            power = 1
            for pop, params in by_pop.items():
                table = con.counting[pop]
                rows = list(table.rows.items())
                sizes = [count for _, count in rows]
                admissible = []
                for p in params:
                    needs = [(table.column_index(colkey), row[i]) for i, colkey in column_req[p]]
                    admissible.append([
                        g for g, (values, _) in enumerate(rows)
                        if all(values[ci] == v for ci, v in needs)
                    ])
                power *= count_distinct_group_choices(sizes, admissible)
                if power == 0:
                    break
            if power == 0:
                continue
            result = mode.mul(result, mode.power(mode.from_fraction(potential), power))
        return result

    # -- case 3a: parfactor graph components --------------------------------

    def _unassigned(self, pf: Parfactor, con: CurrentContext) -> list[PRV]:
        return [prv for prv in pf.prvs if not con.is_assigned(prv)]

    def _parfactor_components(self, con: CurrentContext,
                              fs: tuple[Parfactor, ...]) -> list[tuple[Parfactor, ...]]:
        n = len(fs)
        renamed = []
        for i, pf in enumerate(fs):
            _, prvs, constraints = _rename_params(pf, str(i))
            live = [(prv, args) for prv, args in prvs if not con.is_assigned(prv)]
            renamed.append((live, constraints))
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(n):
            for j in range(i + 1, n):
                if find(i) == find(j):
                    continue
                if self._linked(renamed[i], renamed[j]):
                    parent[find(i)] = find(j)
        groups: dict[int, list[Parfactor]] = {}
        for i in range(n):
            groups.setdefault(find(i), []).append(fs[i])
        return [tuple(g) for g in groups.values()]

    @staticmethod
    def _linked(a, b) -> bool:
        live_a, cons_a = a
        live_b, cons_b = b
        for prv_a, args_a in live_a:
            for prv_b, args_b in live_b:
                if prv_a.functor != prv_b.functor or len(args_a) != len(args_b):
                    continue
                if _unify_args(args_a, args_b, cons_a + cons_b) is not None:
                    return True
        return False

    # -- case 3b: disconnection ---------------------------------------------

    def _connected(self, x: Parameter, pf_index: int, con: CurrentContext,
                   fs: tuple[Parfactor, ...], memo: dict, visiting: set) -> bool:
        """Soundly detect that x's instances are linked in the grounding.

        True when some co-occurring unassigned PRV skips x, or when a
        unification chain carries x into a parameter that is connected.
        False can still mean pairwise-linked instances when every
        variable sits in every PRV; the disconnection step's copy count
        `c` absorbs exactly that pattern.
        """
        key = (pf_index, x)
        if key in memo:
            return memo[key]
        if key in visiting:
            return False  # a cycle proves nothing on this path
        visiting.add(key)
        try:
            pf = fs[pf_index]
            unassigned = self._unassigned(pf, con)
            if any(x not in prv.params for prv in unassigned):
                memo[key] = True
                return True
            own_constraints = list(pf.constraints)
            for qi, q in enumerate(fs):
                back, q_prvs, q_constraints = _rename_params(q, str(qi))
                inverse = {ren: orig for orig, ren in back.items()}
                q_live = [(prv, args) for prv, args in q_prvs if not con.is_assigned(prv)]
                for prv in unassigned:
                    if x not in prv.params:
                        continue
                    for q_prv, q_args in q_live:
                        if q_prv.functor != prv.functor or len(q_args) != len(prv.args):
                            continue
                        uf = _unify_args(prv.args, q_args, own_constraints + q_constraints)
                        if uf is None:
                            continue
                        rep = uf.find(x)
                        if isinstance(rep, Constant):
                            continue
                        for renamed, orig in inverse.items():
                            if uf.find(renamed) == rep:
                                if self._connected(orig, qi, con, fs, memo, visiting):
                                    memo[key] = True
                                    return True
            return False
        finally:
            visiting.discard(key)

    def _reserved_in(self, fs: Iterable[Parfactor], pop: str) -> set[str]:
        names: set[str] = set()
        for pf in fs:
            for c in pf.constants():
                if c.pop == pop and c.name.startswith(RESERVED_MARK):
                    names.add(c.name)
        return names

    def effective_size(self, pop: str, fs: Iterable[Parfactor]) -> int:
        """Block size the counting tables cover: population minus mentioned
        constants minus reserved constants currently in play."""
        return (self.populations[pop].size
                - len(self.mentioned.get(pop, ()))
                - len(self._reserved_in(fs, pop)))

    def _fresh_reserved(self, pop: str, fs: Iterable[Parfactor], k: int) -> list[Constant]:
        used = set()
        for name in self._reserved_in(fs, pop):
            try:
                used.add(int(name.rsplit(RESERVED_MARK, 1)[1]))
            except ValueError:
                pass
        start = (max(used) + 1) if used else 1
        return [Constant(f"{RESERVED_MARK}{pop}{RESERVED_MARK}{start + i}", pop) for i in range(k)]

    def _try_disconnect(self, con: CurrentContext, fs: tuple[Parfactor, ...]):
        # The closure below relies on stale counting columns being gone,
        # so relevance forgetting is applied here even when the eager
        # per-call forgetting is disabled (it never changes the value).
        con = forget_irrelevant(con, fs)
        memo: dict = {}
        for pf_index, pf in enumerate(fs):
            by_pop: dict[str, list[Parameter]] = {}
            for p in pf.params:
                by_pop.setdefault(p.pop, []).append(p)
            for pop, params in by_pop.items():
                loose = [p for p in params
                         if not self._connected(p, pf_index, con, fs, memo, set())]
                if not loose:
                    continue
                result = self._disconnect(con, fs, pf_index, pop, tuple(loose))
                if result is not None:
                    return result
        return None

    def _instance_signatures(self, pf: Parfactor, con: CurrentContext) -> frozenset:
        """Atom shapes of the unassigned PRVs; free parameters render as '*'.

        Two instance families share ground atoms exactly when they share a
        signature: every '*' slot excludes all mentioned and reserved
        constants (shattering plus the explicit inequalities added when
        instances are formed), so a '*' never overlaps a named slot.
        """
        signatures = []
        for prv in pf.prvs:
            if con.is_assigned(prv):
                continue
            signatures.append(
                (prv.functor,
                 tuple(a.name if isinstance(a, Constant) else "*" for a in prv.args)))
        return frozenset(signatures)

    def _disconnect(self, con: CurrentContext, fs: tuple[Parfactor, ...],
                    pf_index: int, pop: str, loose: tuple[Parameter, ...]):
        """Evaluate one generic connected component and raise it to its copy count.

        Returns None when the state does not support a sound
        exponentiation (the branching cases still apply then).
        """
        # Exponentiation assumes the component copies are exchangeable; a
        # counting column reaching into any parfactor breaks that (the
        # copies would see different per-individual values), so fall back
        # to branching in that case.
        for q in fs:
            for prv in q.prvs:
                kind = classify_prv(prv)
                if kind[0] == "column" and con.column_assigned(kind[1], kind[2]):
                    return None

        k = len(loose)
        n_eff = self.effective_size(pop, fs)
        reserved = self._fresh_reserved(pop, fs, k)
        reserved_terms = list(reserved)

        def instances_of(q: Parfactor):
            """All ways to pin a subset of q's pop-parameters to the fresh
            constants; unpinned pop-parameters get explicit inequalities
            against every fresh constant so the instance families partition
            q's grounding."""
            pop_params = [p for p in q.params if p.pop == pop]
            out = []
            for assignment in _partial_injections(pop_params, reserved_terms):
                sub = Substitution(dict(assignment))
                inst = q.substitute(sub)
                if inst is None:
                    continue
                extra = []
                for w in inst.params:
                    if w.pop != pop:
                        continue
                    for r in reserved_terms:
                        if not inst.constraints.forbids(w, r):
                            extra.append((w, r))
                if extra:
                    constraints = inst.constraints
                    for a, b in extra:
                        constraints = constraints.with_pair(a, b)
                    inst = Parfactor(constraints, inst.prvs, inst.table)
                out.append((frozenset(assignment), inst))
            return out

        members: list[tuple[int, frozenset, Parfactor, frozenset]] = []
        for qi, q in enumerate(fs):
            for assignment, inst in instances_of(q):
                members.append((qi, assignment, inst, self._instance_signatures(inst, con)))

        seed_assignment = frozenset(zip(loose, reserved_terms))
        seed_pos = next((i for i, (qi, a, _, _) in enumerate(members)
                         if qi == pf_index and a == seed_assignment), None)
        if seed_pos is None:
            return None

        # Connected component of the seed in the instance graph (arc =
        # a shared unassigned atom signature).
        in_component = {seed_pos}
        frontier = [seed_pos]
        while frontier:
            i = frontier.pop()
            for j, (_, _, _, sigs) in enumerate(members):
                if j in in_component or not (members[i][3] & sigs):
                    continue
                in_component.add(j)
                frontier.append(j)

        component = sorted(in_component)
        covered = {members[i][0] for i in component}
        if covered != set(range(len(fs))):
            return None  # the component does not absorb every parfactor
        copies = 0
        for i in component:
            qi, assignment, _, _ = members[i]
            if qi == pf_index:
                bound = {p for p, _ in assignment}
                if not set(loose) <= bound:
                    return None  # a partial copy of the pivot breaks the count
                copies += 1
        if copies == 0:
            return None

        total = falling_factorial(n_eff, k) if k <= n_eff else 0
        exponent, remainder = divmod(total, copies)
        if remainder:
            raise LiftedInternalError(
                f"copy count {copies} does not divide {total} instance tuples")

        generic = tuple(members[i][2] for i in component)
        certificate = DisconnectionCertificate(
            pop=pop, variables=tuple(p.name for p in loose), k=k,
            copies_per_component=copies, exponent=exponent,
            component_size=len(component))
        self.certificates.append(certificate)
        self.stats.case3_events += 1
        if self.debug_check_disconnection:
            self._check_disconnection(con, fs, pf_index, pop, k, copies)
        if exponent == 0:
            return self.mode.one()
        value = self._lrc(con, generic)
        return self.mode.power(value, exponent)

    def _check_disconnection(self, con: CurrentContext, fs, pf_index: int,
                             pop: str, k: int, copies: int) -> None:
        """Reground at a small surrogate population and verify the component shape.

        Every unassigned-variable component must touch at most k block
        individuals of `pop`, and the components containing instances of
        the pivot parfactor must number exactly (k+2)!/2!/copies.
        """
        from .model import apply_substitution, grounding_substitutions

        block = k + 2
        surrogate: dict[str, Population] = {}
        for name in self.populations:
            extras = sorted({c.name for pf in fs for c in pf.constants() if c.pop == name})
            fresh = block if name == pop else 2
            inds = tuple(extras) + tuple(f"!{name}{i}" for i in range(1, fresh + 1))
            surrogate[name] = Population(name, len(inds), inds)
        factors: list[tuple[int, int, tuple]] = []  # (uid, source index, scope)
        uid = 0
        for i, pf in enumerate(fs):
            for theta in grounding_substitutions(pf.params, pf.constraints, surrogate):
                scope = tuple(apply_substitution(prv, theta).ground_key() for prv in pf.prvs)
                factors.append((uid, i, scope))
                uid += 1
        assigned = set(con.assignments)
        parent = list(range(uid))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        by_var: dict = {}
        for fid, _, scope in factors:
            for v in scope:
                if v not in assigned:
                    by_var.setdefault(v, []).append(fid)
        for uids in by_var.values():
            for other in uids[1:]:
                ra, rb = find(uids[0]), find(other)
                if ra != rb:
                    parent[ra] = rb
        block_names = {ind for ind in surrogate[pop].individuals if ind.startswith("!")}
        touched: dict[int, set[str]] = {}
        pivot_roots: set[int] = set()
        for fid, source, scope in factors:
            root = find(fid)
            names = touched.setdefault(root, set())
            for _, args in scope:
                names.update(a for a in args if a in block_names)
            if source == pf_index:
                pivot_roots.add(root)
        for names in touched.values():
            if len(names) > k:
                raise LiftedInternalError(
                    f"surrogate component touches {len(names)} block individuals, "
                    f"expected at most {k}")
        expected = falling_factorial(block, k) // copies
        if len(pivot_roots) != expected:
            raise LiftedInternalError(
                f"surrogate grounding has {len(pivot_roots)} pivot components, "
                f"expected {expected}")

    # -- case 4: branching ---------------------------------------------------

    def _branch_case(self, con: CurrentContext, fs: tuple[Parfactor, ...]):
        ground_cands: dict = {}
        column_cands: dict = {}
        blocked: Optional[PRV] = None
        for pf in fs:
            seen_cols = set()
            for prv in pf.prvs:
                kind = classify_prv(prv)
                if kind[0] == "ground":
                    if kind[1] not in con.assignments:
                        ground_cands.setdefault(kind[1], prv.rng)
                elif kind[0] == "column":
                    pop, colkey = kind[1], kind[2]
                    if not con.column_assigned(pop, colkey) and (pop, colkey) not in seen_cols:
                        seen_cols.add((pop, colkey))
                        entry = column_cands.setdefault((pop, colkey), [prv.rng, 0])
                        entry[1] += 1
                else:
                    blocked = blocked or prv
        if ground_cands:
            var = min(ground_cands)
            rng = ground_cands[var]
            total = self.mode.zero()
            for v in rng:
                self.stats.branches += 1
                total = self.mode.add(total, self._lrc(con.with_assignment(var, v), fs))
            return total
        if column_cands:
            (pop, colkey), (rng, _) = sorted(
                column_cands.items(),
                key=lambda kv: (-kv[1][1], kv[0][0], column_sort_key(kv[0][1])))[0]
            table = con.counting.get(pop)
            if table is None:
                n_eff = self.effective_size(pop, fs)
                table = CountingTable((), {(): n_eff} if n_eff > 0 else {})
            base = con.without_table(pop)
            return self._counting_branch(
                list(table.rows.items()), rng, {}, base, fs, pop,
                table.columns + (colkey,))
        if blocked is None:
            raise LiftedInternalError("no PRV to branch on in a non-empty parfactor set")
        raise NotLiftableError(blocked)

    def _counting_branch(self, remaining, rng: tuple[str, ...], acc_rows: dict,
                         base: CurrentContext, fs, pop: str, columns):
        """Split each count across the new column's values, one row at a time."""
        mode = self.mode
        if not remaining:
            table = CountingTable(columns, acc_rows)
            return self._lrc(base.with_table(pop, table), fs)
        (values, count), rest = remaining[0], remaining[1:]
        total = mode.zero()
        multipliers = []
        for parts in compositions(count, len(rng)):
            weight = multinomial(count, parts)
            multipliers.append(weight)
            rows = dict(acc_rows)
            for v, c in zip(rng, parts):
                if c > 0:
                    rows[values + (v,)] = c
            self.stats.branches += 1
            child = self._counting_branch(rest, rng, rows, base, fs, pop, columns)
            total = mode.add(total, mode.mul(mode.from_int(weight), child))
        if self.audit_branches:
            self.branch_audits.append((count, len(rng), tuple(multipliers)))
        return total


def _partial_injections(params: Sequence[Parameter], constants: Sequence[Constant]):
    """Every map of a subset of `params` injectively into `constants`."""
    out: list[list[tuple[Parameter, Constant]]] = [[]]
    for p in params:
        extended = []
        for partial in out:
            extended.append(partial)
            used = {c for _, c in partial}
            for c in constants:
                if c not in used:
                    extended.append(partial + [(p, c)])
        out = extended
    return [tuple(items) for items in out]
