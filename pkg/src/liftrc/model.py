"""Symbolic core: populations, parametrized random variables, parfactors.

Everything here is immutable after construction; engines share model
values freely.  Inequality is the only constraint form: a parfactor is a
constraint set, a tuple of PRVs, and a potential table over their ranges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union


class ModelError(ValueError):
    """A structurally invalid model element."""


@dataclass(frozen=True)
class Population:
    """A named finite domain of individuals.

    Individuals are auto-named ``<name>1 .. <name>N``; an optional alias
    list renames a prefix of them (aliases must be unique model-wide).
    """

    name: str
    size: int
    individuals: tuple[str, ...] = ()

    def __post_init__(self):
        if self.size < 0:
            raise ModelError(f"population {self.name}: negative size")
        if not self.individuals:
            object.__setattr__(
                self, "individuals", tuple(f"{self.name}{i}" for i in range(1, self.size + 1))
            )
        if len(self.individuals) != self.size:
            raise ModelError(f"population {self.name}: {self.size} != {len(self.individuals)} individuals")
        if len(set(self.individuals)) != self.size:
            raise ModelError(f"population {self.name}: duplicate individual names")


@dataclass(frozen=True, order=True)
class Parameter:
    """A typed logical variable, local to one parfactor."""

    name: str
    pop: str


@dataclass(frozen=True, order=True)
class Constant:
    """A named individual of a population."""

    name: str
    pop: str


Term = Union[Parameter, Constant]


def is_param(t: Term) -> bool:
    return isinstance(t, Parameter)


@dataclass(frozen=True)
class PRV:
    """A parametrized random variable: functor applied to terms.

    `rng` is the finite list of values every instance of the functor can
    take.  A PRV with constant-only arguments denotes a single ground
    random variable.
    """

    functor: str
    args: tuple[Term, ...]
    rng: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.rng)) != len(self.rng) or not self.rng:
            raise ModelError(f"{self.functor}: range must be a non-empty list of distinct values")

    @property
    def params(self) -> tuple[Parameter, ...]:
        seen: dict[Parameter, None] = {}
        for a in self.args:
            if isinstance(a, Parameter):
                seen.setdefault(a, None)
        return tuple(seen)

    def is_ground(self) -> bool:
        return all(isinstance(a, Constant) for a in self.args)

    def ground_key(self) -> tuple[str, tuple[str, ...]]:
        if not self.is_ground():
            raise ModelError(f"{self} is not ground")
        return (self.functor, tuple(a.name for a in self.args))

    def __str__(self) -> str:
        return f"{self.functor}({', '.join(a.name for a in self.args)})"


class Substitution:
    """A finite map from parameters to same-typed terms."""

    def __init__(self, bindings: Mapping[Parameter, Term]):
        for p, t in bindings.items():
            if not isinstance(p, Parameter):
                raise ModelError(f"substitution binds non-parameter {p}")
            if p.pop != t.pop:
                raise ModelError(f"substitution {p.name}/{t.name}: type {t.pop} != {p.pop}")
        self._bindings = dict(bindings)

    @property
    def bindings(self) -> Mapping[Parameter, Term]:
        return dict(self._bindings)

    def __len__(self) -> int:
        return len(self._bindings)

    def resolve(self, t: Term) -> Term:
        if isinstance(t, Parameter):
            return self._bindings.get(t, t)
        return t

    def grounds(self, prv: PRV) -> bool:
        return all(isinstance(self.resolve(a), Constant) for a in prv.args)

    def __repr__(self) -> str:
        inner = ", ".join(f"{p.name}/{t.name}" for p, t in self._bindings.items())
        return "{" + inner + "}"


def apply_substitution(prv: PRV, theta: Substitution) -> PRV:
    """Replace every bound parameter of `prv`; unbound parameters stay."""
    return PRV(prv.functor, tuple(theta.resolve(a) for a in prv.args), prv.rng)


class ContradictionError(ModelError):
    """A constraint t != t arose; the constrained object denotes nothing."""


class ConstraintSet:
    """A set of unordered same-typed inequality pairs.

    Pairs between two distinct constants are dropped (trivially true);
    a pair (t, t) raises ContradictionError.
    """

    def __init__(self, pairs: Iterable[tuple[Term, Term]] = ()):
        kept: set[frozenset] = set()
        for a, b in pairs:
            if a.pop != b.pop:
                raise ModelError(f"inequality {a.name} != {b.name}: mismatched types")
            if a == b:
                raise ContradictionError(f"contradictory constraint {a.name} != {b.name}")
            if isinstance(a, Constant) and isinstance(b, Constant):
                continue  # distinct constants: trivially satisfied
            kept.add(frozenset((a, b)))
        self._pairs = frozenset(kept)

    @property
    def pairs(self) -> frozenset:
        return self._pairs

    def __iter__(self):
        for pair in self._pairs:
            a, b = sorted(pair, key=lambda t: (t.__class__.__name__, t.name))
            yield (a, b)

    def __len__(self) -> int:
        return len(self._pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConstraintSet) and self._pairs == other._pairs

    def __hash__(self) -> int:
        return hash(self._pairs)

    def forbids(self, a: Term, b: Term) -> bool:
        return frozenset((a, b)) in self._pairs

    def with_pair(self, a: Term, b: Term) -> "ConstraintSet":
        return ConstraintSet(list(self) + [(a, b)])

    def substitute(self, theta: Substitution) -> "ConstraintSet":
        """Apply a substitution; raises ContradictionError if a pair collapses."""
        return ConstraintSet([(theta.resolve(a), theta.resolve(b)) for a, b in self])

    def satisfied_by(self, theta: Substitution) -> bool:
        return all(theta.resolve(a) != theta.resolve(b) for a, b in self)

    def __repr__(self) -> str:
        return "{" + ", ".join(f"{a.name} != {b.name}" for a, b in sorted(
            self, key=lambda ab: (ab[0].name, ab[1].name))) + "}"


class FactorTable:
    """A complete potential table over the scope's value tuples."""

    def __init__(self, scope: Sequence[PRV], values: Mapping[tuple[str, ...], Fraction]):
        self.scope = tuple(scope)
        expected = 1
        for prv in self.scope:
            expected *= len(prv.rng)
        if len(values) != expected:
            raise ModelError(f"table has {len(values)} rows, expected {expected}")
        for row, value in values.items():
            if len(row) != len(self.scope):
                raise ModelError(f"row {row}: wrong width")
            for v, prv in zip(row, self.scope):
                if v not in prv.rng:
                    raise ModelError(f"row {row}: {v!r} not in range of {prv.functor}")
            if value < 0:
                raise ModelError(f"row {row}: negative potential {value}")
        self._values = dict(values)

    @property
    def rows(self) -> Mapping[tuple[str, ...], Fraction]:
        return self._values

    def lookup(self, row: tuple[str, ...]) -> Fraction:
        return self._values[row]

    def with_scope(self, scope: Sequence[PRV]) -> "FactorTable":
        return FactorTable(scope, self._values)


class Parfactor:
    """Inequality constraints + PRV scope + shared potential table."""

    def __init__(self, constraints: ConstraintSet, prvs: Sequence[PRV], table: FactorTable):
        self.constraints = constraints
        self.prvs = tuple(prvs)
        if len(set(self.prvs)) != len(self.prvs):
            raise ModelError("duplicate PRV in parfactor scope")
        if table.scope != self.prvs:
            table = table.with_scope(self.prvs)
        self.table = table
        scope_params = set(self.params)
        for a, b in constraints:
            for t in (a, b):
                if isinstance(t, Parameter) and t not in scope_params:
                    raise ModelError(f"constraint mentions {t.name}, absent from the scope")

    @property
    def params(self) -> tuple[Parameter, ...]:
        seen: dict[Parameter, None] = {}
        for prv in self.prvs:
            for p in prv.params:
                seen.setdefault(p, None)
        return tuple(seen)

    def constants(self) -> set[Constant]:
        out = {a for prv in self.prvs for a in prv.args if isinstance(a, Constant)}
        for a, b in self.constraints:
            out.update(t for t in (a, b) if isinstance(t, Constant))
        return out

    def substitute(self, theta: Substitution) -> Optional["Parfactor"]:
        """Apply theta; None when the substituted constraints are contradictory."""
        try:
            constraints = self.constraints.substitute(theta)
        except ContradictionError:
            return None
        prvs = tuple(apply_substitution(prv, theta) for prv in self.prvs)
        if len(set(prvs)) != len(prvs):
            # Two scope PRVs collapsed onto one ground variable; such a
            # substitution is rejected rather than merged.
            return None
        return Parfactor(constraints, prvs, self.table.with_scope(prvs))

    def rename_params(self, prefix: str = "x") -> "Parfactor":
        """Canonically rename parameters to prefix1, prefix2, ... in scope order."""
        mapping = {p: Parameter(f"{prefix}{i + 1}", p.pop) for i, p in enumerate(self.params)}
        sub = Substitution(mapping)
        out = self.substitute(sub)
        assert out is not None
        return out

    def __repr__(self) -> str:
        return f"<{self.constraints!r}, ({', '.join(map(str, self.prvs))})>"


@dataclass(frozen=True)
class FunctorDecl:
    name: str
    arg_pops: tuple[str, ...]
    rng: tuple[str, ...]


@dataclass
class Model:
    """A parsed model: populations, functor declarations, parfactors, evidence."""

    populations: dict[str, Population] = field(default_factory=dict)
    ranges: dict[str, tuple[str, ...]] = field(default_factory=dict)
    functors: dict[str, FunctorDecl] = field(default_factory=dict)
    parfactors: list[Parfactor] = field(default_factory=list)
    observations: dict[PRV, str] = field(default_factory=dict)
    queries: list[PRV] = field(default_factory=list)

    def individual_pop(self, name: str) -> Optional[str]:
        for pop in self.populations.values():
            if name in pop.individuals:
                return pop.name
        return None

    def mentioned_constants(self, extra_atoms: Iterable[PRV] = ()) -> dict[str, set[str]]:
        """Explicitly mentioned constants per population (parfactors, observations, queries)."""
        out: dict[str, set[str]] = {name: set() for name in self.populations}
        def note(c: Constant):
            out.setdefault(c.pop, set()).add(c.name)
        for pf in self.parfactors:
            for c in pf.constants():
                note(c)
        for atom in list(self.observations) + list(self.queries) + list(extra_atoms):
            for a in atom.args:
                if isinstance(a, Constant):
                    note(a)
        return out


def validate_model(model: Model) -> None:
    """Raise ModelError on any structural defect."""
    if not model.populations:
        raise ModelError("no populations declared")
    names: set[str] = set()
    for pop in model.populations.values():
        for ind in pop.individuals:
            if ind in names:
                raise ModelError(f"individual name {ind} reused across populations")
            names.add(ind)
    for decl in model.functors.values():
        for p in decl.arg_pops:
            if p not in model.populations:
                raise ModelError(f"functor {decl.name}: unknown population {p}")
    for pf in model.parfactors:
        for prv in pf.prvs:
            decl = model.functors.get(prv.functor)
            if decl is None:
                raise ModelError(f"undeclared functor {prv.functor}")
            if tuple(a.pop for a in prv.args) != decl.arg_pops:
                raise ModelError(f"{prv}: argument types do not match declaration")
            if prv.rng != decl.rng:
                raise ModelError(f"{prv}: range does not match declaration")
            for a in prv.args:
                if isinstance(a, Constant) and a.name not in model.populations[a.pop].individuals:
                    raise ModelError(f"unknown constant {a.name} of {a.pop}")
    for atom, value in model.observations.items():
        if not atom.is_ground():
            raise ModelError(f"observation {atom} is not ground")
        if value not in atom.rng:
            raise ModelError(f"observation {atom} = {value}: value outside range")
    for atom in model.queries:
        if not atom.is_ground():
            raise ModelError(f"query {atom} is not ground")
        if atom in model.observations:
            raise ModelError(f"query {atom} is already observed")


def grounding_substitutions(params: Sequence[Parameter], constraints: ConstraintSet,
                            populations: Mapping[str, Population]) -> Iterator:
    """Yield every constraint-respecting grounding substitution of `params`."""
    domains = []
    for p in params:
        pop = populations[p.pop]
        domains.append([Constant(ind, pop.name) for ind in pop.individuals])
    for combo in iproduct(*domains):
        theta = Substitution(dict(zip(params, combo)))
        if constraints.satisfied_by(theta):
            yield theta
