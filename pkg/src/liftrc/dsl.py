"""The model description language: parser and pretty-printer.

Line-oriented, `#` comments anywhere, rationals kept exact:

    population person 5
    range tri { lo mid hi }          # bool {true false} is predeclared
    prv q(person)                    # defaults to bool
    prv r(person, person) : bool
    parfactor [x:person, y:person] where x != y on q(x), r(x,y) {
        true true -> 9/10   true false -> 1/10
        false true -> 2/5   false false -> 3/5
    }
    observe r(person1, person2) = true
    query q(person1)

Parameters are canonically renamed x1, x2, ... per parfactor on
ingestion, so pretty-printing a parsed model and re-parsing it gives a
structurally identical model.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Optional

from .model import (
    Constant,
    ConstraintSet,
    FactorTable,
    FunctorDecl,
    Model,
    ModelError,
    Parameter,
    Parfactor,
    Population,
    PRV,
    Term,
    validate_model,
)

BOOL_RANGE = ("true", "false")


class ModelSyntaxError(ValueError):
    """A parse or model-level diagnostic with source position."""

    def __init__(self, message: str, line: int, col: int):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>\#[^\n]*)
      | (?P<decimal>\d+\.\d+)
      | (?P<int>\d+)
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<arrow>->)
      | (?P<neq>!=)
      | (?P<sym>[()\[\]{},:=/])
    """,
    re.VERBOSE,
)


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ModelSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        raw = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, raw, line, col))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            col = len(raw) - raw.rfind("\n")
        else:
            col += len(raw)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.model = Model(ranges={"bool": BOOL_RANGE})

    # -- token helpers ----------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: Optional[_Token] = None):
        tok = tok or self.peek()
        raise ModelSyntaxError(message, tok.line, tok.col)

    def expect(self, kind: str, text: Optional[str] = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            self.fail(f"expected {want!r}, found {tok.text!r}" if tok.text else
                      f"expected {want!r}, found end of input")
        return self.next()

    def expect_name(self, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != "name":
            self.fail(f"expected {what}, found {tok.text!r}" if tok.text else
                      f"expected {what}, found end of input")
        return self.next()

    # -- grammar ----------------------------------------------------------

    def parse(self) -> Model:
        while self.peek().kind != "eof":
            tok = self.expect_name("a statement keyword")
            handler = {
                "population": self._population,
                "range": self._range,
                "prv": self._prv,
                "parfactor": self._parfactor,
                "observe": self._observe,
                "query": self._query,
            }.get(tok.text)
            if handler is None:
                self.fail(f"unknown statement {tok.text!r}", tok)
            handler(tok)
        if not self.model.populations:
            raise ModelSyntaxError("no populations declared", 1, 1)
        try:
            validate_model(self.model)
        except ModelError as exc:
            raise ModelSyntaxError(str(exc), 1, 1) from exc
        return self.model

    def _population(self, kw: _Token):
        name = self.expect_name("a population name")
        if name.text in self.model.populations:
            self.fail(f"duplicate population {name.text!r}", name)
        size_tok = self.expect("int")
        size = int(size_tok.text)
        aliases: list[str] = []
        if self.peek().kind == "sym" and self.peek().text == "{":
            self.next()
            while self.peek().kind == "name":
                aliases.append(self.next().text)
            self.expect("sym", "}")
        if len(aliases) > size:
            self.fail(f"{len(aliases)} aliases for population of size {size}", name)
        individuals = tuple(aliases) + tuple(
            f"{name.text}{i}" for i in range(len(aliases) + 1, size + 1))
        try:
            self.model.populations[name.text] = Population(name.text, size, individuals)
        except ModelError as exc:
            self.fail(str(exc), name)

    def _range(self, kw: _Token):
        name = self.expect_name("a range name")
        if name.text in self.model.ranges and name.text != "bool":
            self.fail(f"duplicate range {name.text!r}", name)
        self.expect("sym", "{")
        values: list[str] = []
        while self.peek().kind in ("name", "int"):
            values.append(self.next().text)
        self.expect("sym", "}")
        if not values:
            self.fail("empty range", name)
        if len(set(values)) != len(values):
            self.fail(f"duplicate values in range {name.text!r}", name)
        self.model.ranges[name.text] = tuple(values)

    def _prv(self, kw: _Token):
        name = self.expect_name("a functor name")
        if name.text in self.model.functors:
            self.fail(f"duplicate functor {name.text!r}", name)
        self.expect("sym", "(")
        pops: list[str] = []
        while self.peek().kind == "name":
            pop = self.next()
            if pop.text not in self.model.populations:
                self.fail(f"unknown population {pop.text!r}", pop)
            pops.append(pop.text)
            if self.peek().text == ",":
                self.next()
        self.expect("sym", ")")
        rng = BOOL_RANGE
        if self.peek().text == ":":
            self.next()
            rng_tok = self.expect_name("a range name")
            if rng_tok.text not in self.model.ranges:
                self.fail(f"unknown range {rng_tok.text!r}", rng_tok)
            rng = self.model.ranges[rng_tok.text]
        self.model.functors[name.text] = FunctorDecl(name.text, tuple(pops), rng)

    def _term(self, params: dict[str, Parameter], expected_pop: str, tok: _Token) -> Term:
        if tok.text in params:
            p = params[tok.text]
            if p.pop != expected_pop:
                self.fail(f"parameter {tok.text} has type {p.pop}, expected {expected_pop}", tok)
            return p
        pop = self.model.individual_pop(tok.text)
        if pop is None:
            self.fail(f"unknown constant or parameter {tok.text!r}", tok)
        if pop != expected_pop:
            self.fail(f"{tok.text} belongs to {pop}, expected {expected_pop}", tok)
        return Constant(tok.text, pop)

    def _atom(self, params: dict[str, Parameter]) -> PRV:
        name = self.expect_name("a functor name")
        decl = self.model.functors.get(name.text)
        if decl is None:
            self.fail(f"undeclared functor {name.text!r}", name)
        self.expect("sym", "(")
        args: list[Term] = []
        while self.peek().kind == "name":
            tok = self.next()
            if len(args) >= len(decl.arg_pops):
                self.fail(f"{name.text} takes {len(decl.arg_pops)} arguments", tok)
            args.append(self._term(params, decl.arg_pops[len(args)], tok))
            if self.peek().text == ",":
                self.next()
        close = self.expect("sym", ")")
        if len(args) != len(decl.arg_pops):
            self.fail(f"{name.text} takes {len(decl.arg_pops)} arguments, got {len(args)}", close)
        return PRV(name.text, tuple(args), decl.rng)

    def _parfactor(self, kw: _Token):
        self.expect("sym", "[")
        params: dict[str, Parameter] = {}
        while self.peek().kind == "name":
            pname = self.next()
            if pname.text in params:
                self.fail(f"duplicate parameter {pname.text!r}", pname)
            if self.model.individual_pop(pname.text):
                self.fail(f"parameter {pname.text!r} shadows an individual", pname)
            self.expect("sym", ":")
            pop = self.expect_name("a population name")
            if pop.text not in self.model.populations:
                self.fail(f"unknown population {pop.text!r}", pop)
            params[pname.text] = Parameter(pname.text, pop.text)
            if self.peek().text == ",":
                self.next()
        self.expect("sym", "]")

        pairs: list[tuple[Term, Term]] = []
        if self.peek().kind == "name" and self.peek().text == "where":
            self.next()
            while True:
                left = self.expect_name("a term")
                lhs = self._where_term(params, left)
                self.expect("neq")
                right = self.expect_name("a term")
                rhs = self._where_term(params, right)
                if lhs.pop != rhs.pop:
                    self.fail(f"{left.text} and {right.text} have different types", right)
                if lhs == rhs:
                    self.fail(f"constraint {left.text} != {right.text} is contradictory", right)
                pairs.append((lhs, rhs))
                if self.peek().text == ",":
                    self.next()
                    continue
                break

        on = self.expect_name("'on'")
        if on.text != "on":
            self.fail(f"expected 'on', found {on.text!r}", on)
        atoms = [self._atom(params)]
        while self.peek().text == ",":
            self.next()
            atoms.append(self._atom(params))
        if len(set(atoms)) != len(atoms):
            self.fail("duplicate PRV in parfactor scope", on)

        open_brace = self.expect("sym", "{")
        rows: dict[tuple[str, ...], Fraction] = {}
        while self.peek().kind in ("name", "int"):
            row: list[str] = []
            for atom in atoms:
                tok = self.peek()
                if tok.kind not in ("name", "int"):
                    self.fail("incomplete table row", tok)
                tok = self.next()
                if tok.text not in atom.rng:
                    self.fail(f"{tok.text!r} is not in the range of {atom.functor}", tok)
                row.append(tok.text)
            self.expect("arrow")
            value = self._number()
            key = tuple(row)
            if key in rows:
                self.fail(f"duplicate table row {' '.join(key)}", open_brace)
            rows[key] = value
        close = self.expect("sym", "}")
        expected = 1
        for atom in atoms:
            expected *= len(atom.rng)
        if len(rows) != expected:
            self.fail(f"expected {expected} rows, found {len(rows)}", close)

        used = {p for atom in atoms for p in atom.params}
        for p in params.values():
            if p not in used:
                self.fail(f"parameter {p.name} does not occur in the scope", kw)
        try:
            pf = Parfactor(ConstraintSet(pairs), tuple(atoms), FactorTable(atoms, rows))
        except ModelError as exc:
            self.fail(str(exc), kw)
        self.model.parfactors.append(pf.rename_params())

    def _where_term(self, params: dict[str, Parameter], tok: _Token) -> Term:
        if tok.text in params:
            return params[tok.text]
        pop = self.model.individual_pop(tok.text)
        if pop is None:
            self.fail(f"unknown constant or parameter {tok.text!r}", tok)
        return Constant(tok.text, pop)

    def _number(self) -> Fraction:
        tok = self.peek()
        if tok.kind == "decimal":
            self.next()
            return Fraction(tok.text)  # decimals become exact rationals
        if tok.kind == "int":
            self.next()
            num = int(tok.text)
            if self.peek().kind == "sym" and self.peek().text == "/":
                self.next()
                den_tok = self.expect("int")
                den = int(den_tok.text)
                if den == 0:
                    self.fail("zero denominator", den_tok)
                return Fraction(num, den)
            return Fraction(num)
        self.fail(f"expected a number, found {tok.text!r}", tok)

    def _observe(self, kw: _Token):
        atom = self._atom({})
        self.expect("sym", "=")
        value = self.peek()
        if value.kind not in ("name", "int"):
            self.fail("expected a range value", value)
        self.next()
        if value.text not in atom.rng:
            self.fail(f"{value.text!r} is not in the range of {atom.functor}", value)
        if atom in self.model.observations:
            self.fail(f"duplicate observation of {atom}", kw)
        self.model.observations[atom] = value.text

    def _query(self, kw: _Token):
        atom = self._atom({})
        if atom in self.model.queries:
            self.fail(f"duplicate query {atom}", kw)
        self.model.queries.append(atom)


def parse_model(text: str) -> Model:
    """Parse model text; raises ModelSyntaxError with line/column on any defect."""
    return _Parser(text).parse()


def _format_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def format_model(model: Model) -> str:
    """Render a model back to DSL text; reparsing yields an identical model."""
    lines: list[str] = []
    for pop in model.populations.values():
        auto = tuple(f"{pop.name}{i}" for i in range(1, pop.size + 1))
        if pop.individuals == auto:
            lines.append(f"population {pop.name} {pop.size}")
        else:
            prefix = [ind for i, ind in enumerate(pop.individuals) if ind != auto[i]]
            lines.append(f"population {pop.name} {pop.size} {{ {' '.join(prefix)} }}")
    for name, values in model.ranges.items():
        if name == "bool":
            continue
        lines.append(f"range {name} {{ {' '.join(values)} }}")
    for decl in model.functors.values():
        args = ", ".join(decl.arg_pops)
        suffix = "" if decl.rng == BOOL_RANGE else f" : {_range_name(model, decl.rng)}"
        lines.append(f"prv {decl.name}({args}){suffix}")
    for pf in model.parfactors:
        lines.append(_format_parfactor(pf))
    for atom, value in model.observations.items():
        lines.append(f"observe {atom} = {value}")
    for atom in model.queries:
        lines.append(f"query {atom}")
    return "\n".join(lines) + "\n"


def _range_name(model: Model, rng: tuple[str, ...]) -> str:
    for name, values in model.ranges.items():
        if values == rng:
            return name
    raise ModelError(f"range {rng} is not declared")


def _format_parfactor(pf: Parfactor) -> str:
    params = ", ".join(f"{p.name}:{p.pop}" for p in pf.params)
    where = ""
    if len(pf.constraints):
        rendered = sorted(f"{a.name} != {b.name}" for a, b in pf.constraints)
        where = f" where {', '.join(rendered)}"
    atoms = ", ".join(str(prv) for prv in pf.prvs)
    rows = []
    for key in sorted(pf.table.rows):
        rows.append(f"  {' '.join(key)} -> {_format_fraction(pf.table.rows[key])}")
    body = "\n".join(rows)
    return f"parfactor [{params}]{where} on {atoms} {{\n{body}\n}}"
