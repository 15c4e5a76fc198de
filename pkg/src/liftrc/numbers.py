"""Exact and log-space arithmetic for the inference engines.

Potentials are exact rationals.  The exact mode keeps every intermediate
value a `fractions.Fraction` so two engines can be compared bit for bit.
The log-space mode represents a non-negative number by the decimal
logarithm of its magnitude (plus an explicit zero flag), which keeps
numbers bounded even when exponents reach ~10**12 for population sizes
around 10**6.
"""

from __future__ import annotations

import decimal
import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union


class ExactSizeError(ArithmeticError):
    """An exact-mode power would be too large to materialize.

    Raised instead of silently allocating a rational with millions of
    digits; the message advises switching to log-space mode.
    """


def binomial(n: int, k: int) -> int:
    """Exact binomial coefficient C(n, k) for 0 <= k <= n."""
    if k < 0 or k > n:
        raise ValueError(f"binomial({n}, {k}): k must lie in [0, n]")
    return math.comb(n, k)


def falling_factorial(n: int, k: int) -> int:
    """Exact falling factorial n * (n-1) * ... * (n-k+1) for 0 <= k <= n."""
    if k < 0 or k > n:
        raise ValueError(f"falling_factorial({n}, {k}): k must lie in [0, n]")
    return math.perm(n, k)


def multinomial(total: int, parts: Sequence[int]) -> int:
    """Number of ways to split `total` labeled items into groups of the given sizes."""
    if any(p < 0 for p in parts) or sum(parts) != total:
        raise ValueError(f"multinomial({total}, {parts}): parts must be >= 0 and sum to total")
    out = 1
    remaining = total
    for p in parts:
        out *= math.comb(remaining, p)
        remaining -= p
    return out


def compositions(total: int, slots: int) -> Iterator[tuple[int, ...]]:
    """All tuples of `slots` non-negative integers summing to `total`, lexicographic."""
    if slots == 0:
        if total == 0:
            yield ()
        return
    if slots == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, slots - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class LogNumber:
    """A non-negative number as (is-zero flag, log10 of magnitude)."""

    is_zero: bool
    log10: Decimal

    def __repr__(self) -> str:
        if self.is_zero:
            return "LogNumber(0)"
        return f"LogNumber(log10={self.log10})"


LOG_ZERO = LogNumber(True, Decimal(0))

Number = Union[Fraction, LogNumber]


class ExactMode:
    """Arithmetic over exact non-negative rationals."""

    name = "exact"

    def __init__(self, pow_bit_limit: int = 20_000_000):
        # Cap on the bit size of an exact power's representation.
        self.pow_bit_limit = pow_bit_limit

    def zero(self) -> Fraction:
        return Fraction(0)

    def one(self) -> Fraction:
        return Fraction(1)

    def from_fraction(self, value: Fraction) -> Fraction:
        if value < 0:
            raise ValueError(f"negative potential {value}")
        return value

    def from_int(self, value: int) -> Fraction:
        return Fraction(value)

    def is_zero(self, value: Fraction) -> bool:
        return value == 0

    def add(self, a: Fraction, b: Fraction) -> Fraction:
        return a + b

    def mul(self, a: Fraction, b: Fraction) -> Fraction:
        return a * b

    def power(self, base: Fraction, exponent: int) -> Fraction:
        """base ** exponent with 0**0 == 1 and a representation-size guard."""
        if exponent < 0:
            raise ValueError("exponent must be >= 0")
        if exponent == 0:
            return Fraction(1)
        if base == 0:
            return Fraction(0)
        bits = base.numerator.bit_length() + base.denominator.bit_length()
        if bits * exponent > self.pow_bit_limit:
            raise ExactSizeError(
                f"exact power needs ~{bits * exponent} bits; "
                "rerun in log-space numeric mode for populations this large"
            )
        return base**exponent

    def to_decimal_string(self, value: Fraction, digits: int = 12) -> str:
        with decimal.localcontext() as ctx:
            ctx.prec = digits
            return str(Decimal(value.numerator) / Decimal(value.denominator))


class LogSpaceMode:
    """Arithmetic over LogNumber values at a configured decimal precision."""

    name = "logspace"

    def __init__(self, precision: int = 50):
        if precision < 10:
            raise ValueError("log-space precision must be at least 10 digits")
        self.precision = precision
        # Working precision gets headroom so round-off stays below the
        # advertised precision; Emax/Emin are widened for huge exponents.
        self.ctx = decimal.Context(prec=precision + 10, Emax=10**12, Emin=-(10**12))
        self._ln10 = self.ctx.ln(Decimal(10))

    def zero(self) -> LogNumber:
        return LOG_ZERO

    def one(self) -> LogNumber:
        return LogNumber(False, Decimal(0))

    def _log10_int(self, value: int) -> Decimal:
        return self.ctx.divide(self.ctx.ln(Decimal(value)), self._ln10)

    def from_fraction(self, value: Fraction) -> LogNumber:
        if value < 0:
            raise ValueError(f"negative potential {value}")
        if value == 0:
            return LOG_ZERO
        return LogNumber(
            False,
            self.ctx.subtract(self._log10_int(value.numerator), self._log10_int(value.denominator)),
        )

    def from_int(self, value: int) -> LogNumber:
        return self.from_fraction(Fraction(value))

    def is_zero(self, value: LogNumber) -> bool:
        return value.is_zero

    def add(self, a: LogNumber, b: LogNumber) -> LogNumber:
        if a.is_zero:
            return b
        if b.is_zero:
            return a
        hi, lo = (a, b) if a.log10 >= b.log10 else (b, a)
        diff = self.ctx.subtract(lo.log10, hi.log10)
        term = self.ctx.power(Decimal(10), diff)
        bump = self.ctx.divide(self.ctx.ln(self.ctx.add(Decimal(1), term)), self._ln10)
        return LogNumber(False, self.ctx.add(hi.log10, bump))

    def mul(self, a: LogNumber, b: LogNumber) -> LogNumber:
        if a.is_zero or b.is_zero:
            return LOG_ZERO
        return LogNumber(False, self.ctx.add(a.log10, b.log10))

    def power(self, base: LogNumber, exponent: int) -> LogNumber:
        if exponent < 0:
            raise ValueError("exponent must be >= 0")
        if exponent == 0:
            return self.one()
        if base.is_zero:
            return LOG_ZERO
        return LogNumber(False, self.ctx.multiply(base.log10, Decimal(exponent)))

    def to_fraction_of(self, value: LogNumber, total: LogNumber) -> Decimal:
        """value / total as a plain Decimal (both non-zero log numbers, or value zero)."""
        if value.is_zero:
            return Decimal(0)
        if total.is_zero:
            raise ZeroDivisionError("normalizing by a zero total")
        return self.ctx.power(Decimal(10), self.ctx.subtract(value.log10, total.log10))

    def to_decimal_string(self, value: LogNumber, digits: int = 12) -> str:
        if value.is_zero:
            return "0"
        with decimal.localcontext() as ctx:
            ctx.prec = digits
            exponent = int(value.log10.to_integral_value(rounding=decimal.ROUND_FLOOR))
            mantissa = self.ctx.power(Decimal(10), self.ctx.subtract(value.log10, Decimal(exponent)))
            return str(+mantissa) + (f"E{exponent:+d}" if exponent else "")


NumericMode = Union[ExactMode, LogSpaceMode]


def make_mode(name: str, precision: int = 50) -> NumericMode:
    """Build a numeric mode from its CLI name."""
    if name == "exact":
        return ExactMode()
    if name == "logspace":
        return LogSpaceMode(precision)
    raise ValueError(f"unknown numeric mode {name!r} (expected 'exact' or 'logspace')")


def product(mode: NumericMode, values: Iterable[Number]) -> Number:
    out = mode.one()
    for v in values:
        out = mode.mul(out, v)
    return out
