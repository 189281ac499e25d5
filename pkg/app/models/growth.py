# app/models/growth.py

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Union

from app.core.config import current_settings
from app.core.constants import (
    GROWTH_AFFINE,
    GROWTH_STRONG_GRAPHON,
    GROWTH_SUCCESSOR,
    GROWTH_TABLE,
    GROWTH_UNIFORM_PARTITION,
)
from app.core.exceptions import BoundOverflow, ConfigError
from app.models.enums import GrowthKind

Number = Union[int, Fraction]
Schedule = Callable[[int], Fraction]

_LOG10_2 = math.log10(2)


def to_fraction(value: Union[int, float, str, Fraction], name: str = "value") -> Fraction:
    """Parses ints, decimals and `a/b` strings exactly."""
    try:
        if isinstance(value, float):
            return Fraction(str(value))
        return Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ConfigError(f"Cannot read {name} '{value}' as a rational number")


def digits_of(value: int) -> int:
    return max(1, int(abs(value).bit_length() * _LOG10_2) + 1)


def power_digits(exponent: int, base: Union[int, Fraction]) -> int:
    """Decimal digits of base**exponent, without forming it (exponent may be huge)."""
    return int(Fraction(exponent) * Fraction(math.log10(base))) + 1


class GrowthFunction:
    """
    A growth function F on the naturals: increasing, with F(n) >= n+1.
    Values are exact rationals. `iterate(t)` computes F^{(t)}(0) with the
    integer convention n -> ceil(F(n)) and stops with BoundOverflow once the
    numbers outgrow the configured digit or iteration limits.
    """

    def __init__(
        self,
        kind: GrowthKind,
        label: str,
        *,
        a: Optional[Fraction] = None,
        b: Optional[Fraction] = None,
        coefficients: Sequence[Fraction] = (),
        table: Sequence[Fraction] = (),
        inner: Optional["GrowthFunction"] = None,
        base: Optional[int] = None,
        schedule: Optional[Schedule] = None,
    ):
        self.kind = kind
        self.label = label
        self.a = a
        self.b = b
        self.coefficients = tuple(coefficients)
        self.table = tuple(table)
        self.inner = inner
        self.base = base
        self.schedule = schedule
        self._partial_sums: List[Fraction] = []

    def __repr__(self) -> str:
        return f"GrowthFunction({self.label})"

    # --------------------------------------------------------
    # CONSTRUCTORS
    # --------------------------------------------------------
    @classmethod
    def successor(cls) -> "GrowthFunction":
        return cls(GrowthKind.Successor, GROWTH_SUCCESSOR)

    @classmethod
    def affine(cls, a: Number, b: Number, label: Optional[str] = None, schedule: Optional[Schedule] = None) -> "GrowthFunction":
        a, b = Fraction(a), Fraction(b)
        if a < 1 or b < 1:
            raise ConfigError(f"affine growth needs a >= 1 and b >= 1, got a={a}, b={b}")
        return cls(GrowthKind.Affine, label or f"{GROWTH_AFFINE}:{a},{b}", a=a, b=b, schedule=schedule)

    @classmethod
    def polynomial(cls, coefficients: Sequence[Number], label: Optional[str] = None, schedule: Optional[Schedule] = None) -> "GrowthFunction":
        coefficients = [Fraction(c) for c in coefficients]
        function = cls(
            GrowthKind.Polynomial,
            label or "poly:" + ",".join(str(c) for c in coefficients),
            coefficients=coefficients,
            schedule=schedule,
        )
        function.validate()
        return function

    @classmethod
    def from_table(cls, values: Sequence[Number], a: Number, b: Number) -> "GrowthFunction":
        values = [Fraction(v) for v in values]
        a, b = Fraction(a), Fraction(b)
        if a < 1 or b < 1:
            raise ConfigError(f"table tail needs a >= 1 and b >= 1, got a={a}, b={b}")
        label = f"{GROWTH_TABLE}:" + ",".join(str(v) for v in values) + f";{a},{b}"
        function = cls(GrowthKind.Table, label, a=a, b=b, table=values)
        function.validate()
        return function

    @classmethod
    def from_schedule(cls, h: Schedule, label: str = "schedule") -> "GrowthFunction":
        """F(n) = (n+1) + sum_{i<=n} 8/h(i), the growth used for strong graphon regularity."""
        function = cls(GrowthKind.Schedule, label, schedule=h)
        function.validate()
        return function

    def lifted(self, base: int) -> "GrowthFunction":
        """F'(n) = F(base^n)."""
        if base < 2:
            raise ConfigError(f"lift base must be at least 2, got {base}")
        return GrowthFunction(GrowthKind.Lifted, f"lift({self.label};{base})", inner=self, base=base)

    # --------------------------------------------------------
    # EVALUATION
    # --------------------------------------------------------
    def __call__(self, n: int) -> Fraction:
        if n < 0:
            raise ConfigError(f"Growth functions live on the naturals, got {n}")

        if self.kind == GrowthKind.Successor:
            return Fraction(n + 1)

        if self.kind == GrowthKind.Affine:
            return self.a * n + self.b

        if self.kind == GrowthKind.Polynomial:
            value = Fraction(0)
            for coefficient in reversed(self.coefficients):
                value = value * n + coefficient
            return value

        if self.kind == GrowthKind.Table:
            if n < len(self.table):
                return self.table[n]
            return self.a * n + self.b

        if self.kind == GrowthKind.Lifted:
            if n > current_settings().BOUND_DIGIT_LIMIT / math.log10(self.base):
                raise BoundOverflow(power_digits(n, self.base), stage=self.label)
            return self.inner(self.base ** n)

        if self.kind == GrowthKind.Schedule:
            return Fraction(n + 1) + self._schedule_sum(n)

        raise ConfigError(f"Unknown growth kind {self.kind}")

    def _schedule_sum(self, n: int) -> Fraction:
        if n > current_settings().BOUND_ITERATION_LIMIT:
            raise BoundOverflow(digits_of(n), stage=self.label)
        sums = self._partial_sums
        while len(sums) <= n:
            i = len(sums)
            h_i = Fraction(self.schedule(i))
            if h_i <= 0:
                raise ConfigError(f"Schedule must be positive, got h({i}) = {h_i}")
            sums.append((sums[-1] if sums else Fraction(0)) + 8 / h_i)
        return sums[n]

    def step(self, n: int) -> int:
        """The integer successor ceil(F(n)) used when iterating."""
        return math.ceil(self(n))

    def iterate(self, times: int) -> int:
        """F^{(times)}(0)."""
        if times < 0:
            raise ConfigError(f"Cannot iterate a negative number of times ({times})")
        limits = current_settings()

        if self.kind == GrowthKind.Successor:
            return times

        if self.kind == GrowthKind.Affine and self.a.denominator == 1:
            a, b = self.a.numerator, math.ceil(self.b)
            if a == 1:
                return b * times
            if times > limits.BOUND_DIGIT_LIMIT / math.log10(a):
                raise BoundOverflow(power_digits(times, a), stage=self.label)
            return b * (a ** times - 1) // (a - 1)

        if times > limits.BOUND_ITERATION_LIMIT or self._digit_guess(times) > limits.BOUND_DIGIT_LIMIT:
            raise BoundOverflow(self._digit_guess(times), stage=self.label)

        value = 0
        for done in range(times):
            value = self.step(value)
            if value.bit_length() * _LOG10_2 > limits.BOUND_DIGIT_LIMIT:
                raise BoundOverflow(digits_of(value) + self._digit_guess(times - done - 1), stage=self.label)
        return value

    def _digit_guess(self, remaining: int) -> int:
        # Growth of at least one unit per step; geometric kinds grow by log10(a) digits per step
        if self.kind in (GrowthKind.Affine, GrowthKind.Table) and self.a > 1:
            return power_digits(remaining, self.a) - 1
        return digits_of(remaining)

    # --------------------------------------------------------
    # VALIDATION
    # --------------------------------------------------------
    def validate(self) -> None:
        """Checks monotonicity and F(n) >= n+1 on 0..GROWTH_CHECK_LIMIT."""
        limit = current_settings().GROWTH_CHECK_LIMIT
        previous = None
        for n in range(limit + 1):
            value = self(n)
            if value < n + 1:
                raise ConfigError(f"{self.label} is not a growth function: F({n}) = {value} < {n + 1}")
            if previous is not None and value < previous:
                raise ConfigError(f"{self.label} is not increasing: F({n}) = {value} < F({n - 1}) = {previous}")
            previous = value


# ------------------------------------------------------------
# SPEC MINI-LANGUAGE
# ------------------------------------------------------------
def parse_schedule(spec: str) -> Schedule:
    """
    Reads the graphon schedule part of a `cor45:` spec:
    `h=recip` (h(i) = 1/(i+1)) or `h=const:c`.
    """
    if not spec.startswith("h="):
        raise ConfigError(f"Schedule spec must start with 'h=', got '{spec}'")
    body = spec[2:]
    if body == "recip":
        return lambda i: Fraction(1, i + 1)
    if body.startswith("const:"):
        constant = to_fraction(body[len("const:"):], "schedule constant")
        if constant <= 0:
            raise ConfigError(f"Schedule constant must be positive, got {constant}")
        return lambda i: constant
    raise ConfigError(f"Unknown schedule '{spec}'")


def _parse_pair(text: str, name: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"{name} needs two numbers 'a,b', got '{text}'")
    return to_fraction(parts[0], f"{name} a"), to_fraction(parts[1], f"{name} b")


def parse_growth(spec: str) -> GrowthFunction:
    """
    succ | affine:a,b | prop42:eta | cor45:h=recip | cor45:h=const:c | table:v0,v1,...;a,b
    """
    spec = (spec or "").strip()
    name, _, body = spec.partition(":")

    if name == GROWTH_SUCCESSOR and not body:
        return GrowthFunction.successor()

    if name == GROWTH_AFFINE:
        a, b = _parse_pair(body, GROWTH_AFFINE)
        return GrowthFunction.affine(a, b)

    if name == GROWTH_UNIFORM_PARTITION:
        eta = to_fraction(body, "eta")
        if not 0 < eta <= 1:
            raise ConfigError(f"eta must lie in (0, 1], got {eta}")
        return GrowthFunction.affine(8 / eta ** 2, 1, label=spec)

    if name == GROWTH_STRONG_GRAPHON:
        schedule = parse_schedule(body)
        if body == "h=recip":
            # (n+1) + sum_{i<=n} 8(i+1) = 4n^2 + 13n + 9
            return GrowthFunction.polynomial([9, 13, 4], label=spec, schedule=schedule)
        constant = schedule(0)
        # (n+1)(1 + 8/c)
        return GrowthFunction.affine(1 + 8 / constant, 1 + 8 / constant, label=spec, schedule=schedule)

    if name == GROWTH_TABLE:
        values_text, separator, tail = body.partition(";")
        if not separator:
            raise ConfigError(f"table spec needs an affine tail after ';', got '{spec}'")
        values = [to_fraction(v, "table value") for v in values_text.split(",") if v.strip()]
        a, b = _parse_pair(tail, GROWTH_TABLE)
        return GrowthFunction.from_table(values, a, b)

    raise ConfigError(f"Malformed growth spec '{spec}'")
