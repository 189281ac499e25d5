from fractions import Fraction

import pytest

from app.core.config import settings_scope
from app.core.exceptions import BoundOverflow, ConfigError
from app.models.growth import GrowthFunction, parse_growth, power_digits, to_fraction


# ----------------------------------------------------------------
# PARSING THE GROWTH MINI-LANGUAGE
# ----------------------------------------------------------------
def test_successor():
    F = parse_growth("succ")

    assert F(3) == 4
    assert F.iterate(5) == 5


def test_affine_iterates_in_closed_form():
    F = parse_growth("affine:2,1")

    assert F(4) == 9
    # 0 -> 1 -> 3 -> 7
    assert F.iterate(3) == 7


def test_uniform_partition_growth():
    F = parse_growth("prop42:1/2")

    assert F(0) == 1
    assert F(2) == 65


def test_graphon_growth_from_reciprocal_schedule():
    F = parse_growth("cor45:h=recip")

    assert F(0) == 9
    assert F(1) == 26
    assert F.schedule(2) == Fraction(1, 3)


def test_graphon_growth_from_constant_schedule():
    F = parse_growth("cor45:h=const:8")

    assert [F(n) for n in range(4)] == [2, 4, 6, 8]


def test_schedule_growth_matches_closed_form():
    with settings_scope(GROWTH_CHECK_LIMIT=40):
        direct = GrowthFunction.from_schedule(lambda i: Fraction(1, i + 1))
    closed = parse_growth("cor45:h=recip")

    assert all(direct(n) == closed(n) for n in range(30))


def test_table_growth():
    F = parse_growth("table:2,5;2,1")

    assert [F(n) for n in range(4)] == [2, 5, 5, 7]


@pytest.mark.parametrize("spec", ["", "banana", "succ:3", "affine:0,1", "affine:2", "table:5,2;2,1", "prop42:2", "cor45:h=const:0"])
def test_malformed_specs_are_config_errors(spec):
    with pytest.raises(ConfigError):
        parse_growth(spec)


def test_to_fraction():
    assert to_fraction("3/4") == Fraction(3, 4)
    assert to_fraction(0.1) == Fraction(1, 10)
    with pytest.raises(ConfigError):
        to_fraction("x", "sigma")


# ----------------------------------------------------------------
# LIFTING & OVERFLOW
# ----------------------------------------------------------------
def test_lifted_growth():
    F = parse_growth("succ").lifted(2)

    assert F(0) == 2
    assert F(3) == 9
    with pytest.raises(ConfigError):
        parse_growth("succ").lifted(1)


def test_iterate_overflow_is_reported():
    F = parse_growth("affine:10,1")

    with settings_scope(BOUND_DIGIT_LIMIT=10):
        assert F.iterate(5) == 11111
        with pytest.raises(BoundOverflow) as info:
            F.iterate(20)
    assert info.value.digits_estimate >= 20


def test_power_digits():
    assert power_digits(3, 10) == 4
    assert power_digits(10 ** 30, 2) > 10 ** 29
