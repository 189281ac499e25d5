import math
from fractions import Fraction

import pytest

from app.core.exceptions import BoundOverflow, ConfigError
from app.models.growth import parse_growth
from app.services.bounds_service import outer_iterations, reg_bound, reg_prime_bound
from app.services.report_service import big, bounds_out


# ----------------------------------------------------------------
# Reg(k, ell, sigma, p, F)
# ----------------------------------------------------------------
def test_outer_iterations():
    assert outer_iterations(1, 1, 2) == 1
    assert outer_iterations(2, "1/2", 2) == 8
    assert outer_iterations(1, 1, "3/2") == 2


def test_single_stage_bound_is_zero():
    report = reg_bound(1, 1, 1, 2, parse_growth("succ"))

    assert report.L == 1
    assert report.R == 0
    assert report.reg == 0
    assert not report.overflowed


def test_two_stage_bound():
    # h(1) = ceil(1 * 2 * F^(2)(0)^2) = 8
    report = reg_bound(1, 2, 1, 2, parse_growth("succ"))

    assert report.h_table == [0, 8]
    assert report.reg == 8


def test_four_stage_bound():
    # h = 0, 1, 4, 13
    report = reg_bound(1, 1, "1/2", 2, parse_growth("succ"))

    assert report.h_table == [0, 1, 4, 13]
    assert report.reg == 13


def test_affine_bound_is_exact():
    # h(1) = 2 * 3^2 = 18, Reg = 2^18 - 1
    report = reg_bound(1, 2, 1, 2, parse_growth("affine:2,1"))

    assert report.R == 18
    assert report.reg == 262143


def test_parameters_are_checked():
    with pytest.raises(ConfigError):
        reg_bound(0, 1, 1, 2, parse_growth("succ"))
    with pytest.raises(ConfigError):
        reg_bound(1, 1, 2, 2, parse_growth("succ"))
    with pytest.raises(ConfigError):
        reg_bound(1, 1, 1, 3, parse_growth("succ"))


# ----------------------------------------------------------------
# Reg'(k, sigma, p, F)
# ----------------------------------------------------------------
def test_reg_prime_trivial():
    report = reg_prime_bound(1, 1, 2, parse_growth("succ"))

    assert report.reg == 0
    assert report.reg_prime == 1


def test_reg_prime_overflow_is_flagged():
    report = reg_prime_bound(1, 1, "3/2", parse_growth("succ"))

    assert report.overflowed
    assert report.reg_prime is None
    assert report.h_table == [0, 50]
    assert report.digits_estimate > 0


def test_reg_prime_overflow_with_a_huge_digit_estimate():
    # F'(n) = 3^n + 1: F'^(4)(0) = 3^59050 + 1, and F' of that has ~10^28172 digits
    report = reg_prime_bound(2, "1/4", 2, parse_growth("succ"))

    assert report.overflowed
    assert report.reg_prime is None
    assert report.h_table == [0, 7]
    assert report.digits_estimate.bit_length() > 64
    assert len(bounds_out(report)["digits_estimate"]) > 4300


def test_overflow_messages_stay_short():
    assert str(BoundOverflow(10 ** 5000, stage="h(2)")) == "Bound overflow at h(2) (~10^5000 digits)"
    assert BoundOverflow(123).magnitude == "~123 digits"
    assert len(big(10 ** 5000)) == 5001


# ----------------------------------------------------------------
# INDEPENDENT RE-EVALUATION OF THE RECURSION
# ----------------------------------------------------------------
def reference_reg(ell, sigma, p, F):
    """Straight transcription: h(i+1) = h(i) + ceil(sigma^2 ell F^(h(i)+2)(0)^2 / (p-1))."""
    sigma, p = Fraction(sigma), Fraction(p)

    def iterate(times):
        value = 0
        for _ in range(times):
            value = math.ceil(F(value))
        return value

    L = math.ceil(Fraction(ell) / (sigma ** 2 * (p - 1)))
    h = [0]
    while len(h) < L:
        h.append(h[-1] + math.ceil(sigma ** 2 * ell * Fraction(iterate(h[-1] + 2)) ** 2 / (p - 1)))
    return h, iterate(h[L - 1])


@pytest.mark.parametrize("ell, sigma, p, spec", [
    (1, 1, 2, "succ"),
    (2, 1, 2, "succ"),
    (3, 1, 2, "succ"),
    (1, "1/2", 2, "succ"),
    (1, 1, "3/2", "succ"),
    (2, 1, 2, "affine:2,1"),
    (2, 1, 2, "table:2,5;2,1"),
    (1, 1, 2, "cor45:h=recip"),
])
def test_reg_matches_reference(ell, sigma, p, spec):
    F = parse_growth(spec)

    report = reg_bound(1, ell, sigma, p, F)
    h, reg = reference_reg(ell, sigma, p, F)

    assert [int(x) for x in report.h_table] == h
    assert report.reg == reg


def test_reg_prime_matches_reference():
    F = parse_growth("affine:2,1")
    # k = 1: Reg' = 2^Reg(1, 1, sigma, p, F(2^n))
    _, inner = reference_reg(1, 1, 2, F.lifted(2))

    assert reg_prime_bound(1, 1, 2, F).reg_prime == 2 ** inner
