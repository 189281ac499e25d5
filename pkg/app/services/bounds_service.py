# app/services/bounds_service.py

import math
from fractions import Fraction
from typing import List, Union

from loguru import logger

from app.core.config import current_settings
from app.core.exceptions import BoundOverflow, ConfigError
from app.models.growth import GrowthFunction, digits_of, power_digits, to_fraction
from app.schemas.results import BoundReport

Rational = Union[int, float, str, Fraction]


def _check_parameters(k: int, ell: int, sigma: Fraction, p: Fraction) -> None:
    if int(k) != k or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k}")
    if int(ell) != ell or ell < 1:
        raise ConfigError(f"ell must be a positive integer, got {ell}")
    if not 0 < sigma <= 1:
        raise ConfigError(f"sigma must lie in (0, 1], got {sigma}")
    if not 1 < p <= 2:
        raise ConfigError(f"p must lie in (1, 2], got {p}")


def outer_iterations(ell: int, sigma: Rational, p: Rational) -> int:
    """L = ceil(ell / (sigma^2 (p-1)))."""
    sigma = to_fraction(sigma, "sigma")
    p = to_fraction(p, "p")
    return math.ceil(Fraction(ell) / (sigma ** 2 * (p - 1)))


def stage_increment(h: int, ell: int, sigma: Fraction, p: Fraction, F: GrowthFunction) -> int:
    """ceil(sigma^2 ell F^{(h+2)}(0)^2 / (p-1))."""
    H = F.iterate(h + 2)
    return math.ceil(sigma ** 2 * ell * Fraction(H) ** 2 / (p - 1))


def reg_bound(k: int, ell: int, sigma: Rational, p: Rational, F: GrowthFunction) -> BoundReport:
    """
    h(0) = 0, h(i+1) = h(i) + ceil(sigma^2 ell F^{(h(i)+2)}(0)^2 / (p-1)),
    R = h(L-1) and Reg = F^{(R)}(0), all in exact integer arithmetic.

    Values past the configured digit limit stop the evaluation; the report
    then keeps what was computed and flags the overflow.
    """
    sigma = to_fraction(sigma, "sigma")
    p = to_fraction(p, "p")
    _check_parameters(k, ell, sigma, p)
    limits = current_settings()

    L = outer_iterations(ell, sigma, p)
    h_table: List[int] = [0]
    R = None
    try:
        if L > limits.BOUND_ITERATION_LIMIT:
            raise BoundOverflow(digits_of(L), stage="L")
        while len(h_table) < L:
            h = h_table[-1]
            h_table.append(h + stage_increment(h, ell, sigma, p, F))
            if digits_of(h_table[-1]) > limits.BOUND_DIGIT_LIMIT:
                raise BoundOverflow(digits_of(h_table[-1]), stage=f"h({len(h_table) - 1})")
        R = h_table[L - 1]
        reg = F.iterate(R)
    except BoundOverflow as e:
        logger.warning(f"⚠️ Reg({k},{ell},{sigma},{p},{F.label}) overflowed at {e.stage} ({e.magnitude})")
        return BoundReport(
            L=L,
            R=R,
            h_table=h_table,
            overflowed=True,
            digits_estimate=e.digits_estimate,
            overflow_stage=e.stage,
        )

    logger.debug(f"Reg({k},{ell},{sigma},{p},{F.label}): L={L}, R={R}, Reg has {digits_of(reg)} digits")
    return BoundReport(L=L, R=R, h_table=h_table, reg=reg)


def reg_prime_bound(k: int, sigma: Rational, p: Rational, F: GrowthFunction) -> BoundReport:
    """Reg' = (k+1)^Reg(k, 1, sigma, p, F') with F'(n) = F((k+1)^n)."""
    inner = reg_bound(k, 1, sigma, p, F.lifted(k + 1))
    if inner.overflowed:
        return inner

    # int-float comparison is exact and cannot overflow
    if inner.reg > current_settings().BOUND_DIGIT_LIMIT / math.log10(k + 1):
        logger.warning(f"⚠️ Reg' exponent for k={k} is too large to expand")
        digits = power_digits(inner.reg, k + 1)
        return inner.model_copy(update={
            "overflowed": True,
            "digits_estimate": digits,
            "overflow_stage": "reg_prime",
        })
    return inner.model_copy(update={"reg_prime": (k + 1) ** inner.reg})
