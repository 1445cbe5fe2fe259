"""Ballpark basic-income arithmetic from narrow money supply (M1).

If a currency with M1 money supply ``m1`` devalued at ``rate`` per year and
handed the proceeds out equally, each of ``population`` people would receive
``m1 * rate / population`` per year. Results are rounded to three
significant figures.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction

from .errors import InvalidConfig, ZeroPopulation
from .value_space import DAYS_PER_YEAR

GLOBAL_POVERTY_LINE = 694  # USD per year, i.e. about 1.90 per day


@dataclass(frozen=True)
class Region:
    name: str
    m1_usd_million: int
    population_thousands: int
    # national or global poverty line in USD/year, when known
    poverty_line: int | None

    @property
    def m1(self) -> int:
        return self.m1_usd_million * 10**6

    @property
    def population(self) -> int:
        return self.population_thousands * 10**3


# 2018-era inputs, M1 in USD millions and population in thousands
REGIONS = (
    Region("Global", 36_800_000, 7_630_000, 694),
    Region("Switzerland", 657_000, 8_540, 26_900),
    Region("United States", 3_660_000, 327_000, 11_800),
    Region("India", 440_000, 1_350_000, 172),
    Region("Nigeria", 30_200, 196_000, None),
)
RATES = (Fraction(2, 100), Fraction(5, 100), Fraction(10, 100))


def round_significant(value: Fraction, digits: int = 3) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = ROUND_HALF_EVEN
        return Decimal(value.numerator) / Decimal(value.denominator)


def estimate_basic_income(m1: Fraction | int, population: int, rate: Fraction) -> Decimal:
    """Yearly income per person, to three significant figures."""
    if population <= 0:
        raise ZeroPopulation("population must be positive")
    rate = Fraction(rate)
    if not 0 < rate < 1:
        raise InvalidConfig(f"rate must lie strictly between 0 and 1, got {rate}")
    return round_significant(Fraction(m1) * rate / population)


def format_amount(value: Decimal) -> str:
    return f"{value:,.2f}"


def table() -> list[tuple[Region, list[Decimal]]]:
    return [(r, [estimate_basic_income(r.m1, r.population, rate) for rate in RATES]) for r in REGIONS]


@dataclass(frozen=True)
class PovertyGap:
    income: Fraction
    ratio: Fraction
    per_day: Fraction


def poverty_gap(income: Fraction | int | Decimal, poverty_line: int = GLOBAL_POVERTY_LINE) -> PovertyGap:
    income = Fraction(income)
    if income < 0:
        raise ValueError("income cannot be negative")
    return PovertyGap(income, income / poverty_line, income / DAYS_PER_YEAR)
