"""Exact integer accounting for the expanding value space.

All amounts are integer Poplets. The value space starts at ``2**64`` Poplets
and grows by a factor ``L/(L-1)`` each epoch; the growth is the epoch's
issuance. Existing balances are never touched: devaluation happens purely by
dilution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .errors import InvalidConfig, NoDistribution, NoParticipants, Overflow

GENESIS_SIZE = 2**64
# u128 ceiling, so snapshots stay portable to fixed-width implementations
POPLET_MAX = 2**128 - 1
DEFAULT_LIFESPAN = 50
# 365.25 days, kept exact
DAYS_PER_YEAR = Fraction(1461, 4)


def check_poplets(amount: int) -> int:
    if not isinstance(amount, int) or isinstance(amount, bool):
        raise TypeError(f"Poplet amounts are integers, got {type(amount).__name__}")
    if amount < 0:
        raise ValueError(f"negative Poplet amount {amount}")
    if amount > POPLET_MAX:
        raise Overflow(f"{amount} exceeds the 128-bit Poplet range")
    return amount


def check_lifespan(lifespan: int) -> int:
    if not isinstance(lifespan, int) or lifespan < 2:
        raise InvalidConfig(f"lifespan must be an integer >= 2, got {lifespan!r}")
    return lifespan


@dataclass(frozen=True)
class ValueSpace:
    """Total monetary pie.

    ``carry`` is the exact fractional Poplet left over when the ideal
    geometric size is floored; carrying it keeps ``size`` within one Poplet of
    ``2**64 * (L/(L-1))**epoch`` no matter how many epochs pass.
    ``residual`` holds undistributed remainder Poplets awaiting the next
    distribution.
    """

    size: int
    epoch: int
    lifespan: int
    residual: int = 0
    carry: Fraction = Fraction(0)

    @property
    def ideal_size(self) -> Fraction:
        return self.size + self.carry


def new_value_space(lifespan_years: int = DEFAULT_LIFESPAN) -> ValueSpace:
    return ValueSpace(size=GENESIS_SIZE, epoch=0, lifespan=check_lifespan(lifespan_years))


def expand_epoch(
    vs: ValueSpace,
    escrowed: int = 0,
    property_lifespan: int | None = None,
) -> tuple[ValueSpace, int]:
    """Grow the value space by one epoch and return ``(new_space, issuance)``.

    With a single rate the ideal size is multiplied by ``L/(L-1)``. When a
    separate ``property_lifespan`` is given, the ``escrowed`` part of the space
    grows at the property rate and the rest at the circulating rate.
    """
    ideal = vs.ideal_size
    if property_lifespan is None or escrowed == 0:
        growth = ideal / (vs.lifespan - 1)
    else:
        check_lifespan(property_lifespan)
        if escrowed > vs.size:
            raise ValueError("escrowed amount exceeds the value space")
        growth = (ideal - escrowed) / (vs.lifespan - 1) + Fraction(escrowed, property_lifespan - 1)
    new_ideal = ideal + growth
    new_size = math.floor(new_ideal)
    if new_size > POPLET_MAX:
        raise Overflow(f"value space would exceed 2**128 Poplets at epoch {vs.epoch + 1}")
    issuance = new_size - vs.size
    return (
        replace(vs, size=new_size, epoch=vs.epoch + 1, carry=new_ideal - new_size),
        issuance,
    )


@dataclass(frozen=True)
class ConversionRate:
    """Poplets per Popcoin: one person's daily share of the latest issuance."""

    poplets_per_popcoin: Fraction
    epoch: int = 0
    participants: int = 0


def conversion_rate(last_issuance: int, participants: int, epoch: int = 0) -> ConversionRate:
    if participants <= 0:
        raise NoParticipants("conversion rate needs at least one participant")
    if last_issuance <= 0:
        raise NoDistribution("no distribution has occurred yet")
    ppp = Fraction(last_issuance * 4, participants * 1461)
    return ConversionRate(ppp, epoch, participants)


def to_popcoin(amount: int, rate: ConversionRate) -> Fraction:
    return Fraction(amount) / rate.poplets_per_popcoin


def to_popcoin_display(amount: int, rate: ConversionRate, decimals: int = 2) -> str:
    """Render ``amount`` Poplets in Popcoin, rounded half-even."""
    scaled = round(to_popcoin(amount, rate) * 10**decimals)  # Fraction rounds half-even
    if decimals == 0:
        return str(scaled)
    whole, frac = divmod(scaled, 10**decimals)
    return f"{whole}.{frac:0{decimals}d}"
