"""Monetary policies.

``Democratic`` expands the value space every epoch and hands the growth out
in equal coinbase shares. ``ExpiringCoins`` keeps a fixed space and mints a
constant batch per epoch whose coins stop being spendable ``L`` epochs later,
so at most ``L`` batches are ever alive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Protocol, Sequence, TypeVar, Union

from .errors import InvalidConfig, NoParticipants
from .value_space import (
    DEFAULT_LIFESPAN,
    GENESIS_SIZE,
    ValueSpace,
    check_lifespan,
    expand_epoch,
)

UNLIMITED = math.inf


@dataclass(frozen=True)
class Democratic:
    lifespan: int = DEFAULT_LIFESPAN

    name = "democratic"

    def __post_init__(self) -> None:
        check_lifespan(self.lifespan)


@dataclass(frozen=True)
class ExpiringCoins:
    lifespan: int = DEFAULT_LIFESPAN
    # None means one L-th of the genesis space per batch
    batch_size: int | None = None

    name = "expiring"

    def __post_init__(self) -> None:
        check_lifespan(self.lifespan)
        if self.batch_size is not None and self.batch_size <= 0:
            raise InvalidConfig("batch size must be positive")

    @property
    def batch(self) -> int:
        return self.batch_size if self.batch_size is not None else GENESIS_SIZE // self.lifespan


PolicyKind = Union[Democratic, ExpiringCoins]


def parse_policy(name: str, lifespan: int = DEFAULT_LIFESPAN, batch_size: int | None = None) -> PolicyKind:
    if name == "democratic":
        return Democratic(lifespan)
    if name == "expiring":
        return ExpiringCoins(lifespan, batch_size)
    raise InvalidConfig(f"unknown policy {name!r} (expected democratic or expiring)")


@dataclass(frozen=True)
class DistributionEvent:
    epoch: int
    issuance: int
    per_participant: int
    participants: int
    residual_carried: int


def split_pool(pool: int, participants: int) -> tuple[int, int]:
    """Equal integer shares of ``pool``; returns ``(per_participant, remainder)``."""
    if participants <= 0:
        raise NoParticipants("cannot distribute among zero participants")
    return divmod(pool, participants)


def democratic_epoch(
    vs: ValueSpace,
    participants: Sequence[str],
    escrowed: int = 0,
    property_lifespan: int | None = None,
) -> tuple[ValueSpace, DistributionEvent, list[tuple[str, int]]]:
    """Expand the space and split the new money plus carried residual equally.

    Returns the coinbase outputs as ``(participant, amount)`` pairs; when the
    pool is smaller than the head count nothing is minted and everything is
    carried.
    """
    n = len(participants)
    if n == 0:
        raise NoParticipants("epoch cannot advance with zero enrolled participants")
    expanded, issuance = expand_epoch(vs, escrowed, property_lifespan)
    per, residual = split_pool(issuance + vs.residual, n)
    event = DistributionEvent(expanded.epoch, issuance, per, n, residual)
    coinbase = [(pid, per) for pid in participants] if per else []
    return replace(expanded, residual=residual), event, coinbase


class _Expirable(Protocol):
    expiry: int | None


C = TypeVar("C", bound=_Expirable)


def is_expired(coin: _Expirable, epoch: int) -> bool:
    return coin.expiry is not None and coin.expiry <= epoch


def expiring_epoch(
    vs: ValueSpace,
    extant: Iterable[C],
    epoch: int,
    batch_size: int,
    participants: Sequence[str],
    lifespan: int,
) -> tuple[ValueSpace, DistributionEvent, list[tuple[str, int, int]], list[C]]:
    """Mint the batch for ``epoch`` and list the coins that die at ``epoch``.

    A coin minted at epoch ``e`` carries expiry ``e + L``: it is spendable
    through ``e + L - 1`` and gone from ``e + L``. The value space size is
    left alone; only the residual is updated.
    """
    n = len(participants)
    if n == 0:
        raise NoParticipants("epoch cannot advance with zero enrolled participants")
    expired = [coin for coin in extant if is_expired(coin, epoch)]
    per, residual = split_pool(batch_size + vs.residual, n)
    expiry = epoch + lifespan
    mints = [(pid, per, expiry) for pid in participants] if per else []
    event = DistributionEvent(epoch, batch_size, per, n, residual)
    return replace(vs, residual=residual), event, mints, expired


def remaining_lifetime(coin: _Expirable, epoch: int) -> float | int:
    if coin.expiry is None:
        return UNLIMITED
    return max(coin.expiry - epoch, 0)


def adoption_reward_factor(world_population: int, users: int) -> Fraction:
    """How many times larger a share is now than at full adoption."""
    if users <= 0:
        raise NoParticipants("reward factor needs a positive user count")
    return Fraction(world_population, users)
