"""Property registration backed by escrowed Poplets.

Buying a property at price ``P`` costs ``2P``: ``P`` to the seller and ``P``
locked in escrow for as long as the buyer owns it. A tenure clock ticks up
each epoch the escrow covers the appraised value and down otherwise; at zero
the property is forfeited. The second-highest standing bid is a floor under
the appraised value.

Functions here take the :class:`~popledger.ledger.Ledger` as their first
argument and validate fully before mutating it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .errors import (
    BidFloorViolated,
    InsufficientFunds,
    NotOwner,
    OwnerCannotBid,
    SelfTransfer,
    UnknownProperty,
    WithdrawBelowAppraisal,
    ZeroAmount,
    ZeroPrice,
)
from .membership import check_participant_id

if TYPE_CHECKING:
    from .ledger import Ledger


@dataclass
class PropertyRecord:
    property_id: str
    owner: str
    appraised_value: int
    escrow: int
    tenure: int
    registered_epoch: int

    @property
    def adequately_escrowed(self) -> bool:
        return self.escrow >= self.appraised_value


@dataclass(frozen=True)
class StandingBid:
    bidder: str
    property_id: str
    amount: int
    epoch: int
    # insertion order, breaks ties between equal amounts
    seq: int


@dataclass
class PropertyBook:
    records: dict[str, PropertyRecord] = field(default_factory=dict)
    bids: dict[str, list[StandingBid]] = field(default_factory=dict)
    next_seq: int = 0

    def get(self, property_id: str) -> PropertyRecord:
        try:
            return self.records[property_id]
        except KeyError:
            raise UnknownProperty(f"no registered property {property_id}") from None

    def ranked_bids(self, property_id: str) -> list[StandingBid]:
        return sorted(self.bids.get(property_id, ()), key=lambda b: (-b.amount, b.seq))

    def second_price(self, property_id: str) -> int:
        ranked = self.ranked_bids(property_id)
        return ranked[1].amount if len(ranked) > 1 else 0

    def drop_bid(self, property_id: str, bidder: str) -> None:
        kept = [b for b in self.bids.get(property_id, ()) if b.bidder != bidder]
        if kept:
            self.bids[property_id] = kept
        else:
            self.bids.pop(property_id, None)

    def enforce_floor(self, property_id: str) -> None:
        rec = self.records[property_id]
        rec.appraised_value = max(rec.appraised_value, self.second_price(property_id))


def _new_property_id(ledger: Ledger, buyer: str, input_ids: list[str]) -> str:
    seed = "|".join(["property", buyer, str(ledger.epoch), *input_ids])
    return hashlib.sha256(seed.encode()).hexdigest()


def _buy(ledger: Ledger, buyer: str, seller: str, price: int, property_id: str | None) -> str:
    """Pay ``price`` to the seller and lock ``price`` more in escrow."""
    coins = ledger.select_coins(buyer, 2 * price)
    if property_id is None:
        property_id = _new_property_id(ledger, buyer, [u.id for u in coins])
    from .ledger import TxOutput

    change = sum(u.amount for u in coins) - 2 * price
    ledger._internal_tx(
        "escrow_lock",
        coins,
        [TxOutput(seller, price), TxOutput(buyer, price, property_id), TxOutput(buyer, change)],
        buyer,
    )
    return property_id


def _release(ledger: Ledger, property_id: str, keep: int = 0) -> None:
    """Unlock the escrow back to its owner, leaving ``keep`` Poplets locked."""
    from .ledger import TxOutput

    rec = ledger.properties.records[property_id]
    coins = ledger.locked_utxos(property_id)
    if not coins:
        return
    total = sum(u.amount for u in coins)
    ledger._internal_tx(
        "escrow_release",
        coins,
        [TxOutput(rec.owner, total - keep), TxOutput(rec.owner, keep, property_id)],
        rec.owner,
    )


def _check_affordable(ledger: Ledger, buyer: str, price: int) -> None:
    have = ledger.balance(buyer).spendable
    if have < 2 * price:
        raise InsufficientFunds(f"{buyer} has {have} spendable, needs 2 x {price} = {2 * price}")


def register_property(ledger: Ledger, buyer: str, seller: str, price: int) -> str:
    check_participant_id(buyer)
    check_participant_id(seller)
    if not isinstance(price, int) or price <= 0:
        raise ZeroPrice("price must be positive")
    _check_affordable(ledger, buyer, price)
    pid = _buy(ledger, buyer, seller, price, None)
    ledger.properties.records[pid] = PropertyRecord(pid, buyer, price, price, 0, ledger.epoch)
    return pid


def transfer_property(ledger: Ledger, property_id: str, seller: str, buyer: str, price: int) -> None:
    book = ledger.properties
    rec = book.get(property_id)
    check_participant_id(buyer)
    if rec.owner != seller:
        raise NotOwner(f"{seller} does not own property {property_id}")
    if buyer == seller:
        raise SelfTransfer("buyer already owns the property")
    if not isinstance(price, int) or price <= 0:
        raise ZeroPrice("price must be positive")
    floor = book.second_price(property_id)
    if price < floor:
        raise BidFloorViolated(f"price {price} is below the standing second price {floor}")
    _check_affordable(ledger, buyer, price)
    _release(ledger, property_id)
    _buy(ledger, buyer, seller, price, property_id)
    _reassign(ledger, rec, buyer, price)


def _reassign(ledger: Ledger, rec: PropertyRecord, new_owner: str, price: int) -> None:
    book = ledger.properties
    book.drop_bid(rec.property_id, new_owner)
    rec.owner = new_owner
    rec.escrow = price
    rec.appraised_value = price
    rec.tenure = 0
    book.enforce_floor(rec.property_id)


def adjust_escrow(ledger: Ledger, property_id: str, owner: str, delta: int) -> None:
    """Top up (``delta > 0``) or withdraw (``delta < 0``) escrow."""
    rec = ledger.properties.get(property_id)
    if rec.owner != owner:
        raise NotOwner(f"{owner} does not own property {property_id}")
    if not isinstance(delta, int) or delta == 0:
        raise ZeroAmount("escrow adjustment must be a non-zero integer")
    from .ledger import TxOutput

    if delta > 0:
        coins = ledger.select_coins(owner, delta)
        change = sum(u.amount for u in coins) - delta
        ledger._internal_tx(
            "escrow_lock", coins, [TxOutput(owner, delta, property_id), TxOutput(owner, change)], owner
        )
        rec.escrow += delta
    else:
        remaining = rec.escrow + delta
        if remaining < rec.appraised_value:
            raise WithdrawBelowAppraisal(
                f"withdrawing {-delta} leaves {remaining} below appraisal {rec.appraised_value}"
            )
        _release(ledger, property_id, keep=remaining)
        rec.escrow = remaining


def place_bid(ledger: Ledger, bidder: str, property_id: str, amount: int) -> None:
    book = ledger.properties
    rec = book.get(property_id)
    check_participant_id(bidder)
    if bidder == rec.owner:
        raise OwnerCannotBid("the owner cannot bid on their own property")
    if not isinstance(amount, int) or amount <= 0:
        raise ZeroAmount("bid must be positive")
    book.drop_bid(property_id, bidder)
    book.bids.setdefault(property_id, []).append(
        StandingBid(bidder, property_id, amount, ledger.epoch, book.next_seq)
    )
    book.next_seq += 1
    book.enforce_floor(property_id)


def appraise(ledger: Ledger, property_id: str, new_value: int) -> None:
    book = ledger.properties
    rec = book.get(property_id)
    if not isinstance(new_value, int) or new_value <= 0:
        raise ZeroAmount("appraisal must be positive")
    rec.appraised_value = max(new_value, book.second_price(property_id))


def tick_tenure(ledger: Ledger) -> list[str]:
    """Advance every tenure clock by one epoch; returns forfeited property ids."""
    forfeited = []
    for pid in sorted(ledger.properties.records):
        rec = ledger.properties.records[pid]
        if rec.adequately_escrowed:
            rec.tenure += 1
        elif rec.tenure > 0:
            rec.tenure -= 1
        else:
            forfeit(ledger, pid)
            forfeited.append(pid)
    return forfeited


def forfeit(ledger: Ledger, property_id: str) -> str | None:
    """Hand an exhausted property to the best funded bidder at the second price.

    Candidates are tried in bid rank order; a bidder who cannot cover twice the
    price has the bid voided. The winner pays the next-ranked remaining bid, or
    their own bid when no other remains. Without a funded bidder the property
    is unregistered. Either way the former owner gets the old escrow back.
    Returns the new owner, or None.
    """
    book = ledger.properties
    rec = book.records[property_id]
    former = rec.owner
    candidates = book.ranked_bids(property_id)
    while candidates:
        winner = candidates[0]
        price = candidates[1].amount if len(candidates) > 1 else winner.amount
        if ledger.balance(winner.bidder).spendable >= 2 * price:
            _release(ledger, property_id)
            _buy(ledger, winner.bidder, former, price, property_id)
            _reassign(ledger, rec, winner.bidder, price)
            return winner.bidder
        book.drop_bid(property_id, winner.bidder)
        candidates = candidates[1:]
    _release(ledger, property_id)
    del book.records[property_id]
    book.bids.pop(property_id, None)
    return None
