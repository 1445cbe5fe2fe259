import pytest

from helpers import democratic_books_balance, escrow_matches_locks
from popledger import property as prop
from popledger.errors import (
    BidFloorViolated,
    InsufficientFunds,
    NotOwner,
    OwnerCannotBid,
    SelfTransfer,
    UnknownProperty,
    ZeroAmount,
    ZeroPrice,
)
from popledger.ledger import Ledger
from popledger.policy import ExpiringCoins


@pytest.fixture
def world():
    ledger = Ledger()
    people = [ledger.enroll(f"p{i}".encode()) for i in range(4)]
    ledger.advance_epoch()
    return ledger, people


def consistent(ledger):
    return democratic_books_balance(ledger) and escrow_matches_locks(ledger)


def test_register_moves_price_and_locks_escrow(world):
    ledger, (a, b, *_) = world
    start_a, start_b = ledger.balance(a).spendable, ledger.balance(b).spendable
    pid = ledger.register_property(a, b, 1_000)
    rec = ledger.properties.records[pid]
    assert (rec.owner, rec.appraised_value, rec.escrow, rec.tenure) == (a, 1_000, 1_000, 0)
    assert ledger.balance(a) == (start_a - 2_000, 1_000)
    assert ledger.balance(b).spendable == start_b + 1_000
    assert consistent(ledger)


def test_register_validation(world):
    ledger, (a, b, *_) = world
    with pytest.raises(ZeroPrice):
        ledger.register_property(a, b, 0)
    with pytest.raises(InsufficientFunds):
        ledger.register_property(a, b, ledger.balance(a).spendable)


def test_transfer_errors_leave_state_alone(world):
    ledger, (a, b, c, d) = world
    pid = ledger.register_property(a, b, 1_000)
    ledger.place_bid(c, pid, 1_500)
    ledger.place_bid(d, pid, 1_200)
    before = ledger.snapshot()
    for call, error in [
        (lambda: ledger.transfer_property("0" * 64, a, c, 1_500), UnknownProperty),
        (lambda: ledger.transfer_property(pid, b, c, 1_500), NotOwner),
        (lambda: ledger.transfer_property(pid, a, a, 1_500), SelfTransfer),
        (lambda: ledger.transfer_property(pid, a, c, 0), ZeroPrice),
        (lambda: ledger.transfer_property(pid, a, c, 1_199), BidFloorViolated),
        (lambda: ledger.transfer_property(pid, a, c, ledger.balance(c).spendable), InsufficientFunds),
    ]:
        with pytest.raises(error):
            call()
        assert ledger.snapshot() == before


def test_transfer_drops_buyers_bid_and_resets_tenure(world):
    ledger, (a, b, c, d) = world
    pid = ledger.register_property(a, b, 1_000)
    ledger.advance_epoch()
    ledger.place_bid(c, pid, 1_500)
    ledger.place_bid(d, pid, 1_300)
    ledger.transfer_property(pid, a, c, 1_400)
    rec = ledger.properties.records[pid]
    assert rec.owner == c and rec.tenure == 0 and rec.escrow == 1_400
    assert [bid.bidder for bid in ledger.properties.ranked_bids(pid)] == [d]
    assert consistent(ledger)


def test_escrow_top_up_and_withdraw(world):
    ledger, (a, b, *_) = world
    pid = ledger.register_property(a, b, 1_000)
    ledger.adjust_escrow(pid, a, 250)
    assert ledger.balance(a).escrowed == 1_250
    ledger.adjust_escrow(pid, a, -250)
    assert ledger.balance(a).escrowed == 1_000
    assert consistent(ledger)
    with pytest.raises(ZeroAmount):
        ledger.adjust_escrow(pid, a, 0)
    with pytest.raises(NotOwner):
        ledger.adjust_escrow(pid, b, 10)
    with pytest.raises(InsufficientFunds):
        ledger.adjust_escrow(pid, a, ledger.balance(a).spendable + 1)


def test_raised_appraisal_can_be_covered(world):
    ledger, (a, b, *_) = world
    pid = ledger.register_property(a, b, 1_000)
    ledger.advance_epoch()
    ledger.appraise(pid, 1_200)
    ledger.advance_epoch()
    assert ledger.properties.records[pid].tenure == 0
    ledger.adjust_escrow(pid, a, 200)
    ledger.advance_epoch()
    assert ledger.properties.records[pid].tenure == 1


def test_under_escrowed_at_zero_tenure_forfeits_next_epoch(world):
    ledger, (a, b, *_) = world
    pid = ledger.register_property(a, b, 1_000)
    ledger.appraise(pid, 1_200)
    ledger.advance_epoch()
    assert pid not in ledger.properties.records


def test_bids(world):
    ledger, (a, b, c, _) = world
    pid = ledger.register_property(a, b, 100)
    with pytest.raises(OwnerCannotBid):
        ledger.place_bid(a, pid, 500)
    with pytest.raises(ZeroAmount):
        ledger.place_bid(b, pid, 0)
    with pytest.raises(UnknownProperty):
        ledger.place_bid(b, "f" * 64, 10)
    ledger.place_bid(b, pid, 300)
    ledger.place_bid(c, pid, 200)
    ledger.place_bid(b, pid, 150)  # replaces the earlier 300
    book = ledger.properties
    assert [(x.bidder, x.amount) for x in book.ranked_bids(pid)] == [(c, 200), (b, 150)]
    assert book.second_price(pid) == 150
    # the floor only ever pushes the appraisal up
    assert book.records[pid].appraised_value == 200
    ledger.appraise(pid, 100)
    assert book.records[pid].appraised_value == 150


def test_equal_bids_rank_by_arrival(world):
    ledger, (a, b, c, d) = world
    pid = ledger.register_property(a, b, 100)
    for bidder in (d, b, c):
        ledger.place_bid(bidder, pid, 500)
    assert [x.bidder for x in ledger.properties.ranked_bids(pid)] == [d, b, c]


def test_forfeit_skips_unfunded_bidder(world):
    ledger, (a, b, c, d) = world
    pid = ledger.register_property(a, b, 1_000)
    ledger.place_bid(c, pid, 5_000)
    ledger.place_bid(d, pid, 4_000)
    ledger.place_bid(b, pid, 3_000)
    # c cannot afford twice the 4,000 second price
    ledger.pay(c, [(a, ledger.balance(c).spendable - 7_999)])
    rec = ledger.properties.records[pid]
    assert rec.tenure == 0 and not rec.adequately_escrowed
    assert prop.forfeit(ledger, pid) == d
    assert rec.owner == d and rec.escrow == 3_000
    assert ledger.balance(a).escrowed == 0
    assert consistent(ledger)


def test_forfeit_last_bidder_pays_own_bid(world):
    ledger, (a, b, c, _) = world
    pid = ledger.register_property(a, b, 1_000)
    ledger.place_bid(c, pid, 1_100)
    assert prop.forfeit(ledger, pid) == c
    assert ledger.properties.records[pid].escrow == 1_100


def test_forfeit_without_funded_bidder_unregisters(world):
    ledger, (a, b, c, _) = world
    pid = ledger.register_property(a, b, 1_000)
    ledger.place_bid(c, pid, ledger.balance(c).spendable)
    spendable = ledger.balance(a).spendable
    assert prop.forfeit(ledger, pid) is None
    assert pid not in ledger.properties.records and pid not in ledger.properties.bids
    assert ledger.balance(a) == (spendable + 1_000, 0)
    assert consistent(ledger)


def test_expiring_escrow_decays_and_clock_falls():
    ledger = Ledger(ExpiringCoins(4, 10_000))
    a, b = ledger.enroll(b"a"), ledger.enroll(b"b")
    ledger.advance_epoch()
    pid = ledger.register_property(a, b, 1_000)
    ledger.advance_epoch()
    ledger.advance_epoch()
    assert ledger.properties.records[pid].tenure == 2
    ledger.advance_epoch()
    ledger.advance_epoch()  # the escrowed coin dies at epoch 5
    rec = ledger.properties.records[pid]
    assert rec.escrow == 0 and rec.tenure == 2
    assert ledger.conservation_gap() == 0 and escrow_matches_locks(ledger)
    ledger.advance_epoch()
    assert ledger.properties.records[pid].tenure == 1
