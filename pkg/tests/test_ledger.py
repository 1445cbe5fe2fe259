import hashlib
import threading

import pytest

from helpers import democratic_books_balance
from popledger.errors import (
    DoubleSpend,
    EpochMismatch,
    Expired,
    InsufficientFunds,
    InvalidConfig,
    InvalidTransaction,
    LockedInput,
    MalformedSnapshot,
    NoParticipants,
    NotOwner,
    UnknownInput,
    UnknownParticipant,
    ValueMismatch,
    VersionMismatch,
    ZeroAmount,
)
from popledger.ledger import Ledger, Transaction, TxOutput, Utxo, genesis_issued
from popledger.policy import ExpiringCoins
from popledger.value_space import GENESIS_SIZE


@pytest.fixture
def funded():
    ledger = Ledger()
    a, b = ledger.enroll(b"a"), ledger.enroll(b"b")
    ledger.advance_epoch()
    return ledger, a, b


def resign(body: bytes) -> bytes:
    text = body.decode()
    head = text[: text.rindex("sha256=")]
    return (head + f"sha256={hashlib.sha256(head.encode()).hexdigest()}\n").encode()


def test_advance_needs_participants():
    ledger = Ledger()
    with pytest.raises(NoParticipants):
        ledger.advance_epoch()
    assert ledger.epoch == 0


def test_first_epoch_income(funded):
    ledger, a, b = funded
    issuance = GENESIS_SIZE // 49
    assert ledger.balance(a) == (issuance // 2, 0)
    assert ledger.value_space.residual == issuance % 2
    assert ledger.conservation_gap() == 0 and democratic_books_balance(ledger)
    assert genesis_issued(ledger) == ledger.issued


def test_report_fields(funded):
    ledger, a, _ = funded
    report = ledger.advance_epoch(world_population=10)
    assert report.epoch == 2 and report.participants == 2
    assert report.adoption_reward_factor == 5
    assert report.share_of_space_per_participant * report.value_space_size == report.per_participant


def test_pay_with_change(funded):
    ledger, a, b = funded
    have = ledger.balance(a).spendable
    tx = ledger.pay(a, [(b, 1000)])
    assert ledger.balance(a).spendable == have - 1000
    assert ledger.balance(b).spendable == have + 1000
    assert len(tx.outputs) == 2 and tx.outputs[1] == TxOutput(a, have - 1000)


def test_pay_uses_oldest_coins_first(funded):
    ledger, a, b = funded
    ledger.advance_epoch()
    first, second = ledger.spendable_utxos(a)
    assert first.mint_epoch == 1 and second.mint_epoch == 2
    tx = ledger.pay(a, [(b, 5)])
    assert tx.inputs == (first.id,)


def test_insufficient_funds(funded):
    ledger, a, b = funded
    with pytest.raises(InsufficientFunds):
        ledger.pay(a, [(b, ledger.balance(a).spendable + 1)])


def test_payment_validation(funded):
    ledger, a, b = funded
    (coin,) = ledger.spendable_utxos(a)
    (other,) = ledger.spendable_utxos(b)

    def tx(inputs, outputs, epoch=1, signer=a, kind="payment"):
        return Transaction(kind, tuple(inputs), tuple(outputs), epoch, signer)

    whole = [TxOutput(b, coin.amount)]
    cases = [
        (tx([coin.id], whole, kind="coinbase"), InvalidTransaction),
        (tx([coin.id], whole, epoch=0), EpochMismatch),
        (tx([], whole), InvalidTransaction),
        (tx([coin.id, coin.id], [TxOutput(b, 2 * coin.amount)]), DoubleSpend),
        (tx(["f" * 64], whole), UnknownInput),
        (tx([other.id], whole), NotOwner),
        (tx([coin.id], [TxOutput(b, coin.amount - 1)]), ValueMismatch),
        (tx([coin.id], [TxOutput(b, 0), TxOutput(b, coin.amount)]), ZeroAmount),
        (tx([coin.id], [TxOutput("carol", coin.amount)]), UnknownParticipant),
        (tx([coin.id], [TxOutput(b, coin.amount, lock="x")]), InvalidTransaction),
    ]
    before = ledger.snapshot()
    for bad, error in cases:
        with pytest.raises(error):
            ledger.apply_payment(bad)
        assert ledger.snapshot() == before
    ledger.apply_payment(tx([coin.id], whole))
    with pytest.raises(UnknownInput):
        ledger.apply_payment(tx([coin.id], whole))


def test_locked_input_rejected(funded):
    ledger, a, b = funded
    pid = ledger.register_property(a, b, 100)
    (locked,) = ledger.locked_utxos(pid)
    bad = Transaction("payment", (locked.id,), (TxOutput(b, 100),), 1, a)
    with pytest.raises(LockedInput):
        ledger.apply_payment(bad)


def test_expiring_coins_die_on_schedule():
    ledger = Ledger(ExpiringCoins(3, 300))
    a = ledger.enroll(b"a")
    ledger.advance_epoch()
    (coin,) = ledger.spendable_utxos(a)
    assert coin.expiry == 4
    ledger.advance_epoch()
    ledger.advance_epoch()
    assert coin.id in ledger.utxos
    ledger.advance_epoch()
    assert coin.id not in ledger.utxos and coin.id in ledger.expired
    with pytest.raises(Expired):
        ledger.apply_payment(Transaction("payment", (coin.id,), (TxOutput(a, 300),), 4, a))
    assert ledger.extant_total() == 900 and ledger.conservation_gap() == 0


def test_change_keeps_earliest_expiry():
    ledger = Ledger(ExpiringCoins(5, 100))
    a, b = ledger.enroll(b"a"), ledger.enroll(b"b")
    ledger.advance_epoch()
    ledger.advance_epoch()
    tx = ledger.pay(a, [(b, 70)])
    assert len(tx.inputs) == 2
    # both the payment and the change inherit the sooner expiry
    assert [(u.amount, u.expiry) for u in ledger.spendable_utxos(a)] == [(30, 6)]
    assert sorted((u.amount, u.expiry) for u in ledger.spendable_utxos(b)) == [(50, 6), (50, 7), (70, 6)]


def test_separate_property_lifespan_needs_democratic():
    with pytest.raises(InvalidConfig):
        Ledger(ExpiringCoins(), property_lifespan=10)


def test_property_lifespan_speeds_up_issuance(funded):
    fast = Ledger(property_lifespan=5)
    a, b = fast.enroll(b"a"), fast.enroll(b"b")
    fast.advance_epoch()
    fast.register_property(a, b, fast.balance(a).spendable // 2)
    ledger, *_ = funded
    assert fast.advance_epoch().issuance > ledger.advance_epoch().issuance
    assert democratic_books_balance(fast)


def test_snapshot_round_trip(funded):
    ledger, a, b = funded
    pid = ledger.register_property(a, b, 500)
    ledger.place_bid(b, pid, 700)
    ledger.depart(b)
    ledger.advance_epoch()
    data = ledger.snapshot()
    restored = Ledger.restore(data)
    assert restored == ledger
    assert restored.snapshot() == data
    assert restored.balance(a) == ledger.balance(a)


def test_snapshot_of_expiring_ledger():
    ledger = Ledger(ExpiringCoins(2, 10))
    ledger.enroll(b"a")
    for _ in range(4):
        ledger.advance_epoch()
    assert ledger.expired
    assert Ledger.restore(ledger.snapshot()) == ledger


def test_snapshot_ten_thousand_utxos():
    ledger = Ledger()
    for i in range(100):
        ledger.enroll(str(i).encode())
    for _ in range(100):
        ledger.advance_epoch()
    assert len(ledger.utxos) == 10_000
    data = ledger.snapshot()
    assert Ledger.restore(data).snapshot() == data


def test_snapshot_truncation_detected(funded):
    data = funded[0].snapshot()
    for cut in (len(data) - 1, len(data) // 2, 10):
        with pytest.raises(MalformedSnapshot):
            Ledger.restore(data[:cut])


def test_snapshot_tamper_detected(funded):
    data = funded[0].snapshot()
    with pytest.raises(MalformedSnapshot):
        Ledger.restore(data.replace(b"lifespan=50", b"lifespan=51", 1))


def test_snapshot_conservation_checked(funded):
    ledger, a, _ = funded
    (coin,) = ledger.spendable_utxos(a)
    forged = ledger.snapshot().replace(f"amount={coin.amount}".encode(), f"amount={coin.amount + 1}".encode())
    with pytest.raises(MalformedSnapshot):
        Ledger.restore(resign(forged))


def test_snapshot_version_mismatch(funded):
    data = funded[0].snapshot().replace(b"popledger-v1", b"popledger-v2", 1)
    with pytest.raises(VersionMismatch):
        Ledger.restore(resign(data))
    with pytest.raises(MalformedSnapshot):
        Ledger.restore(b"not a snapshot\n")


def test_concurrent_payments_serialize(funded):
    ledger, a, b = funded
    total = ledger.totals()

    def worker(payer, payee):
        for _ in range(50):
            try:
                ledger.pay(payer, [(payee, 3)])
            except InsufficientFunds:
                pass

    threads = [threading.Thread(target=worker, args=p) for p in [(a, b), (b, a)] * 4]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert ledger.totals() == total
    assert ledger.balance(a).spendable + ledger.balance(b).spendable == total.spendable


def test_utxo_is_frozen():
    u = Utxo("x", "y", 1, 0)
    with pytest.raises(AttributeError):
        u.amount = 2
