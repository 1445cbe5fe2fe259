"""Shared drivers for randomized ledger tests."""

from __future__ import annotations

import random
from collections import Counter

from popledger.errors import PopledgerError
from popledger.ledger import Ledger
from popledger.value_space import GENESIS_SIZE

OPS = ("enroll", "depart", "pay", "register", "transfer", "escrow", "bid", "appraise", "advance")
WEIGHTS = (8, 2, 40, 8, 6, 10, 8, 4, 6)
MAX_ACTIVE = 12


def democratic_books_balance(ledger: Ledger) -> bool:
    """spendable + escrowed + residual == size - 2**64, summed from scratch."""
    spendable = escrowed = 0
    for u in ledger.utxos.values():
        if u.lock is None:
            spendable += u.amount
        else:
            escrowed += u.amount
    return spendable + escrowed + ledger.value_space.residual == ledger.value_space.size - GENESIS_SIZE


def escrow_matches_locks(ledger: Ledger) -> bool:
    locked = Counter()
    for u in ledger.utxos.values():
        if u.lock is not None:
            locked[u.lock] += u.amount
    records = ledger.properties.records
    return set(locked) <= set(records) and all(locked[p] == r.escrow for p, r in records.items())


def random_operations(seed: int, n_ops: int, check_every: int = 1, atomicity_every: int = 97):
    """Drive a democratic ledger through ``n_ops`` random operations.

    Yields ``(ledger, op, error)`` after each one. Every ``atomicity_every``-th
    operation is snapshotted first; if it is rejected the snapshot must be
    unchanged.
    """
    rng = random.Random(seed)
    ledger = Ledger()
    serial = 0
    people: list[str] = []

    def anyone() -> str:
        return rng.choice(people)

    def fraction_of(owner: str, lo: float = 0.01, hi: float = 0.6) -> int:
        have = ledger.balance(owner).spendable
        return max(1, int(have * rng.uniform(lo, hi)))

    for i in range(n_ops):
        op = rng.choices(OPS, WEIGHTS)[0]
        if not people or (op == "enroll" and ledger.registry.active_count() >= MAX_ACTIVE):
            op = "enroll" if not people else "pay"
        props = sorted(ledger.properties.records)
        before = ledger.snapshot() if i % atomicity_every == 0 else None
        error = None
        try:
            if op == "enroll":
                people.append(ledger.enroll(f"{seed}:{serial}".encode()))
                serial += 1
            elif op == "depart":
                ledger.depart(anyone())
            elif op == "pay":
                payer = anyone()
                ledger.pay(payer, [(anyone(), fraction_of(payer))])
            elif op == "register":
                buyer = anyone()
                ledger.register_property(buyer, anyone(), fraction_of(buyer, 0.01, 0.3))
            elif op == "transfer" and props:
                pid = rng.choice(props)
                buyer = anyone()
                ledger.transfer_property(pid, ledger.properties.records[pid].owner, buyer,
                                         fraction_of(buyer, 0.01, 0.3))
            elif op == "escrow" and props:
                pid = rng.choice(props)
                rec = ledger.properties.records[pid]
                if rng.random() < 0.5:
                    ledger.adjust_escrow(pid, rec.owner, fraction_of(rec.owner, 0.01, 0.2))
                else:
                    ledger.adjust_escrow(pid, rec.owner, -max(1, rec.escrow // rng.randint(2, 20)))
            elif op == "bid" and props:
                pid = rng.choice(props)
                rec = ledger.properties.records[pid]
                ledger.place_bid(anyone(), pid, max(1, rec.appraised_value * rng.randint(50, 300) // 100))
            elif op == "appraise" and props:
                pid = rng.choice(props)
                rec = ledger.properties.records[pid]
                ledger.appraise(pid, max(1, rec.appraised_value * rng.randint(50, 250) // 100))
            elif op == "advance":
                ledger.advance_epoch()
        except PopledgerError as exc:
            error = exc
            if before is not None:
                assert ledger.snapshot() == before, f"rejected {op} mutated the ledger"
        if i % check_every == 0:
            yield ledger, op, error
