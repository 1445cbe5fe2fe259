"""Deterministic UTXO ledger.

The ledger is a single-writer state machine. Every mutation (payment,
enrollment, escrow operation, epoch advance) validates completely before
touching state, so a rejected operation leaves the ledger unchanged.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from . import property as prop
from .errors import (
    DoubleSpend,
    EpochMismatch,
    Expired,
    InsufficientFunds,
    InvalidConfig,
    InvalidTransaction,
    LockedInput,
    NotOwner,
    UnknownInput,
    ValueMismatch,
    ZeroAmount,
)
from .membership import ParticipantRegistry, check_participant_id
from .policy import (
    Democratic,
    DistributionEvent,
    ExpiringCoins,
    PolicyKind,
    adoption_reward_factor,
    democratic_epoch,
    expiring_epoch,
    is_expired,
)
from .value_space import (
    GENESIS_SIZE,
    ConversionRate,
    ValueSpace,
    check_lifespan,
    check_poplets,
    conversion_rate,
    new_value_space,
)

WORLD_POPULATION = 7_630_000_000

TX_KINDS = ("coinbase", "payment", "escrow_lock", "escrow_release")


def sha256_hex(*parts: str) -> str:
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


@dataclass(frozen=True)
class Utxo:
    id: str
    owner: str
    amount: int
    mint_epoch: int
    expiry: int | None = None
    # property id when escrow-locked
    lock: str | None = None


@dataclass(frozen=True)
class TxOutput:
    owner: str
    amount: int
    lock: str | None = None


@dataclass(frozen=True)
class Transaction:
    kind: str
    inputs: tuple[str, ...]
    outputs: tuple[TxOutput, ...]
    epoch: int
    signer: str = ""
    # placeholder; only the owner match is checked
    signature: bytes = b""

    @property
    def txid(self) -> str:
        outs = ",".join(f"{o.owner}:{o.amount}:{o.lock or '-'}" for o in self.outputs)
        return sha256_hex(self.kind, str(self.epoch), ",".join(self.inputs), outs)


class Balance(NamedTuple):
    spendable: int
    escrowed: int


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    value_space_size: int
    issuance: int
    participants: int
    per_participant: int
    residual: int
    popcoin_rate: Fraction
    adoption_reward_factor: Fraction
    share_of_space_per_participant: Fraction


@dataclass
class Ledger:
    policy: PolicyKind = field(default_factory=Democratic)
    property_lifespan: int | None = None
    value_space: ValueSpace = None  # type: ignore[assignment]
    registry: ParticipantRegistry = field(default_factory=ParticipantRegistry)
    utxos: dict[str, Utxo] = field(default_factory=dict)
    expired: dict[str, Utxo] = field(default_factory=dict)
    epoch: int = 0
    # Poplets ever created by coinbase, including what sits in the residual
    issued: int = 0
    distribution_log: list[DistributionEvent] = field(default_factory=list)
    properties: prop.PropertyBook = field(default_factory=prop.PropertyBook)

    def __post_init__(self) -> None:
        if self.value_space is None:
            self.value_space = new_value_space(self.policy.lifespan)
        if self.property_lifespan is not None:
            check_lifespan(self.property_lifespan)
            if not isinstance(self.policy, Democratic):
                raise InvalidConfig("a separate property lifespan needs the democratic policy")
        self._lock = threading.RLock()
        self._by_owner: dict[str, set[str]] = {}
        self._by_lock: dict[str, set[str]] = {}
        for u in self.utxos.values():
            self._index(u)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ledger):
            return NotImplemented
        return self._state() == other._state()

    def _state(self) -> tuple:
        return (
            self.policy,
            self.property_lifespan,
            self.value_space,
            self.registry,
            self.utxos,
            self.expired,
            self.epoch,
            self.issued,
            self.distribution_log,
            self.properties,
        )

    # -- queries -----------------------------------------------------------

    @property
    def rate(self) -> ConversionRate | None:
        if not self.distribution_log:
            return None
        last = self.distribution_log[-1]
        return conversion_rate(last.issuance, last.participants, last.epoch)

    def balance(self, owner: str) -> Balance:
        spendable = escrowed = 0
        for uid in self._by_owner.get(owner, ()):
            u = self.utxos[uid]
            if u.lock is None:
                spendable += u.amount
            else:
                escrowed += u.amount
        return Balance(spendable, escrowed)

    def spendable_utxos(self, owner: str) -> list[Utxo]:
        coins = [self.utxos[uid] for uid in self._by_owner.get(owner, ())]
        return sorted((u for u in coins if u.lock is None), key=lambda u: (u.mint_epoch, u.id))

    def locked_utxos(self, property_id: str) -> list[Utxo]:
        return sorted((self.utxos[uid] for uid in self._by_lock.get(property_id, ())), key=lambda u: u.id)

    def totals(self) -> Balance:
        spendable = escrowed = 0
        for u in self.utxos.values():
            if u.lock is None:
                spendable += u.amount
            else:
                escrowed += u.amount
        return Balance(spendable, escrowed)

    def extant_total(self) -> int:
        return sum(u.amount for u in self.utxos.values())

    def conservation_gap(self) -> int:
        """Zero when every issued Poplet is accounted for."""
        expired = sum(u.amount for u in self.expired.values())
        return self.issued - (self.extant_total() + expired + self.value_space.residual)

    # -- membership --------------------------------------------------------

    def enroll(self, credential: bytes) -> str:
        with self._lock:
            return self.registry.enroll(credential, self.epoch)

    def depart(self, pid: str) -> None:
        with self._lock:
            self.registry.depart(pid, self.epoch)

    # -- payments ----------------------------------------------------------

    def apply_payment(self, tx: Transaction) -> list[str]:
        """Validate and commit a payment; returns the new output ids."""
        with self._lock:
            if tx.kind != "payment":
                raise InvalidTransaction(f"only payments may be submitted, got {tx.kind!r}")
            if tx.epoch != self.epoch:
                raise EpochMismatch(f"transaction for epoch {tx.epoch}, ledger at {self.epoch}")
            if not tx.inputs:
                raise InvalidTransaction("payment has no inputs")
            coins = self._spendable_inputs(tx.inputs, tx.signer)
            self._check_outputs(tx.outputs)
            if any(o.lock is not None for o in tx.outputs):
                raise InvalidTransaction("payments cannot create escrow-locked outputs")
            total_in = sum(u.amount for u in coins)
            total_out = sum(o.amount for o in tx.outputs)
            if total_in != total_out:
                raise ValueMismatch(f"inputs {total_in} != outputs {total_out}")
            return self._commit(tx, coins)

    def pay(self, signer: str, outputs: Sequence[tuple[str, int]]) -> Transaction:
        """Build a payment from the signer's oldest coins, with change, and apply it."""
        with self._lock:
            outs = [TxOutput(owner, amount) for owner, amount in outputs]
            self._check_outputs(outs)
            need = sum(o.amount for o in outs)
            coins = self.select_coins(signer, need)
            change = sum(u.amount for u in coins) - need
            if change:
                outs.append(TxOutput(signer, change))
            tx = Transaction("payment", tuple(u.id for u in coins), tuple(outs), self.epoch, signer)
            self.apply_payment(tx)
            return tx

    def select_coins(self, owner: str, amount: int) -> list[Utxo]:
        picked: list[Utxo] = []
        total = 0
        for u in self.spendable_utxos(owner):
            if total >= amount:
                break
            picked.append(u)
            total += u.amount
        if total < amount or not picked:
            raise InsufficientFunds(f"{owner} has {total} spendable, needs {amount}")
        return picked

    def _spendable_inputs(self, ids: Iterable[str], signer: str) -> list[Utxo]:
        coins: list[Utxo] = []
        seen: set[str] = set()
        for uid in ids:
            if uid in seen:
                raise DoubleSpend(f"input {uid} used twice")
            seen.add(uid)
            if uid in self.expired:
                raise Expired(f"input {uid} expired at epoch {self.expired[uid].expiry}")
            u = self.utxos.get(uid)
            if u is None:
                raise UnknownInput(f"no unspent output {uid}")
            if u.owner != signer:
                raise NotOwner(f"input {uid} is not owned by the signer")
            if u.lock is not None:
                raise LockedInput(f"input {uid} is escrowed for property {u.lock}")
            if is_expired(u, self.epoch):
                raise Expired(f"input {uid} expired at epoch {u.expiry}")
            coins.append(u)
        return coins

    @staticmethod
    def _check_outputs(outputs: Iterable[TxOutput]) -> None:
        for o in outputs:
            check_participant_id(o.owner)
            if not isinstance(o.amount, int) or o.amount <= 0:
                raise ZeroAmount(f"output amounts must be positive, got {o.amount!r}")
            check_poplets(o.amount)

    # -- commit primitives (no validation beyond what callers did) ----------

    def _index(self, u: Utxo) -> None:
        self._by_owner.setdefault(u.owner, set()).add(u.id)
        if u.lock is not None:
            self._by_lock.setdefault(u.lock, set()).add(u.id)

    def _unindex(self, u: Utxo) -> None:
        self._by_owner[u.owner].discard(u.id)
        if not self._by_owner[u.owner]:
            del self._by_owner[u.owner]
        if u.lock is not None:
            self._by_lock[u.lock].discard(u.id)
            if not self._by_lock[u.lock]:
                del self._by_lock[u.lock]

    def _commit(self, tx: Transaction, coins: Sequence[Utxo], expiry: int | None = None) -> list[str]:
        if coins and isinstance(self.policy, ExpiringCoins):
            expiry = min(u.expiry for u in coins if u.expiry is not None)
        for u in coins:
            del self.utxos[u.id]
            self._unindex(u)
        txid = tx.txid
        created = []
        for i, o in enumerate(tx.outputs):
            u = Utxo(sha256_hex(txid, str(i)), o.owner, o.amount, self.epoch, expiry, o.lock)
            self.utxos[u.id] = u
            self._index(u)
            created.append(u.id)
        return created

    def _internal_tx(self, kind: str, coins: Sequence[Utxo], outputs: Sequence[TxOutput], signer: str) -> list[str]:
        outs = tuple(o for o in outputs if o.amount > 0)
        tx = Transaction(kind, tuple(u.id for u in coins), outs, self.epoch, signer)
        return self._commit(tx, coins)

    # -- epochs ------------------------------------------------------------

    def advance_epoch(self, world_population: int = WORLD_POPULATION) -> EpochReport:
        with self._lock:
            participants = self.registry.sorted_active()
            new_epoch = self.epoch + 1
            prior_residual = self.value_space.residual
            if isinstance(self.policy, Democratic):
                escrowed = self.totals().escrowed if self.property_lifespan else 0
                vs, event, coinbase = democratic_epoch(
                    self.value_space, participants, escrowed, self.property_lifespan
                )
                mints = [(pid, amount, None) for pid, amount in coinbase]
                dying: list[Utxo] = []
            else:
                vs, event, mints, dying = expiring_epoch(
                    self.value_space,
                    self.utxos.values(),
                    new_epoch,
                    self.policy.batch,
                    participants,
                    self.policy.lifespan,
                )

            for u in dying:
                del self.utxos[u.id]
                self._unindex(u)
                self.expired[u.id] = u
                if u.lock is not None:
                    self.properties.records[u.lock].escrow -= u.amount
            self.epoch = new_epoch
            self.value_space = vs
            self.issued += event.issuance
            if mints:
                tx = Transaction("coinbase", (), tuple(TxOutput(pid, amt) for pid, amt, _ in mints), new_epoch)
                self._commit(tx, (), mints[0][2])
            self.distribution_log.append(event)
            prop.tick_tenure(self)

            size = vs.size if isinstance(self.policy, Democratic) else self.extant_total()
            assert event.issuance + prior_residual == event.per_participant * event.participants + vs.residual
            return EpochReport(
                epoch=new_epoch,
                value_space_size=size,
                issuance=event.issuance,
                participants=event.participants,
                per_participant=event.per_participant,
                residual=vs.residual,
                popcoin_rate=self.rate.poplets_per_popcoin,  # type: ignore[union-attr]
                adoption_reward_factor=adoption_reward_factor(world_population, event.participants),
                share_of_space_per_participant=Fraction(event.per_participant, size) if size else Fraction(0),
            )

    # -- property (see popledger.property) -----------------------------------

    def register_property(self, buyer: str, seller: str, price: int) -> str:
        with self._lock:
            return prop.register_property(self, buyer, seller, price)

    def transfer_property(self, property_id: str, seller: str, buyer: str, price: int) -> None:
        with self._lock:
            prop.transfer_property(self, property_id, seller, buyer, price)

    def adjust_escrow(self, property_id: str, owner: str, delta: int) -> None:
        with self._lock:
            prop.adjust_escrow(self, property_id, owner, delta)

    def place_bid(self, bidder: str, property_id: str, amount: int) -> None:
        with self._lock:
            prop.place_bid(self, bidder, property_id, amount)

    def appraise(self, property_id: str, new_value: int) -> None:
        with self._lock:
            prop.appraise(self, property_id, new_value)

    # -- persistence -------------------------------------------------------

    def snapshot(self) -> bytes:
        from .snapshot import encode

        with self._lock:
            return encode(self)

    @classmethod
    def restore(cls, data: bytes) -> Ledger:
        from .snapshot import decode

        return decode(data)


def genesis_issued(ledger: Ledger) -> int:
    """Independent view of issuance for the democratic policy: growth of the space."""
    return ledger.value_space.size - GENESIS_SIZE
