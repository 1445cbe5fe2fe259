"""Canonical text snapshots of a ledger.

Layout::

    popledger-v1
    [valuespace]
    key=value            one per line, keys sorted
    [registry]
    active enrolled=0 id=...
    [utxos]
    live amount=... expiry=- id=... lock=- mint=1 owner=...
    [properties]
    property appraised=... escrow=... id=... owner=... registered=0 tenure=3
    [log]
    event epoch=1 issuance=... participants=... per_participant=... residual=...
    [end]
    sha256=<digest of every preceding byte>

Integers are decimal, absent values are ``-``, fields within a record are
key-sorted and records are ordered by id (log entries by epoch). The trailing
digest makes truncation detectable.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction
from typing import Iterator

from .errors import MalformedSnapshot, PopledgerError, VersionMismatch
from .membership import ParticipantRegistry
from .policy import Democratic, DistributionEvent, ExpiringCoins
from .property import PropertyBook, PropertyRecord, StandingBid
from .value_space import ValueSpace

HEADER = "popledger-v1"
SECTIONS = ("valuespace", "registry", "utxos", "properties", "log")


def _opt(value: int | str | None) -> str:
    return "-" if value is None else str(value)


def _record(kind: str, **fields: object) -> str:
    body = " ".join(f"{k}={_opt(fields[k])}" for k in sorted(fields))  # type: ignore[arg-type]
    return f"{kind} {body}" if kind else body


def encode(ledger) -> bytes:
    vs = ledger.value_space
    policy = ledger.policy
    lines = [HEADER, "[valuespace]"]
    header = {
        "batch_size": policy.batch_size if isinstance(policy, ExpiringCoins) else None,
        "carry": f"{vs.carry.numerator}/{vs.carry.denominator}",
        "epoch": vs.epoch,
        "issued": ledger.issued,
        "ledger_epoch": ledger.epoch,
        "lifespan": vs.lifespan,
        "policy": policy.name,
        "policy_lifespan": policy.lifespan,
        "property_lifespan": ledger.property_lifespan,
        "residual": vs.residual,
        "size": vs.size,
    }
    lines += [f"{k}={_opt(header[k])}" for k in sorted(header)]  # type: ignore[arg-type]

    reg = ledger.registry
    lines.append("[registry]")
    rows = [(pid, _record("active", id=pid, enrolled=reg.enrollment_epoch[pid])) for pid in reg.active]
    rows += [
        (pid, _record("departed", id=pid, enrolled=reg.enrollment_epoch[pid], departed=epoch))
        for pid, epoch in reg.departed.items()
    ]
    lines += [line for _, line in sorted(rows)]

    lines.append("[utxos]")
    rows = [(u.id, _utxo_line("live", u)) for u in ledger.utxos.values()]
    rows += [(u.id, _utxo_line("expired", u)) for u in ledger.expired.values()]
    lines += [line for _, line in sorted(rows)]

    book = ledger.properties
    lines.append("[properties]")
    lines.append(_record("book", next_seq=book.next_seq))
    for pid in sorted(book.records):
        r = book.records[pid]
        lines.append(
            _record(
                "property",
                id=pid,
                owner=r.owner,
                appraised=r.appraised_value,
                escrow=r.escrow,
                tenure=r.tenure,
                registered=r.registered_epoch,
            )
        )
    for pid in sorted(book.bids):
        for b in sorted(book.bids[pid], key=lambda b: b.seq):
            lines.append(_record("bid", property=pid, bidder=b.bidder, amount=b.amount, epoch=b.epoch, seq=b.seq))

    lines.append("[log]")
    for e in ledger.distribution_log:
        lines.append(
            _record(
                "event",
                epoch=e.epoch,
                issuance=e.issuance,
                participants=e.participants,
                per_participant=e.per_participant,
                residual=e.residual_carried,
            )
        )
    lines.append("[end]")
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()
    return (body + f"sha256={digest}\n").encode()


def _utxo_line(kind: str, u) -> str:
    return _record(kind, id=u.id, owner=u.owner, amount=u.amount, mint=u.mint_epoch, expiry=u.expiry, lock=u.lock)


# -- decoding --------------------------------------------------------------


def _fields(line: str, kind: str) -> dict[str, str]:
    head, _, rest = line.partition(" ")
    if head != kind:
        raise MalformedSnapshot(f"expected a {kind!r} record, got {line!r}")
    out = {}
    for part in rest.split(" "):
        key, sep, value = part.partition("=")
        if not sep:
            raise MalformedSnapshot(f"bad field {part!r}")
        out[key] = value
    return out


def _int(value: str) -> int:
    if not value.isdigit():
        raise MalformedSnapshot(f"not a decimal integer: {value!r}")
    return int(value)


def _opt_int(value: str) -> int | None:
    return None if value == "-" else _int(value)


def _opt_str(value: str) -> str | None:
    return None if value == "-" else value


def _split_sections(lines: list[str]) -> dict[str, list[str]]:
    sections: dict[str, list[str]] = {}
    current = None
    for line in lines:
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            if current in sections:
                raise MalformedSnapshot(f"duplicate section {current}")
            sections[current] = []
        elif current is None:
            raise MalformedSnapshot(f"content before first section: {line!r}")
        else:
            sections[current].append(line)
    if tuple(sections) != SECTIONS:
        raise MalformedSnapshot(f"sections {list(sections)} != {list(SECTIONS)}")
    return sections


def decode(data: bytes):
    from .ledger import Ledger, Utxo

    try:
        text = data.decode()
    except UnicodeDecodeError as exc:
        raise MalformedSnapshot("snapshot is not UTF-8") from exc
    first = text.split("\n", 1)[0]
    if first != HEADER:
        if first.startswith("popledger-"):
            raise VersionMismatch(f"unsupported snapshot version {first!r}")
        raise MalformedSnapshot("missing popledger header")
    marker = "[end]\n"
    cut = text.rfind(marker)
    if cut < 0:
        raise MalformedSnapshot("snapshot truncated: no end marker")
    body, trailer = text[: cut + len(marker)], text[cut + len(marker) :]
    if trailer != f"sha256={hashlib.sha256(body.encode()).hexdigest()}\n":
        raise MalformedSnapshot("snapshot digest mismatch")

    lines = body.split("\n")[1:-2]
    try:
        return _build(_split_sections(lines), Ledger, Utxo)
    except MalformedSnapshot:
        raise
    except (PopledgerError, ValueError, KeyError, TypeError) as exc:
        raise MalformedSnapshot(f"invalid snapshot content: {exc}") from exc


def _iter_kind(lines: list[str]) -> Iterator[tuple[str, str]]:
    for line in lines:
        yield line.partition(" ")[0], line


def _build(sections: dict[str, list[str]], Ledger, Utxo):
    head = {}
    for line in sections["valuespace"]:
        key, sep, value = line.partition("=")
        if not sep:
            raise MalformedSnapshot(f"bad header line {line!r}")
        head[key] = value
    num, _, den = head["carry"].partition("/")
    if head["policy"] == "democratic":
        policy = Democratic(_int(head["policy_lifespan"]))
    elif head["policy"] == "expiring":
        policy = ExpiringCoins(_int(head["policy_lifespan"]), _opt_int(head["batch_size"]))
    else:
        raise MalformedSnapshot(f"unknown policy {head['policy']!r}")
    vs = ValueSpace(
        size=_int(head["size"]),
        epoch=_int(head["epoch"]),
        lifespan=_int(head["lifespan"]),
        residual=_int(head["residual"]),
        carry=Fraction(_int(num), _int(den)),
    )

    registry = ParticipantRegistry()
    for kind, line in _iter_kind(sections["registry"]):
        f = _fields(line, kind)
        pid = f["id"]
        if kind == "active":
            registry.active.add(pid)
        elif kind == "departed":
            registry.departed[pid] = _int(f["departed"])
        else:
            raise MalformedSnapshot(f"unknown registry record {kind!r}")
        registry.enrollment_epoch[pid] = _int(f["enrolled"])

    utxos, expired = {}, {}
    for kind, line in _iter_kind(sections["utxos"]):
        f = _fields(line, kind)
        u = Utxo(
            f["id"], f["owner"], _int(f["amount"]), _int(f["mint"]), _opt_int(f["expiry"]), _opt_str(f["lock"])
        )
        if u.amount <= 0:
            raise MalformedSnapshot(f"non-positive output {u.id}")
        if kind == "live":
            utxos[u.id] = u
        elif kind == "expired":
            expired[u.id] = u
        else:
            raise MalformedSnapshot(f"unknown utxo record {kind!r}")

    book = PropertyBook()
    for kind, line in _iter_kind(sections["properties"]):
        f = _fields(line, kind)
        if kind == "book":
            book.next_seq = _int(f["next_seq"])
        elif kind == "property":
            book.records[f["id"]] = PropertyRecord(
                f["id"],
                f["owner"],
                _int(f["appraised"]),
                _int(f["escrow"]),
                _int(f["tenure"]),
                _int(f["registered"]),
            )
        elif kind == "bid":
            bid = StandingBid(f["bidder"], f["property"], _int(f["amount"]), _int(f["epoch"]), _int(f["seq"]))
            book.bids.setdefault(bid.property_id, []).append(bid)
        else:
            raise MalformedSnapshot(f"unknown property record {kind!r}")

    log = []
    for kind, line in _iter_kind(sections["log"]):
        f = _fields(line, "event")
        log.append(
            DistributionEvent(
                _int(f["epoch"]),
                _int(f["issuance"]),
                _int(f["per_participant"]),
                _int(f["participants"]),
                _int(f["residual"]),
            )
        )

    ledger = Ledger(
        policy=policy,
        property_lifespan=_opt_int(head["property_lifespan"]),
        value_space=vs,
        registry=registry,
        utxos=utxos,
        expired=expired,
        epoch=_int(head["ledger_epoch"]),
        issued=_int(head["issued"]),
        distribution_log=log,
        properties=book,
    )
    if ledger.conservation_gap() != 0:
        raise MalformedSnapshot("snapshot violates conservation")
    for pid, rec in book.records.items():
        if sum(u.amount for u in ledger.locked_utxos(pid)) != rec.escrow:
            raise MalformedSnapshot(f"escrow of {pid} does not match its locked outputs")
    return ledger
