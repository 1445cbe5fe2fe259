"""Registry of enrolled persons.

Personhood is decided by a pluggable :class:`AttestationProvider`. The
shipped :class:`HashAttestation` is a stand-in that accepts any non-empty
credential and derives the participant id as its SHA-256 digest.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Protocol

from .errors import (
    DuplicateEnrollment,
    InvalidCredential,
    ReenrollmentAfterDeparture,
    UnknownParticipant,
)

ID_HEX_LEN = 64


def is_participant_id(value: str) -> bool:
    if len(value) != ID_HEX_LEN:
        return False
    try:
        bytes.fromhex(value)
    except ValueError:
        return False
    return value == value.lower()


def check_participant_id(value: str) -> str:
    if not isinstance(value, str) or not is_participant_id(value):
        raise UnknownParticipant(f"not a participant id: {value!r}")
    return value


class AttestationProvider(Protocol):
    def verify(self, credential: bytes) -> str:
        """Return the participant id for ``credential`` or raise InvalidCredential."""
        ...


class HashAttestation:
    def verify(self, credential: bytes) -> str:
        if not credential:
            raise InvalidCredential("empty credential")
        return hashlib.sha256(credential).hexdigest()


@dataclass
class ParticipantRegistry:
    active: set[str] = field(default_factory=set)
    enrollment_epoch: dict[str, int] = field(default_factory=dict)
    # id -> epoch of departure
    departed: dict[str, int] = field(default_factory=dict)
    provider: AttestationProvider = field(default_factory=HashAttestation, compare=False, repr=False)

    def enroll(self, credential: bytes, epoch: int) -> str:
        pid = self.provider.verify(credential)
        self.enroll_id(pid, epoch)
        return pid

    def enroll_id(self, pid: str, epoch: int) -> None:
        """Admit an already-attested id."""
        check_participant_id(pid)
        if pid in self.active:
            raise DuplicateEnrollment(f"{pid} is already enrolled")
        if pid in self.departed:
            raise ReenrollmentAfterDeparture(f"{pid} departed at epoch {self.departed[pid]}")
        self.active.add(pid)
        self.enrollment_epoch[pid] = epoch

    def depart(self, pid: str, epoch: int) -> None:
        if pid not in self.active:
            raise UnknownParticipant(f"{pid} is not an active participant")
        self.active.remove(pid)
        self.departed[pid] = epoch

    def active_count(self) -> int:
        return len(self.active)

    def sorted_active(self) -> list[str]:
        return sorted(self.active)

    def is_known(self, pid: str) -> bool:
        return pid in self.active or pid in self.departed
