"""Exception hierarchy.

Every domain error carries a stable ``code`` (the class name) so the CLI can
map failures 1:1 to machine-parsable error lines.
"""

from __future__ import annotations


class PopledgerError(Exception):
    """Base class for all domain errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# value space
class InvalidConfig(PopledgerError):
    pass


class Overflow(PopledgerError):
    pass


class NoDistribution(PopledgerError):
    pass


# membership
class NoParticipants(PopledgerError):
    pass


class DuplicateEnrollment(PopledgerError):
    pass


class InvalidCredential(PopledgerError):
    pass


class ReenrollmentAfterDeparture(PopledgerError):
    pass


class UnknownParticipant(PopledgerError):
    pass


# ledger
class InvalidTransaction(PopledgerError):
    pass


class UnknownInput(InvalidTransaction):
    pass


class DoubleSpend(InvalidTransaction):
    pass


class Expired(InvalidTransaction):
    pass


class ValueMismatch(InvalidTransaction):
    pass


class NotOwner(InvalidTransaction):
    pass


class LockedInput(InvalidTransaction):
    pass


class EpochMismatch(InvalidTransaction):
    pass


class ZeroAmount(InvalidTransaction):
    pass


class InsufficientFunds(PopledgerError):
    pass


class MalformedSnapshot(PopledgerError):
    pass


class VersionMismatch(MalformedSnapshot):
    pass


# property
class ZeroPrice(PopledgerError):
    pass


class UnknownProperty(PopledgerError):
    pass


class BidFloorViolated(PopledgerError):
    pass


class WithdrawBelowAppraisal(PopledgerError):
    pass


class OwnerCannotBid(PopledgerError):
    pass


class SelfTransfer(PopledgerError):
    pass


# simulator
class InvalidScenario(PopledgerError):
    pass


class ZeroPopulation(PopledgerError):
    pass
