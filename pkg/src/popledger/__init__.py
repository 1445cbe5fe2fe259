"""Ledger engine and simulator for an equal-share, expanding-value-space currency."""

from .errors import PopledgerError
from .ledger import Balance, EpochReport, Ledger, Transaction, TxOutput, Utxo
from .membership import HashAttestation, ParticipantRegistry
from .policy import Democratic, DistributionEvent, ExpiringCoins
from .value_space import GENESIS_SIZE, ConversionRate, ValueSpace, new_value_space

__all__ = [
    "Balance",
    "ConversionRate",
    "Democratic",
    "DistributionEvent",
    "EpochReport",
    "ExpiringCoins",
    "GENESIS_SIZE",
    "HashAttestation",
    "Ledger",
    "ParticipantRegistry",
    "PopledgerError",
    "Transaction",
    "TxOutput",
    "Utxo",
    "ValueSpace",
    "new_value_space",
]
