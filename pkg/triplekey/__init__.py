"""
TripleKey - triple-entry accounting engine.

Signed receipts in a hash-chained Shared Transaction Repository, per-party
views of the shared record, and the accounting reports built on them.
"""

from .config import EngineConfig
from .crypto_core import KeyPair, generate_keypair
from .errors import TripleKeyError
from .payment_modes import Mode
from .str_engine import ReceiptLog, SharedTransactionRepository, SignedReceipt, ValidatorSet

__version__ = "0.1.0"

__all__ = [
    "EngineConfig",
    "KeyPair",
    "Mode",
    "ReceiptLog",
    "SharedTransactionRepository",
    "SignedReceipt",
    "TripleKeyError",
    "ValidatorSet",
    "generate_keypair",
]
