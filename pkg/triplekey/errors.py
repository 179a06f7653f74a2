"""
TripleKey - Error Types

Every failure the engine reports is a TripleKeyError.  Errors are grouped by
the layer that raises them so callers can catch a whole family at once
(e.g. ``except PaymentError``).
"""


class TripleKeyError(Exception):
    """Root of all engine errors."""


# ---------------------------------------------------------------------------
# crypto_core
# ---------------------------------------------------------------------------

class CryptoError(TripleKeyError):
    pass


class UnencodableValue(CryptoError, ValueError):
    """A record field holds a value outside its declared semantic type."""


class InvalidEncoding(CryptoError, ValueError):
    """Bytes are not valid UTF-8 or not a canonical record encoding."""


class KeyInvalid(CryptoError):
    """Secret key material is corrupt."""


class MalformedKey(CryptoError, ValueError):
    pass


class MalformedSignature(CryptoError, ValueError):
    pass


# ---------------------------------------------------------------------------
# rea_model
# ---------------------------------------------------------------------------

class ModelError(TripleKeyError):
    pass


class AgentMismatch(ModelError, ValueError):
    """The give/take agents of an exchange do not cross-match."""


class InvariantViolation(ModelError, ValueError):
    pass


# ---------------------------------------------------------------------------
# str_engine
# ---------------------------------------------------------------------------

class ProtocolError(TripleKeyError):
    pass


class NotAParty(ProtocolError):
    pass


class WrongState(ProtocolError):
    pass


class Expired(ProtocolError):
    pass


class SignatureInvalid(ProtocolError):
    pass


class QuorumNotMet(ProtocolError):
    pass


class Conflict(ProtocolError):
    """Another receipt already consumed this draft (or this entry)."""


class ChainBroken(ProtocolError):
    def __init__(self, message: str, first_bad_seq: int | None = None):
        super().__init__(message)
        self.first_bad_seq = first_bad_seq


class ModeMismatch(ProtocolError):
    """A log written under one payment mode was opened under another."""


# ---------------------------------------------------------------------------
# payment_modes
# ---------------------------------------------------------------------------

class PaymentError(TripleKeyError):
    pass


class MissingReceiverSignature(PaymentError):
    pass


class DoubleSpend(PaymentError):
    pass


class InsufficientInput(PaymentError):
    pass


class UnknownOutpoint(PaymentError):
    pass


class NotOwner(PaymentError):
    pass


class NotPayee(PaymentError):
    pass


class NotValidator(PaymentError):
    pass


# ---------------------------------------------------------------------------
# views
# ---------------------------------------------------------------------------

class ViewError(TripleKeyError):
    pass


class UnknownDimension(ViewError, ValueError):
    pass


class UnmappedResourceKind(ViewError):
    pass


# ---------------------------------------------------------------------------
# accounting
# ---------------------------------------------------------------------------

class AccountingError(TripleKeyError):
    pass


class NonPositiveCost(AccountingError, ValueError):
    pass


class EmptyInventory(AccountingError):
    """Nothing left to sell ("insufficient balance")."""


class SelfPurchase(AccountingError):
    """Owner cannot purchase own units."""


class NotHolder(AccountingError):
    """Only the inventory holder can add units."""


class UnmatchedPrice(AccountingError, ValueError):
    pass


class InsufficientPoints(AccountingError, ValueError):
    pass


class NonMonotonicTime(AccountingError, ValueError):
    pass


# ---------------------------------------------------------------------------
# harness
# ---------------------------------------------------------------------------

class HarnessError(TripleKeyError):
    pass


class ScriptInvalid(HarnessError, ValueError):
    pass
