"""
TripleKey - Shared Transaction Repository

Drives each draft through offer -> acceptance -> validation, appends the
triple-signed receipt to a hash-chained log, and forwards it to both parties.

Signing scopes
  offer / accept   entry bytes + draft_id
  validators       entry bytes + draft_id + seq + prev_digest

The log has one serialized append point (the repository lock); reads of a
committed prefix never block.  The UTXO index and acknowledgment table are
rebuilt from the log whenever the repository is opened.
"""

from __future__ import annotations

import enum
import functools
import logging
import os
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Protocol, Sequence

from .clock import Clock, SystemClock
from .config import DEFAULT_DRAFT_TTL, EngineConfig
from .crypto_core import (
    ZERO_DIGEST,
    KeyPair,
    Signature,
    canonical_decode,
    canonical_encode,
    digest_hex,
    sign,
    verify_embedded,
)
from .errors import (
    ChainBroken,
    Conflict,
    CryptoError,
    Expired,
    InvalidEncoding,
    InvariantViolation,
    MissingReceiverSignature,
    ModeMismatch,
    NotAParty,
    NotValidator,
    QuorumNotMet,
    SignatureInvalid,
    WrongState,
)
from .payment_modes import (
    Acknowledgment,
    AcknowledgmentTable,
    Mode,
    UtxoEntry,
    UtxoIndex,
    acknowledge_by_spend,
    check_cash_entry,
    check_cheque,
    check_shape,
    coinbase_entry,
)
from .rea_model import (
    COINBASE_AGENT,
    AgentDirectory,
    Outpoint,
    SharedEntry,
    check_entry,
    check_resources,
    strip_stubs,
)

logger = logging.getLogger("TripleKey.STR")


# ---------------------------------------------------------------------------
# Drafts
# ---------------------------------------------------------------------------

class DraftState(str, enum.Enum):
    DRAFTED = "Drafted"
    OFFERED = "Offered"
    ACCEPTED = "Accepted"
    VALIDATED = "Validated"
    REJECTED = "Rejected"
    EXPIRED = "Expired"


@dataclass(frozen=True)
class TransactionDraft:
    draft_id: str
    entry: SharedEntry
    state: DraftState
    expires_at: int
    offer_sig: Optional[Signature] = None
    accept_sig: Optional[Signature] = None


@dataclass(frozen=True)
class _PartyScope:
    draft_id: str
    entry: SharedEntry


@dataclass(frozen=True)
class _ValidatorScope:
    draft_id: str
    seq: int
    prev_digest: str
    entry: SharedEntry


def party_payload(draft_id: str, entry: SharedEntry) -> bytes:
    return canonical_encode(_PartyScope(draft_id, entry))


def validator_payload(draft_id: str, seq: int, prev_digest: str, entry: SharedEntry) -> bytes:
    return canonical_encode(_ValidatorScope(draft_id, seq, prev_digest, entry))


def new_draft(entry: SharedEntry, clock: Clock, ttl: int = DEFAULT_DRAFT_TTL) -> TransactionDraft:
    check_entry(entry)
    now = clock.now()
    draft_id = digest_hex(f"draft:{entry.entry_id}:{now}".encode("utf-8"))
    return TransactionDraft(draft_id, entry, DraftState.DRAFTED, expires_at=now + ttl)


def offer(draft: SharedEntry | TransactionDraft, initiator_key: KeyPair, *, clock: Clock,
          ttl: int = DEFAULT_DRAFT_TTL, directory: Optional[AgentDirectory] = None) -> TransactionDraft:
    """Initiator signs the entry; the draft becomes Offered.

    With a *directory*, instrument events are checked against their registered
    contract digest before anything is signed.
    """
    if isinstance(draft, SharedEntry):
        draft = new_draft(draft, clock, ttl)
    if draft.state is not DraftState.DRAFTED:
        raise WrongState(f"Cannot offer a draft in state {draft.state.value}")
    if not draft.entry.mentions(initiator_key.key_id):
        raise NotAParty(f"{initiator_key.key_id[:12]} is not named in the entry")
    check_entry(draft.entry)
    if directory is not None:
        check_resources(draft.entry, directory)
    if clock.now() > draft.expires_at:
        raise Expired(f"Draft {draft.draft_id[:12]} expired at {draft.expires_at}")
    sig = sign(initiator_key, party_payload(draft.draft_id, draft.entry))
    return replace(draft, state=DraftState.OFFERED, offer_sig=sig)


def accept(draft: TransactionDraft, counterparty_key: KeyPair, *, clock: Clock) -> TransactionDraft:
    """The counterparty accepts by countersigning."""
    if draft.state is not DraftState.OFFERED:
        raise WrongState(f"Cannot accept a draft in state {draft.state.value}")
    now = clock.now()
    if now > draft.expires_at:
        raise Expired(f"Draft {draft.draft_id[:12]} expired at {draft.expires_at}")
    assert draft.offer_sig is not None
    signer = counterparty_key.key_id
    if not draft.entry.mentions(signer) or signer == draft.offer_sig.signer:
        raise NotAParty(f"{signer[:12]} is not the counterparty")
    if not _sig_ok(draft.offer_sig, party_payload(draft.draft_id, draft.entry)):
        raise SignatureInvalid("Offer signature does not verify")
    sig = sign(counterparty_key, party_payload(draft.draft_id, draft.entry))
    return replace(draft, state=DraftState.ACCEPTED, accept_sig=sig)


def reject(draft: TransactionDraft) -> TransactionDraft:
    if draft.state in (DraftState.VALIDATED, DraftState.REJECTED, DraftState.EXPIRED):
        raise WrongState(f"Cannot reject a draft in state {draft.state.value}")
    return replace(draft, state=DraftState.REJECTED)


def expire(draft: TransactionDraft, now: int) -> TransactionDraft:
    """Move a lapsed draft to Expired; drafts still within their window are returned unchanged."""
    if draft.state is DraftState.VALIDATED:
        raise WrongState("A validated draft cannot expire")
    if now > draft.expires_at and draft.state is not DraftState.REJECTED:
        return replace(draft, state=DraftState.EXPIRED)
    return draft


def settle(draft: TransactionDraft, receipt: "SignedReceipt") -> TransactionDraft:
    if receipt.draft_id != draft.draft_id:
        raise Conflict("Receipt belongs to another draft")
    return replace(draft, state=DraftState.VALIDATED)


def encode_draft(draft: TransactionDraft) -> bytes:
    return canonical_encode(draft)


def decode_draft(data: bytes) -> TransactionDraft:
    return canonical_decode(TransactionDraft, data)


def _sig_ok(sig: Signature, payload: bytes) -> bool:
    try:
        return verify_embedded(sig, payload)
    except CryptoError:
        return False


# ---------------------------------------------------------------------------
# Receipts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignedReceipt:
    receipt_id: str
    seq: int
    prev_digest: str
    committed_at: int
    mode: Mode
    draft_id: str
    entry: SharedEntry
    offer_sig: Signature
    accept_sig: Optional[Signature] = None
    validator_sigs: tuple[Signature, ...] = ()

    def encode(self) -> bytes:
        return canonical_encode(self)

    @property
    def digest(self) -> str:
        return digest_hex(self.encode())

    @classmethod
    def decode(cls, data: bytes) -> "SignedReceipt":
        return canonical_decode(cls, data)


def compute_receipt_id(receipt: SignedReceipt) -> str:
    """Digest over every receipt field except receipt_id itself."""
    return digest_hex(canonical_encode(replace(receipt, receipt_id="")))


def _expected_offer_signer(receipt: SignedReceipt) -> Optional[str]:
    entry = receipt.entry
    if entry.cash is not None and entry.cash.is_coinbase:
        return entry.payee
    if receipt.mode in (Mode.DIGITAL_CASH, Mode.DIGITAL_CHEQUE):
        return entry.payer
    return None


def verify_receipt(receipt: SignedReceipt, quorum: int = 1,
                   trusted_validators: Optional[frozenset[str]] = None) -> Optional[str]:
    """Return None if the receipt is internally sound, else the reason it is not."""
    if receipt.receipt_id != compute_receipt_id(receipt):
        return "receipt_id does not match receipt content"
    entry = receipt.entry
    try:
        check_entry(entry)
        check_shape(receipt.mode, entry)
    except InvariantViolation as e:
        return f"entry: {e}"

    scope = party_payload(receipt.draft_id, entry)
    offer_sig = receipt.offer_sig
    if not _sig_ok(offer_sig, scope):
        return "offer signature does not verify"
    expected = _expected_offer_signer(receipt)
    if expected is not None and offer_sig.signer != expected:
        return "offer signed by the wrong party"
    if not entry.mentions(offer_sig.signer):
        return "offer signed by a non-party"

    if receipt.accept_sig is not None:
        accept_sig = receipt.accept_sig
        if not _sig_ok(accept_sig, scope):
            return "accept signature does not verify"
        if not entry.mentions(accept_sig.signer) or accept_sig.signer == offer_sig.signer:
            return "accept signed by a non-counterparty"
    elif receipt.mode is not Mode.DIGITAL_CASH:
        return "missing acceptance signature"

    vscope = validator_payload(receipt.draft_id, receipt.seq, receipt.prev_digest, entry)
    signers = set()
    for vsig in receipt.validator_sigs:
        if not _sig_ok(vsig, vscope):
            return "validator signature does not verify"
        if trusted_validators is not None and vsig.signer not in trusted_validators:
            return "validator signature from an untrusted key"
        signers.add(vsig.signer)
    if len(signers) != len(receipt.validator_sigs):
        return "duplicate validator signature"
    if len(signers) < quorum:
        return f"{len(signers)} validator signatures, quorum is {quorum}"
    return None


# ---------------------------------------------------------------------------
# Log storage
# ---------------------------------------------------------------------------

class LogStore(Protocol):
    def read(self) -> bytes: ...

    def append(self, block: bytes) -> None: ...


class MemoryLogStore:
    """In-process "disk" used by the harness; survives a simulated STR crash."""

    def __init__(self, data: bytes = b""):
        self._data = bytearray(data)

    def read(self) -> bytes:
        return bytes(self._data)

    def append(self, block: bytes) -> None:
        self._data.extend(block)


class FileLogStore:
    def __init__(self, path: Path):
        self.path = Path(path)

    def read(self) -> bytes:
        if not self.path.exists():
            return b""
        return self.path.read_bytes()

    def append(self, block: bytes) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "ab") as f:
            f.write(block)
            f.flush()
            os.fsync(f.fileno())


def frame(receipt: SignedReceipt) -> bytes:
    """One receipt block as written to the log file (blank-line separated)."""
    return receipt.encode() + b"\n"


def split_blocks(data: bytes) -> list[bytes]:
    if not data:
        return []
    if not data.endswith(b"\n\n"):
        raise InvalidEncoding("Log file does not end with a complete receipt block")
    return [block + b"\n" for block in data[:-2].split(b"\n\n")]


def parse_log_bytes(data: bytes) -> tuple[list[SignedReceipt], Optional[int], str]:
    """Decode receipts until the first unparsable block.

    Returns (receipts, index of the bad block or None, reason).
    """
    try:
        blocks = split_blocks(data)
    except InvalidEncoding as e:
        blocks = data.split(b"\n\n")
        receipts: list[SignedReceipt] = []
        for i, block in enumerate(blocks):
            try:
                receipts.append(SignedReceipt.decode(block + b"\n"))
            except InvalidEncoding:
                return receipts, i, str(e)
        return receipts[:-1], len(receipts) - 1, str(e)
    receipts = []
    for i, block in enumerate(blocks):
        try:
            receipts.append(SignedReceipt.decode(block))
        except InvalidEncoding as e:
            return receipts, i, f"unparsable receipt block: {e}"
    return receipts, None, ""


# ---------------------------------------------------------------------------
# Receipt log
# ---------------------------------------------------------------------------

class ReceiptLog:
    """Append-only, hash-chained sequence of receipts."""

    def __init__(self, store: Optional[LogStore] = None,
                 receipts: Iterable[SignedReceipt] = ()):
        self._store = store
        self._receipts: list[SignedReceipt] = list(receipts)
        self._by_id = {r.receipt_id: r for r in self._receipts}
        self._verified_upto: dict[int, int] = {}

    @classmethod
    def load(cls, store: LogStore) -> "ReceiptLog":
        receipts, bad, reason = parse_log_bytes(store.read())
        if bad is not None:
            raise ChainBroken(f"Log unreadable at seq {bad}: {reason}", bad)
        return cls(store, receipts)

    @property
    def receipts(self) -> tuple[SignedReceipt, ...]:
        return tuple(self._receipts)

    @property
    def head_digest(self) -> str:
        return self._receipts[-1].digest if self._receipts else ZERO_DIGEST

    def by_id(self, receipt_id: str) -> Optional[SignedReceipt]:
        return self._by_id.get(receipt_id)

    def append(self, receipt: SignedReceipt) -> None:
        """Persist first, then publish; a failed write leaves the log unchanged."""
        if receipt.seq != len(self._receipts) or receipt.prev_digest != self.head_digest:
            raise ChainBroken("Receipt does not extend the head of the log", receipt.seq)
        if self._store is not None:
            self._store.append(frame(receipt))
        self._receipts.append(receipt)
        self._by_id[receipt.receipt_id] = receipt

    def to_bytes(self) -> bytes:
        return b"".join(frame(r) for r in self._receipts)

    def __len__(self) -> int:
        return len(self._receipts)

    def __iter__(self) -> Iterator[SignedReceipt]:
        return iter(tuple(self._receipts))

    def __getitem__(self, seq: int) -> SignedReceipt:
        return self._receipts[seq]


@dataclass(frozen=True)
class ChainCheck:
    ok: bool
    first_bad_seq: Optional[int] = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def verify_chain(log: ReceiptLog | Sequence[SignedReceipt], *, quorum: int = 1,
                 trusted_validators: Optional[frozenset[str]] = None,
                 expected_head: Optional[str] = None) -> ChainCheck:
    """Check chaining and every signature; report the first violating seq.

    Tail truncation is only detectable against an externally kept *expected_head*.
    """
    receipts = log.receipts if isinstance(log, ReceiptLog) else tuple(log)
    start = 0
    cacheable = isinstance(log, ReceiptLog) and trusted_validators is None
    if cacheable:
        start = min(log._verified_upto.get(quorum, 0), len(receipts))

    for seq in range(start, len(receipts)):
        receipt = receipts[seq]
        if receipt.seq != seq:
            return ChainCheck(False, seq, f"seq {receipt.seq} found at position {seq}")
        prev = receipts[seq - 1].digest if seq else ZERO_DIGEST
        if receipt.prev_digest != prev:
            return ChainCheck(False, seq, "prev_digest does not match the previous receipt")
        reason = verify_receipt(receipt, quorum, trusted_validators)
        if reason is not None:
            return ChainCheck(False, seq, reason)

    if cacheable:
        log._verified_upto[quorum] = len(receipts)
    if expected_head is not None:
        head = receipts[-1].digest if receipts else ZERO_DIGEST
        if head != expected_head:
            return ChainCheck(False, len(receipts), "head digest differs from the external anchor")
    return ChainCheck(True)


@functools.lru_cache(maxsize=4096)
def _checked_block(block: bytes, quorum: int) -> tuple[SignedReceipt, str, Optional[str]]:
    """Decode and check one framed block; (receipt, digest, failure reason or None).

    Strict decoding makes the block bytes the receipt's encoding, so the
    block digest is the receipt digest.
    """
    receipt = SignedReceipt.decode(block)
    return receipt, digest_hex(block), verify_receipt(receipt, quorum)


def verify_log_bytes(data: bytes, *, quorum: int = 1,
                     expected_head: Optional[str] = None) -> ChainCheck:
    """verify_chain over a serialized log, including its framing.

    Blocks already decoded and checked are reused, so re-verifying a log that
    differs from a known one in a single block costs one block.
    """
    try:
        blocks = split_blocks(data)
    except InvalidEncoding:
        receipts, bad, reason = parse_log_bytes(data)
        check = verify_chain(receipts, quorum=quorum)
        return check if not check.ok else ChainCheck(False, bad, reason)

    prev = ZERO_DIGEST
    for seq, block in enumerate(blocks):
        try:
            receipt, digest, reason = _checked_block(block, quorum)
        except InvalidEncoding as e:
            return ChainCheck(False, seq, f"unparsable receipt block: {e}")
        if receipt.seq != seq:
            return ChainCheck(False, seq, f"seq {receipt.seq} found at position {seq}")
        if receipt.prev_digest != prev:
            return ChainCheck(False, seq, "prev_digest does not match the previous receipt")
        if reason is not None:
            return ChainCheck(False, seq, reason)
        prev = digest

    if expected_head is not None and prev != expected_head:
        return ChainCheck(False, len(blocks), "head digest differs from the external anchor")
    return ChainCheck(True)


def recover_and_reforward(log: ReceiptLog, party: str, *, quorum: int = 1) -> list[SignedReceipt]:
    """Every committed receipt mentioning *party*, for re-delivery."""
    check = verify_chain(log, quorum=quorum)
    if not check.ok:
        raise ChainBroken(f"Cannot re-forward from a broken log: {check.reason}", check.first_bad_seq)
    return [r for r in log if r.entry.mentions(party)]


# ---------------------------------------------------------------------------
# Party-side store
# ---------------------------------------------------------------------------

class PartyStore:
    """A party's copy of its receipts; a derived cache, deduplicated by receipt_id."""

    def __init__(self, party: str, quorum: int = 1):
        self.party = party
        self.quorum = quorum
        self._encoded: dict[str, bytes] = {}
        self._seq: dict[str, int] = {}
        self.stubs: dict[str, str] = {}

    def receive(self, data: bytes) -> bool:
        """Store a forwarded receipt.  Returns False for a duplicate copy."""
        receipt = SignedReceipt.decode(data)
        if not receipt.entry.mentions(self.party):
            raise NotAParty(f"Receipt {receipt.receipt_id[:12]} does not mention this party")
        held = self._encoded.get(receipt.receipt_id)
        if held is not None:
            if held != data:
                raise Conflict(f"Two different receipts claim id {receipt.receipt_id[:12]}")
            return False
        reason = verify_receipt(receipt, self.quorum)
        if reason is not None:
            raise SignatureInvalid(f"Rejected forwarded receipt: {reason}")
        self._encoded[receipt.receipt_id] = data
        self._seq[receipt.receipt_id] = receipt.seq
        return True

    def annotate(self, receipt_id: str, stub: str) -> None:
        if receipt_id not in self._encoded:
            raise KeyError(receipt_id)
        self.stubs[receipt_id] = stub

    def encoded(self, receipt_id: str) -> Optional[bytes]:
        return self._encoded.get(receipt_id)

    def receipt_ids(self) -> list[str]:
        return sorted(self._encoded, key=lambda rid: self._seq[rid])

    def receipts(self) -> list[SignedReceipt]:
        return [SignedReceipt.decode(self._encoded[rid]) for rid in self.receipt_ids()]

    def digest(self) -> str:
        return digest_hex(b"".join(self._encoded[rid] for rid in self.receipt_ids()))

    def clear(self) -> None:
        self._encoded.clear()
        self._seq.clear()

    def __len__(self) -> int:
        return len(self._encoded)


# ---------------------------------------------------------------------------
# Validators
# ---------------------------------------------------------------------------

@dataclass
class ValidatorSet:
    """A single notary (the default) or k-of-n validators."""

    keys: tuple[KeyPair, ...]
    quorum: int = 1
    offline: set[str] = field(default_factory=set)

    def __post_init__(self):
        if not self.keys:
            raise ValueError("At least one validator key is required")
        if not 0 <= self.quorum <= len(self.keys):
            raise ValueError(f"Quorum {self.quorum} impossible with {len(self.keys)} validators")

    @property
    def ids(self) -> frozenset[str]:
        return frozenset(k.key_id for k in self.keys)

    def key_for(self, key_id: str) -> KeyPair:
        for key in self.keys:
            if key.key_id == key_id:
                return key
        raise NotValidator(f"{key_id[:12]} is not a validator")

    def sign_all(self, payload: bytes) -> tuple[Signature, ...]:
        return tuple(sign(k, payload) for k in self.keys if k.key_id not in self.offline)


Deliver = Callable[[str, SignedReceipt], None]


# ---------------------------------------------------------------------------
# Repository
# ---------------------------------------------------------------------------

class SharedTransactionRepository:
    """The STR: validates drafts and owns the single serialized append point."""

    def __init__(
        self,
        config: EngineConfig,
        validators: ValidatorSet,
        clock: Optional[Clock] = None,
        store: Optional[LogStore] = None,
        deliver: Optional[Deliver] = None,
        directory: Optional[AgentDirectory] = None,
    ):
        self.config = config
        self.mode = config.mode
        self.validators = validators
        self.clock = clock or SystemClock()
        self.store = store or MemoryLogStore()
        self._deliver = deliver
        self.directory = directory
        self._lock = threading.Lock()
        self._open()

    @property
    def quorum(self) -> int:
        return self.validators.quorum if self.config.server_signs else 0

    # ------------------------------------------------------------------
    # Startup / recovery
    # ------------------------------------------------------------------

    def _open(self) -> None:
        self.log = ReceiptLog.load(self.store)
        check = verify_chain(self.log, quorum=self.quorum)
        if not check.ok:
            raise ChainBroken(f"Log fails verification at seq {check.first_bad_seq}: {check.reason}",
                              check.first_bad_seq)
        for receipt in self.log:
            if receipt.mode is not self.mode:
                raise ModeMismatch(f"Log holds {receipt.mode.value} receipts; repository is {self.mode.value}")
        self.utxo = UtxoIndex()
        self.acks = AcknowledgmentTable()
        self._consumed_drafts: set[str] = set()
        self._committed_entries: set[str] = set()
        for receipt in self.log:
            self._index(receipt, self._acks_for(receipt))
        logger.info(f"Opened {self.mode.value} log with {len(self.log)} receipts, "
                    f"head {self.log.head_digest[:12]}")

    def recover(self, parties: Iterable[str]) -> int:
        """Reload after a crash and re-forward every receipt to *parties*."""
        with self._lock:
            self._open()
        sent = 0
        for party in parties:
            for receipt in recover_and_reforward(self.log, party, quorum=self.quorum):
                self._forward_to(party, receipt)
                sent += 1
        logger.info(f"Recovery re-forwarded {sent} receipt copies")
        return sent

    def reforward(self, party: str) -> list[SignedReceipt]:
        receipts = recover_and_reforward(self.log, party, quorum=self.quorum)
        for receipt in receipts:
            self._forward_to(party, receipt)
        return receipts

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def validate(self, draft: TransactionDraft) -> SignedReceipt:
        """Validate, sign, append and forward.  Either all of it happens or none."""
        with self._lock:
            receipt = self._commit_logged(draft)
        self._forward(receipt)
        return receipt

    def _commit_logged(self, draft: TransactionDraft) -> SignedReceipt:
        try:
            return self._commit(draft)
        except Exception as e:
            logger.warning(f"Draft {draft.draft_id[:12]} rejected: {type(e).__name__}: {e}")
            raise

    def _commit(self, draft: TransactionDraft) -> SignedReceipt:
        entry = strip_stubs(draft.entry)
        if draft.draft_id in self._consumed_drafts or entry.entry_id in self._committed_entries:
            raise Conflict(f"Draft {draft.draft_id[:12]} was already committed")

        allowed = {DraftState.ACCEPTED}
        if self.mode is Mode.DIGITAL_CASH:
            allowed.add(DraftState.OFFERED)
        elif self.mode is Mode.DIGITAL_CHEQUE and draft.state is DraftState.OFFERED:
            raise MissingReceiverSignature(f"Cheque {draft.draft_id[:12]} has not been cashed by the receiver")
        if draft.state not in allowed:
            raise WrongState(f"Cannot validate a draft in state {draft.state.value}")
        now = self.clock.now()
        if now > draft.expires_at:
            raise Expired(f"Draft {draft.draft_id[:12]} expired at {draft.expires_at}")

        check_entry(entry)
        check_shape(self.mode, entry)
        if self.directory is not None:
            check_resources(entry, self.directory)
        scope = party_payload(draft.draft_id, entry)
        if draft.offer_sig is None or not _sig_ok(draft.offer_sig, scope):
            raise SignatureInvalid("Offer signature does not verify")
        if not entry.mentions(draft.offer_sig.signer):
            raise NotAParty("Offer signed by a non-party")
        if draft.accept_sig is not None:
            if not _sig_ok(draft.accept_sig, scope):
                raise SignatureInvalid("Acceptance signature does not verify")
            if not entry.mentions(draft.accept_sig.signer) or draft.accept_sig.signer == draft.offer_sig.signer:
                raise NotAParty("Acceptance signed by a non-counterparty")

        acks: list[Acknowledgment] = []
        if self.mode is Mode.DIGITAL_CHEQUE:
            check_cheque(draft)
        elif self.mode is Mode.DIGITAL_CASH:
            check_cash_entry(entry, self.utxo, self.config.cash_resource)
            expected = entry.payee if entry.cash.is_coinbase else entry.payer
            if draft.offer_sig.signer != expected:
                raise NotAParty("Cash must be offered by its spender")
            acks = self._acks_for_draft(draft)

        seq = len(self.log)
        prev = self.log.head_digest
        validator_sigs: tuple[Signature, ...] = ()
        if self.config.server_signs:
            validator_sigs = self.validators.sign_all(validator_payload(draft.draft_id, seq, prev, entry))
            if len(validator_sigs) < self.validators.quorum:
                raise QuorumNotMet(f"{len(validator_sigs)} of {self.validators.quorum} validators signed")

        receipt = SignedReceipt(
            receipt_id="",
            seq=seq,
            prev_digest=prev,
            committed_at=now,
            mode=self.mode,
            draft_id=draft.draft_id,
            entry=entry,
            offer_sig=draft.offer_sig,
            accept_sig=draft.accept_sig,
            validator_sigs=validator_sigs,
        )
        receipt = replace(receipt, receipt_id=compute_receipt_id(receipt))
        self.log.append(receipt)
        self._index(receipt, acks)
        logger.info(f"Committed seq {seq} receipt {receipt.receipt_id[:12]} ({self.mode.value})")
        logger.debug(f"seq {seq} prev {prev[:16]} head {self.log.head_digest[:16]}")
        return receipt

    def _acks_for_draft(self, draft: TransactionDraft) -> list[Acknowledgment]:
        tx = draft.entry.cash
        if tx is None or tx.is_coinbase:
            return []
        spender = draft.entry.payer
        acks = []
        for rid in dict.fromkeys(o.receipt_id for o in tx.inputs):
            prior = self.log.by_id(rid)
            if prior is not None and prior.entry.payee == spender:
                acks.append(acknowledge_by_spend(draft, prior))
        return acks

    def _acks_for(self, receipt: SignedReceipt) -> list[Acknowledgment]:
        draft = TransactionDraft(receipt.draft_id, receipt.entry, DraftState.VALIDATED, 0,
                                 receipt.offer_sig, receipt.accept_sig)
        return self._acks_for_draft(draft)

    def _index(self, receipt: SignedReceipt, acks: Sequence[Acknowledgment]) -> None:
        self._consumed_drafts.add(receipt.draft_id)
        self._committed_entries.add(receipt.entry.entry_id)
        if receipt.entry.cash is not None:
            self.utxo.apply(receipt)
            self.acks.track(receipt)
            for ack in acks:
                self.acks.record(ack, receipt.receipt_id)

    # ------------------------------------------------------------------
    # Coinbase
    # ------------------------------------------------------------------

    def mint_coinbase(self, validator: KeyPair | str, amount: int,
                      collected_fees: int = 0) -> tuple[SignedReceipt, UtxoEntry]:
        """Create amount + collected_fees as a new output owned by a validator."""
        if self.mode is not Mode.DIGITAL_CASH:
            raise ModeMismatch("Coinbase minting exists only in DigitalCash mode")
        key_id = validator if isinstance(validator, str) else validator.key_id
        if key_id not in self.validators.ids:
            raise NotValidator(f"{key_id[:12]} is not a validator")
        key = self.validators.key_for(key_id)
        # the event id names the seq it will occupy, so hold the lock through commit
        with self._lock:
            now = self.clock.now()
            entry = coinbase_entry(key.key_id, amount, collected_fees,
                                   event_id=f"mint-{len(self.log)}-{now}",
                                   resource_id=self.config.cash_resource, occurred_at=now)
            draft = offer(entry, key, clock=self.clock, ttl=self.config.draft_ttl)
            receipt = self._commit_logged(draft)
            utxo = self.utxo.get(Outpoint(receipt.receipt_id, 0))
        self._forward(receipt)
        assert utxo is not None
        return receipt, utxo

    # ------------------------------------------------------------------
    # Forwarding
    # ------------------------------------------------------------------

    def _forward(self, receipt: SignedReceipt) -> None:
        for party in sorted(receipt.entry.agents - {COINBASE_AGENT}):
            self._forward_to(party, receipt)

    def _forward_to(self, party: str, receipt: SignedReceipt) -> None:
        if self._deliver is not None:
            self._deliver(party, receipt)
