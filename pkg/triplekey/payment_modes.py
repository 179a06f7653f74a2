"""
TripleKey - Payment Modes

Mode-specific validation rules layered on the STR:

  JointSuite     both parties give something; every entry is a dual pair
  DigitalCheque  issuer signs, receiver cashes by countersigning, notary validates
  DigitalCash    UTXO conservation; the receiver's signature arrives later,
                 in the act of spending what it received

The UTXO index and the acknowledgment table are derived state: both are
rebuilt from the receipt log, which stays the single source of truth.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

from .errors import (
    DoubleSpend,
    InsufficientInput,
    InvariantViolation,
    MissingReceiverSignature,
    NotAParty,
    NotOwner,
    NotPayee,
    UnknownOutpoint,
)
from .rea_model import (
    COINBASE_AGENT,
    CashOutput,
    CashTransaction,
    EconomicEvent,
    Outpoint,
    SharedEntry,
    make_payment,
)

if TYPE_CHECKING:  # pragma: no cover
    from .str_engine import SignedReceipt, TransactionDraft

logger = logging.getLogger("TripleKey.Cash")


class Mode(str, enum.Enum):
    JOINT_SUITE = "JointSuite"
    DIGITAL_CHEQUE = "DigitalCheque"
    DIGITAL_CASH = "DigitalCash"

    @classmethod
    def parse(cls, text: str) -> "Mode":
        lowered = text.replace("-", "").replace("_", "").lower()
        for mode in cls:
            if mode.value.lower() == lowered:
                return mode
        raise ValueError(f"Unknown mode {text!r}; use one of {[m.value for m in cls]}")


def check_shape(mode: Mode, entry: SharedEntry) -> None:
    """JointSuite entries carry dual events; payment modes carry one event."""
    if mode is Mode.JOINT_SUITE:
        if len(entry.events) != 2 or entry.cash is not None:
            raise InvariantViolation("JointSuite entries must be a dual pair without cash payload")
    elif mode is Mode.DIGITAL_CHEQUE:
        if len(entry.events) != 1 or entry.cash is not None:
            raise InvariantViolation("Cheque entries carry exactly one payment event")
    else:
        if len(entry.events) != 1 or entry.cash is None:
            raise InvariantViolation("Cash entries carry one event and a cash transaction")


# ---------------------------------------------------------------------------
# Digital cheque
# ---------------------------------------------------------------------------

def check_cheque(draft: "TransactionDraft") -> None:
    """Issuer (offer), receiver (accept = cashing) and notary signatures are all required."""
    entry = draft.entry
    if draft.offer_sig is None or draft.offer_sig.signer != entry.payer:
        raise NotAParty("A cheque must be offered by its issuer")
    if draft.accept_sig is None:
        raise MissingReceiverSignature(f"Cheque {draft.draft_id[:12]} has not been cashed by the receiver")
    if draft.accept_sig.signer != entry.payee:
        raise NotAParty("Only the named receiver can cash a cheque")


# ---------------------------------------------------------------------------
# Digital cash: UTXO index
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UtxoEntry:
    outpoint: Outpoint
    owner: str
    amount: int
    spent_by: Optional[str] = None

    @property
    def is_spent(self) -> bool:
        return self.spent_by is not None


class UtxoIndex:
    """Derived UTXO set plus the running totals the conservation law needs."""

    def __init__(self):
        self._entries: dict[Outpoint, UtxoEntry] = {}
        self.minted = 0
        self.fees_collected = 0
        self.fees_recycled = 0

    @classmethod
    def rebuild(cls, receipts: Iterable["SignedReceipt"]) -> "UtxoIndex":
        index = cls()
        for receipt in receipts:
            if receipt.entry.cash is not None:
                index.apply(receipt)
        return index

    def get(self, outpoint: Outpoint) -> Optional[UtxoEntry]:
        return self._entries.get(outpoint)

    def unspent(self, owner: Optional[str] = None) -> list[UtxoEntry]:
        """Unspent outputs in commit order."""
        return [u for u in self._entries.values()
                if not u.is_spent and (owner is None or u.owner == owner)]

    def balance(self, owner: str) -> int:
        return sum(u.amount for u in self.unspent(owner))

    @property
    def total_unspent(self) -> int:
        return sum(u.amount for u in self._entries.values() if not u.is_spent)

    @property
    def fee_pool(self) -> int:
        return self.fees_collected - self.fees_recycled

    def conserved(self) -> bool:
        return self.total_unspent == self.minted - self.fees_collected + self.fees_recycled

    def apply(self, receipt: "SignedReceipt") -> list[UtxoEntry]:
        """Spend inputs and create outputs of a committed cash receipt."""
        tx = receipt.entry.cash
        assert tx is not None
        for outpoint in tx.inputs:
            entry = self._entries.get(outpoint)
            if entry is None:
                raise UnknownOutpoint(str(outpoint))
            if entry.is_spent:
                raise DoubleSpend(f"{outpoint} already spent by {entry.spent_by}")
        for outpoint in tx.inputs:
            self._entries[outpoint] = replace(self._entries[outpoint], spent_by=receipt.receipt_id)
        created = []
        for i, out in enumerate(tx.outputs):
            utxo = UtxoEntry(Outpoint(receipt.receipt_id, i), out.owner, out.amount)
            self._entries[utxo.outpoint] = utxo
            created.append(utxo)
        self.minted += tx.minted
        self.fees_recycled += tx.recycled
        self.fees_collected += tx.fee
        return created


# ---------------------------------------------------------------------------
# Digital cash: validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CashCheck:
    ok: bool
    change: Optional[CashOutput]
    balanced: CashTransaction


def check_cash(tx: CashTransaction, utxo_set: UtxoIndex, spender: str) -> CashCheck:
    """Inputs exist, are unspent, belong to *spender*, and cover outputs + fee.

    Any excess comes back as a change output to the spender.
    """
    if not tx.inputs:
        raise InsufficientInput("A spend needs at least one input")
    if tx.minted or tx.recycled:
        raise InvariantViolation("Only a coinbase may mint or recycle fees")
    if tx.fee < 0:
        raise InvariantViolation(f"Negative fee {tx.fee}")
    if any(o.amount <= 0 for o in tx.outputs):
        raise InvariantViolation("Output amounts must be positive")
    if len(set(tx.inputs)) != len(tx.inputs):
        raise DoubleSpend("The same outpoint is listed twice")

    total_in = 0
    for outpoint in tx.inputs:
        utxo = utxo_set.get(outpoint)
        if utxo is None:
            raise UnknownOutpoint(f"No output {outpoint}")
        if utxo.is_spent:
            raise DoubleSpend(f"{outpoint} already spent by {utxo.spent_by}")
        if utxo.owner != spender:
            raise NotOwner(f"{outpoint} belongs to {utxo.owner[:12]}, not {spender[:12]}")
        total_in += utxo.amount

    change = total_in - tx.output_total - tx.fee
    if change < 0:
        raise InsufficientInput(
            f"Inputs {total_in} < outputs {tx.output_total} + fee {tx.fee}"
        )
    if change == 0:
        return CashCheck(ok=True, change=None, balanced=tx)
    change_out = CashOutput(spender, change)
    return CashCheck(ok=True, change=change_out,
                     balanced=replace(tx, outputs=tx.outputs + (change_out,)))


def prepare_spend(
    utxo_set: UtxoIndex,
    spender: str,
    payments: Sequence[CashOutput],
    fee: int = 0,
    inputs: Optional[Sequence[Outpoint]] = None,
) -> CashTransaction:
    """Build a balanced spend (change included) ready for the spender to sign.

    Without explicit *inputs*, the spender's oldest unspent outputs are used.
    """
    needed = sum(p.amount for p in payments) + fee
    if inputs is None:
        chosen: list[Outpoint] = []
        covered = 0
        for utxo in utxo_set.unspent(spender):
            if covered >= needed and chosen:
                break
            chosen.append(utxo.outpoint)
            covered += utxo.amount
        inputs = chosen
    tx = CashTransaction(inputs=tuple(inputs), outputs=tuple(payments), fee=fee)
    return check_cash(tx, utxo_set, spender).balanced


def cash_entry(tx: CashTransaction, event_id: str, resource_id: str,
               spender: str, payee: str, occurred_at: int,
               purpose: Optional[str] = None) -> SharedEntry:
    """Single-event entry for a spend: spender pays the total sent to *payee*."""
    quantity = sum(o.amount for o in tx.outputs if o.owner == payee)
    event = EconomicEvent(event_id, resource_id, quantity, spender, payee, occurred_at,
                          purpose=purpose)
    return make_payment(event, tx)


def coinbase_entry(validator_id: str, amount: int, collected_fees: int, event_id: str,
                   resource_id: str, occurred_at: int) -> SharedEntry:
    """Input-less entry creating amount + collected_fees for the validator."""
    if amount < 0 or collected_fees < 0 or amount + collected_fees <= 0:
        raise InvariantViolation("A coinbase must create a positive amount")
    total = amount + collected_fees
    tx = CashTransaction(outputs=(CashOutput(validator_id, total),),
                         minted=amount, recycled=collected_fees)
    event = EconomicEvent(event_id, resource_id, total, COINBASE_AGENT, validator_id, occurred_at)
    return make_payment(event, tx)


def check_cash_entry(entry: SharedEntry, utxo_set: UtxoIndex, resource_id: str) -> None:
    """Cash rules for a committed-to-be entry (coinbase or spend)."""
    tx = entry.cash
    event = entry.events[0]
    if tx is None:
        raise InvariantViolation("Cash entry without a cash transaction")
    if event.resource_id != resource_id:
        raise InvariantViolation(f"Cash moves {resource_id!r}, not {event.resource_id!r}")

    if tx.is_coinbase:
        if event.from_agent != COINBASE_AGENT or tx.fee:
            raise InvariantViolation("Malformed coinbase")
        if tx.output_total != tx.minted + tx.recycled or event.quantity != tx.output_total:
            raise InvariantViolation("Coinbase outputs must equal minted + recycled fees")
        if any(o.owner != event.to_agent for o in tx.outputs):
            raise InvariantViolation("Coinbase pays only its validator")
        if tx.recycled > utxo_set.fee_pool:
            raise InvariantViolation(
                f"Coinbase recycles {tx.recycled} but only {utxo_set.fee_pool} in fees are uncollected"
            )
        return

    spender, payee = event.from_agent, event.to_agent
    if spender == COINBASE_AGENT:
        raise InvariantViolation("Only a coinbase is issued by the coinbase agent")
    if any(o.owner not in (spender, payee) for o in tx.outputs):
        raise InvariantViolation("Outputs may only go to the payee or back to the spender")
    if event.quantity != sum(o.amount for o in tx.outputs if o.owner == payee):
        raise InvariantViolation("Event quantity must equal the amount sent to the payee")
    result = check_cash(tx, utxo_set, spender)
    if result.change is not None:
        raise InvariantViolation(
            f"Unbalanced spend: {result.change.amount} left over; change must be declared before signing"
        )


# ---------------------------------------------------------------------------
# Asynchronous acknowledgment
# ---------------------------------------------------------------------------

class AckStatus(str, enum.Enum):
    SIGNED = "Signed"              # counterparty signed synchronously
    PENDING = "Pending"            # cash received, not yet spent
    ACKNOWLEDGED = "Acknowledged"  # accept slot satisfied by a later spend


@dataclass(frozen=True)
class Acknowledgment:
    prior_receipt_id: str
    payee: str
    spending_draft_id: str


def acknowledge_by_spend(spending_draft: "TransactionDraft",
                         prior_receipt: "SignedReceipt") -> Acknowledgment:
    """The payee acknowledges *prior_receipt* by spending one of its outputs."""
    tx = spending_draft.entry.cash
    if tx is None or not any(o.receipt_id == prior_receipt.receipt_id for o in tx.inputs):
        raise InvariantViolation("Spending draft does not reference the prior receipt")
    spender = spending_draft.entry.events[0].from_agent
    if spender != prior_receipt.entry.payee:
        raise NotPayee(
            f"{spender[:12]} is not the payee of receipt {prior_receipt.receipt_id[:12]}"
        )
    return Acknowledgment(prior_receipt.receipt_id, spender, spending_draft.draft_id)


class AcknowledgmentTable:
    """Derived status of cash receipts; committed receipts are never rewritten."""

    def __init__(self):
        self._acked_by: dict[str, str] = {}
        self._pending: set[str] = set()

    def track(self, receipt: "SignedReceipt") -> None:
        if receipt.accept_sig is None:
            self._pending.add(receipt.receipt_id)

    def record(self, ack: Acknowledgment, by_receipt_id: str) -> None:
        if ack.prior_receipt_id in self._acked_by:
            return
        self._acked_by[ack.prior_receipt_id] = by_receipt_id
        self._pending.discard(ack.prior_receipt_id)
        logger.info(f"Receipt {ack.prior_receipt_id[:12]} acknowledged by {by_receipt_id[:12]}")

    def status(self, receipt_id: str) -> AckStatus:
        if receipt_id in self._acked_by:
            return AckStatus.ACKNOWLEDGED
        if receipt_id in self._pending:
            return AckStatus.PENDING
        return AckStatus.SIGNED

    def acknowledged_by(self, receipt_id: str) -> Optional[str]:
        return self._acked_by.get(receipt_id)


# ---------------------------------------------------------------------------
# Supply audit (brute force over the log)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupplyAudit:
    unspent: int
    minted: int
    fees: int
    recycled: int

    @property
    def conserved(self) -> bool:
        return self.unspent == self.minted - self.fees + self.recycled


def audit_supply(receipts: Iterable["SignedReceipt"]) -> SupplyAudit:
    """Recompute the money supply from scratch, without the UTXO index."""
    outputs: dict[tuple[str, int], int] = {}
    spent: set[tuple[str, int]] = set()
    minted = fees = recycled = 0
    for receipt in receipts:
        tx = receipt.entry.cash
        if tx is None:
            continue
        for o in tx.inputs:
            spent.add((o.receipt_id, o.output_index))
        for i, out in enumerate(tx.outputs):
            outputs[(receipt.receipt_id, i)] = out.amount
        minted += tx.minted
        fees += tx.fee
        recycled += tx.recycled
    unspent = sum(amount for key, amount in outputs.items() if key not in spent)
    return SupplyAudit(unspent, minted, fees, recycled)
