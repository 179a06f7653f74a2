"""
TripleKey - Views

Per-party "sheets" of the shared record.  The log is viewpoint-independent:
the same receipt is an inflow on one sheet and an outflow on the other.
Everything here is a pure fold over a verified, committed log prefix.
"""

from __future__ import annotations

import csv
import enum
import logging
from collections import defaultdict
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ChainBroken, UnknownDimension, UnmappedResourceKind
from .rea_model import EconomicEvent, ResourceKind
from .str_engine import ReceiptLog, SignedReceipt, verify_chain

logger = logging.getLogger("TripleKey.Views")

DIMENSIONS = ("party", "resource", "period", "purpose")
JOURNAL_COLUMNS = ("receipt_id", "debit_account", "debit_amount", "credit_account", "credit_amount")


class Direction(str, enum.Enum):
    INFLOW = "inflow"
    OUTFLOW = "outflow"

    @property
    def sign(self) -> int:
        return 1 if self is Direction.INFLOW else -1


@dataclass(frozen=True)
class ViewRow:
    receipt_id: str
    seq: int
    direction: Direction
    resource_id: str
    quantity: int
    counterparty: str
    occurred_at: int
    purpose: Optional[str] = None
    local_stub: Optional[str] = None

    @property
    def signed_quantity(self) -> int:
        return self.direction.sign * self.quantity


@dataclass(frozen=True)
class LedgerView:
    party: str
    rows: tuple[ViewRow, ...] = ()

    def balance(self, resource_id: str) -> int:
        return sum(r.signed_quantity for r in self.rows if r.resource_id == resource_id)

    def receipt_ids(self) -> list[str]:
        return list(dict.fromkeys(r.receipt_id for r in self.rows))

    def with_stub(self, receipt_id: str, stub: Optional[str]) -> "LedgerView":
        rows = tuple(replace(r, local_stub=stub) if r.receipt_id == receipt_id else r
                     for r in self.rows)
        return replace(self, rows=rows)


def _committed(log: ReceiptLog | Sequence[SignedReceipt], quorum: int) -> tuple[SignedReceipt, ...]:
    check = verify_chain(log, quorum=quorum)
    if not check.ok:
        raise ChainBroken(f"Log fails verification at seq {check.first_bad_seq}: {check.reason}",
                          check.first_bad_seq)
    return log.receipts if isinstance(log, ReceiptLog) else tuple(log)


def _row(receipt: SignedReceipt, event: EconomicEvent, party: str,
         stub: Optional[str]) -> ViewRow:
    inflow = event.to_agent == party
    return ViewRow(
        receipt_id=receipt.receipt_id,
        seq=receipt.seq,
        direction=Direction.INFLOW if inflow else Direction.OUTFLOW,
        resource_id=event.resource_id,
        quantity=event.quantity,
        counterparty=event.from_agent if inflow else event.to_agent,
        occurred_at=event.occurred_at,
        purpose=event.purpose,
        local_stub=stub,
    )


def project(log: ReceiptLog | Sequence[SignedReceipt], party: str,
            stubs: Optional[Mapping[str, str]] = None, *, quorum: int = 1) -> LedgerView:
    """One party's sheet: a row per event the party gives or receives."""
    stubs = stubs or {}
    rows = []
    for receipt in _committed(log, quorum):
        for event in receipt.entry.events:
            if party in event.agents:
                rows.append(_row(receipt, event, party, stubs.get(receipt.receipt_id)))
    return LedgerView(party, tuple(rows))


def balance(log: ReceiptLog | Sequence[SignedReceipt], party: str, resource_id: str,
            *, quorum: int = 1) -> int:
    """Net inflows minus outflows, folded over the log in order."""
    total = 0
    for receipt in _committed(log, quorum):
        for event in receipt.entry.events:
            if event.resource_id != resource_id:
                continue
            if event.to_agent == party:
                total += event.quantity
            elif event.from_agent == party:
                total -= event.quantity
    return total


def fold_balances(log: ReceiptLog | Sequence[SignedReceipt], *,
                  quorum: int = 1) -> dict[tuple[str, str], int]:
    state = RunningBalances()
    for receipt in _committed(log, quorum):
        state.apply(receipt)
    return state.snapshot()


class RunningBalances:
    """Balances kept up to date one receipt at a time (the state-machine view)."""

    def __init__(self):
        self._balances: dict[tuple[str, str], int] = defaultdict(int)

    def apply(self, receipt: SignedReceipt) -> None:
        for event in receipt.entry.events:
            self._balances[(event.to_agent, event.resource_id)] += event.quantity
            self._balances[(event.from_agent, event.resource_id)] -= event.quantity

    def balance(self, party: str, resource_id: str) -> int:
        return self._balances.get((party, resource_id), 0)

    def snapshot(self) -> dict[tuple[str, str], int]:
        return dict(self._balances)


# ---------------------------------------------------------------------------
# Hypercube pivot
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PivotCell:
    dims: tuple[str, ...]
    keys: tuple[str, ...]
    total: int

    def key(self, dim: str) -> str:
        return self.keys[self.dims.index(dim)]


def period_of(timestamp: int) -> str:
    """Calendar month (UTC) of a timestamp, as YYYY-MM."""
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).strftime("%Y-%m")


def _coordinate(dim: str, party: str, event: EconomicEvent) -> str:
    if dim == "party":
        return party
    if dim == "resource":
        return event.resource_id
    if dim == "period":
        return period_of(event.occurred_at)
    return event.purpose or ""


def pivot(log: ReceiptLog | Sequence[SignedReceipt], dims: Iterable[str], *,
          quorum: int = 1) -> list[PivotCell]:
    """Signed totals of every party's rows, grouped by *dims*.

    Empty *dims* gives the single grand-total cell.
    """
    dims = tuple(dims)
    unknown = [d for d in dims if d not in DIMENSIONS]
    if unknown:
        raise UnknownDimension(f"Unknown pivot dimension(s) {unknown}; use {list(DIMENSIONS)}")
    if len(set(dims)) != len(dims):
        raise UnknownDimension(f"Repeated pivot dimension in {list(dims)}")

    totals: dict[tuple[str, ...], int] = defaultdict(int)
    if not dims:
        totals[()] = 0
    for receipt in _committed(log, quorum):
        for event in receipt.entry.events:
            for party, sign in ((event.to_agent, 1), (event.from_agent, -1)):
                key = tuple(_coordinate(d, party, event) for d in dims)
                totals[key] += sign * event.quantity
    return [PivotCell(dims, key, total) for key, total in sorted(totals.items())]


# ---------------------------------------------------------------------------
# Double-entry export
# ---------------------------------------------------------------------------

# (resource kind, direction) -> (debit account, credit account)
ACCOUNT_MAP: dict[tuple[ResourceKind, Direction], tuple[str, str]] = {
    (ResourceKind.CURRENCY, Direction.INFLOW): ("Cash", "Sales"),
    (ResourceKind.CURRENCY, Direction.OUTFLOW): ("Purchases", "Cash"),
    (ResourceKind.GOOD, Direction.INFLOW): ("Inventory", "Payable"),
    (ResourceKind.GOOD, Direction.OUTFLOW): ("COGS", "Inventory"),
    (ResourceKind.INSTRUMENT, Direction.INFLOW): ("Investments", "Payable"),
    (ResourceKind.INSTRUMENT, Direction.OUTFLOW): ("Receivable", "Investments"),
}


@dataclass(frozen=True)
class Posting:
    account: str
    amount: int


@dataclass(frozen=True)
class JournalEntry:
    """One balanced debit/credit pair derived from a view row."""

    receipt_id: str
    resource_id: str
    debit: Posting
    credit: Posting

    def __post_init__(self):
        if self.debit.amount != self.credit.amount:
            raise ValueError(f"Unbalanced journal entry for {self.receipt_id}")


def export_double_entry(view: LedgerView,
                        resource_kinds: Mapping[str, ResourceKind]) -> list[JournalEntry]:
    entries = []
    for row in view.rows:
        kind = resource_kinds.get(row.resource_id)
        if kind is None:
            raise UnmappedResourceKind(f"No account mapping for resource {row.resource_id!r}")
        debit_account, credit_account = ACCOUNT_MAP[(kind, row.direction)]
        entries.append(JournalEntry(
            receipt_id=row.receipt_id,
            resource_id=row.resource_id,
            debit=Posting(debit_account, row.quantity),
            credit=Posting(credit_account, row.quantity),
        ))
    return entries


def journal_totals(entries: Iterable[JournalEntry]) -> tuple[int, int]:
    debits = credits = 0
    for entry in entries:
        debits += entry.debit.amount
        credits += entry.credit.amount
    return debits, credits


def write_journal_csv(entries: Sequence[JournalEntry], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(JOURNAL_COLUMNS)
        for e in entries:
            writer.writerow([e.receipt_id, e.debit.account, e.debit.amount,
                             e.credit.account, e.credit.amount])
    logger.info(f"Wrote {len(entries)} journal entries to {path}")
