"""
TripleKey - Accounting

Accounting sits on top of bookkeeping: the shared record says what was
exchanged, this module decides what it was worth.

  * inventory cost assignment (AVCO / FIFO / LIFO), integer minor units,
    replicating the profit-calculating contracts off-chain
  * momentum reporting: wealth (debit), momentum and income (credit),
    force (trebit), as exact rationals
"""

from __future__ import annotations

import enum
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    EmptyInventory,
    InsufficientPoints,
    NonMonotonicTime,
    NonPositiveCost,
    NotHolder,
    SelfPurchase,
    UnmatchedPrice,
)
from .rea_model import ResourceKind
from .str_engine import ReceiptLog, SignedReceipt
from .views import Direction, project

logger = logging.getLogger("TripleKey.Accounting")

SECONDS_PER_DAY = 86_400


class CostMethod(str, enum.Enum):
    AVCO = "avco"
    FIFO = "fifo"
    LIFO = "lifo"

    @classmethod
    def parse(cls, text: str) -> "CostMethod":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"Unknown cost method {text!r}; use avco, fifo or lifo") from None


# ---------------------------------------------------------------------------
# Inventory
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Inventory:
    """AVCO keeps (total_value, count); FIFO/LIFO keep the ordered unit costs."""

    method: CostMethod
    total_value: int = 0
    count: int = 0
    costs: tuple[int, ...] = ()

    def __post_init__(self):
        if self.method is CostMethod.AVCO:
            if self.count < 0 or (self.count == 0 and self.total_value != 0):
                raise ValueError(f"Inconsistent AVCO state ({self.total_value}, {self.count})")
            if self.costs:
                raise ValueError("AVCO inventories keep no unit list")
        elif any(c <= 0 for c in self.costs):
            raise ValueError("Unit costs must be positive")

    @property
    def units(self) -> int:
        return self.count if self.method is CostMethod.AVCO else len(self.costs)

    @property
    def value(self) -> int:
        return self.total_value if self.method is CostMethod.AVCO else sum(self.costs)


@dataclass(frozen=True)
class ProfitRecord:
    receipt_id: str
    sale_price: int
    cogs: int

    @property
    def profit(self) -> int:
        return self.sale_price - self.cogs


def new_inventory(method: CostMethod | str) -> Inventory:
    if isinstance(method, str):
        method = CostMethod.parse(method)
    return Inventory(method)


def add_unit(inv: Inventory, cost: int) -> Inventory:
    if cost <= 0:
        raise NonPositiveCost(f"Unit cost must be positive, got {cost}")
    if inv.method is CostMethod.AVCO:
        return replace(inv, total_value=inv.total_value + cost, count=inv.count + 1)
    return replace(inv, costs=inv.costs + (cost,))


def sell_unit(inv: Inventory, price: int, receipt_id: str = "", *,
              buyer: Optional[str] = None, holder: Optional[str] = None) -> tuple[Inventory, ProfitRecord]:
    """Remove one unit at its assigned cost and book the profit on *price*."""
    if buyer is not None and buyer == holder:
        raise SelfPurchase("Owner cannot purchase own units")
    if inv.units == 0:
        raise EmptyInventory("insufficient balance")

    if inv.method is CostMethod.AVCO:
        # integer division; residue stays in total_value
        cogs = inv.total_value // inv.count
        after = replace(inv, total_value=inv.total_value - cogs, count=inv.count - 1)
    elif inv.method is CostMethod.FIFO:
        cogs = inv.costs[0]
        after = replace(inv, costs=inv.costs[1:])
    else:
        cogs = inv.costs[-1]
        after = replace(inv, costs=inv.costs[:-1])
    return after, ProfitRecord(receipt_id, price, cogs)


class InventoryContract:
    """Off-chain replica of a profit-calculating contract.

    The holder adds units at cost; anyone else buys one unit at the fixed
    item price, and the sale's profit is appended to ``profits``.
    """

    def __init__(self, holder: str, item_price: int, method: CostMethod | str = CostMethod.AVCO):
        if item_price < 0:
            raise ValueError(f"item_price must be non-negative, got {item_price}")
        self.holder = holder
        self.item_price = item_price
        self.inventory = new_inventory(method)
        self.profits: list[int] = []
        self._balances: dict[str, int] = defaultdict(int)

    def add_one_unit(self, sender: str, cost: int) -> None:
        if sender != self.holder:
            raise NotHolder("Only owner can add units to own inventory")
        self.inventory = add_unit(self.inventory, cost)
        self._balances[self.holder] += 1

    def buy_one_unit(self, sender: str, value: int, receipt_id: str = "") -> ProfitRecord:
        if sender == self.holder:
            raise SelfPurchase("Owner cannot purchase own units")
        if self._balances[self.holder] <= 0:
            raise EmptyInventory("insufficient balance")
        if value != self.item_price:
            raise UnmatchedPrice(f"Unmatched price: expected {self.item_price}, got {value}")
        self.inventory, record = sell_unit(self.inventory, value, receipt_id)
        self._balances[self.holder] -= 1
        self._balances[sender] += 1
        self.profits.append(record.profit)
        return record

    def get_inventory(self) -> tuple[int, int] | tuple[int, ...]:
        if self.inventory.method is CostMethod.AVCO:
            return (self.inventory.total_value, self.inventory.count)
        return self.inventory.costs

    def get_profits(self) -> list[int]:
        return list(self.profits)

    def get_inventory_balance(self, address: str) -> int:
        return self._balances.get(address, 0)


def _split(total: int, parts: int) -> list[int]:
    """Split *total* into *parts* integers that sum exactly to it."""
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def profit_from_log(log: ReceiptLog | Sequence[SignedReceipt], party: str,
                    method: CostMethod | str,
                    resource_kinds: Mapping[str, ResourceKind], *,
                    quorum: int = 1) -> list[ProfitRecord]:
    """Replay a party's goods trading from the shared record.

    A good received is added at the currency paid in the same receipt
    (split across units); a good given is sold at the currency received.
    One inventory is kept per good resource.

    Units received with less than one minor unit of currency each (barter,
    gifts, sub-cent lots) have no cost basis: they are counted but never
    costed, and leave only after the costed stock is gone.  Goods given away
    without currency leave inventory without a profit record.  Giving more
    than the record shows arriving raises EmptyInventory.
    """
    method = new_inventory(method).method
    view = project(log, party, quorum=quorum)
    by_receipt: dict[str, list] = defaultdict(list)
    for row in view.rows:
        by_receipt[row.receipt_id].append(row)

    inventories: dict[str, Inventory] = {}
    uncosted: dict[str, int] = defaultdict(int)
    records: list[ProfitRecord] = []
    for receipt_id, rows in by_receipt.items():
        paid = sum(r.quantity for r in rows if resource_kinds.get(r.resource_id) is ResourceKind.CURRENCY
                   and r.direction is Direction.OUTFLOW)
        received = sum(r.quantity for r in rows if resource_kinds.get(r.resource_id) is ResourceKind.CURRENCY
                       and r.direction is Direction.INFLOW)
        for row in rows:
            if resource_kinds.get(row.resource_id) is not ResourceKind.GOOD:
                continue
            inv = inventories.get(row.resource_id) or new_inventory(method)
            if row.direction is Direction.INFLOW:
                if paid < row.quantity:
                    uncosted[row.resource_id] += row.quantity
                    logger.debug(f"{row.quantity} {row.resource_id} in {receipt_id[:12]} carry no cost basis")
                else:
                    for cost in _split(paid, row.quantity):
                        inv = add_unit(inv, cost)
            else:
                for price in _split(received, row.quantity):
                    if inv.units:
                        inv, record = sell_unit(inv, price, receipt_id)
                        if received:
                            records.append(record)
                    elif uncosted[row.resource_id]:
                        uncosted[row.resource_id] -= 1
                    else:
                        raise EmptyInventory(f"{party[:12]} gives {row.resource_id!r} in receipt "
                                             f"{receipt_id[:12]} beyond its recorded stock")
            inventories[row.resource_id] = inv
    logger.debug(f"Replayed {len(records)} sales for {party[:12]} using {method.value}")
    return records


# ---------------------------------------------------------------------------
# Momentum reporting
# ---------------------------------------------------------------------------

class Column(str, enum.Enum):
    DEBIT = "debit"
    CREDIT = "credit"
    TREBIT = "trebit"


@dataclass(frozen=True)
class WealthPoint:
    t: int
    wealth: int


@dataclass(frozen=True)
class Interval:
    start: int
    end: int
    income: int

    @property
    def duration(self) -> int:
        return self.end - self.start

    @property
    def momentum(self) -> Fraction:
        return Fraction(self.income, self.duration)

    @property
    def midpoint(self) -> Fraction:
        return Fraction(self.start + self.end, 2)


@dataclass(frozen=True)
class MomentumReport:
    """Wealth, its rate of change (momentum) and the rate of change of that (force).

    Force between consecutive intervals is the change in momentum over the
    distance between interval midpoints; on unit intervals that is simply
    the change in income.
    """

    points: tuple[WealthPoint, ...]
    intervals: tuple[Interval, ...]
    forces: tuple[Fraction, ...] = field(default=())

    @property
    def total_income(self) -> int:
        return sum(i.income for i in self.intervals)

    def columns(self) -> dict[Column, list]:
        return {
            Column.DEBIT: [p.wealth for p in self.points],
            Column.CREDIT: [(i.momentum, i.income) for i in self.intervals],
            Column.TREBIT: list(self.forces),
        }

    def rows(self) -> list[tuple[str, str, str]]:
        """(column, label, value) lines for printing."""
        out = [(Column.DEBIT.value, f"wealth@{p.t}", str(p.wealth)) for p in self.points]
        for i in self.intervals:
            out.append((Column.CREDIT.value, f"momentum[{i.start},{i.end}]", str(i.momentum)))
            out.append((Column.CREDIT.value, f"income[{i.start},{i.end}]", str(i.income)))
        for k, force in enumerate(self.forces):
            a, b = self.intervals[k], self.intervals[k + 1]
            out.append((Column.TREBIT.value, f"force[{a.start},{a.end}]->[{b.start},{b.end}]", str(force)))
        return out


def momentum_report(wealth_series: Iterable[WealthPoint | tuple[int, int]]) -> MomentumReport:
    points = tuple(p if isinstance(p, WealthPoint) else WealthPoint(*p) for p in wealth_series)
    if len(points) < 2:
        raise InsufficientPoints(f"Momentum needs at least 2 wealth points, got {len(points)}")
    for a, b in zip(points, points[1:]):
        if b.t <= a.t:
            raise NonMonotonicTime(f"Time must strictly increase: {a.t} then {b.t}")

    intervals = tuple(Interval(a.t, b.t, b.wealth - a.wealth) for a, b in zip(points, points[1:]))
    forces = tuple((b.momentum - a.momentum) / (b.midpoint - a.midpoint)
                   for a, b in zip(intervals, intervals[1:]))
    return MomentumReport(points, intervals, forces)


def wealth_series(log: ReceiptLog | Sequence[SignedReceipt], party: str, resource_id: str,
                  *, quorum: int = 1, period: int = SECONDS_PER_DAY) -> list[WealthPoint]:
    """End-of-day running balance of *resource_id*, one point per active day."""
    rows = sorted((r for r in project(log, party, quorum=quorum).rows if r.resource_id == resource_id),
                  key=lambda r: (r.occurred_at, r.seq))
    points: dict[int, int] = {}
    running = 0
    for row in rows:
        running += row.signed_quantity
        points[row.occurred_at // period] = running
    return [WealthPoint(t, w) for t, w in points.items()]
