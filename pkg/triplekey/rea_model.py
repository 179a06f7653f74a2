"""
TripleKey - REA Model

The Resource-Event-Agent payload of every shared entry: agents exchange
resources through economic events, and a payment event is linked to its
consideration by a duality pair.

Conventions
  * quantities are strictly positive; direction lives in from_agent/to_agent
  * a joint-suite entry holds a dual pair, stored sorted by event_id so the
    entry_id does not depend on argument order
  * stubs are private memos, never encoded, never signed
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .crypto_core import (
    INT64_MAX,
    RicardianDigest,
    canonical_encode,
    digest_hex,
    key_id_of,
    not_signed,
)
from .errors import AgentMismatch, InvariantViolation

# Issuer of minted value.  Not a key digest, so it can never sign anything.
COINBASE_AGENT = "coinbase"

_DIGEST_RE = re.compile(r"[0-9a-f]{64}")


class ResourceKind(str, enum.Enum):
    CURRENCY = "currency"
    GOOD = "good"
    INSTRUMENT = "instrument"


# ---------------------------------------------------------------------------
# Agents & resources
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Agent:
    agent_id: str
    display_name: str
    public_key: bytes = b""

    def __post_init__(self):
        if self.public_key and key_id_of(self.public_key) != self.agent_id:
            raise InvariantViolation(f"Agent {self.display_name!r}: agent_id is not the key digest")


@dataclass(frozen=True)
class Resource:
    resource_id: str
    kind: ResourceKind
    unit: str
    contract_digest: Optional[str] = None

    def __post_init__(self):
        if self.kind is ResourceKind.INSTRUMENT and not self.contract_digest:
            raise InvariantViolation(f"Instrument {self.resource_id!r} needs a contract digest")

    @classmethod
    def instrument(cls, resource_id: str, unit: str, contract: RicardianDigest) -> "Resource":
        return cls(resource_id, ResourceKind.INSTRUMENT, unit, contract.digest)


class AgentDirectory:
    """Agents and resources known to one repository."""

    def __init__(self):
        self._agents: dict[str, Agent] = {}
        self._by_name: dict[str, Agent] = {}
        self._resources: dict[str, Resource] = {}

    def register(self, agent: Agent) -> Agent:
        if agent.agent_id in self._agents:
            raise InvariantViolation(f"Duplicate agent_id for {agent.display_name!r}")
        self._agents[agent.agent_id] = agent
        self._by_name[agent.display_name] = agent
        return agent

    def add_resource(self, resource: Resource) -> Resource:
        existing = self._resources.get(resource.resource_id)
        if existing is not None and existing != resource:
            raise InvariantViolation(f"Resource {resource.resource_id!r} redefined")
        self._resources[resource.resource_id] = resource
        return resource

    def agent(self, agent_id: str) -> Agent:
        return self._agents[agent_id]

    def by_name(self, name: str) -> Agent:
        return self._by_name[name]

    def resource(self, resource_id: str) -> Resource:
        return self._resources[resource_id]

    def get_resource(self, resource_id: str) -> Optional[Resource]:
        return self._resources.get(resource_id)

    def resource_kinds(self) -> dict[str, ResourceKind]:
        return {rid: r.kind for rid, r in self._resources.items()}

    def __contains__(self, agent_id: str) -> bool:
        return agent_id in self._agents


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EconomicEvent:
    event_id: str
    resource_id: str
    quantity: int
    from_agent: str
    to_agent: str
    occurred_at: int
    duality_of: Optional[str] = None
    purpose: Optional[str] = None
    contract_digest: Optional[str] = None

    def check(self) -> None:
        if not self.event_id:
            raise InvariantViolation("event_id is empty")
        if self.from_agent == self.to_agent:
            raise InvariantViolation(f"Event {self.event_id}: from_agent equals to_agent")
        if not 0 < self.quantity <= INT64_MAX:
            raise InvariantViolation(f"Event {self.event_id}: quantity must be positive, got {self.quantity}")
        if self.occurred_at < 0:
            raise InvariantViolation(f"Event {self.event_id}: negative timestamp")
        if self.contract_digest is not None and not _DIGEST_RE.fullmatch(self.contract_digest):
            raise InvariantViolation(f"Event {self.event_id}: contract_digest is not a lowercase SHA-256 hex digest")

    @property
    def agents(self) -> tuple[str, str]:
        return (self.from_agent, self.to_agent)


# ---------------------------------------------------------------------------
# Digital-cash payload
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Outpoint:
    receipt_id: str
    output_index: int

    def __str__(self) -> str:
        return f"{self.receipt_id}:{self.output_index}"

    @classmethod
    def parse(cls, text: str) -> "Outpoint":
        receipt_id, sep, index = text.rpartition(":")
        if not sep or not receipt_id or not index.isdigit():
            raise ValueError(f"Outpoint must be <receipt_id>:<index>, got {text!r}")
        return cls(receipt_id, int(index))


@dataclass(frozen=True)
class CashOutput:
    owner: str
    amount: int


@dataclass(frozen=True)
class CashTransaction:
    """Inputs consumed whole, outputs created, fee left for a later coinbase.

    A coinbase has no inputs; ``minted`` is new value and ``recycled`` the
    collected fees it pays out again.
    """

    inputs: tuple[Outpoint, ...] = ()
    outputs: tuple[CashOutput, ...] = ()
    fee: int = 0
    minted: int = 0
    recycled: int = 0

    @property
    def is_coinbase(self) -> bool:
        return not self.inputs

    @property
    def output_total(self) -> int:
        return sum(o.amount for o in self.outputs)


# ---------------------------------------------------------------------------
# Shared entries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _EntryBody:
    events: tuple[EconomicEvent, ...]
    cash: Optional[CashTransaction] = None


@dataclass(frozen=True)
class SharedEntry:
    entry_id: str
    events: tuple[EconomicEvent, ...]
    cash: Optional[CashTransaction] = None
    payer_stub: Optional[str] = not_signed(default=None, compare=False)
    payee_stub: Optional[str] = not_signed(default=None, compare=False)

    @property
    def is_exchange(self) -> bool:
        return len(self.events) == 2

    @property
    def agents(self) -> frozenset[str]:
        return frozenset(a for e in self.events for a in e.agents)

    @property
    def payer(self) -> str:
        """Giver of the (first) payment event."""
        return self.events[0].from_agent

    @property
    def payee(self) -> str:
        return self.events[0].to_agent

    def mentions(self, agent_id: str) -> bool:
        return agent_id in self.agents


def compute_entry_id(events: Iterable[EconomicEvent], cash: Optional[CashTransaction] = None) -> str:
    ordered = tuple(sorted(events, key=lambda e: e.event_id))
    return digest_hex(canonical_encode(_EntryBody(ordered, cash)))


def _build(events: Iterable[EconomicEvent], cash: Optional[CashTransaction] = None) -> SharedEntry:
    ordered = tuple(sorted(events, key=lambda e: e.event_id))
    return SharedEntry(entry_id=compute_entry_id(ordered, cash), events=ordered, cash=cash)


def make_exchange(give: EconomicEvent, take: EconomicEvent) -> SharedEntry:
    """Joint-suite entry: both parties give up something."""
    if give.from_agent != take.to_agent or give.to_agent != take.from_agent:
        raise AgentMismatch(
            f"Exchange legs must cross: {give.from_agent}->{give.to_agent} "
            f"vs {take.from_agent}->{take.to_agent}"
        )
    if give.event_id == take.event_id:
        raise InvariantViolation("Dual events need distinct event ids")
    give = replace(give, duality_of=take.event_id)
    take = replace(take, duality_of=give.event_id)
    give.check()
    take.check()
    return _build((give, take))


def make_payment(event: EconomicEvent, cash: Optional[CashTransaction] = None) -> SharedEntry:
    """Single-event entry: the payment is recorded, the consideration is not."""
    if event.duality_of is not None:
        raise InvariantViolation(f"Payment event {event.event_id} cannot carry a duality link")
    event.check()
    return _build((event,), cash)


def with_stubs(entry: SharedEntry, payer_stub: Optional[str] = None,
               payee_stub: Optional[str] = None) -> SharedEntry:
    return replace(entry, payer_stub=payer_stub, payee_stub=payee_stub)


def strip_stubs(entry: SharedEntry) -> SharedEntry:
    return replace(entry, payer_stub=None, payee_stub=None)


def check_entry(entry: SharedEntry) -> None:
    """Re-derive entry_id and check event and duality invariants."""
    if len(entry.events) not in (1, 2):
        raise InvariantViolation(f"Entry holds {len(entry.events)} events; expected 1 or 2")
    if list(entry.events) != sorted(entry.events, key=lambda e: e.event_id):
        raise InvariantViolation("Entry events are not in event_id order")
    for event in entry.events:
        event.check()
    if len(entry.events) == 2:
        a, b = entry.events
        if a.event_id == b.event_id:
            raise InvariantViolation("Dual events share an event_id")
        if a.duality_of != b.event_id or b.duality_of != a.event_id:
            raise InvariantViolation("Duality link is not mutual")
        if a.from_agent != b.to_agent or a.to_agent != b.from_agent:
            raise InvariantViolation("Dual events do not cross between the same two agents")
        if entry.cash is not None:
            raise InvariantViolation("Exchanges carry no cash payload")
    elif entry.events[0].duality_of is not None:
        raise InvariantViolation("Single-event entry carries a duality link")
    if entry.entry_id != compute_entry_id(entry.events, entry.cash):
        raise InvariantViolation("entry_id does not match entry content")


def check_resources(entry: SharedEntry, directory: AgentDirectory) -> None:
    """Bind each event to its registered resource.

    An instrument event must carry the digest of the instrument's contract;
    an event naming a non-instrument resource must carry none.  Resources the
    directory does not know are left to the parties.
    """
    for event in entry.events:
        resource = directory.get_resource(event.resource_id)
        if resource is None:
            continue
        if resource.kind is ResourceKind.INSTRUMENT:
            if event.contract_digest is None:
                raise InvariantViolation(f"Event {event.event_id}: instrument "
                                         f"{resource.resource_id!r} needs its contract digest")
            if event.contract_digest != resource.contract_digest:
                raise InvariantViolation(f"Event {event.event_id}: contract digest does not match "
                                         f"instrument {resource.resource_id!r}")
        elif event.contract_digest is not None:
            raise InvariantViolation(f"Event {event.event_id}: {resource.kind.value} "
                                     f"{resource.resource_id!r} carries no contract")
