"""
TripleKey - Simulation Harness

Deterministic in-process run of parties and an STR exchanging messages.

Receipt deliveries go through an explicit queue, so a script can drop or
duplicate them, crash the STR (in-flight deliveries are lost; the log on
"disk" survives) and recover it.  ``crash_str at=after_append`` arms a crash
that fires as soon as the next commit is on disk, before any of its
deliveries arrive.  Every run ends with a reconciliation pull
in which each party asks the STR to re-forward its receipts, then checks
WYSIWIS: each party holds byte-identical copies of every receipt naming it.

Script actions
  offer          id from to resource qty [back_resource back_qty] [by] [purpose]
  accept         id [by]
  submit         id
  reject         id
  spend          id from to qty [fee] [inputs_of] [purpose]
  mint           [id] amount [fees] [validator]
  crash_str      [at=now|after_append]
  drop_next      [count]
  duplicate_next [count]
  advance_clock  seconds
  tamper         seq [offset] [mask]

Any action may carry ``expect=<ErrorName>``.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .accounting import SECONDS_PER_DAY
from .clock import SimulatedClock
from .config import EngineConfig
from .crypto_core import KeyPair, digest_hex, generate_keypair
from .errors import ScriptInvalid, TripleKeyError
from .payment_modes import AckStatus, Mode, audit_supply, cash_entry, prepare_spend
from .rea_model import (
    COINBASE_AGENT,
    CashOutput,
    CashTransaction,
    EconomicEvent,
    make_exchange,
    make_payment,
)
from .str_engine import (
    MemoryLogStore,
    PartyStore,
    SharedTransactionRepository,
    SignedReceipt,
    TransactionDraft,
    ValidatorSet,
    accept,
    offer,
    reject,
    settle,
    split_blocks,
    verify_chain,
    verify_log_bytes,
)
from .views import RunningBalances, fold_balances

logger = logging.getLogger("TripleKey.Harness")

DEFAULT_START = 1_614_556_800  # 2021-03-01T00:00:00Z

ACTIONS: dict[str, tuple[str, ...]] = {
    "offer": ("id", "from", "to", "resource", "qty"),
    "accept": ("id",),
    "submit": ("id",),
    "reject": ("id",),
    "spend": ("id", "from", "to", "qty"),
    "mint": ("amount",),
    "crash_str": (),
    "drop_next": (),
    "duplicate_next": (),
    "advance_clock": ("seconds",),
    "tamper": ("seq",),
}

ASSERTIONS = ("wysiwis", "chain", "conservation", "oracle", "tamper_detected",
              "expectations", "receipts", "acknowledged")

CRASH_POINTS = ("now", "after_append")


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Action:
    kind: str
    params: tuple[tuple[str, str], ...] = ()

    def get(self, name: str, default: Optional[str] = None) -> Optional[str]:
        for key, value in self.params:
            if key == name:
                return value
        return default

    def req(self, name: str) -> str:
        value = self.get(name)
        if value is None:
            raise ScriptInvalid(f"{self.kind}: missing parameter {name!r}")
        return value

    def int(self, name: str, default: Optional[int] = None) -> int:
        raw = self.get(name)
        if raw is None:
            if default is None:
                raise ScriptInvalid(f"{self.kind}: missing parameter {name!r}")
            return default
        try:
            return int(raw)
        except ValueError:
            raise ScriptInvalid(f"{self.kind}: {name}={raw!r} is not an integer") from None

    def to_text(self) -> str:
        return " ".join([self.kind] + [f"{k}={v}" for k, v in self.params])

    @classmethod
    def parse(cls, text: str) -> "Action":
        if not text.strip():
            raise ScriptInvalid("Empty action")
        kind, *tokens = text.split()
        params = []
        for token in tokens:
            key, sep, value = token.partition("=")
            if not sep or not key:
                raise ScriptInvalid(f"{kind}: malformed token {token!r}")
            params.append((key, value))
        return cls(kind, tuple(params))


def act(kind: str, **params) -> Action:
    return Action(kind, tuple((k.rstrip("_"), str(v)) for k, v in params.items()))


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    mode: Mode
    parties: tuple[str, ...]
    script: tuple[Action, ...]
    assertions: tuple[str, ...] = ("wysiwis", "chain", "oracle", "expectations")
    validators: int = 1
    quorum: int = 1
    server_signs: bool = True
    start: int = DEFAULT_START

    def to_text(self) -> str:
        lines = [
            f"name={self.name}",
            f"seed={self.seed}",
            f"mode={self.mode.value}",
            f"parties={','.join(self.parties)}",
            f"validators={self.validators}",
            f"quorum={self.quorum}",
            f"server_signs={'true' if self.server_signs else 'false'}",
            f"start={self.start}",
        ]
        lines += [f"assert={a}" for a in self.assertions]
        lines += [f"action={a.to_text()}" for a in self.script]
        return "\n".join(lines) + "\n"


def validate_scenario(scenario: Scenario) -> None:
    """Static checks; raises ScriptInvalid."""
    if not scenario.parties:
        raise ScriptInvalid("A scenario needs at least one party")
    if len(set(scenario.parties)) != len(scenario.parties):
        raise ScriptInvalid("Duplicate party name")
    if any(p.startswith("validator-") for p in scenario.parties):
        raise ScriptInvalid("Party names may not start with 'validator-'")
    if scenario.validators < 1 or not 0 <= scenario.quorum <= scenario.validators:
        raise ScriptInvalid(f"Quorum {scenario.quorum} of {scenario.validators} validators")
    for a in scenario.assertions:
        if a.partition("=")[0] not in ASSERTIONS:
            raise ScriptInvalid(f"Unknown assertion {a!r}")
    for i, action in enumerate(scenario.script):
        required = ACTIONS.get(action.kind)
        if required is None:
            raise ScriptInvalid(f"step {i}: unknown action {action.kind!r}")
        for name in required:
            action.req(name)
        if action.kind == "crash_str" and action.get("at", "now") not in CRASH_POINTS:
            raise ScriptInvalid(f"step {i}: crash_str at={action.get('at')!r}; use one of {CRASH_POINTS}")


def parse_scenario(text: str) -> Scenario:
    """Read the line format written by Scenario.to_text()."""
    fields: dict[str, str] = {}
    assertions: list[str] = []
    script: list[Action] = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ScriptInvalid(f"line {n}: expected key=value, got {line!r}")
        if key == "assert":
            assertions.append(value)
        elif key == "action":
            script.append(Action.parse(value))
        elif key in ("name", "seed", "mode", "parties", "validators", "quorum", "server_signs", "start"):
            if key in fields:
                raise ScriptInvalid(f"line {n}: duplicate {key}")
            fields[key] = value
        else:
            raise ScriptInvalid(f"line {n}: unknown key {key!r}")
    try:
        scenario = Scenario(
            name=fields.get("name", "unnamed"),
            seed=int(fields["seed"]),
            mode=Mode.parse(fields.get("mode", Mode.JOINT_SUITE.value)),
            parties=tuple(p for p in fields["parties"].split(",") if p),
            script=tuple(script),
            assertions=tuple(assertions) or Scenario.assertions,
            validators=int(fields.get("validators", 1)),
            quorum=int(fields.get("quorum", 1)),
            server_signs=fields.get("server_signs", "true").lower() in ("1", "true", "yes"),
            start=int(fields.get("start", DEFAULT_START)),
        )
    except KeyError as e:
        raise ScriptInvalid(f"Scenario is missing {e.args[0]!r}") from None
    except ValueError as e:
        raise ScriptInvalid(str(e)) from e
    validate_scenario(scenario)
    return scenario


def load_scenario(path: Path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def with_fault(scenario: Scenario, fault: str, at: int) -> Scenario:
    """Insert one delivery/STR fault before step *at*."""
    faults = {
        "drop": Action("drop_next"),
        "duplicate": Action("duplicate_next"),
        "crash": Action("crash_str"),
        "crash_after_append": Action("crash_str", (("at", "after_append"),)),
    }
    if fault not in faults:
        raise ScriptInvalid(f"Unknown fault {fault!r}; use one of {sorted(faults)}")
    script = list(scenario.script)
    script.insert(at, faults[fault])
    return replace(scenario, name=f"{scenario.name}+{fault}@{at}", script=tuple(script))


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    scenario: str
    seed: int
    mode: str
    receipts: int = 0
    head_digest: str = ""
    log_digest: str = ""
    lost_deliveries: int = 0
    errors: list[str] = field(default_factory=list)
    store_digests: dict[str, str] = field(default_factory=dict)
    properties: dict[str, bool] = field(default_factory=dict)
    tamper: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.properties.values())

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "mode": self.mode,
            "receipts": self.receipts,
            "head_digest": self.head_digest,
            "log_digest": self.log_digest,
            "lost_deliveries": self.lost_deliveries,
            "errors": list(self.errors),
            "store_digests": dict(sorted(self.store_digests.items())),
            "properties": dict(sorted(self.properties.items())),
            "tamper": list(self.tamper),
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [
            f"Scenario {self.scenario} (seed {self.seed}, {self.mode})",
            f"  receipts committed: {self.receipts}",
            f"  head digest:        {self.head_digest}",
            f"  lost deliveries:    {self.lost_deliveries}",
        ]
        if self.errors:
            lines.append("  errors:")
            lines += [f"    {e}" for e in self.errors]
        lines.append("  party stores:")
        lines += [f"    {name:<14} {d}" for name, d in sorted(self.store_digests.items())]
        lines.append("  properties:")
        lines += [f"    {'PASS' if ok else 'FAIL'}  {name}" for name, ok in sorted(self.properties.items())]
        for t in self.tamper:
            lines.append(f"  tamper seq {t['seq']} offset {t['offset']}: "
                         f"{'detected at ' + str(t['first_bad_seq']) if t['detected'] else 'NOT DETECTED'}")
        lines.append(f"  result: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

class Simulation:
    """One single-threaded run of a scenario."""

    def __init__(self, scenario: Scenario):
        validate_scenario(scenario)
        self.scenario = scenario
        self.clock = SimulatedClock(scenario.start)
        self.config = EngineConfig(mode=scenario.mode, server_signs=scenario.server_signs,
                                   quorum=max(scenario.quorum, 1))

        self.keys: dict[str, KeyPair] = {}
        for name in scenario.parties:
            self.keys[name] = generate_keypair(f"{scenario.seed}:{name}")
        validator_keys = []
        for i in range(scenario.validators):
            key = generate_keypair(f"{scenario.seed}:validator-{i}")
            self.keys[f"validator-{i}"] = key
            validator_keys.append(key)
        self.names = {k.key_id: name for name, k in self.keys.items()}
        self.validators = ValidatorSet(tuple(validator_keys), scenario.quorum)

        self.disk = MemoryLogStore()
        self.bus: deque[tuple[str, bytes]] = deque()
        self._drop = 0
        self._dup = 0
        self._crash_after_append = False
        self.repo = self._start_str()
        self.stores = {k.key_id: PartyStore(k.key_id, quorum=self.repo.quorum) for k in self.keys.values()}

        self.drafts: dict[str, TransactionDraft] = {}
        self.receipts: dict[str, SignedReceipt] = {}
        self.running = RunningBalances()
        self.report = RunReport(scenario.name, scenario.seed, scenario.mode.value)
        self._expectations_met = True
        self._conserved_throughout = True

        self._handlers: dict[str, Callable[[Action], None]] = {
            "offer": self._offer,
            "accept": self._accept,
            "submit": self._submit,
            "reject": self._reject,
            "spend": self._spend,
            "mint": self._mint,
            "crash_str": self._crash_str,
            "drop_next": self._drop_next,
            "duplicate_next": self._duplicate_next,
            "advance_clock": self._advance_clock,
            "tamper": self._tamper,
        }

    # ── STR lifecycle / delivery ────────────────────────────────────────────
    def _start_str(self) -> SharedTransactionRepository:
        return SharedTransactionRepository(self.config, self.validators, clock=self.clock,
                                           store=self.disk, deliver=self._enqueue)

    def _enqueue(self, party: str, receipt: SignedReceipt) -> None:
        data = receipt.encode()
        if self._drop:
            self._drop -= 1
            logger.info(f"Dropped delivery of seq {receipt.seq} to {self.names.get(party, party[:12])}")
            return
        self.bus.append((party, data))
        if self._dup:
            self._dup -= 1
            self.bus.append((party, data))

    def _flush(self) -> None:
        while self.bus:
            party, data = self.bus.popleft()
            store = self.stores.get(party)
            if store is not None:
                store.receive(data)

    # ── helpers ─────────────────────────────────────────────────────────────
    def _key(self, name: str) -> KeyPair:
        try:
            return self.keys[name]
        except KeyError:
            raise ScriptInvalid(f"Unknown party {name!r}") from None

    def _draft(self, label: str) -> TransactionDraft:
        try:
            return self.drafts[label]
        except KeyError:
            raise ScriptInvalid(f"No draft labelled {label!r}") from None

    def _commit(self, label: str, draft: TransactionDraft) -> SignedReceipt:
        receipt = self.repo.validate(draft)
        self.drafts[label] = settle(draft, receipt)
        self.receipts[label] = receipt
        self.running.apply(receipt)
        self._after_commit()
        return receipt

    def _after_commit(self) -> None:
        if self._crash_after_append:
            self._crash_after_append = False
            self._restart_str()

    # ── actions ─────────────────────────────────────────────────────────────
    def _offer(self, a: Action) -> None:
        if self.scenario.mode is Mode.DIGITAL_CASH:
            raise ScriptInvalid("Use spend in DigitalCash scenarios")
        label = a.req("id")
        frm, to = self._key(a.req("from")).key_id, self._key(a.req("to")).key_id
        now = self.clock.now()
        give = EconomicEvent(f"{label}.give", a.req("resource"), a.int("qty"), frm, to, now,
                             purpose=a.get("purpose"))
        if self.scenario.mode is Mode.JOINT_SUITE:
            take = EconomicEvent(f"{label}.take", a.req("back_resource"), a.int("back_qty"), to, frm, now,
                                 purpose=a.get("purpose"))
            entry = make_exchange(give, take)
        else:
            entry = make_payment(give)
        initiator = self._key(a.get("by") or a.req("from"))
        self.drafts[label] = offer(entry, initiator, clock=self.clock, ttl=self.config.draft_ttl)

    def _accept(self, a: Action) -> None:
        label = a.req("id")
        draft = self._draft(label)
        if a.get("by"):
            key = self._key(a.req("by"))
        else:
            others = sorted(draft.entry.agents - {draft.offer_sig.signer if draft.offer_sig else ""})
            key = self._key(self.names[others[0]])
        self.drafts[label] = accept(draft, key, clock=self.clock)

    def _submit(self, a: Action) -> None:
        label = a.req("id")
        self._commit(label, self._draft(label))

    def _reject(self, a: Action) -> None:
        label = a.req("id")
        self.drafts[label] = reject(self._draft(label))

    def _spend(self, a: Action) -> None:
        label = a.req("id")
        spender, payee = self._key(a.req("from")), self._key(a.req("to"))
        qty, fee = a.int("qty"), a.int("fee", 0)
        payment = CashOutput(payee.key_id, qty)
        reused = a.get("inputs_of")
        if reused is not None:
            # replay inputs already consumed by an earlier spend
            prior = self.receipts.get(reused)
            if prior is None or prior.entry.cash is None:
                raise ScriptInvalid(f"No committed spend labelled {reused!r}")
            inputs = prior.entry.cash.inputs
            total_in = sum(self.repo.utxo.get(o).amount for o in inputs)
            outputs = (payment,)
            if total_in - qty - fee > 0:
                outputs += (CashOutput(spender.key_id, total_in - qty - fee),)
            tx = CashTransaction(inputs=inputs, outputs=outputs, fee=fee)
        else:
            tx = prepare_spend(self.repo.utxo, spender.key_id, [payment], fee)
        entry = cash_entry(tx, f"{label}.pay", self.config.cash_resource, spender.key_id,
                           payee.key_id, self.clock.now(), purpose=a.get("purpose"))
        draft = offer(entry, spender, clock=self.clock, ttl=self.config.draft_ttl)
        self.drafts[label] = draft
        self._commit(label, draft)

    def _mint(self, a: Action) -> None:
        index = a.int("validator", 0)
        if not 0 <= index < len(self.validators.keys):
            raise ScriptInvalid(f"mint: no validator {index}")
        validator = self.validators.keys[index]
        fees = self.repo.utxo.fee_pool if a.get("fees") == "pool" else a.int("fees", 0)
        receipt, _ = self.repo.mint_coinbase(validator, a.int("amount"), fees)
        self.running.apply(receipt)
        if a.get("id"):
            self.receipts[a.req("id")] = receipt
        self._after_commit()

    def _crash_str(self, a: Action) -> None:
        if a.get("at", "now") == "after_append":
            self._crash_after_append = True
            return
        self._restart_str()

    def _restart_str(self) -> None:
        lost = len(self.bus)
        self.bus.clear()
        self.report.lost_deliveries += lost
        logger.info(f"STR crashed with {lost} deliveries in flight; restarting from disk")
        self.repo = self._start_str()
        self.repo.recover(sorted(self.stores))

    def _drop_next(self, a: Action) -> None:
        self._drop += a.int("count", 1)

    def _duplicate_next(self, a: Action) -> None:
        self._dup += a.int("count", 1)

    def _advance_clock(self, a: Action) -> None:
        self.clock.advance(a.int("seconds"))

    def _tamper(self, a: Action) -> None:
        seq = a.int("seq")
        data = bytearray(self.disk.read())
        blocks = split_blocks(bytes(data))
        if not 0 <= seq < len(blocks):
            raise ScriptInvalid(f"tamper: no receipt at seq {seq}")
        start = sum(len(b) + 1 for b in blocks[:seq])
        offset = a.int("offset", len(blocks[seq]) // 2)
        if not 0 <= offset < len(blocks[seq]):
            raise ScriptInvalid(f"tamper: offset {offset} outside receipt {seq}")
        data[start + offset] ^= a.int("mask", 1)
        check = verify_log_bytes(bytes(data), quorum=self.repo.quorum)
        detected = not check.ok and check.first_bad_seq is not None and check.first_bad_seq >= seq
        self.report.tamper.append({"seq": seq, "offset": offset, "detected": detected,
                                   "first_bad_seq": check.first_bad_seq})
        logger.info(f"Tampered byte {offset} of seq {seq}: "
                    f"{'detected at seq ' + str(check.first_bad_seq) if detected else 'undetected'}")

    # ── run ─────────────────────────────────────────────────────────────────
    def run(self) -> RunReport:
        for step, action in enumerate(self.scenario.script):
            expect = action.get("expect")
            try:
                self._handlers[action.kind](action)
            except ScriptInvalid:
                raise
            except TripleKeyError as e:
                name = type(e).__name__
                self.report.errors.append(f"step {step} {action.kind}: {name}: {e}")
                if expect is None or expect not in {c.__name__ for c in type(e).__mro__}:
                    self._expectations_met = False
                    logger.warning(f"step {step} {action.kind} failed unexpectedly: {name}: {e}")
            else:
                if expect is not None:
                    self._expectations_met = False
                    self.report.errors.append(f"step {step} {action.kind}: expected {expect}, got success")
            self._flush()
            if self.scenario.mode is Mode.DIGITAL_CASH and not self._conserved():
                self._conserved_throughout = False

        self._reconcile()
        return self._finish()

    def _reconcile(self) -> None:
        self._drop = self._dup = 0
        for party in sorted(self.stores):
            self.repo.reforward(party)
        self._flush()

    def _conserved(self) -> bool:
        audit = audit_supply(self.repo.log)
        utxo = self.repo.utxo
        return audit.conserved and utxo.conserved() and audit.unspent == utxo.total_unspent

    def _finish(self) -> RunReport:
        report = self.report
        log = self.repo.log
        report.receipts = len(log)
        report.head_digest = log.head_digest
        report.log_digest = digest_hex(self.disk.read())
        report.store_digests = {self.names[pid]: store.digest() for pid, store in self.stores.items()}

        checks = {
            "wysiwis": lambda: check_wysiwis(log.receipts, self.stores),
            "chain": lambda: verify_chain(log, quorum=self.repo.quorum).ok
            and verify_log_bytes(self.disk.read(), quorum=self.repo.quorum).ok,
            "conservation": lambda: self._conserved_throughout and self._conserved(),
            "oracle": lambda: fold_balances(log, quorum=self.repo.quorum) == self.running.snapshot(),
            "tamper_detected": lambda: bool(report.tamper) and all(t["detected"] for t in report.tamper),
            "expectations": lambda: self._expectations_met,
        }
        report.properties["wysiwis"] = checks["wysiwis"]()
        report.properties["expectations"] = checks["expectations"]()
        for assertion in self.scenario.assertions:
            name, _, arg = assertion.partition("=")
            if name == "receipts":
                report.properties[assertion] = len(log) == int(arg)
            elif name == "acknowledged":
                receipt = self.receipts.get(arg)
                report.properties[assertion] = (
                    receipt is not None
                    and self.repo.acks.status(receipt.receipt_id) is AckStatus.ACKNOWLEDGED
                )
            else:
                report.properties[name] = checks[name]()
        logger.info(f"Scenario {self.scenario.name}: {len(log)} receipts, "
                    f"{'PASS' if report.passed else 'FAIL'}")
        return report


def check_wysiwis(receipts: Sequence[SignedReceipt], stores: dict[str, PartyStore]) -> bool:
    """Every named party holds exactly the STR's bytes for each of its receipts, and nothing else."""
    held = {pid: 0 for pid in stores}
    for receipt in receipts:
        data = receipt.encode()
        for party in receipt.entry.agents - {COINBASE_AGENT}:
            store = stores.get(party)
            if store is None or store.encoded(receipt.receipt_id) != data:
                return False
            held[party] += 1
    return all(len(stores[pid]) == n for pid, n in held.items())


def run(scenario: Scenario) -> RunReport:
    return Simulation(scenario).run()


# ---------------------------------------------------------------------------
# Builtin scenarios
# ---------------------------------------------------------------------------

_MONTH = 30 * SECONDS_PER_DAY
_PEOPLE = ("alice", "bob", "charlie")


def _trade(label: str, seller: str, buyer: str, good: str, units: int, price: int,
           back: str = "usd") -> list[Action]:
    return [
        act("offer", id=label, from_=seller, to=buyer, resource=good, qty=units,
            back_resource=back, back_qty=price),
        act("accept", id=label),
        act("submit", id=label),
    ]


def bicycle_scenario(seed: int = 7) -> Scenario:
    """Alice buys two bicycles from Bob (70 and 80 USD) and sells one to Charlie for 100 USD."""
    script = (
        _trade("b1", "bob", "alice", "bicycle", 1, 7000)
        + [act("advance_clock", seconds=_MONTH)]
        + _trade("b2", "bob", "alice", "bicycle", 1, 8000)
        + [act("advance_clock", seconds=_MONTH)]
        + _trade("s1", "alice", "charlie", "bicycle", 1, 10000)
    )
    return Scenario("bicycle", seed, Mode.JOINT_SUITE, _PEOPLE, tuple(script),
                    assertions=("wysiwis", "chain", "oracle", "expectations", "receipts=3"))


def cheque_scenario(seed: int = 11) -> Scenario:
    script = (
        act("offer", id="c1", from_="alice", to="bob", resource="usd", qty=5000),
        act("submit", id="c1", expect="MissingReceiverSignature"),
        act("accept", id="c1", by="charlie", expect="NotAParty"),
        act("accept", id="c1", by="bob"),
        act("submit", id="c1"),
        act("submit", id="c1", expect="Conflict"),
        act("offer", id="c2", from_="bob", to="charlie", resource="usd", qty=1200),
        act("accept", id="c2"),
        act("submit", id="c2"),
    )
    return Scenario("cheque", seed, Mode.DIGITAL_CHEQUE, _PEOPLE, script,
                    assertions=("wysiwis", "chain", "oracle", "expectations", "receipts=2"))


def cash_change_scenario(seed: int = 13) -> Scenario:
    script = (
        act("mint", id="m0", amount=10000),
        act("spend", id="p1", from_="validator-0", to="alice", qty=6000),
        act("spend", id="p2", from_="alice", to="bob", qty=2500, fee=100),
        act("spend", id="p3", from_="alice", to="charlie", qty=1000, inputs_of="p2",
            expect="DoubleSpend"),
        act("spend", id="p4", from_="bob", to="charlie", qty=9000, expect="InsufficientInput"),
        act("spend", id="p5", from_="alice", to="charlie", qty=1000),
    )
    return Scenario("cash-change", seed, Mode.DIGITAL_CASH, _PEOPLE, script,
                    assertions=("wysiwis", "chain", "oracle", "conservation", "expectations", "receipts=4"))


def coinbase_ack_scenario(seed: int = 17) -> Scenario:
    script = (
        act("mint", id="m0", amount=5000),
        act("spend", id="p1", from_="validator-0", to="alice", qty=3000, fee=50),
        act("advance_clock", seconds=SECONDS_PER_DAY),
        act("spend", id="p2", from_="alice", to="bob", qty=1000, fee=50),
        act("mint", id="m1", amount=5000, fees="pool"),
        act("mint", id="m2", amount=1, fees=500, expect="InvariantViolation"),
    )
    return Scenario("coinbase-ack", seed, Mode.DIGITAL_CASH, _PEOPLE, script,
                    assertions=("wysiwis", "chain", "oracle", "conservation", "expectations",
                                "acknowledged=p1", "receipts=4"))


def crash_recovery_scenario(seed: int = 19) -> Scenario:
    script = (
        _trade("b1", "bob", "alice", "bicycle", 1, 7000)
        + [act("drop_next", count=2)]
        + _trade("b2", "bob", "alice", "bicycle", 1, 8000)
        + [act("crash_str"), act("crash_str", at="after_append")]
        + _trade("s1", "alice", "charlie", "bicycle", 1, 10000)
        + [act("duplicate_next", count=2), act("crash_str")]
    )
    return Scenario("crash-recovery", seed, Mode.JOINT_SUITE, _PEOPLE, tuple(script),
                    assertions=("wysiwis", "chain", "oracle", "expectations", "receipts=3"))


def tamper_scenario(seed: int = 23) -> Scenario:
    script = (
        _trade("b1", "bob", "alice", "bicycle", 1, 7000)
        + _trade("b2", "bob", "alice", "bicycle", 1, 8000)
        + _trade("s1", "alice", "charlie", "bicycle", 1, 10000)
        + [act("tamper", seq=0, offset=10), act("tamper", seq=1), act("tamper", seq=2, offset=3)]
    )
    return Scenario("tamper-detection", seed, Mode.JOINT_SUITE, _PEOPLE, tuple(script),
                    assertions=("wysiwis", "chain", "expectations", "tamper_detected"))


def expiry_scenario(seed: int = 29) -> Scenario:
    script = (
        act("offer", id="x1", from_="bob", to="alice", resource="bicycle", qty=1,
            back_resource="usd", back_qty=7000),
        act("advance_clock", seconds=2 * SECONDS_PER_DAY),
        act("accept", id="x1", expect="Expired"),
        *_trade("x2", "bob", "alice", "bicycle", 1, 7000),
        act("offer", id="x3", from_="alice", to="charlie", resource="bicycle", qty=1,
            back_resource="usd", back_qty=9000),
        act("reject", id="x3"),
        act("accept", id="x3", expect="WrongState"),
    )
    return Scenario("expiry-reject", seed, Mode.JOINT_SUITE, _PEOPLE, script,
                    assertions=("wysiwis", "chain", "oracle", "expectations", "receipts=1"))


def builtin_scenarios() -> list[Scenario]:
    return [
        bicycle_scenario(),
        cheque_scenario(),
        cash_change_scenario(),
        coinbase_ack_scenario(),
        crash_recovery_scenario(),
        tamper_scenario(),
        expiry_scenario(),
    ]


def scenario_by_name(name: str) -> Scenario:
    for scenario in builtin_scenarios():
        if scenario.name == name:
            return scenario
    raise ScriptInvalid(f"No builtin scenario {name!r}; have {[s.name for s in builtin_scenarios()]}")


# ---------------------------------------------------------------------------
# Randomized scenarios
# ---------------------------------------------------------------------------

_RESOURCES = ("usd", "bicycle", "wheat")


def random_exchange_scenario(seed: int, n_tx: int, parties: Sequence[str] = _PEOPLE) -> Scenario:
    """n_tx joint-suite exchanges between random pairs of parties."""
    rng = np.random.default_rng(seed)
    script: list[Action] = []
    for i in range(n_tx):
        a, b = rng.choice(len(parties), size=2, replace=False)
        give, take = rng.choice(len(_RESOURCES), size=2, replace=False)
        script += _trade(f"t{i}", parties[a], parties[b], _RESOURCES[give], int(rng.integers(1, 50)),
                         int(rng.integers(1, 100_000)), back=_RESOURCES[take])
        if rng.random() < 0.1:
            script.append(act("advance_clock", seconds=int(rng.integers(1, 40)) * SECONDS_PER_DAY))
    return Scenario(f"random-exchange-{seed}", seed, Mode.JOINT_SUITE, tuple(parties), tuple(script),
                    assertions=("wysiwis", "chain", "oracle", "expectations", f"receipts={n_tx}"))


def random_cash_scenario(seed: int, n_tx: int, parties: Sequence[str] = _PEOPLE,
                         double_spend_rate: float = 0.05) -> Scenario:
    """Mints, fee-paying spends with change, and double-spend attempts.

    The generator tracks balances itself so every honest spend is affordable;
    every double-spend attempt carries ``expect=DoubleSpend``.
    """
    rng = np.random.default_rng(seed)
    holders = ["validator-0", *parties]
    balance = dict.fromkeys(holders, 0)
    pool = 0
    spends: list[tuple[str, str]] = []  # (label, spender)
    script: list[Action] = []
    committed = 0
    i = 0
    while committed < n_tx:
        i += 1
        roll = rng.random()
        funded = [h for h in holders if balance[h] >= 2]
        if not funded or roll < 0.1:
            amount = int(rng.integers(1_000, 50_000))
            recycled = pool if rng.random() < 0.5 else 0
            script.append(act("mint", id=f"m{i}", amount=amount, fees=recycled))
            balance["validator-0"] += amount + recycled
            pool -= recycled
        elif spends and roll < 0.1 + double_spend_rate:
            label, spender = spends[int(rng.integers(len(spends)))]
            payee = holders[(holders.index(spender) + 1) % len(holders)]
            script.append(act("spend", id=f"d{i}", from_=spender, to=payee, qty=1,
                              inputs_of=label, expect="DoubleSpend"))
            continue
        else:
            spender = funded[int(rng.integers(len(funded)))]
            payee = holders[(holders.index(spender) + 1 + int(rng.integers(len(holders) - 1))) % len(holders)]
            fee = int(rng.integers(0, min(100, balance[spender] - 1) + 1))
            qty = int(rng.integers(1, balance[spender] - fee + 1))
            script.append(act("spend", id=f"p{i}", from_=spender, to=payee, qty=qty, fee=fee))
            spends.append((f"p{i}", spender))
            balance[spender] -= qty + fee
            balance[payee] += qty
            pool += fee
        committed += 1
    return Scenario(f"random-cash-{seed}", seed, Mode.DIGITAL_CASH, tuple(parties), tuple(script),
                    assertions=("wysiwis", "chain", "oracle", "conservation", "expectations",
                                f"receipts={n_tx}"))
