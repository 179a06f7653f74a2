"""
TripleKey - Command Line

    python -m triplekey keygen --out keys/alice.key
    python -m triplekey offer --key keys/bob.key --to <alice-id> --resource bicycle --qty 1 \\
        --back-resource usd --back-qty 7000 --out b1.draft
    python -m triplekey spend --key keys/alice.key --input <receipt-id>:0 --to <bob-id>:300 \\
        --mode DigitalCash --validator-key keys/notary.key --log cash.log
    python -m triplekey profit --from-log str.log --party <alice-id> --method fifo
    python -m triplekey accept --key keys/alice.key --draft b1.draft --out b1.draft
    python -m triplekey commit --draft b1.draft --validator-key keys/notary.key --log str.log
    python -m triplekey str-verify str.log
    python -m triplekey simulate --scenario bicycle --report run.txt
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .accounting import CostMethod, momentum_report, profit_from_log
from .clock import SystemClock
from .config import EngineConfig
from .crypto_core import generate_keypair, load_keypair, ricardian_digest, save_keypair
from .errors import InvariantViolation, TripleKeyError
from .harness import load_scenario, run, scenario_by_name
from .logging_setup import setup_logging
from .payment_modes import Mode, cash_entry, prepare_spend
from .rea_model import CashOutput, EconomicEvent, Outpoint, ResourceKind, make_exchange, make_payment
from .str_engine import (
    FileLogStore,
    ReceiptLog,
    SharedTransactionRepository,
    ValidatorSet,
    accept,
    decode_draft,
    encode_draft,
    offer,
    verify_log_bytes,
)
from .views import balance, export_double_entry, pivot, project, write_journal_csv

logger = logging.getLogger("TripleKey.CLI")

DEFAULT_KINDS = "usd=currency,cash=currency"


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------

def parse_kinds(text: str) -> dict[str, ResourceKind]:
    kinds = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        resource, sep, kind = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"--kinds entries look like usd=currency, got {item!r}")
        try:
            kinds[resource] = ResourceKind(kind)
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"Unknown resource kind {kind!r}; use currency, good or instrument") from None
    return kinds


def parse_payment(text: str) -> CashOutput:
    """<agent>:<amount>, as given to spend --to."""
    owner, sep, amount = text.rpartition(":")
    if not sep or not owner or not amount.isdigit() or int(amount) <= 0:
        raise argparse.ArgumentTypeError(f"--to must look like <agent>:<positive amount>, got {text!r}")
    return CashOutput(owner, int(amount))


def validate_args(args: argparse.Namespace) -> None:
    """Checks argparse cannot express on its own."""
    for name in ("qty", "back_qty", "amount"):
        value = getattr(args, name, None)
        if value is not None and value <= 0:
            raise argparse.ArgumentTypeError(f"--{name.replace('_', '-')} must be positive, got {value}")
    for name in ("fee", "fees"):
        value = getattr(args, name, None)
        if value is not None and value < 0:
            raise argparse.ArgumentTypeError(f"--{name} cannot be negative, got {value}")
    if getattr(args, "back_resource", None) and getattr(args, "back_qty", None) is None:
        raise argparse.ArgumentTypeError("--back-resource needs --back-qty")
    if args.command == "offer" and args.from_agent == args.to:
        raise argparse.ArgumentTypeError("--from and --to name the same agent")
    if getattr(args, "quorum", None) is not None and args.quorum < 0:
        raise argparse.ArgumentTypeError(f"--quorum cannot be negative, got {args.quorum}")


def _config(args: argparse.Namespace) -> EngineConfig:
    mode = Mode.parse(args.mode) if getattr(args, "mode", None) else None
    return EngineConfig.from_env(mode=mode, log_path=getattr(args, "log", None),
                                 quorum=getattr(args, "quorum", None))


def _repository(args: argparse.Namespace) -> SharedTransactionRepository:
    config = _config(args)
    keys = tuple(load_keypair(p) for p in args.validator_key)
    validators = ValidatorSet(keys, config.quorum)
    return SharedTransactionRepository(config, validators, clock=SystemClock(),
                                       store=FileLogStore(config.log_path))


def _log(args: argparse.Namespace) -> ReceiptLog:
    return ReceiptLog.load(FileLogStore(args.log))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_keygen(args: argparse.Namespace) -> int:
    key = generate_keypair(args.seed)
    save_keypair(key, args.out)
    print(key.key_id)
    return 0


def cmd_contract_hash(args: argparse.Namespace) -> int:
    print(ricardian_digest(args.contract.read_bytes()).digest)
    return 0


def cmd_offer(args: argparse.Namespace) -> int:
    key = load_keypair(args.key)
    giver = args.from_agent or key.key_id
    contract = ricardian_digest(args.contract.read_bytes()).digest if args.contract else None
    clock = SystemClock()
    now = clock.now()
    give = EconomicEvent(f"{args.event_id}.give", args.resource, args.qty, giver, args.to, now,
                         purpose=args.purpose, contract_digest=contract)
    if args.back_resource:
        take = EconomicEvent(f"{args.event_id}.take", args.back_resource, args.back_qty, args.to,
                             giver, now, purpose=args.purpose)
        entry = make_exchange(give, take)
    else:
        entry = make_payment(give)
    draft = offer(entry, key, clock=clock, ttl=_config(args).draft_ttl)
    args.out.write_bytes(encode_draft(draft))
    print(draft.draft_id)
    return 0


def cmd_accept(args: argparse.Namespace) -> int:
    draft = accept(decode_draft(args.draft.read_bytes()), load_keypair(args.key), clock=SystemClock())
    (args.out or args.draft).write_bytes(encode_draft(draft))
    print(draft.draft_id)
    return 0


def cmd_commit(args: argparse.Namespace) -> int:
    repo = _repository(args)
    receipt = repo.validate(decode_draft(args.draft.read_bytes()))
    print(f"seq={receipt.seq} receipt_id={receipt.receipt_id}")
    return 0


def cmd_spend(args: argparse.Namespace) -> int:
    repo = _repository(args)
    key = load_keypair(args.key)
    payees = {o.owner for o in args.to if o.owner != key.key_id}
    if len(payees) != 1:
        raise InvariantViolation("A spend pays exactly one agent other than the spender")
    tx = prepare_spend(repo.utxo, key.key_id, args.to, args.fee, inputs=args.input)
    clock = SystemClock()
    entry = cash_entry(tx, f"{args.event_id}.pay", repo.config.cash_resource, key.key_id, payees.pop(),
                       clock.now(), purpose=args.purpose)
    receipt = repo.validate(offer(entry, key, clock=clock, ttl=repo.config.draft_ttl))
    print(f"seq={receipt.seq} receipt_id={receipt.receipt_id}")
    return 0


def cmd_mint(args: argparse.Namespace) -> int:
    repo = _repository(args)
    fees = repo.utxo.fee_pool if args.fees is None else args.fees
    receipt, utxo = repo.mint_coinbase(repo.validators.keys[0], args.amount, fees)
    print(f"seq={receipt.seq} receipt_id={receipt.receipt_id} output={utxo.outpoint} amount={utxo.amount}")
    return 0


def cmd_str_verify(args: argparse.Namespace) -> int:
    check = verify_log_bytes(args.logfile.read_bytes(), quorum=args.quorum,
                             expected_head=args.expected_head)
    if check.ok:
        print("OK")
        return 0
    print(f"BROKEN at seq {check.first_bad_seq}: {check.reason}")
    return 1


def cmd_view(args: argparse.Namespace) -> int:
    view = project(_log(args), args.party, quorum=args.quorum)
    for row in view.rows:
        print(f"{row.seq:>6} {row.receipt_id[:16]} {row.direction.value:<7} {row.resource_id:<10} "
              f"{row.quantity:>12} {row.counterparty[:16]} {row.purpose or ''}")
    return 0


def cmd_balance(args: argparse.Namespace) -> int:
    print(balance(_log(args), args.party, args.resource, quorum=args.quorum))
    return 0


def cmd_pivot(args: argparse.Namespace) -> int:
    dims = [d.strip() for d in args.dims.split(",") if d.strip()]
    for cell in pivot(_log(args), dims, quorum=args.quorum):
        print(" ".join(cell.keys + (str(cell.total),)))
    return 0


def cmd_export_journal(args: argparse.Namespace) -> int:
    view = project(_log(args), args.party, quorum=args.quorum)
    entries = export_double_entry(view, args.kinds)
    write_journal_csv(entries, args.out)
    print(f"{len(entries)} entries written to {args.out}")
    return 0


def cmd_profit(args: argparse.Namespace) -> int:
    records = profit_from_log(_log(args), args.party, args.method, args.kinds, quorum=args.quorum)
    for r in records:
        print(f"{r.receipt_id[:16]} price={r.sale_price} cogs={r.cogs} profit={r.profit}")
    print(f"total profit={sum(r.profit for r in records)}")
    return 0


def read_series(path: Path) -> list[tuple[int, int]]:
    """t,wealth rows; a non-numeric first row is taken as a header."""
    points = []
    with open(path, newline="", encoding="utf-8") as f:
        for n, row in enumerate(csv.reader(f)):
            if not row:
                continue
            try:
                points.append((int(row[0]), int(row[1])))
            except (ValueError, IndexError):
                if n == 0:
                    continue
                raise ValueError(f"{path}: row {n + 1} is not t,wealth: {row}") from None
    return points


def cmd_momentum(args: argparse.Namespace) -> int:
    report = momentum_report(read_series(args.series))
    for column, label, value in report.rows():
        print(f"{column:<7} {label:<28} {value}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    candidate = Path(args.scenario)
    scenario = load_scenario(candidate) if candidate.is_file() else scenario_by_name(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    report = run(scenario)
    text = report.to_json() if args.json else report.to_text()
    if args.report:
        args.report.write_text(text + "\n", encoding="utf-8")
        args.report.with_suffix(".json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(text)
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def create_parser() -> argparse.ArgumentParser:
    """Create and configure argument parser."""
    parser = argparse.ArgumentParser(
        prog="triplekey",
        description="TripleKey - triple-entry accounting engine: signed receipts, "
        "a hash-chained shared transaction repository, per-party views and accounting reports.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--log-dir", type=Path, default=None, help="Directory for log files (TRIPLEKEY_LOG_DIR)")
    parser.add_argument("--verbose", action="store_true", help="Enable verbose (DEBUG) console logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=func)
        return p

    def add_str_options(p: argparse.ArgumentParser) -> None:
        p.add_argument("--log", type=Path, default=None, help="Receipt log file (TRIPLEKEY_LOG)")
        p.add_argument("--mode", default=None, help="JointSuite, DigitalCheque or DigitalCash (TRIPLEKEY_MODE)")
        p.add_argument("--validator-key", type=Path, action="append", required=True,
                       help="Validator key file; repeat for k-of-n")
        p.add_argument("--quorum", type=int, default=None, help="Validator signatures required")

    def add_read_options(p: argparse.ArgumentParser, party: bool = True, flag: str = "--log") -> None:
        names = (flag, "--log") if flag != "--log" else (flag,)
        p.add_argument(*names, dest="log", type=Path, required=True, help="Receipt log file")
        p.add_argument("--quorum", type=int, default=1, help="Validator signatures required per receipt")
        if party:
            p.add_argument("--party", required=True, help="Agent id (key digest)")

    p = add("keygen", cmd_keygen, "Generate an Ed25519 key file")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", default=None, help="Derive the key from a seed (reproducible)")

    p = add("contract-hash", cmd_contract_hash, "Digest of a Ricardian contract file")
    p.add_argument("contract", type=Path)

    p = add("offer", cmd_offer, "Sign an offer and write the draft")
    p.add_argument("--key", type=Path, required=True, help="Initiator key file")
    p.add_argument("--from", dest="from_agent", default=None,
                   help="Agent giving --resource (default: the --key holder)")
    p.add_argument("--to", required=True, help="Agent receiving --resource")
    p.add_argument("--resource", required=True)
    p.add_argument("--qty", type=int, required=True)
    p.add_argument("--back-resource", default=None, help="Consideration resource (joint suite)")
    p.add_argument("--back-qty", type=int, default=None)
    p.add_argument("--contract", type=Path, default=None,
                   help="Ricardian contract file; its digest is bound to the --resource event")
    p.add_argument("--event-id", default="e1", help="Event id prefix")
    p.add_argument("--purpose", default=None)
    p.add_argument("--out", type=Path, required=True)

    p = add("accept", cmd_accept, "Countersign a draft")
    p.add_argument("--key", type=Path, required=True)
    p.add_argument("--draft", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="Defaults to overwriting --draft")

    p = add("commit", cmd_commit, "Validate a draft and append its receipt")
    p.add_argument("--draft", type=Path, required=True)
    add_str_options(p)

    p = add("spend", cmd_spend, "Pay digital cash (DigitalCash mode)")
    p.add_argument("--key", type=Path, required=True)
    p.add_argument("--input", type=Outpoint.parse, action="append", default=None,
                   help="Outpoint <receipt_id>:<index> to spend; repeat (default: oldest unspent)")
    p.add_argument("--to", type=parse_payment, action="append", required=True,
                   help="<agent>:<amount>; repeat for several outputs")
    p.add_argument("--fee", type=int, default=0)
    p.add_argument("--event-id", default="e1")
    p.add_argument("--purpose", default=None)
    add_str_options(p)

    p = add("mint", cmd_mint, "Coinbase to the first validator (DigitalCash mode)")
    p.add_argument("--amount", type=int, required=True)
    p.add_argument("--fees", type=int, default=None, help="Fees to recycle (default: the whole pool)")
    add_str_options(p)

    p = add("str-verify", cmd_str_verify, "Verify a receipt log file")
    p.add_argument("logfile", type=Path)
    p.add_argument("--quorum", type=int, default=1)
    p.add_argument("--expected-head", default=None, help="Externally anchored head digest")

    p = add("view", cmd_view, "Print one party's sheet")
    add_read_options(p)

    p = add("balance", cmd_balance, "Net balance of one resource")
    add_read_options(p)
    p.add_argument("--resource", required=True)

    p = add("pivot", cmd_pivot, "Hypercube totals")
    add_read_options(p, party=False)
    p.add_argument("--dims", default="party,resource", help="Subset of party,resource,period,purpose")

    p = add("export-journal", cmd_export_journal, "Double-entry journal CSV for one party")
    add_read_options(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--kinds", type=parse_kinds, default=parse_kinds(DEFAULT_KINDS),
                   help="resource=kind pairs, e.g. usd=currency,bicycle=good")

    p = add("profit", cmd_profit, "Inventory profit from the shared record")
    add_read_options(p, flag="--from-log")
    p.add_argument("--method", type=CostMethod.parse, default=CostMethod.AVCO)
    p.add_argument("--kinds", type=parse_kinds, default=parse_kinds(DEFAULT_KINDS + ",bicycle=good"))

    p = add("momentum", cmd_momentum, "Momentum / force report from a t,wealth CSV")
    p.add_argument("--series", type=Path, required=True)

    p = add("simulate", cmd_simulate, "Run a builtin or file scenario")
    p.add_argument("--scenario", required=True, help="Builtin name or scenario file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--report", type=Path, default=None)
    p.add_argument("--json", action="store_true", help="Print the machine-readable summary")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point."""
    parser = create_parser()
    args = parser.parse_args(argv)

    try:
        validate_args(args)
    except argparse.ArgumentTypeError as e:
        parser.error(str(e))

    try:
        config = EngineConfig.from_env(log_dir=args.log_dir, log_level="DEBUG" if args.verbose else None)
    except ValueError as e:
        parser.error(str(e))
    setup_logging(config.log_dir, console_level=config.log_level)

    try:
        return args.func(args)
    except TripleKeyError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        logger.exception(f"Fatal error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
