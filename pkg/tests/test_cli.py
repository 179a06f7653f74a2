"""Command-line surface, driven through main(argv)."""

import csv
import json
import logging

import pytest

from triplekey.cli import create_parser, main, parse_kinds, parse_payment, read_series
from triplekey.crypto_core import generate_keypair, load_keypair, ricardian_digest
from triplekey.logging_setup import ROOT_LOGGER
from triplekey.rea_model import ResourceKind
from triplekey.str_engine import decode_draft


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("TRIPLEKEY_MODE", "TRIPLEKEY_SERVER_SIGNS", "TRIPLEKEY_QUORUM",
                 "TRIPLEKEY_DRAFT_TTL", "TRIPLEKEY_LOG", "TRIPLEKEY_LOG_DIR", "TRIPLEKEY_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def key_files(tmp_path, capsys):
    paths = {}
    for name in ("alice", "bob", "notary"):
        paths[name] = tmp_path / "keys" / f"{name}.key"
        assert main(["keygen", "--out", str(paths[name]), "--seed", f"cli:{name}"]) == 0
    capsys.readouterr()
    return paths


def last_line(capsys):
    return capsys.readouterr().out.strip().splitlines()[-1]


def test_keygen_prints_the_agent_id(tmp_path, capsys):
    out = tmp_path / "k.key"
    assert main(["keygen", "--out", str(out), "--seed", "x"]) == 0
    assert last_line(capsys) == generate_keypair("x").key_id
    assert load_keypair(out) == generate_keypair("x")


def test_contract_hash(tmp_path, capsys):
    contract = tmp_path / "bond.txt"
    contract.write_text("Pay the bearer 100 USD.\n", encoding="utf-8")
    assert main(["contract-hash", str(contract)]) == 0
    assert len(last_line(capsys)) == 64


def test_trade_commit_and_reports(tmp_path, key_files, capsys):
    alice_id = load_keypair(key_files["alice"]).key_id
    bob_id = load_keypair(key_files["bob"]).key_id
    draft, log = tmp_path / "b1.draft", tmp_path / "str.log"

    assert main(["offer", "--key", str(key_files["bob"]), "--to", alice_id, "--resource", "bicycle",
                 "--qty", "1", "--back-resource", "usd", "--back-qty", "7000", "--event-id", "b1",
                 "--out", str(draft)]) == 0
    assert main(["accept", "--key", str(key_files["alice"]), "--draft", str(draft)]) == 0
    commit = ["commit", "--draft", str(draft), "--validator-key", str(key_files["notary"]),
              "--log", str(log)]
    assert main(commit) == 0
    assert last_line(capsys).startswith("seq=0 receipt_id=")

    assert main(commit) == 1
    assert "Conflict" in capsys.readouterr().err

    assert main(["str-verify", str(log)]) == 0
    assert last_line(capsys) == "OK"

    assert main(["balance", "--log", str(log), "--party", alice_id, "--resource", "usd"]) == 0
    assert last_line(capsys) == "-7000"

    assert main(["pivot", "--log", str(log), "--dims", "resource"]) == 0
    assert capsys.readouterr().out.split() == ["bicycle", "0", "usd", "0"]

    assert main(["view", "--log", str(log), "--party", bob_id]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2

    journal = tmp_path / "bob.csv"
    assert main(["export-journal", "--log", str(log), "--party", bob_id, "--out", str(journal),
                 "--kinds", "usd=currency,bicycle=good"]) == 0
    with open(journal, newline="") as f:
        rows = list(csv.DictReader(f))
    assert {(r["debit_account"], r["debit_amount"], r["credit_account"]) for r in rows} == {
        ("Cash", "7000", "Sales"),
        ("COGS", "1", "Inventory"),
    }

    assert main(["profit", "--from-log", str(log), "--party", alice_id, "--method", "fifo"]) == 0
    assert last_line(capsys) == "total profit=0"
    assert main(["profit", "--log", str(log), "--party", alice_id]) == 0
    assert last_line(capsys) == "total profit=0"


def test_offer_from_the_receiver_binds_the_contract(tmp_path, key_files, capsys):
    alice_id = load_keypair(key_files["alice"]).key_id
    bob_id = load_keypair(key_files["bob"]).key_id
    contract = tmp_path / "bond.txt"
    contract.write_text("Bob pays the bearer 100 USD on 2027-01-01.\n", encoding="utf-8")
    draft, log = tmp_path / "bond.draft", tmp_path / "str.log"

    assert main(["offer", "--key", str(key_files["alice"]), "--from", bob_id, "--to", alice_id,
                 "--resource", "bond", "--qty", "1", "--contract", str(contract),
                 "--back-resource", "usd", "--back-qty", "9500", "--event-id", "bond",
                 "--out", str(draft)]) == 0
    give, take = decode_draft(draft.read_bytes()).entry.events
    assert (give.from_agent, give.to_agent, give.resource_id) == (bob_id, alice_id, "bond")
    assert give.contract_digest == ricardian_digest(contract.read_bytes()).digest
    assert (take.from_agent, take.contract_digest) == (alice_id, None)

    assert main(["accept", "--key", str(key_files["bob"]), "--draft", str(draft)]) == 0
    assert main(["commit", "--draft", str(draft), "--validator-key", str(key_files["notary"]),
                 "--log", str(log)]) == 0
    capsys.readouterr()
    assert main(["balance", "--log", str(log), "--party", alice_id, "--resource", "bond"]) == 0
    assert last_line(capsys) == "1"


def test_offer_from_an_absent_key_holder_is_refused(tmp_path, key_files, capsys):
    alice_id = load_keypair(key_files["alice"]).key_id
    bob_id = load_keypair(key_files["bob"]).key_id
    notary_key = str(key_files["notary"])
    assert main(["offer", "--key", notary_key, "--from", bob_id, "--to", alice_id, "--resource", "usd",
                 "--qty", "5", "--out", str(tmp_path / "d")]) == 1
    assert "NotAParty" in capsys.readouterr().err


def test_str_verify_reports_tampering(tmp_path, key_files, capsys):
    alice_id = load_keypair(key_files["alice"]).key_id
    draft, log = tmp_path / "c.draft", tmp_path / "str.log"
    main(["offer", "--key", str(key_files["bob"]), "--to", alice_id, "--resource", "bicycle", "--qty", "1",
          "--back-resource", "usd", "--back-qty", "7000", "--out", str(draft)])
    main(["accept", "--key", str(key_files["alice"]), "--draft", str(draft)])
    main(["commit", "--draft", str(draft), "--validator-key", str(key_files["notary"]), "--log", str(log)])
    capsys.readouterr()

    data = bytearray(log.read_bytes())
    data[20] ^= 0x01
    log.write_bytes(bytes(data))
    assert main(["str-verify", str(log)]) == 1
    assert last_line(capsys).startswith("BROKEN at seq 0")


def test_cash_mint_and_spend(tmp_path, key_files, capsys):
    alice_id = load_keypair(key_files["alice"]).key_id
    log = tmp_path / "cash.log"
    common = ["--mode", "DigitalCash", "--validator-key", str(key_files["notary"]), "--log", str(log)]

    assert main(["mint", "--amount", "1000", *common]) == 0
    assert "amount=1000" in last_line(capsys)
    assert main(["spend", "--key", str(key_files["notary"]), "--to", alice_id, f"{alice_id}:300",
                 "--fee", "5", *common]) == 0
f"{alice_id}:1", *common]) == 1
    assert main(["mint", "--amount", "10", *common]) == 0
    capsys.readouterr()

    assert main(["balance", "--log", str(log), "--party", alice_id, "--resource", "cash"]) == 0
    assert last_line(capsys) == "300"
    assert main(["str-verify", str(log)]) == 0


def test_spend_named_inputs_to_several_outputs(tmp_path, key_files, capsys):
    alice_id = load_keypair(key_files["alice"]).key_id
    bob_id = load_keypair(key_files["bob"]).key_id
    log = tmp_path / "cash.log"
    common = ["--mode", "DigitalCash", "--validator-key", str(key_files["notary"]), "--log", str(log)]

    assert main(["mint", "--amount", "1000", *common]) == 0
    first = last_line(capsys).split("output=")[1].split()[0]
    assert main(["mint", "--amount", "50", *common]) == 0
    second = last_line(capsys).split("output=")[1].split()[0]

    notary = ["--key", str(key_files["notary"])]
    assert main(["spend", *notary, "--input", second, "--input", first, "--to", f"{alice_id}:200",
                 "--to", f"{alice_id}:100", "--fee", "5", *common]) == 0
    assert main(["spend", *notary, "--input", first, "--to", f"{alice_id}:1", *common]) == 1
    assert "DoubleSpend" in capsys.readouterr().err

    assert main(["spend", "--key", str(key_files["alice"]), "--to", f"{bob_id}:250", *common]) == 0
    assert main(["spend", *notary, "--to", f"{alice_id}:1", "--to", f"{bob_id}:1", *common]) == 1
    assert "exactly one" in capsys.readouterr().err

    for party, expected in ((alice_id, "50"), (bob_id, "250")):
        assert main(["balance", "--log", str(log), "--party", party, "--resource", "cash"]) == 0
        assert last_line(capsys) == expected
    assert main(["str-verify", str(log)]) == 0


def test_parse_payment():
    assert parse_payment("ab12:300").amount == 300
    assert parse_payment("ab12:300").owner == "ab12"


def test_log_settings_come_from_the_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TRIPLEKEY_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("TRIPLEKEY_LOG_LEVEL", "error")
    assert main(["keygen", "--out", str(tmp_path / "k.key"), "--seed", "x"]) == 0
    assert (tmp_path / "logs" / "triplekey.log").exists()
    levels = {type(h).__name__: h.level for h in logging.getLogger(ROOT_LOGGER).handlers}
    assert levels == {"FileHandler": logging.DEBUG, "StreamHandler": logging.ERROR}


def test_bad_log_level_is_a_usage_error(monkeypatch):
    monkeypatch.setenv("TRIPLEKEY_LOG_LEVEL", "chatty")
    with pytest.raises(SystemExit) as exc:
        main(["contract-hash", "x"])
    assert exc.value.code == 2


    assert main(["str-verify", str(log)]) == 0


def test_momentum_from_csv(tmp_path, capsys):
    series = tmp_path / "wealth.csv"
    series.write_text("t,wealth\n0,100\n1,160\n2,250\n", encoding="utf-8")
    assert read_series(series) == [(0, 100), (1, 160), (2, 250)]
    assert main(["momentum", "--series", str(series)]) == 0
    out = capsys.readouterr().out
    assert "trebit" in out
    assert out.strip().splitlines()[-1].split()[-1] == "30"

    series.write_text("0,100\n", encoding="utf-8")
    assert main(["momentum", "--series", str(series)]) == 1


def test_simulate_writes_reports(tmp_path, capsys):
    report = tmp_path / "run.txt"
    assert main(["simulate", "--scenario", "bicycle", "--report", str(report)]) == 0
    assert "result: PASS" in report.read_text(encoding="utf-8")
    data = json.loads(report.with_suffix(".json").read_text(encoding="utf-8"))
    assert data["passed"] is True and data["receipts"] == 3
    capsys.readouterr()

    assert main(["simulate", "--scenario", "bicycle", "--seed", "8", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 8

    assert main(["simulate", "--scenario", "no-such-scenario"]) == 1


@pytest.mark.parametrize("argv", [
    ["offer", "--key", "k", "--to", "x", "--resource", "usd", "--qty", "0", "--out", "d"],
    ["offer", "--key", "k", "--to", "x", "--resource", "usd", "--qty", "5", "--back-resource", "usd",
     "--out", "d"],
    ["spend", "--key", "k", "--to", "x:5", "--fee", "-1", "--validator-key", "v"],
    ["spend", "--key", "k", "--to", "x:0", "--validator-key", "v"],
    ["spend", "--key", "k", "--to", "x", "--validator-key", "v"],
    ["spend", "--key", "k", "--to", "x:5", "--input", "no-index", "--validator-key", "v"],
    ["offer", "--key", "k", "--from", "x", "--to", "x", "--resource", "usd", "--qty", "5", "--out", "d"],
    ["profit", "--party", "p"],
    ["export-journal", "--log", "l", "--party", "p", "--out", "o", "--kinds", "usd=money"],
    ["profit", "--from-log", "l", "--party", "p", "--method", "hifo"],
    ["frobnicate"],
])
def test_bad_arguments_exit_with_usage_error(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_parse_kinds():
    assert parse_kinds("usd=currency, bicycle=good") == {
        "usd": ResourceKind.CURRENCY,
        "bicycle": ResourceKind.GOOD,
    }


def test_parser_lists_every_command():
    parser = create_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == {
        "keygen", "contract-hash", "offer", "accept", "commit", "spend", "mint", "str-verify",
        "view", "balance", "pivot", "export-journal", "profit", "momentum", "simulate",
    }
