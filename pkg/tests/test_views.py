"""Per-party sheets, pivot cells and the double-entry export."""

import csv
from dataclasses import replace
from pathlib import Path

import pytest

from triplekey.errors import ChainBroken, UnknownDimension, UnmappedResourceKind
from triplekey.harness import DEFAULT_START, Simulation, random_exchange_scenario, run
from triplekey.rea_model import ResourceKind
from triplekey.views import (
    JOURNAL_COLUMNS,
    Direction,
    balance,
    export_double_entry,
    fold_balances,
    journal_totals,
    period_of,
    pivot,
    project,
    write_journal_csv,
)

KINDS = {"usd": ResourceKind.CURRENCY, "bicycle": ResourceKind.GOOD}


def ids(sim):
    return {name: sim.keys[name].key_id for name in ("alice", "bob", "charlie")}


def test_balances_from_the_shared_record(bicycle_run):
    log, who = bicycle_run.repo.log, ids(bicycle_run)
    assert balance(log, who["alice"], "usd") == -5000
    assert balance(log, who["alice"], "bicycle") == 1
    assert balance(log, who["bob"], "usd") == 15000
    assert balance(log, who["charlie"], "bicycle") == 1


def test_project_gives_one_row_per_event(bicycle_run):
    log, who = bicycle_run.repo.log, ids(bicycle_run)
    view = project(log, who["alice"])
    assert len(view.rows) == 6
    assert view.receipt_ids() == [r.receipt_id for r in log]
    sale = [r for r in view.rows if r.receipt_id == log[2].receipt_id]
    assert {(r.direction, r.resource_id, r.quantity) for r in sale} == {
        (Direction.OUTFLOW, "bicycle", 1),
        (Direction.INFLOW, "usd", 10000),
    }
    assert all(r.counterparty == who["charlie"] for r in sale)
    assert view.balance("usd") == -5000


def test_same_receipt_mirrors_across_sheets(bicycle_run):
    log, who = bicycle_run.repo.log, ids(bicycle_run)
    rid = log[0].receipt_id
    alice_rows = {(r.resource_id, r.signed_quantity) for r in project(log, who["alice"]).rows
                  if r.receipt_id == rid}
    bob_rows = {(r.resource_id, -r.signed_quantity) for r in project(log, who["bob"]).rows
                if r.receipt_id == rid}
    assert alice_rows == bob_rows == {("bicycle", 1), ("usd", -7000)}


def test_stubs_annotate_one_sheet_only(bicycle_run):
    log, who = bicycle_run.repo.log, ids(bicycle_run)
    before = log.to_bytes()
    rid = log[2].receipt_id
    alice = project(log, who["alice"], stubs={rid: "sold to a regular"})
    charlie = project(log, who["charlie"])
    assert {r.local_stub for r in alice.rows if r.receipt_id == rid} == {"sold to a regular"}
    assert all(r.local_stub is None for r in charlie.rows)
    relabelled = alice.with_stub(rid, None)
    assert all(r.local_stub is None for r in relabelled.rows)
    assert log.to_bytes() == before


def test_pivot_by_party_and_resource(bicycle_run):
    log, who = bicycle_run.repo.log, ids(bicycle_run)
    cells = {(c.key("party"), c.key("resource")): c.total for c in pivot(log, ["party", "resource"])}
    assert cells == {
        (who["alice"], "usd"): -5000,
        (who["alice"], "bicycle"): 1,
        (who["bob"], "usd"): 15000,
        (who["bob"], "bicycle"): -2,
        (who["charlie"], "usd"): -10000,
        (who["charlie"], "bicycle"): 1,
    }


def test_pivot_grand_total_is_zero(bicycle_run):
    log = bicycle_run.repo.log
    (cell,) = pivot(log, [])
    assert cell.keys == () and cell.total == 0
    for resource_cell in pivot(log, ["resource"]):
        assert resource_cell.total == 0


def test_pivot_by_period(bicycle_run):
    log, who = bicycle_run.repo.log, ids(bicycle_run)
    cells = {(c.key("party"), c.key("period")): c.total
             for c in pivot(log, ["party", "period", "resource"]) if c.key("resource") == "usd"}
    # purchases on Mar 1 and Mar 31, the sale on Apr 30
    assert cells[(who["alice"], "2021-03")] == -15000
    assert cells[(who["alice"], "2021-04")] == 10000
    assert cells[(who["bob"], "2021-03")] == 15000
    assert period_of(DEFAULT_START) == "2021-03"


@pytest.mark.parametrize("dims", [["colour"], ["party", "party"]])
def test_pivot_rejects_bad_dimensions(bicycle_run, dims):
    with pytest.raises(UnknownDimension):
        pivot(bicycle_run.repo.log, dims)


def test_journal_for_a_sale(bicycle_run):
    log, who = bicycle_run.repo.log, ids(bicycle_run)
    entries = export_double_entry(project(log, who["alice"]), KINDS)
    sale = [e for e in entries if e.receipt_id == log[2].receipt_id and e.resource_id == "usd"]
    assert len(sale) == 1
    assert (sale[0].debit.account, sale[0].debit.amount) == ("Cash", 10000)
    assert (sale[0].credit.account, sale[0].credit.amount) == ("Sales", 10000)
    purchases = [e for e in entries if e.resource_id == "bicycle" and e.debit.account == "Inventory"]
    assert len(purchases) == 2
    debits, credits = journal_totals(entries)
    assert debits == credits


def test_journal_needs_every_resource_mapped(bicycle_run):
    view = project(bicycle_run.repo.log, ids(bicycle_run)["alice"])
    with pytest.raises(UnmappedResourceKind):
        export_double_entry(view, {"usd": ResourceKind.CURRENCY})


def test_journal_csv(bicycle_run, tmp_path):
    view = project(bicycle_run.repo.log, ids(bicycle_run)["bob"])
    entries = export_double_entry(view, KINDS)
    path = tmp_path / "out" / "bob.csv"
    write_journal_csv(entries, path)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == JOURNAL_COLUMNS
    assert len(rows) == 1 + len(entries)
    assert sum(int(r[2]) for r in rows[1:]) == sum(int(r[4]) for r in rows[1:])


def test_readme_documents_the_journal_columns():
    readme = (Path(__file__).resolve().parents[1] / "README.md").read_text(encoding="utf-8")
    assert ",".join(JOURNAL_COLUMNS) in readme


def test_views_refuse_a_broken_log(bicycle_run):
    receipts = list(bicycle_run.repo.log.receipts)
    receipts[1] = replace(receipts[1], committed_at=receipts[1].committed_at + 1)
    with pytest.raises(ChainBroken):
        project(receipts, ids(bicycle_run)["alice"])
    with pytest.raises(ChainBroken):
        pivot(receipts, ["party"])


def test_fold_matches_running_balances_over_a_thousand_exchanges():
    sim = Simulation(random_exchange_scenario(seed=2024, n_tx=1000))
    report = sim.run()
    assert report.passed, report.errors
    assert report.receipts == 1000
    folded = fold_balances(sim.repo.log)
    assert folded == sim.running.snapshot()
    for (party, resource), total in folded.items():
        assert balance(sim.repo.log, party, resource) == total
    assert sum(folded.values()) == 0


def test_random_exchange_runs_are_reproducible():
    a = run(random_exchange_scenario(seed=5, n_tx=30))
    b = run(random_exchange_scenario(seed=5, n_tx=30))
    assert a.passed and a.log_digest == b.log_digest
