"""Inventory cost assignment and momentum reporting."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from triplekey.accounting import (
    Column,
    CostMethod,
    InventoryContract,
    WealthPoint,
    add_unit,
    momentum_report,
    new_inventory,
    profit_from_log,
    sell_unit,
    wealth_series,
)
from triplekey.errors import (
    EmptyInventory,
    InsufficientPoints,
    NonMonotonicTime,
    NonPositiveCost,
    NotHolder,
    SelfPurchase,
    UnmatchedPrice,
)
from triplekey.rea_model import ResourceKind

KINDS = {"usd": ResourceKind.CURRENCY, "bicycle": ResourceKind.GOOD}


# ---------------------------------------------------------------------------
# Bicycle shop: bought at 70 and 80 USD, one sold at 100 USD (cents)
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("method, profit, left", [
    ("avco", 2500, (7500, 1)),
    ("fifo", 3000, (8000,)),
    ("lifo", 2000, (7000,)),
])
def test_contract_profit(method, profit, left):
    shop = InventoryContract("alice", item_price=10000, method=method)
    shop.add_one_unit("alice", 7000)
    shop.add_one_unit("alice", 8000)
    record = shop.buy_one_unit("charlie", 10000)
    assert record.profit == profit
    assert shop.get_profits() == [profit]
    assert shop.get_inventory() == left
    assert shop.get_inventory_balance("alice") == 1
    assert shop.get_inventory_balance("charlie") == 1


@pytest.mark.parametrize("method, profit", [("avco", 2500), ("FIFO", 3000), (CostMethod.LIFO, 2000)])
def test_profit_replayed_from_the_shared_record(bicycle_run, method, profit):
    alice = bicycle_run.keys["alice"].key_id
    records = profit_from_log(bicycle_run.repo.log, alice, method, KINDS)
    assert [r.profit for r in records] == [profit]
    assert records[0].receipt_id == bicycle_run.repo.log[2].receipt_id
    assert records[0].sale_price == 10000


def test_profit_for_a_seller_without_stock(bicycle_run):
    bob = bicycle_run.keys["bob"].key_id
    with pytest.raises(EmptyInventory):
        profit_from_log(bicycle_run.repo.log, bob, "fifo", KINDS)


BARTER_KINDS = {**KINDS, "wheat": ResourceKind.GOOD}


def test_profit_replay_with_barter_and_sub_cent_lots(make_repo, trade, keys):
    repo, _ = make_repo()
    alice, bob, charlie = keys["alice"], keys["bob"], keys["charlie"]
    trade(repo, "b1", bob, alice, price=7000)
    # 300 wheat for 2 cents: less than a cent per unit
    trade(repo, "w2", bob, alice, good="wheat", units=300, price=2)
    # two wheat for a bicycle: no currency, no cost basis
    trade(repo, "w1", charlie, alice, price=2, back="wheat")
    trade(repo, "s1", alice, bob, price=10000)
    trade(repo, "s2", alice, bob, price=9000)
    trade(repo, "w3", alice, charlie, good="wheat", units=100, price=500)

    for method in ("avco", "fifo", "lifo"):
        records = profit_from_log(repo.log, alice.key_id, method, BARTER_KINDS)
        assert [(r.sale_price, r.cogs) for r in records] == [(10000, 7000)]
        assert records[0].receipt_id == repo.log[3].receipt_id


def test_barter_away_consumes_stock_without_a_sale(make_repo, trade, keys):
    repo, _ = make_repo()
    alice, bob, charlie = keys["alice"], keys["bob"], keys["charlie"]
    trade(repo, "b1", bob, alice, price=7000)
    trade(repo, "b2", bob, alice, price=8000)
    trade(repo, "w1", alice, charlie, units=1, price=40, back="wheat")
    trade(repo, "s1", alice, bob, price=10000)
    records = profit_from_log(repo.log, alice.key_id, "fifo", BARTER_KINDS)
    assert [(r.sale_price, r.cogs) for r in records] == [(10000, 8000)]
    with pytest.raises(EmptyInventory):
        profit_from_log(repo.log, charlie.key_id, "fifo", BARTER_KINDS)


def test_contract_guards():
    shop = InventoryContract("alice", item_price=10000)
    with pytest.raises(EmptyInventory):
        shop.buy_one_unit("charlie", 10000)
    with pytest.raises(NotHolder):
        shop.add_one_unit("bob", 7000)
    with pytest.raises(NonPositiveCost):
        shop.add_one_unit("alice", 0)
    shop.add_one_unit("alice", 7000)
    with pytest.raises(SelfPurchase):
        shop.buy_one_unit("alice", 10000)
    with pytest.raises(UnmatchedPrice):
        shop.buy_one_unit("charlie", 9999)
    assert shop.get_profits() == []
    with pytest.raises(ValueError):
        InventoryContract("alice", item_price=-1)


def test_sell_unit_guards():
    inv = add_unit(new_inventory("fifo"), 100)
    with pytest.raises(SelfPurchase):
        sell_unit(inv, 150, buyer="alice", holder="alice")
    inv, record = sell_unit(inv, 150, buyer="bob", holder="alice")
    assert record.cogs == 100 and inv.units == 0
    with pytest.raises(EmptyInventory):
        sell_unit(inv, 150)


def test_avco_uses_integer_division():
    inv = new_inventory(CostMethod.AVCO)
    for cost in (1, 1, 2):
        inv = add_unit(inv, cost)
    inv, record = sell_unit(inv, 5)
    assert record.cogs == 1
    assert (inv.total_value, inv.count) == (3, 2)


def test_cost_method_parse():
    assert CostMethod.parse(" FIFO ") is CostMethod.FIFO
    with pytest.raises(ValueError):
        CostMethod.parse("hifo")


operations = st.lists(st.one_of(st.integers(min_value=1, max_value=10 ** 9), st.none()), max_size=60)


@given(method=st.sampled_from(list(CostMethod)), ops=operations)
def test_inventory_matches_a_brute_force_oracle(method, ops):
    inv = new_inventory(method)
    held: list[int] = []
    added = cogs_total = 0
    for op in ops:
        if op is not None:
            inv = add_unit(inv, op)
            held.append(op)
            added += op
            continue
        if not held:
            with pytest.raises(EmptyInventory):
                sell_unit(inv, 1)
            continue
        if method is CostMethod.FIFO:
            expected = held.pop(0)
        elif method is CostMethod.LIFO:
            expected = held.pop()
        else:
            expected = (added - cogs_total) // len(held)
            held.pop()
        inv, record = sell_unit(inv, 1)
        assert record.cogs == expected
        cogs_total += record.cogs
        assert inv.units == len(held)
        if method is CostMethod.AVCO and inv.count:
            assert inv.total_value - inv.count * (inv.total_value // inv.count) < inv.count
    assert cogs_total + inv.value == added
    if inv.units == 0:
        assert inv.value == 0


# ---------------------------------------------------------------------------
# Momentum
# ---------------------------------------------------------------------------

def test_unit_interval_force():
    report = momentum_report([(0, 100), (1, 160), (2, 250)])
    assert [i.income for i in report.intervals] == [60, 90]
    assert [i.momentum for i in report.intervals] == [Fraction(60), Fraction(90)]
    assert report.forces == (Fraction(30),)
    assert report.total_income == 150
    columns = report.columns()
    assert columns[Column.DEBIT] == [100, 160, 250]
    assert columns[Column.TREBIT] == [Fraction(30)]
    assert ("trebit", "force[0,1]->[1,2]", "30") in report.rows()


def test_uneven_intervals_use_midpoint_distance():
    report = momentum_report([WealthPoint(0, 0), WealthPoint(1, 10), WealthPoint(3, 40)])
    assert [i.momentum for i in report.intervals] == [Fraction(10), Fraction(15)]
    assert report.forces == (Fraction(10, 3),)


def test_steady_growth_has_no_force():
    report = momentum_report([(0, 0), (2, 10), (6, 30)])
    assert report.forces == (Fraction(0),)


def test_momentum_needs_two_increasing_points():
    with pytest.raises(InsufficientPoints):
        momentum_report([(0, 100)])
    with pytest.raises(NonMonotonicTime):
        momentum_report([(0, 100), (0, 120)])
    with pytest.raises(NonMonotonicTime):
        momentum_report([(5, 100), (3, 120)])


@given(
    start=st.integers(min_value=0, max_value=10 ** 6),
    steps=st.lists(st.tuples(st.integers(min_value=1, max_value=10 ** 4),
                             st.integers(min_value=-10 ** 9, max_value=10 ** 9)),
                   min_size=2, max_size=40),
)
def test_incomes_telescope(start, steps):
    t, points = start, [(start, 0)]
    for dt, wealth in steps:
        t += dt
        points.append((t, wealth))
    report = momentum_report(points)
    assert sum(i.income for i in report.intervals) == points[-1][1] - points[0][1]
    assert sum(i.momentum * i.duration for i in report.intervals) == points[-1][1] - points[0][1]
    assert len(report.forces) == len(points) - 2


def test_wealth_series_from_the_shared_record(bicycle_run):
    alice = bicycle_run.keys["alice"].key_id
    series = wealth_series(bicycle_run.repo.log, alice, "usd")
    assert [p.wealth for p in series] == [-7000, -15000, -5000]
    report = momentum_report(series)
    assert [i.income for i in report.intervals] == [-8000, 10000]
    assert report.forces == (Fraction(20),)
