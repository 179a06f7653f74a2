"""Shared fixtures: deterministic keys, a simulated clock and ready-made logs."""

import logging

import pytest

from triplekey.clock import SimulatedClock
from triplekey.config import EngineConfig
from triplekey.crypto_core import generate_keypair
from triplekey.harness import DEFAULT_START, Simulation, bicycle_scenario
from triplekey.logging_setup import ROOT_LOGGER
from triplekey.payment_modes import Mode
from triplekey.rea_model import EconomicEvent, make_exchange, make_payment
from triplekey.str_engine import (
    MemoryLogStore,
    SharedTransactionRepository,
    ValidatorSet,
    accept,
    offer,
)


@pytest.fixture(autouse=True)
def _detach_log_handlers():
    yield
    logger = logging.getLogger(ROOT_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()


@pytest.fixture
def keys():
    return {name: generate_keypair(f"test:{name}") for name in ("alice", "bob", "charlie", "notary")}


@pytest.fixture
def clock():
    return SimulatedClock(DEFAULT_START)


@pytest.fixture
def make_repo(keys, clock):
    """Factory for a repository over an in-memory log; returns (repo, delivered)."""

    def factory(mode=Mode.JOINT_SUITE, validators=None, quorum=1, server_signs=True, store=None,
                directory=None):
        delivered = []
        validator_keys = tuple(validators) if validators else (keys["notary"],)
        config = EngineConfig(mode=mode, server_signs=server_signs, quorum=max(quorum, 1))
        repo = SharedTransactionRepository(
            config,
            ValidatorSet(validator_keys, quorum),
            clock=clock,
            store=store if store is not None else MemoryLogStore(),
            deliver=lambda party, receipt: delivered.append((party, receipt)),
            directory=directory,
        )
        return repo, delivered

    return factory


@pytest.fixture
def exchange(clock):
    """Build a joint-suite entry: seller gives *units* of *good*, buyer pays *price*."""

    def build(label, seller, buyer, good="bicycle", units=1, price=7000, back="usd"):
        now = clock.now()
        give = EconomicEvent(f"{label}.give", good, units, seller.key_id, buyer.key_id, now)
        take = EconomicEvent(f"{label}.take", back, price, buyer.key_id, seller.key_id, now)
        return make_exchange(give, take)

    return build


@pytest.fixture
def payment(clock):
    def build(label, payer, payee, resource="usd", qty=5000):
        return make_payment(EconomicEvent(f"{label}.pay", resource, qty, payer.key_id, payee.key_id,
                                          clock.now()))

    return build


@pytest.fixture
def trade(clock, exchange):
    """Offer, accept and validate one exchange through *repo*."""

    def run_trade(repo, label, seller, buyer, **kwargs):
        draft = offer(exchange(label, seller, buyer, **kwargs), seller, clock=clock)
        return repo.validate(accept(draft, buyer, clock=clock))

    return run_trade


@pytest.fixture
def bicycle_run():
    """Alice buys bicycles at 70 and 80 USD and sells one for 100 USD."""
    sim = Simulation(bicycle_scenario())
    report = sim.run()
    assert report.passed, report.to_text()
    return sim
