"""
TripleKey - Clocks

All timestamps are integer UTC seconds taken from an injected clock, so the
simulation harness is deterministic and expiry is testable.
"""

from __future__ import annotations

import threading
import time
from typing import Protocol


class Clock(Protocol):
    def now(self) -> int: ...


class SystemClock:
    """Wall-clock time in whole UTC seconds."""

    def now(self) -> int:
        return int(time.time())


class SimulatedClock:
    """Clock that only moves when told to."""

    def __init__(self, start: int = 0):
        if start < 0:
            raise ValueError(f"Clock start must be non-negative, got {start}")
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            return self._now

    def advance(self, seconds: int) -> int:
        if seconds < 0:
            raise ValueError(f"Cannot move the clock backwards ({seconds}s)")
        with self._lock:
            self._now += seconds
            return self._now
