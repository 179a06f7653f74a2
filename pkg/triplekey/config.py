"""
TripleKey - Configuration

Engine settings with module-level defaults.  Environment variables
(TRIPLEKEY_*) override the defaults; command-line flags override both.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .payment_modes import Mode

DEFAULT_MODE = Mode.JOINT_SUITE
DEFAULT_SERVER_SIGNS = True
DEFAULT_QUORUM = 1
DEFAULT_DRAFT_TTL = 86_400  # seconds
DEFAULT_CASH_RESOURCE = "cash"
DEFAULT_LOG_PATH = Path("str.log")
DEFAULT_LOG_LEVEL = "WARNING"

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}
_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


@dataclass(frozen=True)
class EngineConfig:
    mode: Mode = DEFAULT_MODE
    server_signs: bool = DEFAULT_SERVER_SIGNS
    quorum: int = DEFAULT_QUORUM
    draft_ttl: int = DEFAULT_DRAFT_TTL
    cash_resource: str = DEFAULT_CASH_RESOURCE
    log_path: Path = field(default=DEFAULT_LOG_PATH)
    log_dir: Optional[Path] = None
    log_level: str = DEFAULT_LOG_LEVEL

    def __post_init__(self):
        self._validate()

    def _validate(self) -> None:
        if not isinstance(self.mode, Mode):
            raise ValueError(f"mode must be a Mode, got {self.mode!r}")
        if self.quorum < 0:
            raise ValueError(f"quorum must be non-negative, got {self.quorum}")
        if self.server_signs and self.quorum == 0:
            raise ValueError("quorum must be at least 1 when the server signs")
        if self.draft_ttl <= 0:
            raise ValueError(f"draft_ttl must be positive, got {self.draft_ttl}")
        if not self.cash_resource.strip():
            raise ValueError("cash_resource cannot be empty")
        if self.log_level.upper() not in _LEVELS:
            raise ValueError(f"Unknown log level {self.log_level!r}")

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None, **overrides) -> "EngineConfig":
        env = os.environ if environ is None else environ
        values: dict = {}
        if "TRIPLEKEY_MODE" in env:
            values["mode"] = Mode.parse(env["TRIPLEKEY_MODE"])
        if "TRIPLEKEY_SERVER_SIGNS" in env:
            values["server_signs"] = _parse_bool("TRIPLEKEY_SERVER_SIGNS", env["TRIPLEKEY_SERVER_SIGNS"])
        if "TRIPLEKEY_QUORUM" in env:
            values["quorum"] = _parse_int("TRIPLEKEY_QUORUM", env["TRIPLEKEY_QUORUM"])
        if "TRIPLEKEY_DRAFT_TTL" in env:
            values["draft_ttl"] = _parse_int("TRIPLEKEY_DRAFT_TTL", env["TRIPLEKEY_DRAFT_TTL"])
        if "TRIPLEKEY_LOG" in env:
            values["log_path"] = Path(env["TRIPLEKEY_LOG"])
        if "TRIPLEKEY_LOG_DIR" in env:
            values["log_dir"] = Path(env["TRIPLEKEY_LOG_DIR"])
        if "TRIPLEKEY_LOG_LEVEL" in env:
            values["log_level"] = env["TRIPLEKEY_LOG_LEVEL"].strip().upper()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _parse_bool(name: str, text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"{name} must be a boolean, got {text!r}")


def _parse_int(name: str, text: str) -> int:
    try:
        return int(text.strip())
    except ValueError as e:
        raise ValueError(f"{name} must be an integer, got {text!r}") from e
