"""
TripleKey - Crypto Core

Key management, Ed25519 signatures, SHA-256 content digests, and the
canonical line encoding that every signature covers.

Canonical encoding
  * one ``field=value`` line per declared dataclass field, in declaration
    order, LF-separated and LF-terminated
  * integers in decimal (signed 64-bit), bytes as lowercase hex, enums by
    value, text as-is (no CR/LF allowed)
  * nested records use dotted keys (``events.0.quantity=7000``)
  * ``None`` omits the line entirely
  * fields declared with ``metadata={"canonical": False}`` are never encoded
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import re
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Protocol, TypeVar

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import (
    InvalidEncoding,
    KeyInvalid,
    MalformedKey,
    MalformedSignature,
    UnencodableValue,
)

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1
ZERO_DIGEST = "0" * 64

PUBLIC_KEY_LEN = 32
SECRET_KEY_LEN = 32
SIGNATURE_LEN = 64

_INT_RE = re.compile(r"-?(0|[1-9][0-9]*)")

R = TypeVar("R")


def not_signed(**kwargs: Any) -> Any:
    """Declare a dataclass field that canonical_encode skips (private stubs)."""
    return field(metadata={"canonical": False}, **kwargs)


# ---------------------------------------------------------------------------
# Digests
# ---------------------------------------------------------------------------

def digest_hex(data: bytes) -> str:
    """SHA-256 of *data* as lowercase hex."""
    h = hashes.Hash(hashes.SHA256())
    h.update(data)
    return h.finalize().hex()


def key_id_of(public_key: bytes) -> str:
    return digest_hex(public_key)


# ---------------------------------------------------------------------------
# Canonical encoding
# ---------------------------------------------------------------------------

def canonical_encode(record: Any) -> bytes:
    """Deterministic line encoding of a dataclass record."""
    if not dataclasses.is_dataclass(record) or isinstance(record, type):
        raise UnencodableValue(f"Not a record: {type(record).__name__}")
    lines: list[tuple[str, str]] = []
    _encode_record(record, "", lines)
    return "".join(f"{key}={value}\n" for key, value in lines).encode("utf-8")


def _encode_record(record: Any, prefix: str, lines: list[tuple[str, str]]) -> None:
    for f in dataclasses.fields(record):
        if not f.metadata.get("canonical", True):
            continue
        _encode_value(getattr(record, f.name), prefix + f.name, lines)


def _encode_value(value: Any, key: str, lines: list[tuple[str, str]]) -> None:
    if value is None:
        return
    if isinstance(value, enum.Enum):
        value = value.value
    if isinstance(value, bool):
        raise UnencodableValue(f"{key}: booleans have no canonical form")
    if isinstance(value, int):
        if not INT64_MIN <= value <= INT64_MAX:
            raise UnencodableValue(f"{key}: {value} outside signed 64-bit range")
        lines.append((key, str(value)))
    elif isinstance(value, str):
        lines.append((key, _check_text(key, value)))
    elif isinstance(value, (bytes, bytearray)):
        lines.append((key, bytes(value).hex()))
    elif dataclasses.is_dataclass(value) and not isinstance(value, type):
        _encode_record(value, key + ".", lines)
    elif isinstance(value, (tuple, list)):
        for i, item in enumerate(value):
            if item is None:
                raise UnencodableValue(f"{key}.{i}: sequence items cannot be absent")
            _encode_value(item, f"{key}.{i}", lines)
    else:
        raise UnencodableValue(f"{key}: unsupported value type {type(value).__name__}")


def _check_text(key: str, value: str) -> str:
    if "\n" in value or "\r" in value:
        raise UnencodableValue(f"{key}: text may not contain line breaks")
    try:
        value.encode("utf-8")
    except UnicodeEncodeError as e:
        raise UnencodableValue(f"{key}: not encodable as UTF-8 ({e})") from e
    return value


def canonical_decode(cls: type[R], data: bytes) -> R:
    """Inverse of canonical_encode for record type *cls*.

    Strict: the decoded record must re-encode to exactly *data*.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise InvalidEncoding(f"Not UTF-8: {e}") from e
    if text and not text.endswith("\n"):
        raise InvalidEncoding("Encoding must be LF-terminated")

    tree: dict[str, Any] = {}
    for line in text.split("\n")[:-1]:
        key, sep, value = line.partition("=")
        if not sep or not key:
            raise InvalidEncoding(f"Malformed line: {line!r}")
        parts = key.split(".")
        node = tree
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise InvalidEncoding(f"Key {key!r} clashes with a scalar")
            node = child
        if parts[-1] in node:
            raise InvalidEncoding(f"Duplicate key {key!r}")
        node[parts[-1]] = value

    record = _decode_record(cls, tree)
    if canonical_encode(record) != data:
        raise InvalidEncoding(f"Bytes are not the canonical encoding of {cls.__name__}")
    return record


@functools.lru_cache(maxsize=None)
def _hints(cls: type) -> dict[str, Any]:
    return typing.get_type_hints(cls)


def _decode_record(cls: type, node: Any) -> Any:
    if not isinstance(node, dict):
        raise InvalidEncoding(f"{cls.__name__}: expected nested fields")
    hints = _hints(cls)
    kwargs: dict[str, Any] = {}
    seen = set()
    for f in dataclasses.fields(cls):
        if not f.metadata.get("canonical", True):
            continue
        tp = hints[f.name]
        if f.name in node:
            seen.add(f.name)
            kwargs[f.name] = _decode_value(tp, node[f.name])
        elif _is_optional(tp):
            kwargs[f.name] = None
        elif typing.get_origin(tp) is tuple:
            kwargs[f.name] = ()
        else:
            raise InvalidEncoding(f"{cls.__name__}: missing field {f.name!r}")
    extra = set(node) - seen
    if extra:
        raise InvalidEncoding(f"{cls.__name__}: unknown fields {sorted(extra)}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise InvalidEncoding(f"{cls.__name__}: {e}") from e


def _is_optional(tp: Any) -> bool:
    return typing.get_origin(tp) in (typing.Union, types.UnionType) and type(None) in typing.get_args(tp)


def _decode_value(tp: Any, node: Any) -> Any:
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        (inner,) = [a for a in typing.get_args(tp) if a is not type(None)]
        return _decode_value(inner, node)
    if origin is tuple:
        item_tp = typing.get_args(tp)[0]
        if not isinstance(node, dict):
            raise InvalidEncoding("Expected an indexed sequence")
        if sorted(node) != sorted(str(i) for i in range(len(node))):
            raise InvalidEncoding(f"Sequence indices not contiguous: {sorted(node)}")
        return tuple(_decode_value(item_tp, node[str(i)]) for i in range(len(node)))
    if dataclasses.is_dataclass(tp):
        return _decode_record(tp, node)
    if not isinstance(node, str):
        raise InvalidEncoding(f"Expected a scalar for {tp}")
    if isinstance(tp, type) and issubclass(tp, enum.Enum):
        try:
            return tp(node)
        except ValueError as e:
            raise InvalidEncoding(str(e)) from e
    if tp is int:
        if not _INT_RE.fullmatch(node):
            raise InvalidEncoding(f"Not a decimal integer: {node!r}")
        return int(node)
    if tp is str:
        return node
    if tp is bytes:
        try:
            return bytes.fromhex(node)
        except ValueError as e:
            raise InvalidEncoding(f"Not hex: {node!r}") from e
    raise InvalidEncoding(f"Unsupported field type {tp}")


# ---------------------------------------------------------------------------
# Signature scheme
# ---------------------------------------------------------------------------

class SignatureScheme(Protocol):
    """What the engine needs from a signature algorithm."""

    name: str

    def new_secret(self, seed: Optional[bytes] = None) -> bytes: ...

    def public_from_secret(self, secret_key: bytes) -> bytes: ...

    def sign(self, secret_key: bytes, payload: bytes) -> bytes: ...

    def verify(self, public_key: bytes, payload: bytes, sig_bytes: bytes) -> bool: ...


class Ed25519Scheme:
    """Default scheme.  Ed25519 signatures are deterministic."""

    name = "ed25519"

    def new_secret(self, seed: Optional[bytes] = None) -> bytes:
        if seed is not None:
            return bytes.fromhex(digest_hex(b"triplekey-key:" + seed))
        return Ed25519PrivateKey.generate().private_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PrivateFormat.Raw,
            encryption_algorithm=serialization.NoEncryption(),
        )

    def _private(self, secret_key: bytes) -> Ed25519PrivateKey:
        if len(secret_key) != SECRET_KEY_LEN:
            raise KeyInvalid(f"Secret key must be {SECRET_KEY_LEN} bytes, got {len(secret_key)}")
        try:
            return Ed25519PrivateKey.from_private_bytes(secret_key)
        except ValueError as e:
            raise KeyInvalid(str(e)) from e

    def public_from_secret(self, secret_key: bytes) -> bytes:
        return self._private(secret_key).public_key().public_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PublicFormat.Raw,
        )

    def sign(self, secret_key: bytes, payload: bytes) -> bytes:
        return self._private(secret_key).sign(payload)

    def verify(self, public_key: bytes, payload: bytes, sig_bytes: bytes) -> bool:
        if len(public_key) != PUBLIC_KEY_LEN:
            raise MalformedKey(f"Public key must be {PUBLIC_KEY_LEN} bytes, got {len(public_key)}")
        if len(sig_bytes) != SIGNATURE_LEN:
            raise MalformedSignature(f"Signature must be {SIGNATURE_LEN} bytes, got {len(sig_bytes)}")
        try:
            pub = Ed25519PublicKey.from_public_bytes(public_key)
        except ValueError as e:
            raise MalformedKey(str(e)) from e
        try:
            pub.verify(sig_bytes, payload)
            return True
        except InvalidSignature:
            return False


DEFAULT_SCHEME: SignatureScheme = Ed25519Scheme()


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KeyPair:
    public_key: bytes
    secret_key: bytes = field(repr=False)
    key_id: str = ""

    def __post_init__(self):
        expected = key_id_of(self.public_key)
        if not self.key_id:
            object.__setattr__(self, "key_id", expected)
        elif self.key_id != expected:
            raise KeyInvalid("key_id does not match public_key")

    @classmethod
    def from_secret(cls, secret_key: bytes, scheme: SignatureScheme = DEFAULT_SCHEME) -> "KeyPair":
        return cls(public_key=scheme.public_from_secret(secret_key), secret_key=secret_key)


@dataclass(frozen=True)
class Signature:
    signer: str
    sig_bytes: bytes
    signed_digest: str
    public_key: bytes


@dataclass(frozen=True)
class RicardianDigest:
    contract_text: str
    digest: str


def generate_keypair(seed: Optional[bytes | str] = None,
                     scheme: SignatureScheme = DEFAULT_SCHEME) -> KeyPair:
    """Fresh random key pair, or a reproducible one derived from *seed*."""
    if isinstance(seed, str):
        seed = seed.encode("utf-8")
    return KeyPair.from_secret(scheme.new_secret(seed), scheme)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def sign(key: KeyPair, payload: bytes, scheme: SignatureScheme = DEFAULT_SCHEME) -> Signature:
    if not payload:
        raise ValueError("Refusing to sign an empty payload")
    return Signature(
        signer=key.key_id,
        sig_bytes=scheme.sign(key.secret_key, payload),
        signed_digest=digest_hex(payload),
        public_key=key.public_key,
    )


def verify(public_key: bytes, payload: bytes, sig: Signature,
           scheme: SignatureScheme = DEFAULT_SCHEME) -> bool:
    """True iff *sig* was produced over exactly *payload* by *public_key*'s holder.

    Raises MalformedKey / MalformedSignature for structurally bad input;
    a well-formed but wrong signature is a clean False.
    """
    ok = scheme.verify(public_key, payload, sig.sig_bytes)
    return ok and sig.signer == key_id_of(public_key) and sig.signed_digest == digest_hex(payload)


def verify_embedded(sig: Signature, payload: bytes, scheme: SignatureScheme = DEFAULT_SCHEME) -> bool:
    """Verify against the public key the signature carries (self-certifying key ids)."""
    return verify(sig.public_key, payload, sig, scheme)


def ricardian_digest(contract_text: str | bytes) -> RicardianDigest:
    if isinstance(contract_text, bytes):
        try:
            contract_text = contract_text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise InvalidEncoding(f"Contract is not UTF-8: {e}") from e
    try:
        raw = contract_text.encode("utf-8")
    except UnicodeEncodeError as e:
        raise InvalidEncoding(f"Contract is not UTF-8: {e}") from e
    return RicardianDigest(contract_text=contract_text, digest=digest_hex(raw))


# ---------------------------------------------------------------------------
# Key files
# ---------------------------------------------------------------------------

def save_keypair(key: KeyPair, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"public={key.public_key.hex()}\nsecret={key.secret_key.hex()}\n",
                    encoding="utf-8")


def load_keypair(path: Path, scheme: SignatureScheme = DEFAULT_SCHEME) -> KeyPair:
    values: dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        name, sep, value = line.partition("=")
        if sep:
            values[name.strip()] = value.strip()
    try:
        public = bytes.fromhex(values["public"])
        secret = bytes.fromhex(values["secret"])
    except (KeyError, ValueError) as e:
        raise KeyInvalid(f"{path}: not a key file ({e})") from e
    key = KeyPair.from_secret(secret, scheme)
    if key.public_key != public:
        raise KeyInvalid(f"{path}: public key does not match secret")
    return key
