"""Bytecode acquisition: hex files, node RPC fetches with an on-disk
cache, and line-delimited event manifests pairing caller/callee contracts
with class labels."""

from __future__ import annotations

import json
import logging
import os
import re
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import requests

log = logging.getLogger(__name__)

RPC_URL_ENV = "PATHLAB_RPC_URL"

LABELS = frozenset({"access_control", "flash_loan", "negative"})

_ADDRESS_RE = re.compile(r"^0x[0-9a-fA-F]{40}$")
_HEX_RE = re.compile(r"^[0-9a-fA-F]*$")

DEFAULT_JOBS = 4
_RPC_TIMEOUT = 30.0


class BadHex(ValueError):
    pass


class RpcError(RuntimeError):
    pass


class EmptyCode(RuntimeError):
    """The address holds no code (externally owned account)."""


class BadManifest(ValueError):
    pass


def decode_hex(text: str) -> bytes:
    """Hex to bytes; 0x prefix and surrounding whitespace tolerated."""
    cleaned = text.strip()
    if cleaned.lower().startswith("0x"):
        cleaned = cleaned[2:]
    cleaned = "".join(cleaned.split())
    if len(cleaned) % 2 != 0:
        raise BadHex(f"odd number of hex digits ({len(cleaned)})")
    if not _HEX_RE.match(cleaned):
        raise BadHex("non-hex character in input")
    return bytes.fromhex(cleaned)


def load_bytecode(source: str | Path) -> bytes:
    """Bytes from a hex file path, or from hex text when no such file exists."""
    p = Path(source)
    if p.exists():
        return decode_hex(p.read_text())
    return decode_hex(str(source))


def _cache_path(cache_dir: str | Path, chain: str, address: str) -> Path:
    return Path(cache_dir) / chain / f"{address.lower()}.hex"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fp:
            fp.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fetch_code(
    endpoint: str,
    address: str,
    chain: str = "ethereum",
    cache_dir: str | Path = "cache",
) -> bytes:
    """Deployed runtime bytecode at the latest block, cached to disk.

    A cache hit never touches the network. An address with no code raises
    EmptyCode so batch pipelines can skip plain accounts; transport and
    node faults raise RpcError.
    """
    if not _ADDRESS_RE.match(address):
        raise BadHex(f"malformed address: {address!r}")
    cached = _cache_path(cache_dir, chain, address)
    if cached.exists():
        return decode_hex(cached.read_text())

    payload = {
        "jsonrpc": "2.0",
        "method": "eth_getCode",
        "params": [address, "latest"],
        "id": 1,
    }
    try:
        resp = requests.post(endpoint, json=payload, timeout=_RPC_TIMEOUT)
        resp.raise_for_status()
        doc = resp.json()
    except (requests.RequestException, ValueError) as exc:
        raise RpcError(f"eth_getCode {address} failed: {exc}") from exc
    if "error" in doc:
        raise RpcError(f"node error for {address}: {doc['error']}")
    result = doc.get("result")
    if not isinstance(result, str):
        raise RpcError(f"malformed response for {address}: {doc!r}")

    code = decode_hex(result)
    if not code:
        raise EmptyCode(f"{address} has no deployed code")
    _atomic_write(cached, result)
    return code


@dataclass(frozen=True)
class ManifestEvent:
    event_id: str
    chain: str
    caller_address: str
    callee_address: str
    label: str
    caller_code: str | None = None
    callee_code: str | None = None


@dataclass
class DatasetManifest:
    events: list[ManifestEvent]


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse and validate a line-delimited event manifest."""
    events: list[ManifestEvent] = []
    seen_ids: set[str] = set()
    with open(path) as fp:
        for lineno, line in enumerate(fp, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BadManifest(f"line {lineno}: not a record: {exc}") from exc
            try:
                ev = ManifestEvent(
                    event_id=str(doc["event_id"]),
                    chain=str(doc.get("chain", "ethereum")),
                    caller_address=str(doc["caller_address"]),
                    callee_address=str(doc["callee_address"]),
                    label=str(doc["label"]),
                    caller_code=doc.get("caller_code"),
                    callee_code=doc.get("callee_code"),
                )
            except KeyError as exc:
                raise BadManifest(f"line {lineno}: missing field {exc}") from exc
            if ev.label not in LABELS:
                raise BadManifest(
                    f"line {lineno}: label {ev.label!r} not in {sorted(LABELS)}"
                )
            for addr in (ev.caller_address, ev.callee_address):
                if not _ADDRESS_RE.match(addr):
                    raise BadManifest(f"line {lineno}: malformed address {addr!r}")
            if ev.event_id in seen_ids:
                raise BadManifest(f"line {lineno}: duplicate event_id {ev.event_id!r}")
            seen_ids.add(ev.event_id)
            events.append(ev)
    return DatasetManifest(events)


@dataclass
class ResolvedEvent:
    event: ManifestEvent
    caller: bytes | None = None
    callee: bytes | None = None
    skipped: bool = False
    reason: str | None = None


def _resolve_side(
    ref: str | None,
    address: str,
    chain: str,
    endpoint: str | None,
    cache_dir: str | Path,
    base_dir: Path,
) -> bytes:
    if ref is not None:
        p = Path(ref)
        if not p.is_absolute():
            p = base_dir / p
        if p.exists():
            return load_bytecode(p)
        try:
            return decode_hex(ref)
        except BadHex:
            raise FileNotFoundError(
                f"code reference {ref!r}: no such file, and not inline hex"
            ) from None
    if endpoint is None:
        raise RpcError("no endpoint configured and no local code reference")
    return fetch_code(endpoint, address, chain, cache_dir)


def resolve_manifest(
    manifest: DatasetManifest,
    cache_dir: str | Path = "cache",
    endpoint: str | None = None,
    jobs: int = DEFAULT_JOBS,
    base_dir: str | Path = ".",
) -> list[ResolvedEvent]:
    """Fetch or load both sides of every event.

    Failures never abort the batch; each failed event becomes a skip
    record carrying the reason. Network fetches run on a bounded pool.
    """
    if endpoint is None:
        endpoint = os.environ.get(RPC_URL_ENV) or None
    base = Path(base_dir)

    def work(ev: ManifestEvent) -> ResolvedEvent:
        try:
            caller = _resolve_side(
                ev.caller_code, ev.caller_address, ev.chain, endpoint, cache_dir, base
            )
            callee = _resolve_side(
                ev.callee_code, ev.callee_address, ev.chain, endpoint, cache_dir, base
            )
        except (BadHex, RpcError, EmptyCode, OSError) as exc:
            log.warning("skipping %s: %s", ev.event_id, exc)
            return ResolvedEvent(
                ev, skipped=True, reason=f"{type(exc).__name__}: {exc}"
            )
        return ResolvedEvent(ev, caller, callee)

    if jobs <= 1 or len(manifest.events) <= 1:
        return [work(ev) for ev in manifest.events]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, manifest.events))
