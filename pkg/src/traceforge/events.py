"""Hash-chained append-only event log: the project's durable source of truth.

One canonical-JSON event per line. Each event hashes its predecessor's hash
together with its own content, so any byte of tampering anywhere in the file
breaks verification at or after that sequence number.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from traceforge.errors import BadEventError, ChainBrokenError, StorageFailureError

logger = logging.getLogger(__name__)

GENESIS_HASH = "0" * 64


class EventKind(Enum):
    NODE_UPSERTED = "NodeUpserted"
    NODE_REMOVED = "NodeRemoved"
    LINK_ADDED = "LinkAdded"
    LINK_REMOVED = "LinkRemoved"
    SUSPECT_MARKED = "SuspectMarked"
    SUSPECT_CLEARED = "SuspectCleared"
    CR_CREATED = "CrCreated"
    CR_TRANSITIONED = "CrTransitioned"
    CR_ITEM_RESOLVED = "CrItemResolved"
    CR_RECOMPUTED = "CrRecomputed"
    BASELINE_CREATED = "BaselineCreated"
    INGESTED = "Ingested"


# Events whose application mutates the graph (each bumps graph_revision by 1).
# SuspectMarked is a notification companion to NodeUpserted, which already
# carries the marking.
GRAPH_MUTATING_KINDS = frozenset(
    {
        EventKind.NODE_UPSERTED,
        EventKind.NODE_REMOVED,
        EventKind.LINK_ADDED,
        EventKind.LINK_REMOVED,
        EventKind.SUSPECT_CLEARED,
    }
)


def now_utc() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds").replace("+00:00", "Z")


def _canonical(value: object) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def compute_event_hash(prev_hash: str, seq: int, ts: str, kind: str, payload: dict) -> str:
    content = _canonical({"kind": kind, "payload": payload, "seq": seq, "ts": ts})
    return hashlib.sha256(prev_hash.encode("ascii") + content.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Event:
    seq: int
    ts: str
    kind: EventKind
    payload: dict
    prev_hash: str
    hash: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "ts": self.ts,
            "kind": self.kind.value,
            "payload": self.payload,
            "prev_hash": self.prev_hash,
            "hash": self.hash,
        }

    def to_line(self) -> str:
        return _canonical(self.to_dict())


def _parse_event(seq_hint: int, line: str) -> Event:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise BadEventError(f"event {seq_hint}: invalid JSON: {exc}", seq=seq_hint) from exc
    if not isinstance(data, dict):
        raise BadEventError(f"event {seq_hint}: not an object", seq=seq_hint)
    try:
        kind = EventKind(data["kind"])
        event = Event(
            seq=int(data["seq"]),
            ts=str(data["ts"]),
            kind=kind,
            payload=data["payload"],
            prev_hash=str(data["prev_hash"]),
            hash=str(data["hash"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise BadEventError(f"event {seq_hint}: malformed: {exc}", seq=seq_hint) from exc
    return event


def verify_event(event: Event, prev_hash: str, expected_seq: int) -> None:
    if event.seq != expected_seq:
        raise ChainBrokenError(
            f"event {expected_seq}: sequence gap (found seq {event.seq})", seq=expected_seq
        )
    if event.prev_hash != prev_hash:
        raise ChainBrokenError(
            f"event {event.seq}: prev_hash does not match predecessor", seq=event.seq
        )
    recomputed = compute_event_hash(
        event.prev_hash, event.seq, event.ts, event.kind.value, event.payload
    )
    if recomputed != event.hash:
        raise ChainBrokenError(f"event {event.seq}: hash mismatch", seq=event.seq)


class EventLog:
    """File-backed log with the full event list mirrored in memory."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.events: list[Event] = []
        self._pending = 0

    @property
    def last_seq(self) -> int:
        return self.events[-1].seq if self.events else 0

    @property
    def last_hash(self) -> str:
        return self.events[-1].hash if self.events else GENESIS_HASH

    def load(self, recover: bool = False) -> list[str]:
        """Read and verify the log. In recovery mode a torn (unterminated)
        final line is truncated with a warning; otherwise it is an error.
        Returns the recovery warnings."""
        self.events = []
        warnings: list[str] = []
        if not self.path.exists():
            return warnings
        raw = self.path.read_bytes()
        if raw and not raw.endswith(b"\n"):
            if not recover:
                torn_seq = raw.count(b"\n") + 1
                raise BadEventError(
                    f"event {torn_seq}: torn final line (log does not end with newline)",
                    seq=torn_seq,
                )
            cut = raw.rfind(b"\n")
            raw = raw[: cut + 1] if cut >= 0 else b""
            self.path.write_bytes(raw)
            warnings.append("truncated torn final line in event log")
            logger.warning("event log %s: truncated torn final line", self.path)
        prev_hash = GENESIS_HASH
        expected_seq = 1
        for line_bytes in raw.split(b"\n")[:-1]:
            try:
                line = line_bytes.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise BadEventError(
                    f"event {expected_seq}: invalid UTF-8: {exc}", seq=expected_seq
                ) from exc
            event = _parse_event(expected_seq, line)
            verify_event(event, prev_hash, expected_seq)
            self.events.append(event)
            prev_hash = event.hash
            expected_seq += 1
        return warnings

    def append(self, kind: EventKind, payload: dict, ts: str | None = None) -> Event:
        """Stage and write one event; call commit() to make the batch durable."""
        seq = self.last_seq + 1
        stamp = ts if ts is not None else now_utc()
        prev_hash = self.last_hash
        event = Event(
            seq=seq,
            ts=stamp,
            kind=kind,
            payload=payload,
            prev_hash=prev_hash,
            hash=compute_event_hash(prev_hash, seq, stamp, kind.value, payload),
        )
        try:
            with self.path.open("a", encoding="utf-8", newline="") as handle:
                handle.write(event.to_line() + "\n")
        except OSError as exc:
            raise StorageFailureError(f"cannot append to event log: {exc}") from exc
        self.events.append(event)
        self._pending += 1
        return event

    def commit(self) -> None:
        """Fsync staged writes so the events are durable before the mutation
        is acknowledged."""
        if not self._pending:
            return
        try:
            fd = os.open(self.path, os.O_RDONLY)
            try:
                os.fsync(fd)
            finally:
                os.close(fd)
        except OSError as exc:
            raise StorageFailureError(f"cannot fsync event log: {exc}") from exc
        self._pending = 0

    def since(self, since_seq: int) -> list[Event]:
        return [event for event in self.events if event.seq > since_seq]
