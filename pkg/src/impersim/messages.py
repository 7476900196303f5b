"""Message-layer primitives: processor ids, tagged payloads, envelopes, inboxes.

A payload is a canonically sorted, duplicate-free tuple of items; an item is a
plain tuple ``(kind, *fields)`` such as ``("ECHO", ProcessorId(2), 7)``.  Every
item must survive the JSON round trip implemented here, which is what makes
traces replayable and inbox ordering reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Iterable, Iterator

Item = tuple
Payload = tuple


@dataclass(frozen=True, order=True)
class ProcessorId:
    """Opaque processor identity.

    Protocol code may only test ids for equality; ordering exists for the
    engine's deterministic delivery and must not leak into protocol logic.
    """

    index: int

    @property
    def tag(self) -> str:
        return f"p_{self.index}"

    def __repr__(self) -> str:
        return self.tag


def processor_ids(n: int) -> tuple[ProcessorId, ...]:
    return tuple(ProcessorId(i) for i in range(1, n + 1))


def encode_value(value: Any) -> Any:
    """Convert a payload value into a JSON-serializable structure."""
    if isinstance(value, ProcessorId):
        return value.tag
    if isinstance(value, (tuple, list)):
        return [encode_value(v) for v in value]
    if value is None or isinstance(value, (int, str)):
        return value
    raise TypeError(f"unsupported payload value: {value!r}")


def decode_value(value: Any) -> Any:
    """Inverse of encode_value; "p_<i>" strings decode back to ids."""
    if isinstance(value, str) and value.startswith("p_") and value[2:].isdigit():
        return ProcessorId(int(value[2:]))
    if isinstance(value, list):
        return tuple(decode_value(v) for v in value)
    return value


@lru_cache(maxsize=None)
def item_key(item: Item) -> str:
    return json.dumps(encode_value(item), separators=(",", ":"))


@lru_cache(maxsize=None)
def payload_key(payload: Payload) -> str:
    return json.dumps([encode_value(i) for i in payload], separators=(",", ":"))


def canonical_payload(items: Iterable[Item]) -> Payload:
    """Sort and deduplicate items; the canonical form is what gets delivered."""
    unique = {item_key(i): i for i in items}
    return tuple(unique[k] for k in sorted(unique))


def encode_payload(payload: Payload) -> list:
    return [encode_value(i) for i in payload]


def decode_payload(data: Iterable[Any]) -> Payload:
    return canonical_payload(decode_value(i) for i in data)


class Origin(Enum):
    GENUINE = "genuine"
    FORGED = "forged"


@dataclass(frozen=True)
class Envelope:
    """One message as delivered: a claimed sender, a receiver, and a payload.

    ``origin`` is harness-only bookkeeping; it is stripped before protocol
    code ever sees the message.
    """

    claimed_sender: ProcessorId
    receiver: ProcessorId
    payload: Payload
    round_no: int
    origin: Origin

    @property
    def forged(self) -> bool:
        return self.origin is Origin.FORGED


def sort_envelopes(envelopes: Iterable[Envelope]) -> list[Envelope]:
    # Forged-last is a tie-break for identical payloads only, so that swapping
    # which twin of a duplicated id is "real" never changes delivery order.
    return sorted(
        envelopes,
        key=lambda e: (e.claimed_sender.index, payload_key(e.payload), e.forged),
    )


@dataclass(frozen=True)
class RoundInbox:
    """Everything one processor received in one round, origin marks erased.

    May contain several entries with the same claimed sender; that is the
    whole point of the attack model.
    """

    entries: tuple[tuple[ProcessorId, Payload], ...]

    @staticmethod
    def assemble(envelopes: Iterable[Envelope]) -> "RoundInbox":
        return RoundInbox(
            tuple((e.claimed_sender, e.payload) for e in sort_envelopes(envelopes))
        )

    def __iter__(self) -> Iterator[tuple[ProcessorId, Payload]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def item_senders(self) -> dict[Item, frozenset[ProcessorId]]:
        """Map each item to the set of claimed senders that sent it at least once."""
        acc: dict[Item, set[ProcessorId]] = {}
        for sender, payload in self.entries:
            for item in payload:
                acc.setdefault(item, set()).add(sender)
        return {item: frozenset(s) for item, s in acc.items()}

    def senders_of(self, item: Item) -> frozenset[ProcessorId]:
        return frozenset(s for s, payload in self.entries if item in payload)

    def tag_counts(self) -> dict[ProcessorId, int]:
        counts: dict[ProcessorId, int] = {}
        for sender, _ in self.entries:
            counts[sender] = counts.get(sender, 0) + 1
        return counts


EMPTY_INBOX = RoundInbox(())
