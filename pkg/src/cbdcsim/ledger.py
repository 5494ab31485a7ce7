"""Central-bank ledger: append-only hash chain of issuance and reconciliation.

Single node, no consensus: the offline-payment mechanics are orthogonal
to how the ledger is replicated, so the chain is just the tamper-evident
record the conservation oracle and audits anchor to.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List

from .encoding import sha256, u64
from .errors import ChainMismatch

GENESIS_HASH = b"\x00" * 32


class EntryKind(str, Enum):
    ISSUANCE = "issuance"
    RECONCILIATION = "reconciliation"


@dataclass(frozen=True)
class LedgerEntry:
    index: int
    kind: EntryKind
    payload_hash: bytes
    prev_hash: bytes
    amount_delta: int

    def encode(self) -> bytes:
        delta = self.amount_delta
        sign = b"-" if delta < 0 else b"+"
        return (
            u64(self.index)
            + self.kind.value.encode()
            + self.payload_hash
            + self.prev_hash
            + sign
            + u64(abs(delta))
        )

    def entry_hash(self) -> bytes:
        return sha256(b"ledger-entry/v1", self.encode())

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind.value,
            "payload_hash": self.payload_hash.hex(),
            "prev_hash": self.prev_hash.hex(),
            "amount_delta": self.amount_delta,
        }


class Ledger:
    def __init__(self):
        self.entries: List[LedgerEntry] = []

    @property
    def head(self) -> bytes:
        return self.entries[-1].entry_hash() if self.entries else GENESIS_HASH

    def append_entry(self, entry: LedgerEntry) -> LedgerEntry:
        if entry.prev_hash != self.head:
            raise ChainMismatch("entry does not reference the current head")
        if entry.index != len(self.entries):
            raise ChainMismatch(f"expected index {len(self.entries)}, got {entry.index}")
        self.entries.append(entry)
        return entry

    def append(self, kind: EntryKind, payload_hash: bytes, amount_delta: int) -> LedgerEntry:
        entry = LedgerEntry(
            index=len(self.entries),
            kind=kind,
            payload_hash=payload_hash,
            prev_hash=self.head,
            amount_delta=amount_delta,
        )
        return self.append_entry(entry)

    def verify_chain(self) -> bool:
        prev = GENESIS_HASH
        for i, entry in enumerate(self.entries):
            if entry.index != i or entry.prev_hash != prev:
                return False
            prev = entry.entry_hash()
        return True

    def total_issued(self) -> int:
        return sum(e.amount_delta for e in self.entries if e.kind is EntryKind.ISSUANCE)

    def to_json_lines(self) -> str:
        return "".join(
            json.dumps(e.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
            for e in self.entries
        )


@dataclass
class OmniscientState:
    """The simulator's plaintext view of where every unit of value sits.

    in_flight: payer debits awaiting reconciliation (one per authorized
    payment, including duplicates a rollback attack manufactures).
    flagged: value the intermediary annulled from real-but-refused claims
    (e.g. credits refused because the device was frozen).
    """

    main_balances: Dict[bytes, int]
    se_balances: Dict[bytes, int]
    in_flight: int
    flagged: int

    def circulating_total(self) -> int:
        return (
            sum(self.main_balances.values())
            + sum(self.se_balances.values())
            + self.in_flight
            + self.flagged
        )


def conservation_check(ledger: Ledger, state: OmniscientState) -> bool:
    """Exact integer conservation: issuance equals accounted value."""
    return ledger.total_issued() == state.circulating_total()
