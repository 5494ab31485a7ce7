"""Main wallet: online balance custody, sub-wallet allocation, sync assembly."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

from .crypto import KeyPair, schnorr_sign
from .certs import WalletCertificate
from .encoding import lp, sha256, u32, u64
from .errors import ExceedsDeviceLimit, InsufficientFunds, UnknownDevice
from .protocol import PayAccept, PaymentAgent, Receipt
from .secure_element import AllocationRecord, OfflineLogEntry
from .zkp import ComplianceBundle


def wallet_pseudonym(pk) -> bytes:
    """Stable pseudonym for a wallet's owner, derived from its public key."""
    return sha256(b"wpseud/v1", pk.encode())


@dataclass
class DeviceSection:
    """One device's slice of a sync payload: log window plus evidence."""

    device_id: bytes
    start_index: int
    entries: List[OfflineLogEntry]
    head: bytes
    bundles: Dict[bytes, ComplianceBundle]   # payer-entry tx -> bundle
    accepts: Dict[bytes, PayAccept]          # payer-entry tx -> payee accept
    receipts: List[Receipt]                  # payee-entry receipts, in log order

    def encode(self) -> bytes:
        out = [self.device_id, u64(self.start_index), u32(len(self.entries))]
        out += [lp(e.encode()) for e in self.entries]
        out.append(self.head)
        out.append(u32(len(self.bundles)))
        for tx in sorted(self.bundles):
            out.append(tx + lp(self.bundles[tx].encode()))
        out.append(u32(len(self.accepts)))
        for tx in sorted(self.accepts):
            out.append(tx + lp(self.accepts[tx].encode()))
        out.append(u32(len(self.receipts)))
        out += [lp(r.encode()) for r in self.receipts]
        return b"".join(out)


@dataclass
class SyncPayload:
    wallet_id: bytes
    sections: List[DeviceSection]

    def encode(self) -> bytes:
        out = [b"sync/v1", self.wallet_id, u32(len(self.sections))]
        out += [lp(s.encode()) for s in self.sections]
        return b"".join(out)


class MainWallet:
    """Custodial online balance plus the device fleet it feeds."""

    def __init__(
        self,
        owner_id: bytes,
        keys: KeyPair,
        certificate: Optional[WalletCertificate] = None,
    ):
        if len(owner_id) != 16:
            raise ValueError("owner_id must be 16 bytes")
        self.owner_id = owner_id
        self.keys = keys
        self.certificate = certificate
        self.online_balance = 0
        self.devices: Dict[bytes, PaymentAgent] = {}
        self.sync_markers: Dict[bytes, int] = {}
        self.events: List[dict] = []
        self._alloc_counter = 0

    def pseudonym(self) -> bytes:
        return wallet_pseudonym(self.keys.pk)

    def register_device(self, agent: PaymentAgent) -> None:
        self.devices[agent.device_id] = agent
        self.sync_markers[agent.device_id] = 0

    # -- allocation ------------------------------------------------------------

    def allocate_to_subwallet(self, device_id: bytes, amount: int) -> AllocationRecord:
        """Move online balance onto a device's secure element."""
        agent = self.devices.get(device_id)
        if agent is None:
            raise UnknownDevice(f"device {device_id.hex()} not registered")
        if amount > self.online_balance:
            raise InsufficientFunds(
                f"allocation {amount} exceeds online balance {self.online_balance}"
            )
        se = agent.se
        if se.balance + amount >= (1 << se.range_bits):
            raise ExceedsDeviceLimit("allocation would overflow the device balance")
        nonce = u64(self._alloc_counter)
        self._alloc_counter += 1
        record = AllocationRecord(device_id=device_id, amount=amount, nonce=nonce, sig=None)
        record = replace(
            record, sig=schnorr_sign(self.keys.sk, record.signing_payload())
        )
        se.load_value(record)
        self.online_balance -= amount
        self.events.append({"kind": "allocate", "device": device_id.hex(), "amount": amount})
        return record

    def reclaim_from_subwallet(self, device_id: bytes) -> int:
        """Pull a device's spendable balance back online (device reachable)."""
        agent = self.devices.get(device_id)
        if agent is None:
            raise UnknownDevice(f"device {device_id.hex()} not registered")
        amount = agent.se.reclaim()
        self.online_balance += amount
        self.events.append({"kind": "reclaim", "device": device_id.hex(), "amount": amount})
        return amount

    # -- synchronization ---------------------------------------------------------

    def collect_sync_payload(self) -> SyncPayload:
        """Assemble all device log windows since the last acknowledged sync.

        Does not advance the markers; collecting twice without new activity
        yields byte-identical payloads.
        """
        sections = []
        for device_id in sorted(self.devices):
            agent = self.devices[device_id]
            start = self.sync_markers[device_id]
            entries = agent.se.entries_since(start)
            tx_in_window = {e.tx_id for e in entries}
            bundles = {
                tx: p.bundle
                for tx, p in agent.outgoing.items()
                if tx in tx_in_window
            }
            accepts = {
                tx: a for tx, a in agent.accept_evidence().items() if tx in tx_in_window
            }
            receipts = [
                agent.receipts[tx]
                for tx in agent.receipt_order
                if tx in tx_in_window
            ]
            sections.append(
                DeviceSection(
                    device_id=device_id,
                    start_index=start,
                    entries=entries,
                    head=agent.se.log_head,
                    bundles=bundles,
                    accepts=accepts,
                    receipts=receipts,
                )
            )
        return SyncPayload(wallet_id=self.owner_id, sections=sections)

    def mark_synced(self, device_id: bytes, next_index: int) -> None:
        """Acknowledge a reconciled upload and open a fresh offline period."""
        agent = self.devices.get(device_id)
        if agent is None:
            raise UnknownDevice(f"device {device_id.hex()} not registered")
        self.sync_markers[device_id] = next_index
        agent.se.reset_period()
