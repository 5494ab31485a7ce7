"""Financial intermediary: KYC, certificates, issuance, reconciliation, audit.

Reconciliation is where offline activity becomes real money movement.
Each device uploads a window of its hash-chained log plus the proof
bundles and counterparty evidence; the FI verifies everything, groups
payment claims by nullifier, credits each unique verified payment once,
and flags every nullifier that shows up under two different payees --
that duplication is exactly what a rolled-back or cloned secure element
produces.

Privacy split: the exported reconciliation report carries pseudonyms and
commitment deltas only.  Identities and amounts on the debit side exist
solely in the FI's internal audit map, reachable through a signed audit
grant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .certs import POLICY_MAX, PolicyLimits, WalletCertificate, sign_certificate
from .crypto import KeyPair, Signature, schnorr_verify
from .encoding import canonical_json, sha256, u64
from .errors import (
    DecodeError,
    FrozenDevice,
    GrantInvalid,
    PolicyBound,
    ScopeUnknown,
    UnknownCustomer,
    ValueInvalid,
)
from .ledger import EntryKind as LedgerKind
from .ledger import Ledger, LedgerEntry
from .protocol import PayAccept, Receipt, commit_signing_payload
from .secure_element import (
    EntryKind,
    OfflineLogEntry,
    log_genesis_head,
    verify_log_chain,
)
from .suite import GroupElement
from .wallet import DeviceSection, MainWallet, SyncPayload
from .zkp import DEFAULT_RANGE_BITS, verify_compliance_bundle

AUDIT_GRANT_DOMAIN = b"audit-grant/v1"


@dataclass(frozen=True)
class CustomerRecord:
    owner_id: bytes
    name: str


@dataclass(frozen=True)
class Denied:
    reason: str


@dataclass(frozen=True)
class AuditScope:
    kind: str  # "tx" | "nullifier" | "device"
    value: bytes

    def signing_payload(self) -> bytes:
        return AUDIT_GRANT_DOMAIN + self.kind.encode() + self.value


@dataclass(frozen=True)
class AuditGrant:
    scope: AuditScope
    sig: Signature


@dataclass(frozen=True)
class Disclosure:
    owner_identity: str
    owner_id: bytes
    amount: Optional[int]
    counterparty_pseudonym: Optional[bytes]


@dataclass
class DeviceRegistration:
    owner_id: bytes
    device_id: bytes
    cert: WalletCertificate


@dataclass
class SyncCursor:
    next_index: int
    head: bytes


@dataclass
class Claim:
    """One alleged offline payment, assembled from both parties' uploads."""

    seq: int
    tx_id: bytes
    nullifier: bytes
    amount: int
    payer_pseudonym: bytes
    payer_device_id: bytes
    payee_device_id: bytes
    commitment_delta: bytes
    payer_entry_seen: bool = False
    receipt_verified: bool = False
    receipt_seq: Optional[int] = None  # order receipts were verified in
    accept_verified: bool = False
    resolved: bool = False
    resolution: Optional[str] = None

    def key(self) -> Tuple[bytes, bytes]:
        return (self.tx_id, self.payee_device_id)

    def creditable(self) -> bool:
        return self.receipt_verified or (self.payer_entry_seen and self.accept_verified)

    def credit_rank(self) -> Tuple[int, int]:
        """Verified receipts win over payer-held accept evidence, oldest first."""
        if self.receipt_verified:
            return (0, self.receipt_seq)
        return (1, self.seq)


@dataclass
class Resolution:
    """FI-internal record of how one claim was settled (not exported)."""

    kind: str  # credited | voided | annulled
    tx_id: bytes
    amount: int
    payer_device_id: bytes
    payee_device_id: bytes
    payer_owner_id: Optional[bytes]
    payee_owner_id: Optional[bytes]
    duplicate: bool = False


@dataclass
class ReconciliationReport:
    credits: List[dict]
    debits: List[dict]
    double_spends: List[dict]
    rejected_entries: List[dict]
    voids: List[dict]
    ledger_delta_id: Optional[int]
    # internal wiring for the simulator; excluded from the exported report
    resolutions: List[Resolution] = field(default_factory=list)
    sync_acks: Dict[bytes, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "credits": self.credits,
            "debits": self.debits,
            "double_spends": self.double_spends,
            "rejected_entries": self.rejected_entries,
            "voids": self.voids,
            "ledger_delta_id": self.ledger_delta_id,
        }

    def to_json(self) -> bytes:
        return canonical_json(self.to_dict())


@dataclass
class AuditRecord:
    tx_id: bytes
    nullifier: bytes
    amount: int
    payer_owner: CustomerRecord
    payee_owner: Optional[CustomerRecord]
    payer_pseudonym: bytes
    payee_pseudonym: Optional[bytes]


class FinancialIntermediary:
    def __init__(
        self,
        keys: KeyPair,
        ledger: Ledger,
        auditor_pk: Optional[GroupElement] = None,
        range_bits: int = DEFAULT_RANGE_BITS,
    ):
        self.keys = keys
        self.ledger = ledger
        self.auditor_pk = auditor_pk
        self.range_bits = range_bits

        self.customers: Dict[bytes, CustomerRecord] = {}
        self.wallets: Dict[bytes, MainWallet] = {}
        self.devices: Dict[bytes, DeviceRegistration] = {}
        self.pseudonym_by_device: Dict[bytes, bytes] = {}
        self.sync_cursors: Dict[bytes, SyncCursor] = {}
        self.frozen: set[bytes] = set()

        self._claims: Dict[Tuple[bytes, bytes], Claim] = {}
        self._nullifier_groups: Dict[bytes, List[Tuple[bytes, bytes]]] = {}
        self._claim_seq = 0
        self._issue_seq = 0
        self._bundle_cache: Dict[bytes, bool] = {}

        self._audit_by_tx: Dict[bytes, AuditRecord] = {}
        self._audit_by_nullifier: Dict[bytes, AuditRecord] = {}

    @property
    def pk(self) -> GroupElement:
        return self.keys.pk

    # -- onboarding ---------------------------------------------------------

    def onboard_customer(self, kyc_doc: dict) -> Union[CustomerRecord, Denied]:
        """Deterministic KYC stub: denied iff the sanctioned flag is set."""
        if not isinstance(kyc_doc, dict) or not isinstance(kyc_doc.get("name"), str):
            raise DecodeError("kyc document must carry a string name")
        if not isinstance(kyc_doc.get("sanctioned", False), bool):
            raise DecodeError("sanctioned flag must be boolean")
        if kyc_doc.get("sanctioned", False):
            return Denied(reason="sanctioned")
        owner_id = sha256(b"kyc/v1", kyc_doc["name"].encode())[:16]
        record = CustomerRecord(owner_id=owner_id, name=kyc_doc["name"])
        self.customers[owner_id] = record
        return record

    def register_wallet(self, owner_id: bytes, wallet: MainWallet) -> None:
        if owner_id not in self.customers:
            raise UnknownCustomer("wallet owner not onboarded")
        self.wallets[owner_id] = wallet

    # -- certificates ---------------------------------------------------------

    def issue_certificate(
        self,
        owner_id: bytes,
        device_id: bytes,
        subject_pk: GroupElement,
        limits: PolicyLimits,
        expiry_epoch: int,
    ) -> WalletCertificate:
        if owner_id not in self.customers:
            raise UnknownCustomer("certificate subject not onboarded")
        if max(limits.cum_limit, limits.per_tx_cap, limits.count_cap) >= POLICY_MAX:
            raise PolicyBound("limits must stay below 2^32")
        cert = sign_certificate(self.keys.sk, subject_pk, limits, expiry_epoch)
        pseud = cert.pseudonym()
        if pseud in self.frozen:
            raise FrozenDevice("certificate renewal refused for frozen device")
        self.devices[pseud] = DeviceRegistration(
            owner_id=owner_id, device_id=device_id, cert=cert
        )
        self.pseudonym_by_device[device_id] = pseud
        self.sync_cursors.setdefault(
            device_id, SyncCursor(next_index=0, head=log_genesis_head(device_id))
        )
        return cert

    # -- issuance ---------------------------------------------------------------

    def issue_cbdc(self, wallet: MainWallet, amount: int) -> LedgerEntry:
        if wallet.owner_id not in self.customers:
            raise UnknownCustomer("issuance target not onboarded")
        if amount < 1:
            raise ValueInvalid("issuance amount must be positive")
        payload_hash = sha256(
            b"issue/v1", wallet.pseudonym(), u64(amount), u64(self._issue_seq)
        )
        self._issue_seq += 1
        entry = self.ledger.append(LedgerKind.ISSUANCE, payload_hash, amount)
        wallet.online_balance += amount
        return entry

    # -- reconciliation ------------------------------------------------------------

    def reconcile(
        self, payloads: List[SyncPayload], now_epoch: int
    ) -> ReconciliationReport:
        """Verify uploaded logs, settle unique payments, flag duplicates."""
        credits: List[dict] = []
        debits: List[dict] = []
        double_spends: List[dict] = []
        rejected: List[dict] = []
        voids: List[dict] = []
        resolutions: List[Resolution] = []
        sync_acks: Dict[bytes, int] = {}
        new_claim_keys: List[Tuple[bytes, bytes]] = []
        batch_devices: set[bytes] = set()

        for payload in payloads:
            for section in payload.sections:
                self._ingest_section(
                    section, now_epoch, rejected, debits, new_claim_keys,
                    batch_devices, sync_acks,
                )

        self._resolve(
            new_claim_keys, batch_devices, credits, double_spends, rejected,
            voids, resolutions,
        )

        report = ReconciliationReport(
            credits=credits,
            debits=debits,
            double_spends=double_spends,
            rejected_entries=rejected,
            voids=voids,
            ledger_delta_id=len(self.ledger.entries) if payloads else None,
            resolutions=resolutions,
            sync_acks=sync_acks,
        )
        if payloads:
            self.ledger.append(
                LedgerKind.RECONCILIATION, sha256(b"recon/v1", report.to_json()), 0
            )
        return report

    # -- reconcile internals -----------------------------------------------------

    def _ingest_section(
        self,
        section: DeviceSection,
        now_epoch: int,
        rejected: List[dict],
        debits: List[dict],
        new_claim_keys: List[Tuple[bytes, bytes]],
        batch_devices: set,
        sync_acks: Dict[bytes, int],
    ) -> None:
        device_id = section.device_id
        pseud = self.pseudonym_by_device.get(device_id)
        if pseud is None:
            rejected.append(
                {"device": device_id.hex(), "tx_id": None, "reason": "unknown_device"}
            )
            return
        if pseud in self.frozen:
            rejected.append(
                {"device": device_id.hex(), "tx_id": None, "reason": "frozen_device"}
            )
            return
        reg = self.devices[pseud]
        cursor = self.sync_cursors[device_id]
        if section.start_index != cursor.next_index:
            rejected.append(
                {"device": device_id.hex(), "tx_id": None, "reason": "sync_marker_mismatch"}
            )
            return
        if not verify_log_chain(
            section.entries, section.head, reg.cert.subject_pk, start_head=cursor.head
        ):
            rejected.append(
                {"device": device_id.hex(), "tx_id": None, "reason": "log_chain_invalid"}
            )
            return

        receipts_by_tx: Dict[bytes, Receipt] = {r.tx_id: r for r in section.receipts}
        for entry in section.entries:
            if entry.kind is EntryKind.LOAD:
                self._check_load_entry(entry, reg, rejected)
            elif entry.kind is EntryKind.PAYER:
                self._ingest_payer_entry(
                    entry, section, reg, now_epoch, rejected, debits, new_claim_keys
                )
            elif entry.kind is EntryKind.PAYEE:
                self._ingest_payee_entry(
                    entry, receipts_by_tx, reg, now_epoch, rejected, new_claim_keys
                )
            # RECLAIM entries are informational: the move happened online.

        cursor.next_index += len(section.entries)
        cursor.head = section.head
        batch_devices.add(device_id)
        sync_acks[device_id] = cursor.next_index

    def _check_load_entry(
        self, entry: OfflineLogEntry, reg: DeviceRegistration, rejected: List[dict]
    ) -> None:
        wallet = self.wallets.get(reg.owner_id)
        alloc = entry.allocation
        ok = (
            wallet is not None
            and alloc.device_id == reg.device_id
            and schnorr_verify(wallet.keys.pk, alloc.signing_payload(), alloc.sig)
        )
        if not ok:
            rejected.append(
                {"device": reg.device_id.hex(), "tx_id": entry.tx_id.hex(),
                 "reason": "allocation_invalid"}
            )

    def _verify_bundle_cached(self, bundle, pub_in, as_of_epoch: int) -> bool:
        key = sha256(b"vcache/v1", bundle.digest(), pub_in.encode(), u64(as_of_epoch))
        hit = self._bundle_cache.get(key)
        if hit is None:
            hit = verify_compliance_bundle(
                bundle, pub_in, self.keys.pk, as_of_epoch,
                range_bits=self.range_bits,
            ).accepted
            self._bundle_cache[key] = hit
        return hit

    def _claim_for(self, pub_in, nullifier: bytes) -> Claim:
        payer_pseud = pub_in.certificate.pseudonym()
        payer_reg = self.devices.get(payer_pseud)
        key = (pub_in.tx_id, pub_in.payee_hint)
        claim = self._claims.get(key)
        if claim is None:
            claim = Claim(
                seq=self._claim_seq,
                tx_id=pub_in.tx_id,
                nullifier=nullifier,
                amount=pub_in.amount,
                payer_pseudonym=payer_pseud,
                payer_device_id=payer_reg.device_id if payer_reg else b"",
                payee_device_id=pub_in.payee_hint,
                commitment_delta=(
                    pub_in.c_balance_before.encode()  # delta recomputed below
                ),
            )
            self._claim_seq += 1
            self._claims[key] = claim
            self._nullifier_groups.setdefault(nullifier, []).append(key)
        return claim

    def _ingest_payer_entry(
        self,
        entry: OfflineLogEntry,
        section: DeviceSection,
        reg: DeviceRegistration,
        now_epoch: int,
        rejected: List[dict],
        debits: List[dict],
        new_claim_keys: List[Tuple[bytes, bytes]],
    ) -> None:
        pub_in = entry.public_inputs
        tx_hex = entry.tx_id.hex()
        if pub_in.certificate.subject_pk != reg.cert.subject_pk:
            rejected.append({"device": reg.device_id.hex(), "tx_id": tx_hex,
                             "reason": "certificate_mismatch"})
            return
        if pub_in.epoch > now_epoch:
            rejected.append({"device": reg.device_id.hex(), "tx_id": tx_hex,
                             "reason": "epoch_in_future"})
            return
        bundle = section.bundles.get(entry.tx_id)
        if bundle is None or bundle.digest() != entry.bundle_hash:
            rejected.append({"device": reg.device_id.hex(), "tx_id": tx_hex,
                             "reason": "bundle_missing"})
            return
        if not self._verify_bundle_cached(bundle, pub_in, pub_in.epoch):
            rejected.append({"device": reg.device_id.hex(), "tx_id": tx_hex,
                             "reason": "bundle_invalid"})
            return

        claim = self._claim_for(pub_in, bundle.nullifier)
        claim.payer_entry_seen = True
        delta = pub_in.c_balance_before - bundle.c_balance_after
        claim.commitment_delta = delta.encode()
        debits.append(
            {"payer_pseudonym": claim.payer_pseudonym.hex(),
             "commitment_delta": claim.commitment_delta.hex()}
        )

        accept = section.accepts.get(entry.tx_id)
        if accept is not None and self._accept_valid(accept, pub_in.payee_hint):
            claim.accept_verified = True
        if claim.key() not in new_claim_keys:
            new_claim_keys.append(claim.key())

    def _accept_valid(self, accept: PayAccept, payee_device_id: bytes) -> bool:
        payee_pseud = self.pseudonym_by_device.get(payee_device_id)
        if payee_pseud is None:
            return False
        payee_reg = self.devices[payee_pseud]
        if accept.payee_cert.subject_pk != payee_reg.cert.subject_pk:
            return False
        if not accept.payee_cert.verify(self.keys.pk):
            return False
        return schnorr_verify(
            accept.payee_cert.subject_pk, accept.signing_payload(), accept.sig
        )

    def _ingest_payee_entry(
        self,
        entry: OfflineLogEntry,
        receipts_by_tx: Dict[bytes, Receipt],
        reg: DeviceRegistration,
        now_epoch: int,
        rejected: List[dict],
        new_claim_keys: List[Tuple[bytes, bytes]],
    ) -> None:
        tx_hex = entry.tx_id.hex()
        receipt = receipts_by_tx.get(entry.tx_id)
        pub_in = entry.public_inputs
        if receipt is None:
            rejected.append({"device": reg.device_id.hex(), "tx_id": tx_hex,
                             "reason": "receipt_missing"})
            return
        if (
            receipt.payee_device_id != reg.device_id
            or pub_in.payee_hint != reg.device_id
            or receipt.public_inputs.encode() != pub_in.encode()
            or receipt.bundle.digest() != entry.bundle_hash
        ):
            rejected.append({"device": reg.device_id.hex(), "tx_id": tx_hex,
                             "reason": "receipt_mismatch"})
            return
        if pub_in.epoch > now_epoch:
            rejected.append({"device": reg.device_id.hex(), "tx_id": tx_hex,
                             "reason": "epoch_in_future"})
            return
        if not self._verify_bundle_cached(receipt.bundle, pub_in, pub_in.epoch):
            rejected.append({"device": reg.device_id.hex(), "tx_id": tx_hex,
                             "reason": "bundle_invalid"})
            return
        if not self._accept_valid(receipt.accept, reg.device_id):
            rejected.append({"device": reg.device_id.hex(), "tx_id": tx_hex,
                             "reason": "accept_invalid"})
            return
        payer_pk = pub_in.certificate.subject_pk
        payload = commit_signing_payload(receipt.tx_id, receipt.accept)
        if not schnorr_verify(payer_pk, payload, receipt.commit_sig):
            rejected.append({"device": reg.device_id.hex(), "tx_id": tx_hex,
                             "reason": "commit_sig_invalid"})
            return

        claim = self._claim_for(pub_in, receipt.bundle.nullifier)
        if not claim.receipt_verified:
            claim.receipt_verified = True
            claim.receipt_seq = self._claim_seq
            self._claim_seq += 1
        if claim.key() not in new_claim_keys:
            new_claim_keys.append(claim.key())

    def _resolve(
        self,
        new_claim_keys: List[Tuple[bytes, bytes]],
        batch_devices: set,
        credits: List[dict],
        double_spends: List[dict],
        rejected: List[dict],
        voids: List[dict],
        resolutions: List[Resolution],
    ) -> None:
        handled_nullifiers: set[bytes] = set()

        for key in new_claim_keys:
            claim = self._claims[key]
            nullifier = claim.nullifier
            group_keys = self._nullifier_groups[nullifier]
            if len(group_keys) >= 2 and nullifier not in handled_nullifiers:
                handled_nullifiers.add(nullifier)
                self._resolve_duplicate_group(
                    group_keys, credits, double_spends, resolutions
                )

        for key in new_claim_keys:
            claim = self._claims[key]
            if claim.resolved or claim.nullifier in handled_nullifiers:
                continue
            self._resolve_singleton(
                claim, batch_devices, credits, rejected, voids, resolutions
            )

    def _resolve_duplicate_group(
        self,
        group_keys: List[Tuple[bytes, bytes]],
        credits: List[dict],
        double_spends: List[dict],
        resolutions: List[Resolution],
    ) -> None:
        group = sorted((self._claims[k] for k in group_keys), key=lambda c: c.seq)
        payer_pseud = group[0].payer_pseudonym
        self.frozen.add(payer_pseud)
        double_spends.append(
            {
                "nullifier": group[0].nullifier.hex(),
                "tx_ids": [c.tx_id.hex() for c in group],
                "device_pseudonym": payer_pseud.hex(),
            }
        )
        already_credited = any(c.resolution == "credited" for c in group)
        for claim in sorted(group, key=Claim.credit_rank):
            if claim.resolved:
                continue
            if not already_credited and claim.creditable():
                self._credit(claim, credits, resolutions, duplicate=True)
                already_credited = True
            else:
                claim.resolved = True
                claim.resolution = "annulled"
                resolutions.append(self._resolution("annulled", claim, duplicate=True))

    def _resolve_singleton(
        self,
        claim: Claim,
        batch_devices: set,
        credits: List[dict],
        rejected: List[dict],
        voids: List[dict],
        resolutions: List[Resolution],
    ) -> None:
        payee_pseud = self.pseudonym_by_device.get(claim.payee_device_id)
        if claim.creditable():
            if claim.payer_pseudonym in self.frozen or (
                payee_pseud is not None and payee_pseud in self.frozen
            ):
                claim.resolved = True
                claim.resolution = "annulled"
                resolutions.append(self._resolution("annulled", claim, duplicate=False))
                rejected.append(
                    {"device": claim.payee_device_id.hex(),
                     "tx_id": claim.tx_id.hex(), "reason": "frozen_party"}
                )
                return
            self._credit(claim, credits, resolutions, duplicate=False)
            return
        # no receipt and no accept evidence: void once the payee device has
        # had its say in this batch, otherwise keep the claim pending
        if claim.payer_entry_seen and claim.payee_device_id in batch_devices:
            self._void(claim, voids, resolutions)

    def _credit(
        self,
        claim: Claim,
        credits: List[dict],
        resolutions: List[Resolution],
        duplicate: bool,
    ) -> None:
        payee_pseud = self.pseudonym_by_device.get(claim.payee_device_id)
        payee_reg = self.devices.get(payee_pseud) if payee_pseud else None
        wallet = self.wallets.get(payee_reg.owner_id) if payee_reg else None
        if wallet is None:
            claim.resolved = True
            claim.resolution = "annulled"
            resolutions.append(self._resolution("annulled", claim, duplicate=duplicate))
            return
        wallet.online_balance += claim.amount
        claim.resolved = True
        claim.resolution = "credited"
        credits.append({"payee": wallet.pseudonym().hex(), "amount": claim.amount})
        resolutions.append(self._resolution("credited", claim, duplicate=duplicate))
        self._record_audit(claim, payee_reg)

    def _void(
        self, claim: Claim, voids: List[dict], resolutions: List[Resolution]
    ) -> None:
        payer_reg = self.devices.get(claim.payer_pseudonym)
        wallet = self.wallets.get(payer_reg.owner_id) if payer_reg else None
        if wallet is not None:
            wallet.online_balance += claim.amount
        claim.resolved = True
        claim.resolution = "voided"
        voids.append(
            {"tx_id": claim.tx_id.hex(), "payer_pseudonym": claim.payer_pseudonym.hex()}
        )
        resolutions.append(self._resolution("voided", claim, duplicate=False))

    def _resolution(self, kind: str, claim: Claim, duplicate: bool) -> Resolution:
        payer_reg = self.devices.get(claim.payer_pseudonym)
        payee_pseud = self.pseudonym_by_device.get(claim.payee_device_id)
        payee_reg = self.devices.get(payee_pseud) if payee_pseud else None
        return Resolution(
            kind=kind,
            tx_id=claim.tx_id,
            amount=claim.amount,
            payer_device_id=claim.payer_device_id,
            payee_device_id=claim.payee_device_id,
            payer_owner_id=payer_reg.owner_id if payer_reg else None,
            payee_owner_id=payee_reg.owner_id if payee_reg else None,
            duplicate=duplicate,
        )

    def _record_audit(self, claim: Claim, payee_reg: Optional[DeviceRegistration]) -> None:
        payer_reg = self.devices.get(claim.payer_pseudonym)
        if payer_reg is None:
            return
        record = AuditRecord(
            tx_id=claim.tx_id,
            nullifier=claim.nullifier,
            amount=claim.amount,
            payer_owner=self.customers[payer_reg.owner_id],
            payee_owner=self.customers.get(payee_reg.owner_id) if payee_reg else None,
            payer_pseudonym=claim.payer_pseudonym,
            payee_pseudonym=(
                self.pseudonym_by_device.get(claim.payee_device_id)
            ),
        )
        self._audit_by_tx[claim.tx_id] = record
        self._audit_by_nullifier[claim.nullifier] = record

    # -- audit -------------------------------------------------------------------

    def audit_disclose(self, scope: AuditScope, grant: AuditGrant) -> Disclosure:
        """Reveal the stored identity mapping for one scope, under a grant."""
        if self.auditor_pk is None:
            raise GrantInvalid("no auditor key configured")
        if grant.scope != scope or not schnorr_verify(
            self.auditor_pk, scope.signing_payload(), grant.sig
        ):
            raise GrantInvalid("grant signature does not cover this scope")
        if scope.kind == "tx":
            record = self._audit_by_tx.get(scope.value)
        elif scope.kind == "nullifier":
            record = self._audit_by_nullifier.get(scope.value)
        elif scope.kind == "device":
            reg = self.devices.get(scope.value)
            if reg is None:
                raise ScopeUnknown("unknown device pseudonym")
            owner = self.customers[reg.owner_id]
            return Disclosure(
                owner_identity=owner.name,
                owner_id=owner.owner_id,
                amount=None,
                counterparty_pseudonym=None,
            )
        else:
            raise ScopeUnknown(f"unsupported scope kind {scope.kind!r}")
        if record is None:
            raise ScopeUnknown("no reconciled payment under that scope")
        return Disclosure(
            owner_identity=record.payer_owner.name,
            owner_id=record.payer_owner.owner_id,
            amount=record.amount,
            counterparty_pseudonym=record.payee_pseudonym,
        )
