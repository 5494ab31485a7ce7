"""Emulated secure element: key custody, monotonic counter, policy, local log.

One SecureElement instance is the software stand-in for the tamper
boundary on one device.  Spendable state lives here as plaintext openings
(balance, cumulative spend, blindings); everything that crosses the
boundary is a commitment, proof, or signature.  The offline log is a hash
chain whose head the element maintains; entries are append-only and
signed with the device key.

Rollback/cloning attacks are modeled by the simulator's snapshot/restore
harness, not by this module: no public operation here ever decreases the
counter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from typing import List, Optional, Tuple

from .certs import WalletCertificate
from .crypto import (
    KeyPair,
    NonceStream,
    PedersenParams,
    SIGNATURE_LEN,
    Signature,
    default_params,
    pedersen_commit,
    schnorr_sign,
    schnorr_verify,
)
from .encoding import ByteReader, lp, sha256, u8, u64
from .errors import (
    AllocationInvalid,
    CounterExhausted,
    CredentialExpired,
    DecodeError,
    ExceedsDeviceLimit,
    InsufficientFunds,
    LimitExceeded,
    LogCorrupt,
    PolicyBound,
    ProvisionMismatch,
    ValueInvalid,
)
from .suite import GroupElement, Scalar, hash_to_scalar
from .zkp import (
    ComplianceBundle,
    DEFAULT_RANGE_BITS,
    DEVICE_ID_LEN,
    PublicInputs,
    SpendWitness,
    build_compliance_bundle,
    derive_nullifier,
    tx_id_for_nullifier,
)

LOG_GENESIS_DOMAIN = b"selog/v1"
ALLOC_SIGN_DOMAIN = b"alloc/v1"
NONCE_LEN = 8


def log_genesis_head(device_id: bytes) -> bytes:
    return sha256(LOG_GENESIS_DOMAIN, device_id)


@dataclass(frozen=True)
class AllocationRecord:
    """Main-wallet-signed release of value onto one device."""

    device_id: bytes
    amount: int
    nonce: bytes
    sig: Signature

    def signing_payload(self) -> bytes:
        return ALLOC_SIGN_DOMAIN + self.device_id + u64(self.amount) + self.nonce

    def encode(self) -> bytes:
        return self.device_id + u64(self.amount) + self.nonce + self.sig.encode()

    ENCODED_LEN = DEVICE_ID_LEN + 8 + NONCE_LEN + SIGNATURE_LEN

    @classmethod
    def read(cls, r: ByteReader) -> "AllocationRecord":
        return cls(
            device_id=r.take(DEVICE_ID_LEN),
            amount=r.u64(),
            nonce=r.take(NONCE_LEN),
            sig=Signature.decode(r.take(SIGNATURE_LEN)),
        )


class EntryKind(IntEnum):
    LOAD = 0
    PAYER = 1
    PAYEE = 2
    RECLAIM = 3


@dataclass(frozen=True)
class OfflineLogEntry:
    """One hash-chained record in a device's offline log."""

    tx_id: bytes
    kind: EntryKind
    prev_head: bytes
    entry_sig: Signature
    public_inputs: Optional[PublicInputs] = None  # payment kinds
    bundle_hash: Optional[bytes] = None           # payment kinds
    allocation: Optional[AllocationRecord] = None  # LOAD
    amount: Optional[int] = None                   # RECLAIM

    def _body(self) -> bytes:
        out = self.tx_id + u8(int(self.kind))
        if self.kind in (EntryKind.PAYER, EntryKind.PAYEE):
            out += lp(self.public_inputs.encode()) + self.bundle_hash
        elif self.kind == EntryKind.LOAD:
            out += self.allocation.encode()
        else:
            out += u64(self.amount)
        return out + self.prev_head

    def signing_digest(self) -> bytes:
        return sha256(b"selog-entry/v1", self._body())

    def encode(self) -> bytes:
        return self._body() + self.entry_sig.encode()

    @classmethod
    def decode(cls, data: bytes) -> "OfflineLogEntry":
        r = ByteReader(data)
        tx_id = r.take(32)
        kind_raw = r.u8()
        try:
            kind = EntryKind(kind_raw)
        except ValueError as exc:
            raise DecodeError(f"unknown log entry kind {kind_raw}") from exc
        public_inputs = bundle_hash = allocation = amount = None
        if kind in (EntryKind.PAYER, EntryKind.PAYEE):
            public_inputs = PublicInputs.decode(r.lp_bytes())
            bundle_hash = r.take(32)
        elif kind == EntryKind.LOAD:
            allocation = AllocationRecord.read(r)
        else:
            amount = r.u64()
        prev_head = r.take(32)
        sig = Signature.decode(r.take(SIGNATURE_LEN))
        r.expect_end()
        return cls(
            tx_id=tx_id,
            kind=kind,
            prev_head=prev_head,
            entry_sig=sig,
            public_inputs=public_inputs,
            bundle_hash=bundle_hash,
            allocation=allocation,
            amount=amount,
        )


def chain_head_after(prev_head: bytes, entry: OfflineLogEntry) -> bytes:
    return sha256(prev_head, entry.encode())


def verify_log_chain(
    entries: List[OfflineLogEntry],
    head: bytes,
    device_pk: GroupElement,
    start_head: Optional[bytes] = None,
) -> bool:
    """True iff the hash chain recomputes to head and every signature holds."""
    if not entries:
        return start_head is None or head == start_head
    h = start_head if start_head is not None else entries[0].prev_head
    for entry in entries:
        if entry.prev_head != h:
            return False
        if not schnorr_verify(device_pk, entry.signing_digest(), entry.entry_sig):
            return False
        h = chain_head_after(h, entry)
    return h == head


class SecureElement:
    """Per-device trust boundary.

    All mutating operations enforce the certificate policy before touching
    state, and the payer log entry is appended before the payment bundle
    is handed out (debit-then-send).
    """

    def __init__(
        self,
        device_id: bytes,
        keys: KeyPair,
        prf_seed: bytes,
        certificate: WalletCertificate,
        owner_pk: GroupElement,
        params: Optional[PedersenParams] = None,
        range_bits: int = DEFAULT_RANGE_BITS,
    ):
        if len(device_id) != DEVICE_ID_LEN:
            raise ValueError(f"device_id must be {DEVICE_ID_LEN} bytes")
        if certificate.subject_pk != keys.pk:
            raise ProvisionMismatch("certificate does not bind this device key")
        cap = 1 << range_bits
        limits = certificate.limits
        if limits.cum_limit >= cap or limits.per_tx_cap >= cap:
            raise PolicyBound(
                f"limits must fit the {range_bits}-bit proof width"
            )
        self.device_id = device_id
        self.keys = keys
        self.prf_seed = prf_seed
        self.certificate = certificate
        self.owner_pk = owner_pk
        self.params = params or default_params()
        self.range_bits = range_bits

        self.counter = 0
        self.counter_base = 0
        self.balance = 0
        self.cum_spent = 0
        self._balance_blind = hash_to_scalar(b"blind-bal/v1", prf_seed)
        self._cum_blind = hash_to_scalar(b"blind-cum/v1", prf_seed)
        self.log: List[OfflineLogEntry] = []
        self.log_head = log_genesis_head(device_id)
        self._seen_alloc_nonces: set[bytes] = set()

    # -- public views -----------------------------------------------------

    def balance_commitment(self) -> GroupElement:
        return pedersen_commit(self.balance, self._balance_blind, self.params)

    def cum_commitment(self) -> GroupElement:
        return pedersen_commit(self.cum_spent, self._cum_blind, self.params)

    def remaining_tx_budget(self) -> int:
        return self.certificate.limits.count_cap - (self.counter - self.counter_base)

    def log_storage_bytes(self) -> int:
        return sum(len(e.encode()) for e in self.log)

    def entries_since(self, index: int) -> List[OfflineLogEntry]:
        return self.log[index:]

    # -- lifecycle ----------------------------------------------------------

    def load_value(self, alloc: AllocationRecord) -> None:
        """Credit an allocation from the owning main wallet."""
        if alloc.device_id != self.device_id:
            raise AllocationInvalid("allocation addressed to another device")
        if not schnorr_verify(self.owner_pk, alloc.signing_payload(), alloc.sig):
            raise AllocationInvalid("allocation signature invalid")
        if alloc.nonce in self._seen_alloc_nonces:
            raise AllocationInvalid("allocation nonce replayed")
        if alloc.amount < 1:
            raise AllocationInvalid("allocation amount must be positive")
        if self.balance + alloc.amount >= (1 << self.range_bits):
            raise ExceedsDeviceLimit(
                f"balance {self.balance}+{alloc.amount} exceeds device width"
            )
        self._seen_alloc_nonces.add(alloc.nonce)
        self.balance += alloc.amount
        self._append(self._signed_entry(
            tx_id=sha256(b"allocid/v1", self.device_id, alloc.nonce),
            kind=EntryKind.LOAD,
            allocation=alloc,
        ))

    def authorize_payment(
        self, amount: int, payee_hint: bytes, epoch: int
    ) -> Tuple[ComplianceBundle, PublicInputs, OfflineLogEntry]:
        """Debit the element and emit a provable payment.

        The counter is bumped and the log entry appended before anything
        leaves the boundary, so an interrupted exchange can only lose the
        message, never duplicate the value.
        """
        limits = self.certificate.limits
        if amount < 1 or amount > limits.per_tx_cap:
            raise ValueInvalid(f"amount {amount} outside [1, {limits.per_tx_cap}]")
        if amount > self.balance:
            raise InsufficientFunds(f"amount {amount} exceeds balance {self.balance}")
        if self.cum_spent + amount > limits.cum_limit:
            raise LimitExceeded(
                f"cumulative {self.cum_spent}+{amount} exceeds {limits.cum_limit}"
            )
        if self.counter - self.counter_base >= limits.count_cap:
            raise CounterExhausted(f"offline tx budget {limits.count_cap} exhausted")
        if epoch > self.certificate.expiry_epoch:
            raise CredentialExpired(
                f"epoch {epoch} past certificate expiry {self.certificate.expiry_epoch}"
            )

        self.counter += 1
        nullifier = derive_nullifier(self.prf_seed, self.counter)
        pub_in = PublicInputs(
            c_balance_before=self.balance_commitment(),
            c_cum_before=self.cum_commitment(),
            amount=amount,
            cum_limit=limits.cum_limit,
            per_tx_cap=limits.per_tx_cap,
            certificate=self.certificate,
            tx_id=tx_id_for_nullifier(nullifier),
            epoch=epoch,
            payee_hint=payee_hint,
        )
        witness = SpendWitness(
            balance=self.balance,
            balance_blind=self._balance_blind,
            cum_spent=self.cum_spent,
            cum_blind=self._cum_blind,
            sk=self.keys.sk,
            prf_seed=self.prf_seed,
            counter=self.counter,
        )
        bundle = build_compliance_bundle(witness, pub_in, self.params, self.range_bits)

        self.balance -= amount
        self.cum_spent += amount
        entry = self._signed_entry(
            tx_id=pub_in.tx_id,
            kind=EntryKind.PAYER,
            public_inputs=pub_in,
            bundle_hash=bundle.digest(),
        )
        self._append(entry)
        return bundle, pub_in, entry

    def build_incoming_entry(
        self, pub_in: PublicInputs, bundle_hash: bytes
    ) -> OfflineLogEntry:
        """Sign a payee-side entry for a verified incoming payment."""
        return self._signed_entry(
            tx_id=pub_in.tx_id,
            kind=EntryKind.PAYEE,
            public_inputs=pub_in,
            bundle_hash=bundle_hash,
        )

    def record_incoming(self, entry: OfflineLogEntry) -> None:
        """Append a verified incoming payment to the log.

        Incoming value is not added to the spendable balance; it becomes
        spendable only after the receipt is reconciled at sync.
        """
        if entry.prev_head != self.log_head:
            raise LogCorrupt("entry does not chain onto the current head")
        self._append(entry)

    def reclaim(self) -> int:
        """Zero the spendable balance (online reclaim to the main wallet)."""
        amount = self.balance
        if amount == 0:
            return 0
        self.balance = 0
        tx_id = sha256(b"reclaimid/v1", self.device_id, u64(len(self.log)))
        self._append(self._signed_entry(tx_id=tx_id, kind=EntryKind.RECLAIM, amount=amount))
        return amount

    def reset_period(self) -> None:
        """Start a fresh offline period after a successful reconciliation."""
        self.cum_spent = 0
        self.counter_base = self.counter

    # -- internals ----------------------------------------------------------

    def _signed_entry(self, **fields) -> OfflineLogEntry:
        entry = OfflineLogEntry(prev_head=self.log_head, entry_sig=_UNSIGNED, **fields)
        sig = schnorr_sign(self.keys.sk, entry.signing_digest())
        return replace(entry, entry_sig=sig)

    def _append(self, entry: OfflineLogEntry) -> None:
        self.log_head = chain_head_after(self.log_head, entry)
        self.log.append(entry)


# signing_digest() does not cover the signature field, so any placeholder works
_UNSIGNED = Signature(commit_point=GroupElement.identity(), response=Scalar.zero())
