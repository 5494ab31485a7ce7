"""Three-message offline payment exchange.

    payer                                payee
      | -- PayInit(metadata, bundle) ----->|   verify proofs
      |<------ PayAccept(cert, sig) ------ |   hold pending receipt
      | -- PayCommit(sig over accept) ---->|   log + store receipt

The payer debits its secure element before the first message leaves, so a
lost message can only strand value in the payer's log (recovered at
reconciliation), never duplicate it.  The payee treats a payment as real
only once the commit arrives; an accepted-but-uncommitted payment is
discarded on timeout and, because the payer holds the signed accept, the
intermediary can still credit the payee from the payer's log.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Union

from .certs import WalletCertificate
from .crypto import SIGNATURE_LEN, Signature, schnorr_sign, schnorr_verify
from .encoding import ByteReader, lp, sha256
from .errors import DecodeError, SignatureInvalid, UnknownTx
from .secure_element import OfflineLogEntry, SecureElement
from .suite import GroupElement
from .zkp import (
    ComplianceBundle,
    PublicInputs,
    RejectReason,
    VerifyOutcome,
    verify_compliance_bundle,
)

MSG_PAY_INIT = 0x01
MSG_PAY_ACCEPT = 0x02
MSG_PAY_COMMIT = 0x03
MSG_PAY_REJECT = 0x04

ACCEPT_SIGN_SUFFIX = b"accept"
COMMIT_SIGN_SUFFIX = b"commit"

DEFAULT_TIMEOUT_TICKS = 10


@dataclass(frozen=True)
class PayInit:
    public_inputs: PublicInputs
    bundle: ComplianceBundle

    @property
    def tx_id(self) -> bytes:
        return self.public_inputs.tx_id

    def encode(self) -> bytes:
        return lp(self.public_inputs.encode()) + lp(self.bundle.encode())

    @classmethod
    def decode(cls, data: bytes) -> "PayInit":
        r = ByteReader(data)
        pub = PublicInputs.decode(r.lp_bytes())
        bundle = ComplianceBundle.decode(r.lp_bytes())
        r.expect_end()
        return cls(public_inputs=pub, bundle=bundle)


@dataclass(frozen=True)
class PayAccept:
    tx_id: bytes
    payee_cert: WalletCertificate
    sig: Signature

    def signing_payload(self) -> bytes:
        return self.tx_id + ACCEPT_SIGN_SUFFIX

    def encode(self) -> bytes:
        return self.tx_id + self.payee_cert.encode() + self.sig.encode()

    @classmethod
    def read(cls, r: ByteReader) -> "PayAccept":
        return cls(
            tx_id=r.take(32),
            payee_cert=WalletCertificate.read(r),
            sig=Signature.decode(r.take(SIGNATURE_LEN)),
        )

    @classmethod
    def decode(cls, data: bytes) -> "PayAccept":
        r = ByteReader(data)
        out = cls.read(r)
        r.expect_end()
        return out


def commit_signing_payload(tx_id: bytes, accept: PayAccept) -> bytes:
    return tx_id + COMMIT_SIGN_SUFFIX + sha256(accept.encode())


@dataclass(frozen=True)
class PayCommit:
    tx_id: bytes
    sig: Signature

    def encode(self) -> bytes:
        return self.tx_id + self.sig.encode()

    @classmethod
    def decode(cls, data: bytes) -> "PayCommit":
        r = ByteReader(data)
        out = cls(tx_id=r.take(32), sig=Signature.decode(r.take(SIGNATURE_LEN)))
        r.expect_end()
        return out


@dataclass(frozen=True)
class PayReject:
    tx_id: bytes
    reason: RejectReason

    def encode(self) -> bytes:
        return self.tx_id + lp(self.reason.value.encode())

    @classmethod
    def decode(cls, data: bytes) -> "PayReject":
        r = ByteReader(data)
        tx_id = r.take(32)
        raw = r.lp_bytes(max_len=64).decode("utf-8", errors="replace")
        r.expect_end()
        try:
            reason = RejectReason(raw)
        except ValueError as exc:
            raise DecodeError(f"unknown reject reason {raw!r}") from exc
        return cls(tx_id=tx_id, reason=reason)


PROTOCOL_MESSAGES = {
    MSG_PAY_INIT: PayInit,
    MSG_PAY_ACCEPT: PayAccept,
    MSG_PAY_COMMIT: PayCommit,
    MSG_PAY_REJECT: PayReject,
}


@dataclass(frozen=True)
class Receipt:
    """Payee-side evidence of a committed payment, uploaded at sync."""

    tx_id: bytes
    public_inputs: PublicInputs
    bundle: ComplianceBundle
    accept: PayAccept
    commit_sig: Signature
    payee_device_id: bytes

    @property
    def amount(self) -> int:
        return self.public_inputs.amount

    def encode(self) -> bytes:
        return (
            self.tx_id
            + lp(self.public_inputs.encode())
            + lp(self.bundle.encode())
            + lp(self.accept.encode())
            + self.commit_sig.encode()
            + self.payee_device_id
        )

    @classmethod
    def decode(cls, data: bytes) -> "Receipt":
        r = ByteReader(data)
        out = cls(
            tx_id=r.take(32),
            public_inputs=PublicInputs.decode(r.lp_bytes()),
            bundle=ComplianceBundle.decode(r.lp_bytes()),
            accept=PayAccept.decode(r.lp_bytes()),
            commit_sig=Signature.decode(r.take(SIGNATURE_LEN)),
            payee_device_id=r.take(16),
        )
        r.expect_end()
        return out


class PaymentStatus(Enum):
    IN_FLIGHT = "in_flight"
    COMPLETED = "completed"
    ABORTED_TIMEOUT = "aborted_timeout"
    ABORTED_REJECT = "aborted_reject"
    PENDING_SYNC = "pending_sync"


@dataclass
class PaymentOutcome:
    status: PaymentStatus
    tx_id: Optional[bytes] = None
    reason: Optional[RejectReason] = None


@dataclass
class OutgoingPayment:
    tx_id: bytes
    amount: int
    payee_hint: bytes
    public_inputs: PublicInputs
    bundle: ComplianceBundle
    status: PaymentStatus = PaymentStatus.IN_FLIGHT
    accept: Optional[PayAccept] = None
    commit: Optional[PayCommit] = None
    reject_reason: Optional[RejectReason] = None


@dataclass
class PendingReceipt:
    public_inputs: PublicInputs
    bundle: ComplianceBundle
    accept: PayAccept
    discarded: bool = False


class PaymentAgent:
    """Protocol state machine for one device, payer and payee roles.

    Owns the per-transaction exchange state; the surrounding simulator (or
    a direct test driver) moves the messages.
    """

    def __init__(self, se: SecureElement, fi_pub: GroupElement):
        self.se = se
        self.fi_pub = fi_pub
        self.outgoing: Dict[bytes, OutgoingPayment] = {}
        self.pending: Dict[bytes, PendingReceipt] = {}
        self.receipts: Dict[bytes, Receipt] = {}
        self.receipt_order: List[bytes] = []
        self._seen_tx: set[bytes] = set()

    @property
    def device_id(self) -> bytes:
        return self.se.device_id

    # -- payer side ---------------------------------------------------------

    def payer_start(self, amount: int, payee_hint: bytes, epoch: int) -> PayInit:
        """Debit the SE, log the payment, and emit the opening message."""
        bundle, pub_in, _entry = self.se.authorize_payment(amount, payee_hint, epoch)
        payment = OutgoingPayment(
            tx_id=pub_in.tx_id,
            amount=amount,
            payee_hint=payee_hint,
            public_inputs=pub_in,
            bundle=bundle,
        )
        self.outgoing[pub_in.tx_id] = payment
        return PayInit(public_inputs=pub_in, bundle=bundle)

    def payer_handle_accept(self, accept: PayAccept) -> PayCommit:
        payment = self.outgoing.get(accept.tx_id)
        if payment is None:
            raise UnknownTx("accept for unknown payment")
        if payment.status is PaymentStatus.COMPLETED and payment.commit is not None:
            return payment.commit  # replayed accept: re-emit, no state change
        if not accept.payee_cert.verify(self.fi_pub):
            raise SignatureInvalid("payee certificate invalid")
        if not schnorr_verify(
            accept.payee_cert.subject_pk, accept.signing_payload(), accept.sig
        ):
            raise SignatureInvalid("payee accept signature invalid")
        commit = PayCommit(
            tx_id=accept.tx_id,
            sig=schnorr_sign(
                self.se.keys.sk, commit_signing_payload(accept.tx_id, accept)
            ),
        )
        payment.accept = accept
        payment.commit = commit
        payment.status = PaymentStatus.COMPLETED
        return commit

    def payer_handle_reject(self, reject: PayReject) -> PaymentOutcome:
        payment = self.outgoing.get(reject.tx_id)
        if payment is None:
            raise UnknownTx("reject for unknown payment")
        if payment.status is PaymentStatus.IN_FLIGHT:
            payment.status = PaymentStatus.ABORTED_REJECT
            payment.reject_reason = reject.reason
        return PaymentOutcome(
            status=payment.status, tx_id=reject.tx_id, reason=reject.reason
        )

    # -- payee side ---------------------------------------------------------

    def payee_handle_init(
        self, init: PayInit, now_epoch: int
    ) -> Union[PayAccept, PayReject]:
        tx_id = init.tx_id
        if tx_id in self._seen_tx:
            return PayReject(tx_id=tx_id, reason=RejectReason.DUPLICATE_TX)
        if init.public_inputs.payee_hint != self.device_id:
            return PayReject(tx_id=tx_id, reason=RejectReason.PAYEE_MISMATCH)
        outcome: VerifyOutcome = verify_compliance_bundle(
            init.bundle,
            init.public_inputs,
            self.fi_pub,
            now_epoch,
            self.se.params,
            self.se.range_bits,
        )
        if not outcome.accepted:
            return PayReject(tx_id=tx_id, reason=outcome.reason)
        accept = PayAccept(
            tx_id=tx_id,
            payee_cert=self.se.certificate,
            sig=schnorr_sign(self.se.keys.sk, tx_id + ACCEPT_SIGN_SUFFIX),
        )
        self._seen_tx.add(tx_id)
        self.pending[tx_id] = PendingReceipt(
            public_inputs=init.public_inputs, bundle=init.bundle, accept=accept
        )
        return accept

    def payee_handle_commit(self, commit: PayCommit) -> Receipt:
        existing = self.receipts.get(commit.tx_id)
        if existing is not None:
            return existing  # replayed commit: idempotent
        pending = self.pending.get(commit.tx_id)
        if pending is None or pending.discarded:
            raise UnknownTx("commit without a pending accept")
        payer_pk = pending.public_inputs.certificate.subject_pk
        payload = commit_signing_payload(commit.tx_id, pending.accept)
        if not schnorr_verify(payer_pk, payload, commit.sig):
            raise SignatureInvalid("payer commit signature invalid")
        entry = self.se.build_incoming_entry(
            pending.public_inputs, pending.bundle.digest()
        )
        self.se.record_incoming(entry)
        receipt = Receipt(
            tx_id=commit.tx_id,
            public_inputs=pending.public_inputs,
            bundle=pending.bundle,
            accept=pending.accept,
            commit_sig=commit.sig,
            payee_device_id=self.device_id,
        )
        self.receipts[commit.tx_id] = receipt
        self.receipt_order.append(commit.tx_id)
        del self.pending[commit.tx_id]
        return receipt

    # -- timeouts -----------------------------------------------------------

    def handle_timeout(self, tx_id: bytes) -> Optional[PaymentOutcome]:
        """Resolve an exchange that ran past its deadline.

        Payer side: the debit stands and waits for reconciliation.  Payee
        side: the pending accept is discarded; nothing was credited.
        """
        payment = self.outgoing.get(tx_id)
        if payment is not None and payment.status is PaymentStatus.IN_FLIGHT:
            payment.status = PaymentStatus.PENDING_SYNC
            return PaymentOutcome(status=PaymentStatus.PENDING_SYNC, tx_id=tx_id)
        pending = self.pending.get(tx_id)
        if pending is not None and not pending.discarded:
            pending.discarded = True
            del self.pending[tx_id]
            return PaymentOutcome(status=PaymentStatus.ABORTED_TIMEOUT, tx_id=tx_id)
        return None

    # -- sync support ---------------------------------------------------------

    def accept_evidence(self) -> Dict[bytes, PayAccept]:
        """Signed accepts held by the payer, keyed by tx, for sync upload."""
        return {
            tx: p.accept for tx, p in self.outgoing.items() if p.accept is not None
        }
