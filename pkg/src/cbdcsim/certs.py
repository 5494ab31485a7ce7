"""Wallet certificates: FI-signed bindings of device keys to spending policy."""

from __future__ import annotations

from dataclasses import dataclass

from .encoding import ByteReader, sha256, u64
from .crypto import SIGNATURE_LEN, Signature, schnorr_sign, schnorr_verify
from .errors import DecodeError
from .suite import ELEM_LEN, GroupElement

CERT_SIGN_DOMAIN = b"cert/v1"

# All policy values must fit the range-proof width.
POLICY_MAX = 1 << 32


@dataclass(frozen=True)
class PolicyLimits:
    """Offline spending policy: cumulative cap L, per-tx cap T, tx count cap K."""

    cum_limit: int
    per_tx_cap: int
    count_cap: int

    def encode(self) -> bytes:
        return u64(self.cum_limit) + u64(self.per_tx_cap) + u64(self.count_cap)

    @classmethod
    def read(cls, r: ByteReader) -> "PolicyLimits":
        return cls(cum_limit=r.u64(), per_tx_cap=r.u64(), count_cap=r.u64())


def _cert_payload(subject_pk: GroupElement, limits: PolicyLimits, expiry_epoch: int) -> bytes:
    return CERT_SIGN_DOMAIN + subject_pk.encode() + limits.encode() + u64(expiry_epoch)


@dataclass(frozen=True)
class WalletCertificate:
    subject_pk: GroupElement
    limits: PolicyLimits
    expiry_epoch: int
    fi_sig: Signature

    def signing_payload(self) -> bytes:
        return _cert_payload(self.subject_pk, self.limits, self.expiry_epoch)

    def verify(self, fi_pub: GroupElement) -> bool:
        return schnorr_verify(fi_pub, self.signing_payload(), self.fi_sig)

    def pseudonym(self) -> bytes:
        """Stable 32-byte device pseudonym derived from the subject key."""
        return sha256(b"pseud/v1", self.subject_pk.encode())

    def encode(self) -> bytes:
        return (
            self.subject_pk.encode()
            + self.limits.encode()
            + u64(self.expiry_epoch)
            + self.fi_sig.encode()
        )

    ENCODED_LEN = ELEM_LEN + 24 + 8 + SIGNATURE_LEN

    @classmethod
    def read(cls, r: ByteReader) -> "WalletCertificate":
        subject_pk = GroupElement.decode(r.take(ELEM_LEN))
        limits = PolicyLimits.read(r)
        expiry = r.u64()
        sig = Signature.decode(r.take(SIGNATURE_LEN))
        return cls(subject_pk=subject_pk, limits=limits, expiry_epoch=expiry, fi_sig=sig)

    @classmethod
    def decode(cls, data: bytes) -> "WalletCertificate":
        r = ByteReader(data)
        cert = cls.read(r)
        r.expect_end()
        return cert


def sign_certificate(
    fi_sk, subject_pk: GroupElement, limits: PolicyLimits, expiry_epoch: int
) -> WalletCertificate:
    sig = schnorr_sign(fi_sk, _cert_payload(subject_pk, limits, expiry_epoch))
    return WalletCertificate(
        subject_pk=subject_pk, limits=limits, expiry_epoch=expiry_epoch, fi_sig=sig
    )
