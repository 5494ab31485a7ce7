"""Offline-payment compliance proofs.

A payment bundle proves four things about a hidden balance without
revealing it to anyone but the counterparty:

  1. funds:        the committed balance stays non-negative after the debit
  2. value:        the transfer amount is positive and below the per-tx cap
  3. policy:       cumulative offline spend stays under the certificate limit
  4. credential:   the prover holds the key bound by an unexpired certificate

Range statements use bit decomposition: one commitment and one two-branch
OR-proof per bit, plus a single revealed blinding delta showing that the
weighted bit commitments recombine to the target.  Everything is bound to
one Fiat-Shamir transcript seeded with the payment's public inputs, so any
field mutation invalidates every downstream challenge.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

from .certs import WalletCertificate
from .crypto import (
    NonceStream,
    PedersenParams,
    SIGNATURE_LEN,
    Signature,
    Transcript,
    base_point,
    default_params,
    pedersen_commit,
    schnorr_sign,
    schnorr_verify,
)
from .encoding import ByteReader, sha256, u32, u64
from .errors import (
    DecodeError,
    InsufficientFunds,
    InvalidWitness,
    LengthMismatch,
    LimitExceeded,
    OutOfRange,
    ValueInvalid,
)
from .suite import ELEM_LEN, SCALAR_LEN, GroupElement, Scalar

NULLIFIER_LEN = 32
TX_ID_LEN = 32
DEVICE_ID_LEN = 16

DEFAULT_RANGE_BITS = 32
SHIPPED_RANGE_WIDTHS = (4, 32)

BITPROOF_LEN = 2 * ELEM_LEN + 4 * SCALAR_LEN


def range_proof_material_len(width: int) -> int:
    """Analytic proof size: width commitments, width bit proofs, one scalar."""
    return width * (ELEM_LEN + BITPROOF_LEN) + SCALAR_LEN


def derive_nullifier(prf_seed: bytes, counter: int) -> bytes:
    """Deterministic one-time spend tag for (seed, counter)."""
    return sha256(b"nullifier/v1", prf_seed, u64(counter))


def tx_id_for_nullifier(nullifier: bytes) -> bytes:
    return sha256(b"txid/v1", nullifier)


# ---------------------------------------------------------------------------
# bit proofs


@dataclass(frozen=True)
class BitProof:
    """OR-proof that a commitment opens to 0 or 1 on the value generator."""

    a0: GroupElement
    a1: GroupElement
    e0: Scalar
    e1: Scalar
    z0: Scalar
    z1: Scalar

    def encode(self) -> bytes:
        return (
            self.a0.encode()
            + self.a1.encode()
            + self.e0.encode()
            + self.e1.encode()
            + self.z0.encode()
            + self.z1.encode()
        )

    @classmethod
    def read(cls, r: ByteReader) -> "BitProof":
        return cls(
            a0=GroupElement.decode(r.take(ELEM_LEN)),
            a1=GroupElement.decode(r.take(ELEM_LEN)),
            e0=Scalar.decode(r.take(SCALAR_LEN)),
            e1=Scalar.decode(r.take(SCALAR_LEN)),
            z0=Scalar.decode(r.take(SCALAR_LEN)),
            z1=Scalar.decode(r.take(SCALAR_LEN)),
        )


def prove_bit(
    bit: int,
    blinding: Scalar,
    commitment: GroupElement,
    transcript: Transcript,
    params: Optional[PedersenParams] = None,
    nonces: Optional[NonceStream] = None,
) -> BitProof:
    """Prove commitment = Com(bit, blinding) with bit in {0, 1}.

    The real branch runs an honest Schnorr round; the other branch is
    simulated with a pre-chosen challenge and response.  Both challenges
    must add up to the transcript challenge, so exactly one branch can be
    simulated.
    """
    if bit not in (0, 1):
        raise InvalidWitness(f"bit must be 0 or 1, got {bit}")
    params = params or default_params()
    nonces = nonces or NonceStream.system()
    h = params.g_blind

    transcript.absorb_element(b"bit-c", commitment)
    w = nonces.scalar()
    e_fake = nonces.scalar()
    z_fake = nonces.scalar()
    if bit == 0:
        # branch 1 (opens to 1) is simulated against C - g_val
        x1 = commitment - params.g_val
        a0 = w * h
        a1 = z_fake * h - e_fake * x1
    else:
        # branch 0 (opens to 0) is simulated against C
        a0 = z_fake * h - e_fake * commitment
        a1 = w * h
    transcript.absorb_element(b"bit-a0", a0)
    transcript.absorb_element(b"bit-a1", a1)
    e = transcript.challenge(b"bit-e")
    e_real = e - e_fake
    z_real = w + e_real * blinding
    if bit == 0:
        return BitProof(a0=a0, a1=a1, e0=e_real, e1=e_fake, z0=z_real, z1=z_fake)
    return BitProof(a0=a0, a1=a1, e0=e_fake, e1=e_real, z0=z_fake, z1=z_real)


def verify_bit(
    commitment: GroupElement,
    proof: BitProof,
    transcript: Transcript,
    params: Optional[PedersenParams] = None,
) -> bool:
    params = params or default_params()
    h = params.g_blind
    transcript.absorb_element(b"bit-c", commitment)
    transcript.absorb_element(b"bit-a0", proof.a0)
    transcript.absorb_element(b"bit-a1", proof.a1)
    e = transcript.challenge(b"bit-e")
    if proof.e0 + proof.e1 != e:
        return False
    if proof.z0 * h != proof.a0 + proof.e0 * commitment:
        return False
    if proof.z1 * h != proof.a1 + proof.e1 * (commitment - params.g_val):
        return False
    return True


# ---------------------------------------------------------------------------
# range proofs


@dataclass(frozen=True)
class RangeProof:
    bit_commitments: List[GroupElement]
    bit_proofs: List[BitProof]
    # Opens sum(2^j * C_j) - C_target as a commitment to zero: the revealed
    # scalar is its blinding, and a non-zero value part would need a discrete
    # log relation between the two generators.
    consistency: Scalar

    @property
    def width(self) -> int:
        return len(self.bit_commitments)

    def encode(self) -> bytes:
        out = [u32(self.width)]
        out += [c.encode() for c in self.bit_commitments]
        out += [p.encode() for p in self.bit_proofs]
        out.append(self.consistency.encode())
        return b"".join(out)

    def material_len(self) -> int:
        return range_proof_material_len(self.width)

    @classmethod
    def read(cls, r: ByteReader) -> "RangeProof":
        width = r.u32()
        if width > 64:
            raise DecodeError(f"range width {width} unreasonable")
        commitments = [GroupElement.decode(r.take(ELEM_LEN)) for _ in range(width)]
        proofs = [BitProof.read(r) for _ in range(width)]
        consistency = Scalar.decode(r.take(SCALAR_LEN))
        return cls(bit_commitments=commitments, bit_proofs=proofs, consistency=consistency)


def prove_range(
    value: int,
    blinding: Scalar,
    width: int,
    transcript: Transcript,
    params: Optional[PedersenParams] = None,
    nonces: Optional[NonceStream] = None,
) -> RangeProof:
    """Prove the commitment Com(value, blinding) opens to a value in [0, 2^width).

    The prover refuses out-of-range values; this refusal is the policy
    enforcement point.
    """
    if width < 1 or width > 64:
        raise ValueError(f"unsupported range width {width}")
    if not 0 <= value < (1 << width):
        raise OutOfRange(f"value {value} outside [0, 2^{width})")
    params = params or default_params()
    nonces = nonces or NonceStream.system()

    target = pedersen_commit(value, blinding, params)
    transcript.absorb(b"range-width", u32(width))
    transcript.absorb_element(b"range-target", target)

    blinds: List[Scalar] = []
    commitments: List[GroupElement] = []
    for j in range(width):
        r_j = nonces.scalar()
        blinds.append(r_j)
        c_j = pedersen_commit((value >> j) & 1, r_j, params)
        commitments.append(c_j)
        transcript.absorb_element(b"range-bit", c_j)

    proofs = [
        prove_bit((value >> j) & 1, blinds[j], commitments[j], transcript, params, nonces)
        for j in range(width)
    ]

    delta = Scalar.zero()
    for j in range(width):
        delta = delta + Scalar(1 << j) * blinds[j]
    delta = delta - blinding
    transcript.absorb(b"range-consistency", delta.encode())
    return RangeProof(bit_commitments=commitments, bit_proofs=proofs, consistency=delta)


def verify_range(
    c_target: GroupElement,
    proof: RangeProof,
    width: int,
    transcript: Transcript,
    params: Optional[PedersenParams] = None,
) -> bool:
    if proof.width != width or len(proof.bit_proofs) != width:
        raise LengthMismatch(f"proof width {proof.width} != expected {width}")
    params = params or default_params()

    transcript.absorb(b"range-width", u32(width))
    transcript.absorb_element(b"range-target", c_target)
    for c_j in proof.bit_commitments:
        transcript.absorb_element(b"range-bit", c_j)

    ok = True
    for c_j, bp in zip(proof.bit_commitments, proof.bit_proofs):
        # run every bit to keep the transcript advancing identically
        ok = verify_bit(c_j, bp, transcript, params) and ok

    # Horner recombination: sum(2^j * C_j) must equal target + delta*g_blind
    weighted = proof.bit_commitments[-1]
    for c_j in reversed(proof.bit_commitments[:-1]):
        weighted = weighted.double() + c_j
    if weighted != c_target + proof.consistency * params.g_blind:
        ok = False
    transcript.absorb(b"range-consistency", proof.consistency.encode())
    return ok


# ---------------------------------------------------------------------------
# ownership


@dataclass(frozen=True)
class OwnershipProof:
    """Schnorr proof of knowledge of the device secret key, transcript-bound."""

    commit_point: GroupElement
    response: Scalar

    def encode(self) -> bytes:
        return self.commit_point.encode() + self.response.encode()

    @classmethod
    def read(cls, r: ByteReader) -> "OwnershipProof":
        return cls(
            commit_point=GroupElement.decode(r.take(ELEM_LEN)),
            response=Scalar.decode(r.take(SCALAR_LEN)),
        )


def prove_ownership(
    sk: Scalar, transcript: Transcript, nonces: Optional[NonceStream] = None
) -> OwnershipProof:
    nonces = nonces or NonceStream.system()
    w = nonces.scalar()
    a = w * base_point()
    transcript.absorb_element(b"own-a", a)
    e = transcript.challenge(b"own-e")
    return OwnershipProof(commit_point=a, response=w + e * sk)


def verify_ownership(
    pk: GroupElement, proof: OwnershipProof, transcript: Transcript
) -> bool:
    transcript.absorb_element(b"own-a", proof.commit_point)
    e = transcript.challenge(b"own-e")
    return proof.response * base_point() == proof.commit_point + e * pk


# ---------------------------------------------------------------------------
# public inputs and the compliance bundle


@dataclass(frozen=True)
class PublicInputs:
    """The payment metadata block both parties see and every proof binds."""

    c_balance_before: GroupElement
    c_cum_before: GroupElement
    amount: int
    cum_limit: int
    per_tx_cap: int
    certificate: WalletCertificate
    tx_id: bytes
    epoch: int
    payee_hint: bytes  # payee device id; binds the payment to its recipient

    def encode(self) -> bytes:
        return (
            self.c_balance_before.encode()
            + self.c_cum_before.encode()
            + u64(self.amount)
            + u64(self.cum_limit)
            + u64(self.per_tx_cap)
            + self.certificate.encode()
            + self.tx_id
            + u64(self.epoch)
            + self.payee_hint
        )

    @classmethod
    def read(cls, r: ByteReader) -> "PublicInputs":
        return cls(
            c_balance_before=GroupElement.decode(r.take(ELEM_LEN)),
            c_cum_before=GroupElement.decode(r.take(ELEM_LEN)),
            amount=r.u64(),
            cum_limit=r.u64(),
            per_tx_cap=r.u64(),
            certificate=WalletCertificate.read(r),
            tx_id=r.take(TX_ID_LEN),
            epoch=r.u64(),
            payee_hint=r.take(DEVICE_ID_LEN),
        )

    @classmethod
    def decode(cls, data: bytes) -> "PublicInputs":
        r = ByteReader(data)
        out = cls.read(r)
        r.expect_end()
        return out


@dataclass(frozen=True)
class SpendWitness:
    """Opening of the secure element's committed state, pre-debit.

    counter must already be incremented for the payment being proven;
    the nullifier is derived from it.
    """

    balance: int
    balance_blind: Scalar
    cum_spent: int
    cum_blind: Scalar
    sk: Scalar
    prf_seed: bytes
    counter: int


@dataclass(frozen=True)
class ComplianceBundle:
    c_balance_after: GroupElement
    c_cum_after: GroupElement
    range_balance: RangeProof
    range_headroom: RangeProof
    ownership: OwnershipProof
    prev_state_sig: Signature
    transition_sig: Signature
    nullifier: bytes

    def encode(self) -> bytes:
        return (
            self.c_balance_after.encode()
            + self.c_cum_after.encode()
            + self.range_balance.encode()
            + self.range_headroom.encode()
            + self.ownership.encode()
            + self.prev_state_sig.encode()
            + self.transition_sig.encode()
            + self.nullifier
        )

    @classmethod
    def decode(cls, data: bytes) -> "ComplianceBundle":
        r = ByteReader(data)
        out = cls(
            c_balance_after=GroupElement.decode(r.take(ELEM_LEN)),
            c_cum_after=GroupElement.decode(r.take(ELEM_LEN)),
            range_balance=RangeProof.read(r),
            range_headroom=RangeProof.read(r),
            ownership=OwnershipProof.read(r),
            prev_state_sig=Signature.decode(r.take(SIGNATURE_LEN)),
            transition_sig=Signature.decode(r.take(SIGNATURE_LEN)),
            nullifier=r.take(NULLIFIER_LEN),
        )
        r.expect_end()
        return out

    def digest(self) -> bytes:
        return sha256(b"bundle/v1", self.encode())


class RejectReason(str, Enum):
    CERT_INVALID = "cert_invalid"
    CREDENTIAL_EXPIRED = "credential_expired"
    LIMITS_MISMATCH = "limits_mismatch"
    VALUE_INVALID = "value_invalid"
    BALANCE_RELATION = "balance_relation"
    CUM_RELATION = "cum_relation"
    PROOF_INVALID = "proof_invalid"
    OWNERSHIP_INVALID = "ownership_invalid"
    STATE_SIG_INVALID = "state_sig_invalid"
    NULLIFIER_MISMATCH = "nullifier_mismatch"
    DUPLICATE_TX = "duplicate_tx"
    PAYEE_MISMATCH = "payee_mismatch"
    FROZEN_DEVICE = "frozen_device"


@dataclass(frozen=True)
class VerifyOutcome:
    accepted: bool
    reason: Optional[RejectReason] = None

    @classmethod
    def accept(cls) -> "VerifyOutcome":
        return cls(accepted=True)

    @classmethod
    def reject(cls, reason: RejectReason) -> "VerifyOutcome":
        return cls(accepted=False, reason=reason)


def _prev_state_msg(pub_in: PublicInputs) -> bytes:
    return (
        b"se-state/prev/v1"
        + pub_in.tx_id
        + pub_in.c_balance_before.encode()
        + pub_in.c_cum_before.encode()
    )


def _next_state_msg(pub_in: PublicInputs, bundle_c_bal: GroupElement,
                    bundle_c_cum: GroupElement, nullifier: bytes) -> bytes:
    return (
        b"se-state/next/v1"
        + pub_in.tx_id
        + bundle_c_bal.encode()
        + bundle_c_cum.encode()
        + nullifier
    )


def _bundle_transcript(pub_in: PublicInputs, c_bal_after: GroupElement,
                       c_cum_after: GroupElement, nullifier: bytes) -> Transcript:
    t = Transcript(b"compliance/v1")
    t.absorb(b"public-inputs", pub_in.encode())
    t.absorb_element(b"c-balance-after", c_bal_after)
    t.absorb_element(b"c-cum-after", c_cum_after)
    t.absorb(b"nullifier", nullifier)
    return t


def build_compliance_bundle(
    witness: SpendWitness,
    pub_in: PublicInputs,
    params: Optional[PedersenParams] = None,
    range_bits: int = DEFAULT_RANGE_BITS,
) -> ComplianceBundle:
    """Produce the four-property payment proof from the SE's opening.

    Policy checks run before anything is proven; a refusal here is what
    actually enforces the spending rules.
    """
    params = params or default_params()
    v = pub_in.amount
    if v < 1 or v > pub_in.per_tx_cap:
        raise ValueInvalid(f"amount {v} outside [1, {pub_in.per_tx_cap}]")
    if v > witness.balance:
        raise InsufficientFunds(f"amount {v} exceeds balance {witness.balance}")
    if witness.cum_spent + v > pub_in.cum_limit:
        raise LimitExceeded(
            f"cumulative {witness.cum_spent}+{v} exceeds {pub_in.cum_limit}"
        )

    nullifier = derive_nullifier(witness.prf_seed, witness.counter)
    if pub_in.tx_id != tx_id_for_nullifier(nullifier):
        raise InvalidWitness("tx_id does not match the counter's nullifier")

    c_bal_after = pedersen_commit(witness.balance - v, witness.balance_blind, params)
    c_cum_after = pedersen_commit(witness.cum_spent + v, witness.cum_blind, params)

    nonces = NonceStream.from_parts(b"bundle", witness.prf_seed, u64(witness.counter))
    t = _bundle_transcript(pub_in, c_bal_after, c_cum_after, nullifier)
    range_balance = prove_range(
        witness.balance - v, witness.balance_blind, range_bits, t, params, nonces
    )
    headroom = pub_in.cum_limit - witness.cum_spent - v
    # target is L*g_val - c_cum_after, whose blinding is -cum_blind
    range_headroom = prove_range(
        headroom, -witness.cum_blind, range_bits, t, params, nonces
    )
    ownership = prove_ownership(witness.sk, t, nonces)

    return ComplianceBundle(
        c_balance_after=c_bal_after,
        c_cum_after=c_cum_after,
        range_balance=range_balance,
        range_headroom=range_headroom,
        ownership=ownership,
        prev_state_sig=schnorr_sign(witness.sk, _prev_state_msg(pub_in)),
        transition_sig=schnorr_sign(
            witness.sk, _next_state_msg(pub_in, c_bal_after, c_cum_after, nullifier)
        ),
        nullifier=nullifier,
    )


def verify_compliance_bundle(
    bundle: ComplianceBundle,
    pub_in: PublicInputs,
    fi_pub: GroupElement,
    now_epoch: int,
    params: Optional[PedersenParams] = None,
    range_bits: int = DEFAULT_RANGE_BITS,
) -> VerifyOutcome:
    """Payee-side (and FI-side) validation of a payment bundle.

    Checks, in order: certificate validity and expiry, public value
    bounds, the homomorphic before/after commitment relations, both range
    proofs, key ownership, and the SE state signatures.
    """
    params = params or default_params()
    cert = pub_in.certificate

    if not cert.verify(fi_pub):
        return VerifyOutcome.reject(RejectReason.CERT_INVALID)
    if now_epoch > cert.expiry_epoch or pub_in.epoch > cert.expiry_epoch:
        return VerifyOutcome.reject(RejectReason.CREDENTIAL_EXPIRED)
    if (
        pub_in.cum_limit != cert.limits.cum_limit
        or pub_in.per_tx_cap != cert.limits.per_tx_cap
    ):
        return VerifyOutcome.reject(RejectReason.LIMITS_MISMATCH)

    v = pub_in.amount
    if v < 1 or v > pub_in.per_tx_cap:
        return VerifyOutcome.reject(RejectReason.VALUE_INVALID)

    if pub_in.tx_id != tx_id_for_nullifier(bundle.nullifier):
        return VerifyOutcome.reject(RejectReason.NULLIFIER_MISMATCH)

    if bundle.c_balance_after != pub_in.c_balance_before - v * params.g_val:
        return VerifyOutcome.reject(RejectReason.BALANCE_RELATION)
    if bundle.c_cum_after != pub_in.c_cum_before + v * params.g_val:
        return VerifyOutcome.reject(RejectReason.CUM_RELATION)

    t = _bundle_transcript(pub_in, bundle.c_balance_after, bundle.c_cum_after, bundle.nullifier)
    try:
        if not verify_range(bundle.c_balance_after, bundle.range_balance, range_bits, t, params):
            return VerifyOutcome.reject(RejectReason.PROOF_INVALID)
        headroom_target = pub_in.cum_limit * params.g_val - bundle.c_cum_after
        if not verify_range(headroom_target, bundle.range_headroom, range_bits, t, params):
            return VerifyOutcome.reject(RejectReason.PROOF_INVALID)
    except LengthMismatch:
        return VerifyOutcome.reject(RejectReason.PROOF_INVALID)

    if not verify_ownership(cert.subject_pk, bundle.ownership, t):
        return VerifyOutcome.reject(RejectReason.OWNERSHIP_INVALID)

    if not schnorr_verify(cert.subject_pk, _prev_state_msg(pub_in), bundle.prev_state_sig):
        return VerifyOutcome.reject(RejectReason.STATE_SIG_INVALID)
    next_msg = _next_state_msg(
        pub_in, bundle.c_balance_after, bundle.c_cum_after, bundle.nullifier
    )
    if not schnorr_verify(cert.subject_pk, next_msg, bundle.transition_sig):
        return VerifyOutcome.reject(RejectReason.STATE_SIG_INVALID)

    return VerifyOutcome.accept()
