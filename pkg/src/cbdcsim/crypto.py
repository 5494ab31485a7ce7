"""Commitments, signatures, and Fiat-Shamir transcripts.

Pedersen commitments use two hash-derived generators with no known
discrete-log relation; Schnorr signatures use deterministic nonces
(hash of secret key and message) so identical inputs always produce
identical signatures, which the simulator's determinism contract relies
on.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from functools import lru_cache

from .encoding import ByteReader, lp, u32, u64
from .errors import DecodeError
from .suite import (
    ELEM_LEN,
    SCALAR_LEN,
    SUITE_ID,
    GroupElement,
    Scalar,
    hash_to_group,
    hash_to_scalar,
)

SIGNATURE_LEN = ELEM_LEN + SCALAR_LEN

DEFAULT_GENERATOR_TAG = b"cbdc/v1"


@lru_cache(maxsize=1)
def base_point() -> GroupElement:
    """Suite base point for key pairs, hash-derived (nothing up the sleeve)."""
    return hash_to_group(b"base/v1").precomputed()


@dataclass(frozen=True)
class PedersenParams:
    g_val: GroupElement
    g_blind: GroupElement


def derive_generators(domain_tag: bytes) -> PedersenParams:
    """Derive value/blinding generators for a domain tag.

    Deterministic in (suite, tag); the two generators come from disjoint
    hash streams so no party knows a discrete log between them.
    """
    if not domain_tag:
        raise ValueError("domain_tag must be non-empty")
    g_val = hash_to_group(domain_tag + b"/val")
    g_blind = hash_to_group(domain_tag + b"/blind")
    assert g_val != g_blind and not g_val.is_identity() and not g_blind.is_identity()
    return PedersenParams(g_val=g_val, g_blind=g_blind)


@lru_cache(maxsize=1)
def default_params() -> PedersenParams:
    p = derive_generators(DEFAULT_GENERATOR_TAG)
    return PedersenParams(g_val=p.g_val.precomputed(), g_blind=p.g_blind.precomputed())


def pedersen_commit(value, blinding: Scalar, params: PedersenParams) -> GroupElement:
    """value*g_val + blinding*g_blind; additively homomorphic."""
    if isinstance(value, int):
        value = Scalar(value)
    return value * params.g_val + blinding * params.g_blind


@dataclass(frozen=True)
class KeyPair:
    sk: Scalar
    pk: GroupElement

    @classmethod
    def from_sk(cls, sk: Scalar) -> "KeyPair":
        return cls(sk=sk, pk=sk * base_point())


@dataclass(frozen=True)
class Signature:
    commit_point: GroupElement
    response: Scalar

    def encode(self) -> bytes:
        return self.commit_point.encode() + self.response.encode()

    @classmethod
    def decode(cls, data: bytes) -> "Signature":
        if len(data) != SIGNATURE_LEN:
            raise DecodeError(f"signature must be {SIGNATURE_LEN} bytes")
        return cls(
            commit_point=GroupElement.decode(data[:ELEM_LEN]),
            response=Scalar.decode(data[ELEM_LEN:]),
        )


class Transcript:
    """Order-sensitive Fiat-Shamir transcript.

    Absorbing folds a length-prefixed (label, data) pair into the running
    state; challenges are derived from the state and advance it so a
    second challenge on the same transcript differs.
    """

    __slots__ = ("state",)

    def __init__(self, domain: bytes = b""):
        self.state = hashlib.sha256(
            b"transcript/v1" + bytes([SUITE_ID]) + lp(domain)
        ).digest()

    def absorb(self, label: bytes, data: bytes) -> "Transcript":
        self.state = hashlib.sha256(self.state + lp(label) + lp(data)).digest()
        return self

    def absorb_element(self, label: bytes, elem: GroupElement) -> "Transcript":
        return self.absorb(label, elem.encode())

    def challenge(self, label: bytes) -> Scalar:
        out = hashlib.sha256(self.state + lp(b"challenge") + lp(label)).digest()
        self.state = hashlib.sha256(self.state + lp(b"challenged") + lp(out)).digest()
        return Scalar(int.from_bytes(out, "big"))

    def fork(self) -> "Transcript":
        t = Transcript()
        t.state = self.state
        return t


def schnorr_sign(sk: Scalar, message: bytes) -> Signature:
    """Schnorr signature with a deterministic nonce.

    Nonce = hash(sk || message) mod q; the challenge binds the suite id,
    public key, nonce commitment, and message through a transcript.
    """
    k = hash_to_scalar(b"schnorr-nonce/v1", sk.encode(), message)
    commit = k * base_point()
    pk = sk * base_point()
    e = _sig_challenge(pk, commit, message)
    return Signature(commit_point=commit, response=k + e * sk)


def schnorr_verify(pk: GroupElement, message: bytes, sig: Signature) -> bool:
    e = _sig_challenge(pk, sig.commit_point, message)
    return sig.response * base_point() == sig.commit_point + e * pk


def _sig_challenge(pk: GroupElement, commit: GroupElement, message: bytes) -> Scalar:
    t = Transcript(b"schnorr-sig/v1")
    t.absorb_element(b"pk", pk)
    t.absorb_element(b"commit", commit)
    t.absorb(b"message", message)
    return t.challenge(b"e")


class NonceStream:
    """Deterministic stream of secret scalars/bytes for proof nonces.

    Counter-mode SHA-256 over a 32-byte seed.  The simulator seeds these
    from device PRF seeds so whole runs replay byte-identically; callers
    outside the simulator can use `system()` for OS randomness.
    """

    __slots__ = ("_seed", "_ctr")

    def __init__(self, seed: bytes):
        if len(seed) != 32:
            raise ValueError("nonce stream seed must be 32 bytes")
        self._seed = seed
        self._ctr = 0

    @classmethod
    def system(cls) -> "NonceStream":
        return cls(os.urandom(32))

    @classmethod
    def from_parts(cls, *parts: bytes) -> "NonceStream":
        return cls(hashlib.sha256(b"nonce-seed/v1" + b"".join(lp(p) for p in parts)).digest())

    def next_bytes(self) -> bytes:
        out = hashlib.sha256(b"nonce-stream/v1" + self._seed + u64(self._ctr)).digest()
        self._ctr += 1
        return out

    def scalar(self) -> Scalar:
        return Scalar(int.from_bytes(self.next_bytes() + self.next_bytes(), "big"))
