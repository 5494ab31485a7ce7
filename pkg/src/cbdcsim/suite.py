"""Prime-order group arithmetic behind the crypto suite registry.

The reference suite is a Schnorr group: the subgroup of order q inside
Z_p^* with p = 2*q*r + 1 and q, r prime.  q is the largest 256-bit prime,
so scalars are canonical 32-byte big-endian strings, and p is 511 bits, so
group elements encode as 64 bytes.  Group addition is a modular
multiplication (sub-microsecond) and scalar multiplication is a gmpy2
powmod (~0.1 ms), which keeps full payment rounds in the millisecond
range without any native crypto dependency.

These parameters are simulation-grade: a 511-bit modulus does not offer a
modern security margin against index-calculus attacks. Swapping in a
stronger group means registering another parameter set (or another
element representation) here; everything above this module only sees
Scalar/GroupElement and the suite header.

Membership checking: honest elements live in the order-q subgroup, which
is contained in the quadratic residues of p. decode() enforces the cheap
QR test (Jacobi symbol), which rejects the order-2 component. A residue
of order r cannot survive a Fiat-Shamir challenge except with probability
1/r ~ 2^-254, so the full x^q == 1 test is not run per element.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import gmpy2

from .encoding import u32
from .errors import DecodeError

__all__ = [
    "SuiteHeader",
    "Scalar",
    "GroupElement",
    "SCALAR_LEN",
    "active_suite",
    "hash_to_scalar",
    "hash_to_group",
]

SCALAR_LEN = 32

# q: largest prime below 2^256.  r: first prime below 2^254 (descending)
# such that p = 2*q*r + 1 is prime.  Both searches are deterministic.
_Q_MODP512 = (1 << 256) - 189
_R_MODP512 = 0x3FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF2C75
_P_MODP512 = 2 * _Q_MODP512 * _R_MODP512 + 1


@dataclass(frozen=True)
class SuiteHeader:
    """Identifies the group/hash/encoding choices a run is pinned to."""

    name: str
    suite_id: int
    elem_len: int


@dataclass(frozen=True)
class SuiteParams:
    header: SuiteHeader
    p: int
    q: int
    cofactor_exp: int  # (p - 1) // q, the hash-to-group clearing exponent


SUITES = {
    "modp512-v1": SuiteParams(
        header=SuiteHeader(name="modp512-v1", suite_id=0x01, elem_len=64),
        p=_P_MODP512,
        q=_Q_MODP512,
        cofactor_exp=2 * _R_MODP512,
    ),
}

DEFAULT_SUITE = "modp512-v1"

_name = os.environ.get("CBDC_SIM_SUITE", DEFAULT_SUITE)
if _name not in SUITES:
    raise RuntimeError(
        f"CBDC_SIM_SUITE={_name!r} is not registered (have: {sorted(SUITES)})"
    )
_PARAMS = SUITES[_name]

P = gmpy2.mpz(_PARAMS.p)
Q = _PARAMS.q
ELEM_LEN = _PARAMS.header.elem_len
SUITE_ID = _PARAMS.header.suite_id
_COFACTOR_EXP = gmpy2.mpz(_PARAMS.cofactor_exp)


def active_suite() -> SuiteHeader:
    return _PARAMS.header


class Scalar:
    """Element of Z_q.  Canonical encoding: 32-byte big-endian."""

    __slots__ = ("v",)

    def __init__(self, value: int):
        self.v = int(value) % Q

    @classmethod
    def zero(cls) -> "Scalar":
        return cls(0)

    @classmethod
    def one(cls) -> "Scalar":
        return cls(1)

    @classmethod
    def decode(cls, data: bytes) -> "Scalar":
        if len(data) != SCALAR_LEN:
            raise DecodeError(f"scalar must be {SCALAR_LEN} bytes, got {len(data)}")
        v = int.from_bytes(data, "big")
        if v >= Q:
            raise DecodeError("scalar not reduced mod q")
        return cls(v)

    def encode(self) -> bytes:
        return self.v.to_bytes(SCALAR_LEN, "big")

    def __add__(self, other: "Scalar") -> "Scalar":
        return Scalar(self.v + other.v)

    def __sub__(self, other: "Scalar") -> "Scalar":
        return Scalar(self.v - other.v)

    def __neg__(self) -> "Scalar":
        return Scalar(-self.v)

    def __mul__(self, other):
        if isinstance(other, Scalar):
            return Scalar(self.v * other.v)
        if isinstance(other, int):
            return Scalar(self.v * other)
        return NotImplemented  # Scalar * GroupElement resolves via __rmul__

    __rmul__ = __mul__

    def inverse(self) -> "Scalar":
        if self.v == 0:
            raise ZeroDivisionError("scalar 0 has no inverse")
        return Scalar(int(gmpy2.invert(self.v, Q)))

    def __eq__(self, other) -> bool:
        return isinstance(other, Scalar) and self.v == other.v

    def __hash__(self) -> int:
        return hash(("Scalar", self.v))

    def __repr__(self) -> str:
        return f"Scalar(0x{self.v:x})"


class GroupElement:
    """Element of the order-q subgroup.  Written additively by callers.

    Internally the group is multiplicative mod p: "addition" multiplies
    residues and "scalar multiplication" is modular exponentiation.
    """

    __slots__ = ("v", "_table")

    def __init__(self, value):
        self.v = gmpy2.mpz(value)
        self._table = None

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(1)

    @classmethod
    def decode(cls, data: bytes) -> "GroupElement":
        if len(data) != ELEM_LEN:
            raise DecodeError(f"element must be {ELEM_LEN} bytes, got {len(data)}")
        v = int.from_bytes(data, "big")
        if not 1 <= v < _PARAMS.p:
            raise DecodeError("element out of range")
        if v != 1 and gmpy2.jacobi(v, P) != 1:
            raise DecodeError("element not in the group")
        return cls(v)

    def encode(self) -> bytes:
        return int(self.v).to_bytes(ELEM_LEN, "big")

    def is_identity(self) -> bool:
        return self.v == 1

    def __add__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement((self.v * other.v) % P)

    def __neg__(self) -> "GroupElement":
        return GroupElement(gmpy2.invert(self.v, P))

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement((self.v * gmpy2.invert(other.v, P)) % P)

    def __rmul__(self, k) -> "GroupElement":
        if isinstance(k, Scalar):
            e = k.v
        elif isinstance(k, int):
            e = k % Q
        else:
            return NotImplemented
        if self._table is not None:
            return self._table_pow(e)
        return GroupElement(gmpy2.powmod(self.v, e, P))

    def double(self) -> "GroupElement":
        return GroupElement((self.v * self.v) % P)

    def precomputed(self) -> "GroupElement":
        """Return a copy carrying an 8-bit-window fixed-base table."""
        out = GroupElement(self.v)
        rows = []
        base = self.v
        for _ in range(SCALAR_LEN):
            row = [gmpy2.mpz(1), base]
            acc = base
            for _ in range(254):
                acc = (acc * base) % P
                row.append(acc)
            rows.append(row)
            base = (acc * base) % P  # base^(256^(i+1))
        out._table = rows
        return out

    def _table_pow(self, e: int) -> "GroupElement":
        acc = gmpy2.mpz(1)
        rows = self._table
        i = 0
        while e:
            d = e & 0xFF
            if d:
                acc = (acc * rows[i][d]) % P
            e >>= 8
            i += 1
        return GroupElement(acc)

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupElement) and self.v == other.v

    def __hash__(self) -> int:
        return hash(("GroupElement", int(self.v)))

    def __repr__(self) -> str:
        return f"GroupElement(0x{int(self.v):x})"


def hash_to_scalar(*chunks: bytes) -> Scalar:
    """SHA-256 interpreted big-endian, reduced mod q.

    q is within 2^-248 of 2^256, so the reduction bias is negligible.
    """
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return Scalar(int.from_bytes(h.digest(), "big"))


def hash_to_group(data: bytes) -> GroupElement:
    """Deterministic hash-to-group with no known discrete log.

    Candidate residues are drawn from a counter-mode hash and raised to
    the cofactor, which lands them in the order-q subgroup; identity
    candidates are skipped.
    """
    prefix = b"h2g/v1" + bytes([SUITE_ID]) + data
    ctr = 0
    while True:
        wide = hashlib.sha256(prefix + u32(ctr) + b"\x00").digest() + hashlib.sha256(
            prefix + u32(ctr) + b"\x01"
        ).digest()
        t = int.from_bytes(wide, "big") % _PARAMS.p
        y = gmpy2.powmod(t, _COFACTOR_EXP, P)
        if y != 1:
            return GroupElement(y)
        ctr += 1
