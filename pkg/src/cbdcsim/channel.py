"""Simulated NFC/BLE transport: framing, chunking, and fault injection.

Frames are self-delimiting byte strings with a CRC-32 trailer; anything
larger than the radio MTU is cut into chunks with a 10-byte header.  The
fault model operates per frame index and is a pure function of the
channel seed, so a run's delivery trace replays exactly.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .encoding import ByteReader, sha256, u16, u32, u64, u8
from .errors import (
    BadMagic,
    ChecksumMismatch,
    DecodeError,
    IncompleteStream,
    UnknownVersion,
)

FRAME_MAGIC = b"\xcb\xdc"
FRAME_VERSION = 1
FRAME_HEADER_LEN = 2 + 1 + 1 + 4
MAX_PAYLOAD = 1 << 20

CHUNK_HEADER_LEN = 10  # stream id 4, seq 2, total 2, flags 2
CHUNK_FLAG_FINAL = 0x0001
MIN_MTU = 16

NFC_MTU = 255
BLE_MTU = 244


@dataclass(frozen=True)
class Frame:
    msg_type: int
    payload: bytes


def encode_frame(msg_type: int, payload: bytes) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise ValueError(f"payload {len(payload)} exceeds {MAX_PAYLOAD} bytes")
    if not 0 <= msg_type <= 0xFF:
        raise ValueError("msg_type must fit one byte")
    header = FRAME_MAGIC + u8(FRAME_VERSION) + u8(msg_type) + u32(len(payload))
    crc = zlib.crc32(header + payload) & 0xFFFFFFFF
    return header + payload + u32(crc)


def decode_frame(data: bytes) -> Frame:
    if len(data) < FRAME_HEADER_LEN + 4:
        raise DecodeError("frame shorter than header and checksum")
    if data[:2] != FRAME_MAGIC:
        raise BadMagic(f"magic {data[:2].hex()} != {FRAME_MAGIC.hex()}")
    if data[2] != FRAME_VERSION:
        raise UnknownVersion(f"version {data[2]}")
    msg_type = data[3]
    length = int.from_bytes(data[4:8], "big")
    if len(data) != FRAME_HEADER_LEN + length + 4:
        raise DecodeError(f"frame length field {length} disagrees with {len(data)} bytes")
    body, crc_bytes = data[:-4], data[-4:]
    if zlib.crc32(body) & 0xFFFFFFFF != int.from_bytes(crc_bytes, "big"):
        raise ChecksumMismatch("frame CRC-32 check failed")
    return Frame(msg_type=msg_type, payload=data[FRAME_HEADER_LEN:-4])


def chunk_for_mtu(frame_bytes: bytes, mtu: int, stream_id: int = 0) -> List[bytes]:
    if mtu < MIN_MTU:
        raise ValueError(f"mtu {mtu} below minimum {MIN_MTU}")
    capacity = mtu - CHUNK_HEADER_LEN
    total = max(1, -(-len(frame_bytes) // capacity))
    if total > 0xFFFF:
        raise ValueError("frame needs more than 65535 chunks")
    chunks = []
    for seq in range(total):
        piece = frame_bytes[seq * capacity : (seq + 1) * capacity]
        flags = CHUNK_FLAG_FINAL if seq == total - 1 else 0
        chunks.append(u32(stream_id) + u16(seq) + u16(total) + u16(flags) + piece)
    return chunks


def reassemble(chunks: List[bytes]) -> bytes:
    if not chunks:
        raise IncompleteStream("no chunks")
    pieces: Dict[int, bytes] = {}
    stream_id = None
    total = None
    for chunk in chunks:
        if len(chunk) < CHUNK_HEADER_LEN:
            raise IncompleteStream("chunk shorter than its header")
        r = ByteReader(chunk)
        sid, seq, tot, _flags = r.u32(), r.u16(), r.u16(), r.u16()
        if stream_id is None:
            stream_id, total = sid, tot
        elif sid != stream_id:
            raise IncompleteStream("chunks from different streams")
        elif tot != total:
            raise IncompleteStream("chunks disagree on total")
        pieces[seq] = chunk[CHUNK_HEADER_LEN:]
    if total is None or len(pieces) != total or set(pieces) != set(range(total)):
        raise IncompleteStream(f"have {len(pieces)} of {total} chunks")
    return b"".join(pieces[i] for i in range(total))


class FaultKind(str, Enum):
    NONE = "none"
    DROP = "drop"
    DUP = "dup"
    CORRUPT = "corrupt"
    TRUNCATE = "truncate"
    DELAY = "delay"


@dataclass(frozen=True)
class Fault:
    kind: FaultKind
    delay_ticks: int = 0


NO_FAULT = Fault(kind=FaultKind.NONE)


@dataclass
class FaultPlan:
    """Per-frame-index fault schedule.

    Explicit entries take precedence; otherwise, when rates are given,
    the fault for an index is drawn deterministically from (seed, index).
    """

    seed: int = 0
    explicit: Dict[int, Fault] = field(default_factory=dict)
    rates: Dict[FaultKind, float] = field(default_factory=dict)
    max_delay: int = 4

    def fault_for(self, index: int) -> Fault:
        if index in self.explicit:
            return self.explicit[index]
        if not self.rates:
            return NO_FAULT
        digest = sha256(b"fault/v1", u64(self.seed), u64(index))
        draw = int.from_bytes(digest[:8], "big") / float(1 << 64)
        acc = 0.0
        for kind in (FaultKind.DROP, FaultKind.DUP, FaultKind.CORRUPT,
                     FaultKind.TRUNCATE, FaultKind.DELAY):
            acc += self.rates.get(kind, 0.0)
            if draw < acc:
                if kind is FaultKind.DELAY:
                    ticks = 1 + digest[8] % self.max_delay
                    return Fault(kind=kind, delay_ticks=ticks)
                return Fault(kind=kind)
        return NO_FAULT


@dataclass
class ChannelConfig:
    mtu: int = NFC_MTU
    latency_ticks: int = 1
    plan: FaultPlan = field(default_factory=FaultPlan)

    @classmethod
    def nfc(cls, **kw) -> "ChannelConfig":
        return cls(mtu=NFC_MTU, latency_ticks=1, **kw)

    @classmethod
    def ble(cls, **kw) -> "ChannelConfig":
        return cls(mtu=BLE_MTU, latency_ticks=2, **kw)


@dataclass(frozen=True)
class Delivery:
    """One frame's worth of chunks arriving at a receiver."""

    receiver: bytes
    sender: bytes
    chunks: Tuple[bytes, ...]
    frame_index: int
    fault: Fault


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    frame_index: int
    sender: bytes
    receiver: bytes
    fault: str
    size: int

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "frame": self.frame_index,
            "sender": self.sender.hex(),
            "receiver": self.receiver.hex(),
            "fault": self.fault,
            "size": self.size,
        }


class SimulatedChannel:
    """Applies the fault plan and hands deliveries to a scheduler.

    The scheduler is any object with `post(tick, fn)`; device tasks never
    see each other directly, only deliveries like these.
    """

    def __init__(self, config: ChannelConfig):
        self.config = config
        self.frames_sent = 0
        self.trace: List[TraceEvent] = []

    def transmit(
        self,
        frame_bytes: bytes,
        sender: bytes,
        receiver: bytes,
        now_tick: int,
        deliver,
        post,
    ) -> int:
        """Send one frame; returns this frame's index in the channel order."""
        index = self.frames_sent
        self.frames_sent += 1
        fault = self.config.plan.fault_for(index)
        chunks = chunk_for_mtu(frame_bytes, self.config.mtu, stream_id=index)

        arrival = now_tick + self.config.latency_ticks
        if fault.kind is FaultKind.DROP:
            self._trace(now_tick, index, sender, receiver, fault, len(frame_bytes))
            return index
        if fault.kind is FaultKind.DELAY:
            arrival += fault.delay_ticks
        elif fault.kind is FaultKind.CORRUPT:
            chunks = self._corrupt(chunks, index)
        elif fault.kind is FaultKind.TRUNCATE:
            chunks = chunks[:-1] if len(chunks) > 1 else [chunks[0][: CHUNK_HEADER_LEN + 1]]

        self._trace(now_tick, index, sender, receiver, fault, len(frame_bytes))
        delivery = Delivery(
            receiver=receiver, sender=sender, chunks=tuple(chunks),
            frame_index=index, fault=fault,
        )
        post(arrival, lambda: deliver(delivery))
        if fault.kind is FaultKind.DUP:
            dup = Delivery(
                receiver=receiver, sender=sender, chunks=tuple(chunks),
                frame_index=index, fault=fault,
            )
            post(arrival + 1, lambda: deliver(dup))
        return index

    def _corrupt(self, chunks: List[bytes], index: int) -> List[bytes]:
        digest = sha256(b"corrupt/v1", u64(self.config.plan.seed), u64(index))
        chunk_i = digest[0] % len(chunks)
        chunk = bytearray(chunks[chunk_i])
        # flip one payload byte past the chunk header
        if len(chunk) > CHUNK_HEADER_LEN:
            pos = CHUNK_HEADER_LEN + digest[1] % (len(chunk) - CHUNK_HEADER_LEN)
        else:
            pos = len(chunk) - 1
        chunk[pos] ^= 0xFF
        out = list(chunks)
        out[chunk_i] = bytes(chunk)
        return out

    def _trace(self, tick, index, sender, receiver, fault: Fault, size: int) -> None:
        label = fault.kind.value
        if fault.kind is FaultKind.DELAY:
            label = f"delay+{fault.delay_ticks}"
        self.trace.append(
            TraceEvent(tick=tick, frame_index=index, sender=sender,
                       receiver=receiver, fault=label, size=size)
        )
