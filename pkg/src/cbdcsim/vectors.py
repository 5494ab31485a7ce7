"""Pinned test vectors for cross-implementation checks.

Every vector is recomputable from the library; `validate_vectors` does
exactly that, so a vectors file doubles as a self-check of the running
build.
"""

from __future__ import annotations

import json
from typing import List

from .channel import chunk_for_mtu, encode_frame
from .crypto import Transcript, default_params, base_point, pedersen_commit, schnorr_sign
from .encoding import sha256
from .ledger import GENESIS_HASH
from .secure_element import log_genesis_head
from .suite import SUITES, Scalar, active_suite
from .zkp import derive_nullifier, tx_id_for_nullifier

_VECTOR_DEVICE_ID = b"\x00" * 16
_VECTOR_PRF_SEED = b"\x11" * 32
_VECTOR_FRAME_PAYLOAD = b"abc"


def emit_vectors() -> List[dict]:
    suite = active_suite()
    params = SUITES[suite.name]
    pedersen = default_params()
    t = Transcript()
    sig = schnorr_sign(Scalar(1), b"abc")
    frame = encode_frame(0x01, _VECTOR_FRAME_PAYLOAD)
    big_frame_chunks = chunk_for_mtu(b"\x5a" * 600, 255, stream_id=7)
    nullifier = derive_nullifier(_VECTOR_PRF_SEED, 5)
    return [
        {
            "name": "suite",
            "suite": suite.name,
            "suite_id": suite.suite_id,
            "elem_len": suite.elem_len,
            "p": hex(params.p),
            "q": hex(params.q),
        },
        {"name": "base_point", "hex": base_point().encode().hex()},
        {"name": "pedersen_g_val", "hex": pedersen.g_val.encode().hex()},
        {"name": "pedersen_g_blind", "hex": pedersen.g_blind.encode().hex()},
        {
            "name": "pedersen_commit_7_9",
            "hex": pedersen_commit(7, Scalar(9), pedersen).encode().hex(),
        },
        {
            "name": "empty_transcript_challenge",
            "label": "vector",
            "hex": t.challenge(b"vector").encode().hex(),
        },
        {"name": "schnorr_sig_sk1_abc", "hex": sig.encode().hex()},
        {
            "name": "selog_genesis",
            "device_id": _VECTOR_DEVICE_ID.hex(),
            "hex": log_genesis_head(_VECTOR_DEVICE_ID).hex(),
        },
        {
            "name": "nullifier_seed11_counter5",
            "hex": nullifier.hex(),
        },
        {"name": "tx_id_of_that_nullifier", "hex": tx_id_for_nullifier(nullifier).hex()},
        {"name": "ledger_genesis", "hex": GENESIS_HASH.hex()},
        {"name": "frame_type1_abc", "hex": frame.hex()},
        {
            "name": "chunking_600B_mtu255",
            "count": len(big_frame_chunks),
            "first_header_hex": big_frame_chunks[0][:10].hex(),
            "digest": sha256(*big_frame_chunks).hex(),
        },
    ]


def vectors_jsonl() -> str:
    return "".join(
        json.dumps(v, sort_keys=True, separators=(",", ":")) + "\n"
        for v in emit_vectors()
    )


def validate_vectors(text: str) -> List[str]:
    """Recompute every vector in a JSON-lines file; returns mismatch names."""
    current = {v["name"]: v for v in emit_vectors()}
    mismatches = []
    for line in text.splitlines():
        if not line.strip():
            continue
        vec = json.loads(line)
        name = vec.get("name")
        if current.get(name) != vec:
            mismatches.append(name or "<unnamed>")
    return mismatches
