"""Deterministic tick-driven simulation world.

Single-threaded event loop: every actor (device task, wallet, FI) mutates
state only inside scheduled events, and all randomness derives from the
scenario seed, so a run's observable state is a pure function of
(scenario, seed).

The world also keeps the omniscient plaintext view of value placement
(main balances, SE balances, in-flight debits, flagged value) and checks
exact conservation against the ledger at the end of every tick.  The
snapshot/restore attack harness lives here, outside the secure-element
module: it models a cloned or rolled-back element, which no public SE
operation can produce.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .certs import PolicyLimits
from .channel import (
    ChannelConfig,
    Delivery,
    Fault,
    FaultKind,
    SimulatedChannel,
    decode_frame,
    encode_frame,
    reassemble,
)
from .crypto import KeyPair, schnorr_sign
from .encoding import sha256, u64
from .errors import CbdcError, NoSnapshot
from .intermediary import (
    AuditGrant,
    AuditScope,
    Denied,
    FinancialIntermediary,
    ReconciliationReport,
)
from .ledger import Ledger, OmniscientState, conservation_check
from .protocol import (
    DEFAULT_TIMEOUT_TICKS,
    MSG_PAY_ACCEPT,
    MSG_PAY_COMMIT,
    MSG_PAY_INIT,
    MSG_PAY_REJECT,
    PayAccept,
    PayCommit,
    PayInit,
    PayReject,
    PaymentAgent,
    PaymentStatus,
)
from .secure_element import SecureElement
from .suite import hash_to_scalar
from .wallet import MainWallet
from .zkp import DEFAULT_RANGE_BITS, range_proof_material_len

DEFAULT_POLICY = PolicyLimits(cum_limit=10000, per_tx_cap=2000, count_cap=64)
DEFAULT_EXPIRY_EPOCH = 16


# ---------------------------------------------------------------------------
# attack harness (test/simulation only)


@dataclass
class SESnapshot:
    """Captured secure-element state for the rollback/clone attack."""

    counter: int
    counter_base: int
    balance: int
    cum_spent: int
    log: list
    log_head: bytes
    alloc_nonces: set


def se_snapshot(se: SecureElement) -> SESnapshot:
    return SESnapshot(
        counter=se.counter,
        counter_base=se.counter_base,
        balance=se.balance,
        cum_spent=se.cum_spent,
        log=list(se.log),
        log_head=se.log_head,
        alloc_nonces=set(se._seen_alloc_nonces),
    )


def se_restore(se: SecureElement, snapshot: Optional[SESnapshot]) -> None:
    """Rewind an element to a snapshot; this is the attack the FI must catch."""
    if snapshot is None:
        raise NoSnapshot("restore requires a prior snapshot")
    se.counter = snapshot.counter
    se.counter_base = snapshot.counter_base
    se.balance = snapshot.balance
    se.cum_spent = snapshot.cum_spent
    se.log = list(snapshot.log)
    se.log_head = snapshot.log_head
    se._seen_alloc_nonces = set(snapshot.alloc_nonces)


# ---------------------------------------------------------------------------
# scheduler


class Scheduler:
    def __init__(self):
        self._heap: List[Tuple[int, int, Callable[[], None]]] = []
        self._seq = 0
        self.now = 0

    def post(self, tick: int, fn: Callable[[], None]) -> None:
        if tick < self.now:
            tick = self.now
        heapq.heappush(self._heap, (tick, self._seq, fn))
        self._seq += 1

    def run_until_idle(self, on_tick_end: Optional[Callable[[int], None]] = None) -> None:
        while self._heap:
            tick, _, fn = heapq.heappop(self._heap)
            self.now = max(self.now, tick)
            fn()
            if on_tick_end is not None and (
                not self._heap or self._heap[0][0] > self.now
            ):
                on_tick_end(self.now)


# ---------------------------------------------------------------------------
# per-payment bookkeeping


@dataclass
class PaymentRecord:
    index: int
    tx_id: bytes
    payer: str
    payee: str
    amount: int
    start_tick: int
    end_tick: Optional[int] = None
    payer_status: str = "in_flight"
    payee_receipt: bool = False
    error: Optional[str] = None
    bundle_bytes: int = 0
    proof_material_bytes: int = 0
    init_frame_bytes: int = 0
    prove_ms: float = 0.0
    verify_ms: float = 0.0

    def latency_ticks(self) -> Optional[int]:
        return None if self.end_tick is None else self.end_tick - self.start_tick

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "tx_id": self.tx_id.hex() if self.tx_id else None,
            "payer": self.payer,
            "payee": self.payee,
            "amount": self.amount,
            "start_tick": self.start_tick,
            "end_tick": self.end_tick,
            "latency_ticks": self.latency_ticks(),
            "payer_status": self.payer_status,
            "payee_receipt": self.payee_receipt,
            "error": self.error,
            "bundle_bytes": self.bundle_bytes,
            "proof_material_bytes": self.proof_material_bytes,
            "init_frame_bytes": self.init_frame_bytes,
        }


@dataclass
class DeviceNode:
    name: str
    agent: PaymentAgent
    owner: str

    @property
    def device_id(self) -> bytes:
        return self.agent.device_id


# ---------------------------------------------------------------------------
# the world


class World:
    def __init__(
        self,
        seed: int,
        channel_config: Optional[ChannelConfig] = None,
        range_bits: int = DEFAULT_RANGE_BITS,
        timeout_ticks: int = DEFAULT_TIMEOUT_TICKS,
        start_epoch: int = 1,
    ):
        self.seed = seed
        self.range_bits = range_bits
        self.timeout_ticks = timeout_ticks
        self.epoch = start_epoch

        self.scheduler = Scheduler()
        self.channel = SimulatedChannel(channel_config or ChannelConfig.nfc())
        self.ledger = Ledger()
        self.auditor_keys = KeyPair.from_sk(self._derived_scalar(b"auditor-sk"))
        self.fi = FinancialIntermediary(
            KeyPair.from_sk(self._derived_scalar(b"fi-sk")),
            self.ledger,
            auditor_pk=self.auditor_keys.pk,
            range_bits=range_bits,
        )

        self.wallets: Dict[str, MainWallet] = {}
        self.devices: Dict[str, DeviceNode] = {}
        self._device_by_id: Dict[bytes, DeviceNode] = {}

        # omniscient accounting
        self.in_flight: Dict[Tuple[bytes, bytes, bytes], int] = {}
        self.flagged_value = 0
        self.conservation_log: List[Tuple[int, bool]] = []

        self.payments: List[PaymentRecord] = []
        self._payments_by_key: Dict[Tuple[bytes, bytes], PaymentRecord] = {}
        self.reconciliations: List[dict] = []
        self.reconcile_reports: List[ReconciliationReport] = []
        self.audits: List[dict] = []
        self.events: List[dict] = []
        self.denied_onboardings: List[str] = []
        self._last_sync_tick = 0
        self.timings: Dict[str, list] = {"payments": [], "reconcile_ms": []}

    # -- deterministic identities -----------------------------------------

    def _derived_scalar(self, label: bytes, extra: bytes = b""):
        return hash_to_scalar(b"actor/v1", label, u64(self.seed), extra)

    def _derived_seed(self, label: bytes, extra: bytes = b"") -> bytes:
        return sha256(b"seed/v1", label, u64(self.seed), extra)

    # -- actor setup ----------------------------------------------------------

    def add_wallet(self, name: str) -> MainWallet:
        wallet = MainWallet(
            owner_id=sha256(b"owner/v1", name.encode())[:16],
            keys=KeyPair.from_sk(self._derived_scalar(b"wallet-sk", name.encode())),
        )
        self.wallets[name] = wallet
        return wallet

    def onboard(self, name: str, kyc_doc: dict) -> bool:
        """KYC the owner; on approval, register the wallet with the FI."""
        result = self.fi.onboard_customer(kyc_doc)
        if isinstance(result, Denied):
            self.denied_onboardings.append(name)
            self.events.append({"kind": "onboard_denied", "wallet": name})
            return False
        wallet = self.wallets[name]
        # owner_id must match what the FI derived from the identity
        wallet.owner_id = result.owner_id
        self.fi.register_wallet(result.owner_id, wallet)
        self.events.append({"kind": "onboarded", "wallet": name})
        return True

    def provision_device(
        self,
        name: str,
        owner: str,
        policy: PolicyLimits = DEFAULT_POLICY,
        expiry_epoch: int = DEFAULT_EXPIRY_EPOCH,
    ) -> DeviceNode:
        wallet = self.wallets[owner]
        device_id = sha256(b"device/v1", name.encode())[:16]
        keys = KeyPair.from_sk(self._derived_scalar(b"device-sk", name.encode()))
        cert = self.fi.issue_certificate(
            wallet.owner_id, device_id, keys.pk, policy, expiry_epoch
        )
        se = SecureElement(
            device_id=device_id,
            keys=keys,
            prf_seed=self._derived_seed(b"prf", name.encode()),
            certificate=cert,
            owner_pk=wallet.keys.pk,
            range_bits=self.range_bits,
        )
        node = DeviceNode(name=name, agent=PaymentAgent(se, self.fi.pk), owner=owner)
        wallet.register_device(node.agent)
        self.devices[name] = node
        self._device_by_id[device_id] = node
        return node

    # -- script operations -------------------------------------------------------

    def issue(self, wallet_name: str, amount: int) -> None:
        self.fi.issue_cbdc(self.wallets[wallet_name], amount)
        self.events.append({"kind": "issue", "wallet": wallet_name, "amount": amount})
        self._after_step()

    def allocate(self, wallet_name: str, device_name: str, amount: int) -> None:
        node = self.devices[device_name]
        self.wallets[wallet_name].allocate_to_subwallet(node.device_id, amount)
        self._after_step()

    def reclaim(self, wallet_name: str, device_name: str) -> int:
        node = self.devices[device_name]
        amount = self.wallets[wallet_name].reclaim_from_subwallet(node.device_id)
        self._after_step()
        return amount

    def advance_epoch(self, to: Optional[int] = None, by: int = 1) -> None:
        self.epoch = to if to is not None else self.epoch + by
        self.events.append({"kind": "epoch", "epoch": self.epoch})

    def inject_fault(self, kind: str, offset: int, delay_ticks: int = 2) -> None:
        """Schedule a fault for the offset-th frame sent from now on."""
        fault = Fault(kind=FaultKind(kind), delay_ticks=delay_ticks)
        index = self.channel.frames_sent + offset
        self.channel.config.plan.explicit[index] = fault

    def pay(self, payer_name: str, payee_name: str, amount: int) -> PaymentRecord:
        """Run one offline payment exchange to quiescence."""
        payer = self.devices[payer_name]
        payee = self.devices[payee_name]
        record = PaymentRecord(
            index=len(self.payments),
            tx_id=b"",
            payer=payer_name,
            payee=payee_name,
            amount=amount,
            start_tick=self.scheduler.now + 1,
        )
        self.payments.append(record)
        self.scheduler.post(
            self.scheduler.now + 1, lambda: self._start_payment(record, payer, payee)
        )
        self._run()
        return record

    def attack_rollback(
        self, device_name: str, amount: int, payees: List[str]
    ) -> List[PaymentRecord]:
        """Snapshot the SE, pay, restore, pay again: a classic double spend."""
        node = self.devices[device_name]
        snapshot = se_snapshot(node.agent.se)
        records = [self.pay(device_name, payees[0], amount)]
        se_restore(node.agent.se, snapshot)
        self.events.append({"kind": "rollback", "device": device_name})
        for payee in payees[1:]:
            records.append(self.pay(device_name, payee, amount))
        return records

    def sync(self, wallet_names: Optional[List[str]] = None) -> ReconciliationReport:
        names = sorted(wallet_names if wallet_names is not None else self.wallets)
        result: List[ReconciliationReport] = []

        def do_sync():
            payloads = [self.wallets[n].collect_sync_payload() for n in names]
            t0 = time.perf_counter()
            report = self.fi.reconcile(payloads, self.epoch)
            self.timings["reconcile_ms"].append((time.perf_counter() - t0) * 1000.0)
            self._apply_resolutions(report)
            for name in names:
                wallet = self.wallets[name]
                for device_id, next_index in report.sync_acks.items():
                    if device_id in wallet.devices:
                        wallet.mark_synced(device_id, next_index)
            self.reconcile_reports.append(report)
            self.reconciliations.append(
                {
                    "tick": self.scheduler.now,
                    "sync_delay_ticks": self.scheduler.now - self._last_sync_tick,
                    "report": report.to_dict(),
                }
            )
            self._last_sync_tick = self.scheduler.now
            result.append(report)

        self.scheduler.post(self.scheduler.now + 1, do_sync)
        self._run()
        return result[0]

    def audit(self, payment_index: int, scope_kind: str = "tx") -> dict:
        record = self.payments[payment_index]
        if scope_kind == "tx":
            value = record.tx_id
        elif scope_kind == "nullifier":
            payment = self.devices[record.payer].agent.outgoing[record.tx_id]
            value = payment.bundle.nullifier
        else:
            node = self.devices[record.payer]
            value = node.agent.se.certificate.pseudonym()
            scope_kind = "device"
        scope = AuditScope(kind=scope_kind, value=value)
        grant = AuditGrant(
            scope=scope, sig=schnorr_sign(self.auditor_keys.sk, scope.signing_payload())
        )
        disclosure = self.fi.audit_disclose(scope, grant)
        out = {
            "scope_kind": scope_kind,
            "scope": value.hex(),
            "owner_identity": disclosure.owner_identity,
            "amount": disclosure.amount,
            "counterparty_pseudonym": (
                disclosure.counterparty_pseudonym.hex()
                if disclosure.counterparty_pseudonym
                else None
            ),
        }
        self.audits.append(out)
        return out

    # -- payment machinery --------------------------------------------------------

    def _start_payment(self, record: PaymentRecord, payer: DeviceNode, payee: DeviceNode):
        t0 = time.perf_counter()
        try:
            init = payer.agent.payer_start(record.amount, payee.device_id, self.epoch)
        except CbdcError as exc:
            record.error = type(exc).__name__
            record.payer_status = "refused"
            return
        record.prove_ms = (time.perf_counter() - t0) * 1000.0
        record.tx_id = init.tx_id
        record.bundle_bytes = len(init.bundle.encode())
        record.proof_material_bytes = 2 * range_proof_material_len(self.range_bits)
        self._payments_by_key[(payer.device_id, init.tx_id)] = record
        self.in_flight[(payer.device_id, init.tx_id, payee.device_id)] = record.amount

        frame = encode_frame(MSG_PAY_INIT, init.encode())
        record.init_frame_bytes = len(frame)
        self._transmit(frame, payer, payee)
        deadline = self.scheduler.now + self.timeout_ticks
        self.scheduler.post(
            deadline, lambda: self._payer_timeout(payer, init.tx_id, record)
        )

    def _payer_timeout(self, payer: DeviceNode, tx_id: bytes, record: PaymentRecord):
        outcome = payer.agent.handle_timeout(tx_id)
        if outcome is not None and outcome.status is PaymentStatus.PENDING_SYNC:
            record.payer_status = "pending_sync"
            self.events.append(
                {"kind": "payer_timeout", "tx": tx_id.hex(), "tick": self.scheduler.now}
            )

    def _payee_timeout(self, payee: DeviceNode, tx_id: bytes):
        outcome = payee.agent.handle_timeout(tx_id)
        if outcome is not None:
            self.events.append(
                {"kind": "payee_timeout", "tx": tx_id.hex(), "tick": self.scheduler.now}
            )

    def _transmit(self, frame: bytes, sender: DeviceNode, receiver: DeviceNode):
        self.channel.transmit(
            frame,
            sender.device_id,
            receiver.device_id,
            self.scheduler.now,
            self._deliver,
            self.scheduler.post,
        )

    def _deliver(self, delivery: Delivery):
        node = self._device_by_id.get(delivery.receiver)
        sender = self._device_by_id.get(delivery.sender)
        if node is None or sender is None:
            return
        try:
            frame = decode_frame(reassemble(list(delivery.chunks)))
        except CbdcError as exc:
            self.events.append(
                {
                    "kind": "rx_error",
                    "device": node.name,
                    "error": type(exc).__name__,
                    "frame": delivery.frame_index,
                    "tick": self.scheduler.now,
                }
            )
            return
        self._dispatch(node, sender, frame.msg_type, frame.payload)

    def _dispatch(self, node: DeviceNode, sender: DeviceNode, msg_type: int, payload: bytes):
        try:
            if msg_type == MSG_PAY_INIT:
                self._on_init(node, sender, PayInit.decode(payload))
            elif msg_type == MSG_PAY_ACCEPT:
                self._on_accept(node, sender, PayAccept.decode(payload))
            elif msg_type == MSG_PAY_COMMIT:
                self._on_commit(node, sender, PayCommit.decode(payload))
            elif msg_type == MSG_PAY_REJECT:
                self._on_reject(node, PayReject.decode(payload))
            else:
                self.events.append(
                    {"kind": "rx_unknown_type", "device": node.name, "type": msg_type}
                )
        except CbdcError as exc:
            self.events.append(
                {
                    "kind": "protocol_error",
                    "device": node.name,
                    "error": type(exc).__name__,
                    "tick": self.scheduler.now,
                }
            )

    def _on_init(self, node: DeviceNode, sender: DeviceNode, init: PayInit):
        t0 = time.perf_counter()
        response = node.agent.payee_handle_init(init, self.epoch)
        verify_ms = (time.perf_counter() - t0) * 1000.0
        record = self._payments_by_key.get((sender.device_id, init.tx_id))
        if record is not None:
            record.verify_ms = verify_ms
        if isinstance(response, PayAccept):
            self._transmit(encode_frame(MSG_PAY_ACCEPT, response.encode()), node, sender)
            deadline = self.scheduler.now + self.timeout_ticks
            self.scheduler.post(deadline, lambda: self._payee_timeout(node, init.tx_id))
        else:
            self.events.append(
                {
                    "kind": "payee_reject",
                    "tx": init.tx_id.hex(),
                    "reason": response.reason.value,
                    "tick": self.scheduler.now,
                }
            )
            self._transmit(encode_frame(MSG_PAY_REJECT, response.encode()), node, sender)

    def _on_accept(self, node: DeviceNode, sender: DeviceNode, accept: PayAccept):
        commit = node.agent.payer_handle_accept(accept)
        record = self._payments_by_key.get((node.device_id, accept.tx_id))
        if record is not None and record.payer_status == "in_flight":
            record.payer_status = "completed"
        self._transmit(encode_frame(MSG_PAY_COMMIT, commit.encode()), node, sender)

    def _on_commit(self, node: DeviceNode, sender: DeviceNode, commit: PayCommit):
        before = commit.tx_id in node.agent.receipts
        node.agent.payee_handle_commit(commit)
        if before:
            return  # replay, nothing changed
        record = self._payments_by_key.get((sender.device_id, commit.tx_id))
        if record is not None:
            record.payee_receipt = True
            record.end_tick = self.scheduler.now

    def _on_reject(self, node: DeviceNode, reject: PayReject):
        outcome = node.agent.payer_handle_reject(reject)
        record = self._payments_by_key.get((node.device_id, reject.tx_id))
        if record is not None and outcome.status is PaymentStatus.ABORTED_REJECT:
            record.payer_status = "aborted_reject"

    # -- reconciliation wiring ------------------------------------------------------

    def _apply_resolutions(self, report: ReconciliationReport) -> None:
        for res in report.resolutions:
            key = (res.payer_device_id, res.tx_id, res.payee_device_id)
            witnessed = self.in_flight.pop(key, None)
            if res.kind == "annulled" and not res.duplicate and witnessed is not None:
                # real value the FI refused to settle (e.g. frozen device)
                self.flagged_value += res.amount

    # -- conservation ---------------------------------------------------------------

    def omniscient_state(self) -> OmniscientState:
        return OmniscientState(
            main_balances={
                w.owner_id: w.online_balance for w in self.wallets.values()
            },
            se_balances={
                node.device_id: node.agent.se.balance for node in self.devices.values()
            },
            in_flight=sum(self.in_flight.values()),
            flagged=self.flagged_value,
        )

    def check_conservation(self) -> bool:
        ok = conservation_check(self.ledger, self.omniscient_state())
        self.conservation_log.append((self.scheduler.now, ok))
        return ok

    def conservation_summary(self) -> dict:
        violations = sorted({tick for tick, ok in self.conservation_log if not ok})
        return {
            "checks": len(self.conservation_log),
            "violation_ticks": violations[:64],
            "violations": len(violations),
            "final_ok": self.conservation_log[-1][1] if self.conservation_log else True,
        }

    # -- plumbing ---------------------------------------------------------------------

    def _run(self) -> None:
        self.scheduler.run_until_idle(on_tick_end=lambda _t: self.check_conservation())

    def _after_step(self) -> None:
        self.check_conservation()
