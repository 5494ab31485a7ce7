"""Declarative scenario files and the report they produce.

A scenario is a JSON document naming actors and an ordered script of
steps; the runner replays it on a fresh World.  Everything in the report
except the "timings" section is a pure function of (scenario, seed).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .certs import PolicyLimits
from .channel import ChannelConfig, FaultKind, FaultPlan
from .errors import CbdcError, ScenarioError
from .simulator import DEFAULT_EXPIRY_EPOCH, DEFAULT_POLICY, World
from .suite import active_suite
from .zkp import DEFAULT_RANGE_BITS

STEP_OPS = {
    "onboard",
    "issue",
    "allocate",
    "pay",
    "inject_fault",
    "attack_rollback",
    "advance_epoch",
    "sync",
    "audit",
}


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ScenarioError(msg)


def load_scenario(path: Union[str, Path]) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    validate_scenario(doc)
    return doc


def validate_scenario(doc: dict) -> None:
    _require(isinstance(doc, dict), "scenario must be a JSON object")
    _require(isinstance(doc.get("name"), str), "scenario.name must be a string")
    _require(isinstance(doc.get("seed"), int), "scenario.seed must be an integer")
    actors = doc.get("actors")
    _require(isinstance(actors, dict), "scenario.actors must be an object")
    wallets = actors.get("wallets", [])
    devices = actors.get("devices", [])
    _require(isinstance(wallets, list) and wallets, "actors.wallets must be non-empty")
    wallet_ids = set()
    for w in wallets:
        _require(isinstance(w, dict) and isinstance(w.get("id"), str),
                 "each wallet needs a string id")
        _require(w["id"] not in wallet_ids, f"duplicate wallet id {w['id']!r}")
        wallet_ids.add(w["id"])
    device_ids = set()
    for d in devices:
        _require(isinstance(d, dict) and isinstance(d.get("id"), str),
                 "each device needs a string id")
        _require(d["id"] not in device_ids, f"duplicate device id {d['id']!r}")
        _require(d.get("owner") in wallet_ids,
                 f"device {d['id']!r} owner must be a declared wallet")
        device_ids.add(d["id"])
    script = doc.get("script")
    _require(isinstance(script, list), "scenario.script must be a list")
    for i, step in enumerate(script):
        _require(isinstance(step, dict), f"step {i} must be an object")
        op = step.get("op")
        _require(op in STEP_OPS, f"step {i}: unknown op {op!r}")
        if op == "onboard":
            _require(step.get("wallet") in wallet_ids, f"step {i}: unknown wallet")
        elif op == "issue":
            _require(step.get("wallet") in wallet_ids, f"step {i}: unknown wallet")
            _require(isinstance(step.get("amount"), int) and step["amount"] >= 0,
                     f"step {i}: amount must be a non-negative integer")
        elif op == "allocate":
            _require(step.get("wallet") in wallet_ids, f"step {i}: unknown wallet")
            _require(step.get("device") in device_ids, f"step {i}: unknown device")
            _require(isinstance(step.get("amount"), int), f"step {i}: amount required")
        elif op == "pay":
            _require(step.get("payer") in device_ids, f"step {i}: unknown payer")
            _require(step.get("payee") in device_ids, f"step {i}: unknown payee")
            _require(isinstance(step.get("amount"), int), f"step {i}: amount required")
        elif op == "inject_fault":
            kinds = {k.value for k in FaultKind if k is not FaultKind.NONE}
            _require(step.get("kind") in kinds, f"step {i}: unknown fault kind")
            _require(isinstance(step.get("offset"), int) and step["offset"] >= 0,
                     f"step {i}: offset must be a non-negative integer")
        elif op == "attack_rollback":
            _require(step.get("device") in device_ids, f"step {i}: unknown device")
            _require(isinstance(step.get("amount"), int), f"step {i}: amount required")
            payees = step.get("payees")
            _require(isinstance(payees, list) and len(payees) >= 2
                     and all(p in device_ids for p in payees),
                     f"step {i}: payees must list >= 2 declared devices")
        elif op == "advance_epoch":
            _require("to" in step or "by" in step, f"step {i}: needs 'to' or 'by'")
        elif op == "sync":
            names = step.get("wallets")
            if names is not None:
                _require(isinstance(names, list)
                         and all(n in wallet_ids for n in names),
                         f"step {i}: sync wallets must be declared")
        elif op == "audit":
            _require(isinstance(step.get("payment"), int),
                     f"step {i}: payment index required")
    expected = doc.get("expected", {})
    _require(isinstance(expected, dict), "scenario.expected must be an object")


def _policy_from(doc: Optional[dict], default: PolicyLimits) -> PolicyLimits:
    if not doc:
        return default
    return PolicyLimits(
        cum_limit=doc.get("cum_limit", default.cum_limit),
        per_tx_cap=doc.get("per_tx_cap", default.per_tx_cap),
        count_cap=doc.get("count_cap", default.count_cap),
    )


def _channel_from(doc: Optional[dict], seed: int) -> ChannelConfig:
    doc = doc or {}
    profile = doc.get("profile", "nfc")
    config = ChannelConfig.ble() if profile == "ble" else ChannelConfig.nfc()
    if "latency_ticks" in doc:
        config.latency_ticks = int(doc["latency_ticks"])
    rates = {
        FaultKind(k): float(v) for k, v in doc.get("fault_rates", {}).items()
    }
    config.plan = FaultPlan(seed=doc.get("fault_seed", seed), rates=rates)
    return config


class ScenarioRunner:
    def __init__(self, doc: dict, seed_override: Optional[int] = None):
        validate_scenario(doc)
        self.doc = doc
        self.seed = seed_override if seed_override is not None else doc["seed"]
        self.default_policy = _policy_from(doc.get("policy"), DEFAULT_POLICY)
        self.default_expiry = doc.get("policy", {}).get(
            "expiry_epoch", DEFAULT_EXPIRY_EPOCH
        )
        self.world = World(
            seed=self.seed,
            channel_config=_channel_from(doc.get("channel"), self.seed),
            range_bits=doc.get("range_bits", DEFAULT_RANGE_BITS),
            timeout_ticks=doc.get("timeout_ticks", 10),
            start_epoch=doc.get("epoch", 1),
        )
        self.step_errors: List[dict] = []
        self._devices_by_owner: Dict[str, List[dict]] = {}
        for dev in doc["actors"].get("devices", []):
            self._devices_by_owner.setdefault(dev["owner"], []).append(dev)
        for w in doc["actors"]["wallets"]:
            self.world.add_wallet(w["id"])

    def run(self) -> dict:
        for i, step in enumerate(self.doc["script"]):
            try:
                self._execute(step)
            except CbdcError as exc:
                self.step_errors.append(
                    {"step": i, "op": step["op"], "error": type(exc).__name__}
                )
        return self._report()

    def _execute(self, step: dict) -> None:
        world = self.world
        op = step["op"]
        if op == "onboard":
            wallet_id = step["wallet"]
            spec = next(
                w for w in self.doc["actors"]["wallets"] if w["id"] == wallet_id
            )
            kyc = spec.get("kyc", {"name": wallet_id, "sanctioned": False})
            if world.onboard(wallet_id, kyc):
                for dev in self._devices_by_owner.get(wallet_id, []):
                    world.provision_device(
                        dev["id"],
                        wallet_id,
                        policy=_policy_from(dev.get("policy"), self.default_policy),
                        expiry_epoch=dev.get("policy", {}).get(
                            "expiry_epoch", self.default_expiry
                        ),
                    )
        elif op == "issue":
            world.issue(step["wallet"], step["amount"])
        elif op == "allocate":
            world.allocate(step["wallet"], step["device"], step["amount"])
        elif op == "pay":
            world.pay(step["payer"], step["payee"], step["amount"])
        elif op == "inject_fault":
            world.inject_fault(
                step["kind"], step["offset"], delay_ticks=step.get("delay_ticks", 2)
            )
        elif op == "attack_rollback":
            world.attack_rollback(step["device"], step["amount"], step["payees"])
        elif op == "advance_epoch":
            world.advance_epoch(to=step.get("to"), by=step.get("by", 1))
        elif op == "sync":
            world.sync(step.get("wallets"))
        elif op == "audit":
            world.audit(step["payment"], step.get("scope", "tx"))

    # -- report ---------------------------------------------------------------

    def _summary(self) -> dict:
        world = self.world
        completed = sum(
            1 for p in world.payments
            if p.payer_status == "completed" and p.payee_receipt
        )
        credits_total = sum(
            c["amount"]
            for r in world.reconciliations
            for c in r["report"]["credits"]
        )
        return {
            "payments_total": len(world.payments),
            "payments_completed": completed,
            "payments_pending_sync": sum(
                1 for p in world.payments if p.payer_status == "pending_sync"
            ),
            "payments_refused": sum(
                1 for p in world.payments if p.payer_status == "refused"
            ),
            "double_spends": sum(
                len(r["report"]["double_spends"]) for r in world.reconciliations
            ),
            "frozen_devices": len(world.fi.frozen),
            "credits_total": credits_total,
            "voids": sum(
                len(r["report"]["voids"]) for r in world.reconciliations
            ),
            "conservation_clean": world.conservation_summary()["violations"] == 0,
            "conservation_final": world.conservation_summary()["final_ok"],
            "total_issued": world.ledger.total_issued(),
            "step_errors": len(self.step_errors),
        }

    def _report(self) -> dict:
        world = self.world
        summary = self._summary()
        expected = self.doc.get("expected", {})
        failures = []
        for key, want in sorted(expected.items()):
            got = summary.get(key)
            if got != want:
                failures.append({"key": key, "expected": want, "actual": got})
        report = {
            "name": self.doc["name"],
            "seed": self.seed,
            "suite": active_suite().name,
            "range_bits": world.range_bits,
            "final_epoch": world.epoch,
            "summary": summary,
            "payments": [p.to_dict() for p in world.payments],
            "reconciliations": world.reconciliations,
            "conservation": world.conservation_summary(),
            "wallet_balances": {
                name: w.online_balance for name, w in sorted(world.wallets.items())
            },
            "device_balances": {
                name: node.agent.se.balance
                for name, node in sorted(world.devices.items())
            },
            "storage_bytes": {
                name: node.agent.se.log_storage_bytes()
                for name, node in sorted(world.devices.items())
            },
            "channel": {
                "frames_sent": world.channel.frames_sent,
                "trace": [ev.to_dict() for ev in world.channel.trace],
            },
            "ledger": {
                "entries": len(world.ledger.entries),
                "total_issued": world.ledger.total_issued(),
                "chain_ok": world.ledger.verify_chain(),
            },
            "events": world.events,
            "audits": world.audits,
            "step_errors": self.step_errors,
            "assertions": {"expected": expected, "failures": failures},
            "timings": {
                "payments": [
                    {"index": p.index, "prove_ms": p.prove_ms, "verify_ms": p.verify_ms}
                    for p in world.payments
                ],
                "reconcile_ms": world.timings["reconcile_ms"],
            },
        }
        return report


def run_scenario(
    source: Union[str, Path, dict],
    seed_override: Optional[int] = None,
) -> Tuple[dict, int]:
    """Execute a scenario; returns (report, exit_code).

    Exit codes: 0 success, 1 expected-assertion failure, 2 malformed input.
    """
    try:
        doc = source if isinstance(source, dict) else load_scenario(source)
        if isinstance(source, dict):
            validate_scenario(doc)
        runner = ScenarioRunner(doc, seed_override)
        report = runner.run()
    except ScenarioError:
        raise
    exit_code = 1 if report["assertions"]["failures"] else 0
    return report, exit_code


def report_json(report: dict, include_timings: bool = True) -> bytes:
    doc = report if include_timings else {
        k: v for k, v in report.items() if k != "timings"
    }
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode()
