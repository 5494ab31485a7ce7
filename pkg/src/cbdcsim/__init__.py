"""Deterministic desk-scale simulator for offline CBDC payments.

Secure-element-backed device wallets exchange value over a simulated
NFC/BLE channel using zero-knowledge compliance proofs; an intermittently
reachable financial intermediary reconciles the offline logs, credits
payees, and detects double spending through duplicate nullifiers.
"""

from .suite import GroupElement, Scalar, SuiteHeader, active_suite
from .crypto import (
    KeyPair,
    PedersenParams,
    Signature,
    Transcript,
    derive_generators,
    pedersen_commit,
    schnorr_sign,
    schnorr_verify,
)
from .certs import PolicyLimits, WalletCertificate
from .zkp import (
    BitProof,
    ComplianceBundle,
    OwnershipProof,
    PublicInputs,
    RangeProof,
    RejectReason,
    VerifyOutcome,
    build_compliance_bundle,
    derive_nullifier,
    prove_range,
    verify_compliance_bundle,
    verify_range,
)
from .secure_element import (
    AllocationRecord,
    OfflineLogEntry,
    SecureElement,
    verify_log_chain,
)
from .wallet import MainWallet, SyncPayload
from .ledger import Ledger, OmniscientState, conservation_check
from .intermediary import FinancialIntermediary, ReconciliationReport
from .channel import ChannelConfig, FaultKind, FaultPlan, SimulatedChannel
from .protocol import PayAccept, PayCommit, PayInit, PaymentAgent, Receipt
from .simulator import World, se_restore, se_snapshot
from .scenario import run_scenario

__version__ = "0.1.0"
