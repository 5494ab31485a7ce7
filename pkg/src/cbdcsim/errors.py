"""Domain errors shared across the simulator layers."""


class CbdcError(Exception):
    """Base class for every error raised by this package."""


class DecodeError(CbdcError):
    """Malformed canonical encoding (wrong length, bad field, junk bytes)."""


# -- proof layer ---------------------------------------------------------

class InvalidWitness(CbdcError):
    """Prover was handed a witness that does not satisfy the statement."""


class OutOfRange(CbdcError):
    """Value does not fit the requested range-proof width."""


class LengthMismatch(CbdcError):
    """Proof width does not match the verifier's expected bit width."""


# -- payment preconditions (secure element / bundle builder) -------------

class ValueInvalid(CbdcError):
    """Transfer amount is zero, negative, or above the per-transaction cap."""


class InsufficientFunds(CbdcError):
    pass


class LimitExceeded(CbdcError):
    """Cumulative offline spend would exceed the certificate limit."""


class CounterExhausted(CbdcError):
    """Offline transaction budget for this sync period is used up."""


class CredentialExpired(CbdcError):
    pass


# -- secure element -------------------------------------------------------

class ProvisionMismatch(CbdcError):
    """Certificate does not bind the key pair being provisioned."""


class AllocationInvalid(CbdcError):
    """Allocation record is unsigned, replayed, or for another device."""


class ExceedsDeviceLimit(CbdcError):
    """Load would push the device balance past the range-proof width."""


class LogCorrupt(CbdcError):
    """Entry does not chain onto the current log head."""


class NoSnapshot(CbdcError):
    """Rollback harness asked to restore without a prior snapshot."""


# -- wallet / intermediary -------------------------------------------------

class UnknownDevice(CbdcError):
    pass


class UnknownCustomer(CbdcError):
    pass


class PolicyBound(CbdcError):
    """Requested certificate limits fall outside FI policy."""


class FrozenDevice(CbdcError):
    """Device pseudonym was frozen after a double-spend finding."""


class GrantInvalid(CbdcError):
    pass


class ScopeUnknown(CbdcError):
    pass


# -- ledger ----------------------------------------------------------------

class ChainMismatch(CbdcError):
    """Appended entry does not reference the current ledger head."""


# -- channel ----------------------------------------------------------------

class ChecksumMismatch(CbdcError):
    pass


class BadMagic(CbdcError):
    pass


class UnknownVersion(CbdcError):
    pass


class IncompleteStream(CbdcError):
    """Chunk set cannot be reassembled into a full frame."""


# -- protocol ----------------------------------------------------------------

class SignatureInvalid(CbdcError):
    pass


class UnknownTx(CbdcError):
    pass


class DuplicateTx(CbdcError):
    pass


class ScenarioError(CbdcError):
    """Scenario file failed to parse or references undeclared actors."""
