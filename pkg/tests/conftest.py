import pytest

from cbdcsim.certs import PolicyLimits
from cbdcsim.crypto import KeyPair, NonceStream, default_params
from cbdcsim.intermediary import FinancialIntermediary
from cbdcsim.ledger import Ledger
from cbdcsim.protocol import PaymentAgent
from cbdcsim.secure_element import SecureElement
from cbdcsim.suite import Scalar, hash_to_scalar
from cbdcsim.wallet import MainWallet

DEFAULT_LIMITS = PolicyLimits(cum_limit=10000, per_tx_cap=2000, count_cap=64)


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture()
def nonces():
    return NonceStream(b"\xab" * 32)


@pytest.fixture()
def fi():
    return FinancialIntermediary(KeyPair.from_sk(Scalar(0xF1F1)), Ledger())


class ActorFactory:
    """Builds onboarded wallets with provisioned devices against one FI."""

    def __init__(self, fi: FinancialIntermediary):
        self.fi = fi

    def wallet(self, name: str) -> MainWallet:
        record = self.fi.onboard_customer({"name": name, "sanctioned": False})
        wallet = MainWallet(
            record.owner_id,
            KeyPair.from_sk(hash_to_scalar(b"test-wallet-sk", name.encode())),
        )
        self.fi.register_wallet(record.owner_id, wallet)
        return wallet

    def device(
        self,
        wallet: MainWallet,
        name: str,
        limits: PolicyLimits = DEFAULT_LIMITS,
        expiry_epoch: int = 16,
        range_bits: int = 32,
    ) -> PaymentAgent:
        device_id = name.encode().ljust(16, b"\0")[:16]
        keys = KeyPair.from_sk(hash_to_scalar(b"test-device-sk", name.encode()))
        cert = self.fi.issue_certificate(
            wallet.owner_id, device_id, keys.pk, limits, expiry_epoch
        )
        se = SecureElement(
            device_id=device_id,
            keys=keys,
            prf_seed=hash_to_scalar(b"test-prf", name.encode()).encode(),
            certificate=cert,
            owner_pk=wallet.keys.pk,
            range_bits=range_bits,
        )
        agent = PaymentAgent(se, self.fi.pk)
        wallet.register_device(agent)
        return agent


@pytest.fixture()
def actors(fi):
    return ActorFactory(fi)


def run_exchange(payer: PaymentAgent, payee: PaymentAgent, amount: int, epoch: int = 1):
    """Drive the three-message exchange directly (no channel)."""
    init = payer.payer_start(amount, payee.device_id, epoch)
    accept = payee.payee_handle_init(init, epoch)
    commit = payer.payer_handle_accept(accept)
    receipt = payee.payee_handle_commit(commit)
    return init, accept, commit, receipt
