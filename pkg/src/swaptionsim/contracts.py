"""Spending-condition templates for every contract output the protocols use.

Each template returns a plain ``Predicate``. The pre-signing bookkeeping that
goes with the two-signer branches lives in ``ContractSetup``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .chainsim import (AbsTimeLeaf, AllOf, AnyOf, PreimageLeaf, Predicate, RelTimeLeaf,
                       SigLeaf, SigMode, Transaction, sign)


class InvalidContract(ValueError):
    pass


@dataclass(frozen=True)
class HtlcSpec:
    payee: str
    payer: str
    hash: bytes
    expiry: int

    def check(self, now: int = 0) -> None:
        if self.payee == self.payer:
            raise InvalidContract("payee and payer must differ")
        if self.expiry <= now:
            raise InvalidContract(f"expiry {self.expiry} is not after now={now}")


@dataclass(frozen=True)
class AntiCheatSpec:
    owner: str
    punisher: str
    punish_hash: bytes
    delay: int = 1

    def check(self) -> None:
        if self.delay < 1:
            raise InvalidContract("anti-cheat delay must be at least one timestep")
        if self.owner == self.punisher:
            raise InvalidContract("owner and punisher must differ")


@dataclass(frozen=True)
class MarginContractSpec:
    depositor: str
    beneficiary: str
    margin: int
    principal: int
    margin_expiry: int

    def check(self) -> None:
        if not 0 < self.margin < self.principal:
            raise InvalidContract("margin must be positive and below the principal")
        if self.depositor == self.beneficiary:
            raise InvalidContract("depositor and beneficiary must differ")


def htlc_predicate(spec: HtlcSpec, now: int = 0) -> Predicate:
    spec.check(now)
    return AnyOf(AllOf(SigLeaf(spec.payee), PreimageLeaf(spec.hash)),
                 AllOf(SigLeaf(spec.payer), AbsTimeLeaf(spec.expiry)))


def funding_contract_predicate(a: str, b: str, hash: bytes, refund_party: str,
                               refund_time: int) -> Predicate:
    """Hashlock branch needs both signatures so the claimant cannot redirect outputs."""
    if a == b:
        raise InvalidContract("the two signers must differ")
    return AnyOf(AllOf(SigLeaf(a), SigLeaf(b), PreimageLeaf(hash)),
                 AllOf(SigLeaf(refund_party), AbsTimeLeaf(refund_time)))


def anticheat_predicate(spec: AntiCheatSpec) -> Predicate:
    spec.check()
    return AnyOf(AllOf(SigLeaf(spec.punisher), PreimageLeaf(spec.punish_hash)),
                 AllOf(SigLeaf(spec.owner), RelTimeLeaf(spec.delay)))


def cancel_expiration_predicate(b: str, cancel_hash: bytes, expiry: int) -> Predicate:
    return AnyOf(AllOf(SigLeaf(b), PreimageLeaf(cancel_hash)),
                 AllOf(SigLeaf(b), AbsTimeLeaf(expiry)))


def margin_contract_predicate(spec: MarginContractSpec) -> Predicate:
    spec.check()
    return AnyOf(AllOf(SigLeaf(spec.depositor), SigLeaf(spec.beneficiary)),
                 AllOf(SigLeaf(spec.beneficiary), AbsTimeLeaf(spec.margin_expiry)))


# Swaption contracts with early cancellation. The writer-side contract holds
# the writer's principal, the buyer-side contract the buyer's.

def cancellable_writer_predicate(buyer: str, writer: str, exercise_hash: bytes,
                                 cancel_hash: bytes, expiry: int) -> Predicate:
    exercise = AllOf(SigLeaf(buyer), SigLeaf(writer), PreimageLeaf(exercise_hash))
    return AnyOf(exercise, *cancel_expiration_predicate(writer, cancel_hash, expiry).children)


def cancellable_buyer_predicate(buyer: str, writer: str, exercise_hash: bytes,
                                cancel_hash: bytes) -> Predicate:
    return AnyOf(AllOf(SigLeaf(writer), PreimageLeaf(exercise_hash)),
                 AllOf(SigLeaf(buyer), SigLeaf(writer), PreimageLeaf(cancel_hash)))


def plain_owner(p: Predicate):
    """Party name if ``p`` is a bare single-signature output, else None."""
    return p.party if isinstance(p, SigLeaf) else None


class MissingPresignature(Exception):
    pass


@dataclass
class ContractSetup:
    """Child transactions signed by the counterparty before a contract is funded.

    ``required`` maps a contract name to the child labels that must be present
    before that contract may be funded.
    """
    presigned: dict = field(default_factory=dict)   # label -> (tx, signer, input index)
    required: dict = field(default_factory=dict)    # contract -> [labels]
    withheld: set = field(default_factory=set)

    def require(self, contract: str, *labels: str) -> None:
        self.required.setdefault(contract, []).extend(labels)

    def presign(self, label: str, signer: str, tx: Transaction, input_index: int = 0,
                mode: SigMode = SigMode.COMMIT_ALL) -> None:
        if label in self.withheld:
            return
        self.presigned[label] = (sign(signer, tx, mode, input_index), input_index)

    def signature(self, label: str):
        return self.presigned[label][0]

    def has(self, label: str) -> bool:
        return label in self.presigned

    def missing(self, contract: str) -> list:
        return [l for l in self.required.get(contract, []) if l not in self.presigned]

    def check(self, contract: str) -> None:
        missing = self.missing(contract)
        if missing:
            raise MissingPresignature(f"cannot fund {contract}: missing {', '.join(missing)}")
