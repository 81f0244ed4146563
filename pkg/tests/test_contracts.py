import pytest

from swaptionsim.chainsim import (AbsTimeLeaf, AllOf, AnyOf, Output, PreimageLeaf, RelTimeLeaf,
                                  SigLeaf, Witness, World, eval_predicate, hash_secret, make_tx,
                                  sign)
from swaptionsim.contracts import (AntiCheatSpec, ContractSetup, HtlcSpec, InvalidContract,
                                   MarginContractSpec, MissingPresignature, anticheat_predicate,
                                   cancel_expiration_predicate, cancellable_buyer_predicate,
                                   funding_contract_predicate, htlc_predicate,
                                   margin_contract_predicate, plain_owner)

H = hash_secret(b"\x01" * 32)
S = b"\x01" * 32


def _holds(pred, signers=(), preimages=(), now=0, locktime=0, conf=0):
    w = World.create(["A"])
    [op] = w.fund("x", "A", [1])
    tx = make_tx([op], [Output(1, SigLeaf("x"))], locktime)
    wit = Witness(frozenset(preimages), frozenset(sign(s, tx) for s in signers))
    return eval_predicate(pred, wit, now, conf, tx, 0)


def test_htlc_shape():
    p = htlc_predicate(HtlcSpec("alice", "bob", H, 10))
    assert p == AnyOf(AllOf(SigLeaf("alice"), PreimageLeaf(H)),
                      AllOf(SigLeaf("bob"), AbsTimeLeaf(10)))
    assert _holds(p, ["alice"], [S], now=0)
    assert _holds(p, ["bob"], now=10, locktime=10)
    assert not _holds(p, ["bob"], now=9, locktime=9)


def test_htlc_rejects_bad_specs():
    with pytest.raises(InvalidContract):
        htlc_predicate(HtlcSpec("a", "a", H, 10))
    with pytest.raises(InvalidContract):
        htlc_predicate(HtlcSpec("a", "b", H, 5), now=5)


def test_funding_contract_needs_both_signatures():
    p = funding_contract_predicate("alice", "bob", H, "alice", 11)
    assert _holds(p, ["alice", "bob"], [S])
    assert not _holds(p, ["alice"], [S])
    assert _holds(p, ["alice"], now=11, locktime=11)
    assert not _holds(p, ["bob"], now=11, locktime=11)
    with pytest.raises(InvalidContract):
        funding_contract_predicate("a", "a", H, "a", 1)


def test_anticheat_branches():
    p = anticheat_predicate(AntiCheatSpec("alice", "bob", H, delay=1))
    assert _holds(p, ["bob"], [S])
    assert not _holds(p, ["alice"], now=3, conf=3)
    assert _holds(p, ["alice"], now=4, conf=3)
    assert p.children[1] == AllOf(SigLeaf("alice"), RelTimeLeaf(1))
    with pytest.raises(InvalidContract):
        anticheat_predicate(AntiCheatSpec("alice", "bob", H, delay=0))


def test_cancel_expiration():
    p = cancel_expiration_predicate("bob", H, 100)
    assert _holds(p, ["bob"], [S], now=5)
    assert _holds(p, ["bob"], now=100, locktime=100)
    assert not _holds(p, ["bob"], now=99, locktime=99)


def test_cancellable_buyer_contract():
    p = cancellable_buyer_predicate("alice", "bob", H, hash_secret(b"\x02" * 32))
    assert _holds(p, ["bob"], [S])
    assert not _holds(p, ["alice"], [S])


def test_margin_contract():
    spec = MarginContractSpec("bob", "alice", 200_000, 1_000_000, 99)
    p = margin_contract_predicate(spec)
    assert _holds(p, ["bob", "alice"])
    assert not _holds(p, ["alice"], now=98, locktime=98)
    assert _holds(p, ["alice"], now=99, locktime=99)
    with pytest.raises(InvalidContract):
        margin_contract_predicate(MarginContractSpec("bob", "alice", 0, 1, 9))
    with pytest.raises(InvalidContract):
        margin_contract_predicate(MarginContractSpec("bob", "bob", 1, 2, 9))


def test_plain_owner():
    assert plain_owner(SigLeaf("a")) == "a"
    assert plain_owner(AllOf(SigLeaf("a"))) is None


def test_contract_setup_tracks_missing_presignatures():
    w = World.create(["A"])
    [op] = w.fund("x", "A", [1])
    tx = make_tx([op], [Output(1, SigLeaf("x"))])
    setup = ContractSetup(withheld={"refund"})
    setup.require("funding", "claim", "refund")
    setup.presign("claim", "bob", tx)
    setup.presign("refund", "bob", tx)
    assert setup.has("claim") and not setup.has("refund")
    assert setup.missing("funding") == ["refund"]
    with pytest.raises(MissingPresignature):
        setup.check("funding")
