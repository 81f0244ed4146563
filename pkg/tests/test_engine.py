import pytest
from hypothesis import given, strategies as st

from swaptionsim import COIN, SwapTerms, SwaptionTerms, World, coins
from swaptionsim.contracts import MissingPresignature
from swaptionsim.engine import (AtomicSwap, Honest, Scripted, Silent, Swaption, cheat_guarantee,
                                check_safety, enumerate_strategies, execute, explore, replay,
                                run_atomic_swap, run_htlc_payment, run_margin_swaption,
                                run_swaption, run_swaption_with_cancellation, swap_guarantee,
                                swaption_guarantee)
from swaptionsim.engine.runner import next_time

PLAIN = SwaptionTerms(coins("0.1"), coins(1), coins(1))
CANCEL = SwaptionTerms(coins("0.1"), coins(1), coins(1), cancellable=True)
MARGIN = SwaptionTerms(coins("0.1"), coins(1), coins(1), coins("0.2"), coins("0.2"),
                       margined=True)
SWAP = SwapTerms(coins(1), coins(1), T=10)


def d(trace, party, chain):
    return trace.outcome.delta(party, chain)


def test_htlc_claim_and_refund():
    w = World.create(["BCoin"])
    w.fund("bob", "BCoin", [COIN])
    tr = run_htlc_payment(w, "bob", "alice", COIN, 10)
    assert d(tr, "alice", "BCoin") == COIN
    assert "A" in tr.outcome.revealed_names()
    tr = run_htlc_payment(w, "bob", "alice", COIN, 10, {"alice": Honest(phase1="renege")})
    assert d(tr, "bob", "BCoin") == 0
    assert tr.labels() == ["fund", "refund"]
    assert tr.outcome.revealed == ()


def test_swap_accept_and_renege():
    tr = run_atomic_swap(None, SWAP)
    assert (d(tr, "alice", "BCoin"), d(tr, "bob", "ACoin")) == (COIN, COIN)
    tr = run_atomic_swap(None, SWAP, {"alice": Honest(phase1="renege")})
    assert d(tr, "alice", "ACoin") == 0 and d(tr, "bob", "BCoin") == 0
    times = {e.event: e.time for e in tr.events}
    assert times["publish:refund_b"] == 10 and times["publish:refund_a"] == 11


def test_swaption_paths():
    tr = run_swaption(None, PLAIN)
    assert d(tr, "alice", "ACoin") == -coins("1.1") and d(tr, "alice", "BCoin") == COIN
    tr = run_swaption(None, PLAIN, {"alice": Honest(phase2="expire")})
    assert d(tr, "alice", "ACoin") == -coins("0.1") and d(tr, "bob", "BCoin") == 0
    tr = run_swaption(None, PLAIN, {"alice": Honest(phase1="renege")})
    assert d(tr, "alice", "ACoin") == 0 and d(tr, "bob", "BCoin") == 0
    with pytest.raises(ValueError):
        run_swaption(None, CANCEL)


def test_exercise_waits_for_exercise_at():
    tr = run_swaption(None, PLAIN, {"alice": Honest(exercise_at=40)})
    times = {e.event: e.time for e in tr.events}
    assert times["publish:exercise"] == 40


def test_cancellable_paths():
    tr = run_swaption_with_cancellation(None, CANCEL)
    assert d(tr, "alice", "BCoin") == COIN and d(tr, "bob", "ACoin") == coins("1.1")
    times = {e.event: e.time for e in tr.events}
    assert times["publish:deliver_exercise"] == times["publish:exercise"] + CANCEL.delay
    tr = run_swaption_with_cancellation(None, CANCEL,
                                        {"alice": Honest(phase2="cancel", cancel_at=20)})
    assert d(tr, "alice", "ACoin") == -coins("0.1") and d(tr, "bob", "BCoin") == 0
    assert "A3" in tr.outcome.revealed_names()


def test_cheat_is_punished():
    tr = run_swaption_with_cancellation(
        None, CANCEL, {"alice": Scripted({"cheat": 20}, Honest(phase2="expire"))})
    assert tr.outcome.balance("bob", "ACoin") == coins("1.1")
    assert tr.outcome.balance("bob", "BCoin") == COIN
    assert {"breach_exercise", "breach_cancel"} <= set(tr.labels())
    assert cheat_guarantee(CANCEL).holds(tr.outcome)


def test_margin_paths():
    tr = run_margin_swaption(None, MARGIN)
    assert d(tr, "alice", "ACoin") == -coins("1.1") and d(tr, "alice", "BCoin") == COIN
    tr = run_margin_swaption(None, MARGIN, {"alice": Honest(margin="default")})
    assert d(tr, "bob", "ACoin") == coins("0.3")
    tr = run_margin_swaption(None, MARGIN, {"bob": Honest(margin="default")})
    assert d(tr, "alice", "BCoin") == coins("0.2") and d(tr, "alice", "ACoin") == -coins("0.1")
    with pytest.raises(ValueError):
        run_margin_swaption(None, PLAIN)


def test_margined_deposit_adds_a_wallet_input():
    tr = run_margin_swaption(None, MARGIN)
    dep = next(e.tx for e in tr.events if e.tx is not None and e.tx.label == "deposit_bob")
    assert len(dep.inputs) == 2


def test_missing_presignature_blocks_funding():
    with pytest.raises(MissingPresignature):
        run_swaption(None, PLAIN, withhold=("claim_a",))


def test_silent_counterparty_refunds_everyone():
    tr = run_atomic_swap(None, SWAP, {"bob": Silent()})
    assert d(tr, "alice", "ACoin") == 0


def test_replay_reproduces_outcome():
    proto = Swaption(CANCEL)
    tr = execute(proto, proto.default_strategies())
    assert replay(proto, tr) == tr.outcome


def test_next_time_visits_timelock_boundaries():
    proto = AtomicSwap(SWAP)
    w = execute(proto, {"alice": Honest(phase1="renege"), "bob": Silent()}, until=0).world
    assert proto.is_published(w, "fund_a")
    assert next_time(proto, w, False) == SWAP.a_lock - 1
    assert next_time(proto, w, True) == 1


def test_execute_is_deterministic():
    a = run_swaption_with_cancellation(None, CANCEL).records()
    b = run_swaption_with_cancellation(None, CANCEL).records()
    assert a == b


# -- enumeration ---------------------------------------------------------------

@pytest.mark.parametrize("honest", ["alice", "bob"])
def test_swap_safe_for_each_honest_party(honest):
    proto = AtomicSwap(SWAP)
    found = enumerate_strategies(proto, {honest}, depth=8)
    rep = check_safety(found, [swap_guarantee(SWAP, honest)])
    assert rep.ok, rep.summary()
    assert rep.checked > 1


def test_swap_mutant_is_caught():
    bad = SwapTerms(coins(1), coins(1), T=10, b_expiry=12)
    rep = check_safety(enumerate_strategies(AtomicSwap(bad), {"bob"}, depth=8),
                       [swap_guarantee(bad, "bob")])
    assert not rep.ok
    assert "UNSAFE" in rep.summary()


def test_depth_zero_only_waits():
    found = explore(AtomicSwap(SWAP), {"bob": Honest()}, ["alice"], depth=0)
    assert len(found) == 1


@pytest.mark.parametrize("terms", [PLAIN, CANCEL, MARGIN], ids=["plain", "cancel", "margin"])
@pytest.mark.parametrize("honest", ["alice", "bob"])
def test_swaption_safe(terms, honest):
    gs = [swaption_guarantee(terms, honest)]
    if terms.cancellable and honest == "bob":
        gs.append(cheat_guarantee(terms))
    rep = check_safety(enumerate_strategies(Swaption(terms), {honest}, depth=8), gs)
    assert rep.ok, rep.summary()


def test_swapped_margin_expiries_fail():
    bad = SwaptionTerms(coins("0.1"), coins(1), coins(1), coins("0.2"), coins("0.2"),
                        margined=True, swap_margin_expiries=True)
    rep = check_safety(enumerate_strategies(Swaption(bad), {"bob"}, depth=8),
                       [swaption_guarantee(bad, "bob")])
    assert not rep.ok


# -- properties ---------------------------------------------------------------

def _labels(proto):
    w = proto.initial_world()
    out = set()
    tr = execute(proto, proto.default_strategies())
    out |= set(tr.labels())
    for s in (Honest(phase2="expire"), Honest(phase2="cancel", cancel_at=20),
              Honest(phase1="renege"), Honest(margin="default")):
        out |= set(execute(proto, {**proto.default_strategies(), "alice": s}).labels())
    return sorted(out | {"cheat"})


def scripts(labels):
    return st.dictionaries(st.sampled_from(labels), st.integers(0, 110), max_size=5)


@pytest.mark.parametrize("terms", [PLAIN, CANCEL, MARGIN], ids=["plain", "cancel", "margin"])
@given(data=st.data())
def test_random_adversary_never_breaks_guarantees(terms, data):
    proto = Swaption(terms)
    honest = data.draw(st.sampled_from(["alice", "bob"]))
    other = "bob" if honest == "alice" else "alice"
    plan = data.draw(scripts(_LABELS[terms]))
    tr = execute(proto, {honest: Honest(), other: Scripted(plan)})
    assert swaption_guarantee(terms, honest).holds(tr.outcome)
    if terms.cancellable and honest == "bob":
        assert cheat_guarantee(terms).holds(tr.outcome)


@pytest.mark.parametrize("terms", [PLAIN, CANCEL, MARGIN], ids=["plain", "cancel", "margin"])
@given(data=st.data())
def test_value_is_conserved(terms, data):
    proto = Swaption(terms)
    plans = {p: data.draw(scripts(_LABELS[terms])) for p in ("alice", "bob")}
    tr = execute(proto, {p: Scripted(plan) for p, plan in plans.items()})
    for chain in ("ACoin", "BCoin"):
        start = sum(tr.outcome.start(p, chain) for p in ("alice", "bob"))
        held = sum(tr.outcome.balance(p, chain) for p in ("alice", "bob"))
        locked = sum(v for c, _, v in tr.outcome.locked if c == chain)
        assert held + locked + tr.world.chain(chain).burned == start


@given(st.dictionaries(st.sampled_from(["fund_a", "claim_b", "refund_a"]), st.integers(0, 14),
                       max_size=3))
def test_swap_random_alice_never_hurts_bob(plan):
    tr = execute(AtomicSwap(SWAP), {"alice": Scripted(plan), "bob": Honest()})
    assert swap_guarantee(SWAP, "bob").holds(tr.outcome)


_LABELS = {t: _labels(Swaption(t)) for t in (PLAIN, CANCEL, MARGIN)}
