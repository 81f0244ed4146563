import pytest
from hypothesis import given, strategies as st

from swaptionsim import SwaptionTerms, World, coins
from swaptionsim.lightning import (ChannelError, ContractDelta, InsufficientCapacity,
                                   InsufficientFunds, Path, RoutingError, close_channel,
                                   decouple, network, open_channel, party_totals, positions,
                                   route_swaption, settle, totals_table, unwind, update_channel)

T = SwaptionTerms(coins("0.1"), coins(1), coins(1), E=20)
PEOPLE = ["alice", "bob", "carol", "dave"]


def world(edges=(("alice", "carol"), ("carol", "bob"), ("dave", "alice")), fund=coins(5)):
    w = World.create(["ACoin", "BCoin"])
    for p in PEOPLE:
        w.fund(p, "ACoin", [coins(10)])
        w.fund(p, "BCoin", [coins(10)])
    for a, b in edges:
        for ch in ("ACoin", "BCoin"):
            open_channel(w, ch, a, b, fund, fund)
    return w


A3 = Path("ACoin", ("alice", "carol", "bob"))
B3 = Path("BCoin", ("bob", "carol", "alice"))


def test_open_channel_locks_wallet_funds():
    w = World.create(["ACoin"])
    w.fund("a", "ACoin", [coins(3)])
    w.fund("b", "ACoin", [coins(1)])
    ch = open_channel(w, "ACoin", "a", "b", coins(2), 0)
    assert w.balance("a", "ACoin") == coins(1)
    assert party_totals(w, "a")["ACoin"] == coins(3)
    assert ch.capacity == coins(2)
    with pytest.raises(InsufficientFunds):
        open_channel(w, "ACoin", "b", "a", coins(5), 0)
    with pytest.raises(ChannelError):
        open_channel(w, "ACoin", "a", "a", 1, 1)


def test_update_needs_consent_and_conservation():
    w = world()
    ch = network(w).channel("ACoin", "alice", "carol")
    before = dict(ch.balances)
    update_channel(ch, {"alice": coins(4), "carol": coins(6)}, consent={"carol": False})
    assert ch.balances == before
    with pytest.raises(ChannelError):
        update_channel(ch, {"alice": coins(4), "carol": coins(7)})
    with pytest.raises(ChannelError):
        update_channel(ch, dict(ch.balances), ContractDelta(remove=("nope",)))
    update_channel(ch, {"alice": coins(4), "carol": coins(6)})
    assert ch.version == 1


def test_close_publishes_latest_state():
    w = world()
    ch = network(w).channel("ACoin", "alice", "carol")
    update_channel(ch, {"alice": coins(4), "carol": coins(6)})
    close_channel(w, ch)
    assert w.balance("carol", "ACoin") == coins(6)
    with pytest.raises(ChannelError):
        close_channel(w, ch)
    with pytest.raises(ChannelError):
        update_channel(ch, dict(ch.balances))


def test_path_validation():
    with pytest.raises(RoutingError):
        Path("ACoin", ("alice",))
    with pytest.raises(RoutingError):
        Path("ACoin", ("alice", "alice"))
    with pytest.raises(RoutingError):
        Path("ACoin", ("a", "b", "a"))


def test_route_builds_expiry_staircase():
    w = world()
    pos = route_swaption(w, A3, B3, T)
    assert pos.staircase_ok()
    assert pos.expiries() == [20, 21, 22, 23]
    assert positions(w) == [("alice", "bob")]


def test_route_checks_capacity_up_front():
    w = world(fund=coins("0.5"))
    with pytest.raises(InsufficientCapacity):
        route_swaption(w, A3, B3, T)
    assert all(not ch.contracts for ch in network(w).channels)


def test_premium_forwarded_with_fee():
    w = world()
    route_swaption(w, A3, B3, T, fee_bps=100)
    ac = network(w).channel("ACoin", "alice", "carol")
    cb = network(w).channel("ACoin", "carol", "bob")
    assert ac.balances["carol"] - coins(5) == coins("0.101")
    assert cb.balances["bob"] - coins(5) == coins("0.1")


def _exercised(close=False, dec=False):
    w = world()
    pos = route_swaption(w, A3, B3, T, {"alice": {"exercise_at": 5}})
    if dec:
        decouple(w, pos, "carol")
    if close:
        close_channel(w, network(w).channel("ACoin", "carol", "bob"))
    settle(w)
    return totals_table(w, PEOPLE)


def test_routed_exercise_equivalences():
    base = _exercised()
    assert base == _exercised(close=True) == _exercised(dec=True) == _exercised(True, True)
    totals = {(p, c): v for p, c, v in base}
    assert totals[("alice", "ACoin")] == coins(10) - coins("1.1")
    assert totals[("alice", "BCoin")] == coins(11)
    assert totals[("carol", "ACoin")] == coins(10)


def test_expired_route_refunds_everyone_but_premium():
    w = world()
    route_swaption(w, A3, B3, T)
    settle(w)
    totals = {(p, c): v for p, c, v in totals_table(w, PEOPLE)}
    assert totals[("alice", "ACoin")] == coins(10) - coins("0.1")
    assert totals[("bob", "BCoin")] == coins(10)


def test_silent_intermediary_breaks_route():
    w = world()
    pos = route_swaption(w, A3, B3, T, {"alice": {"exercise_at": 5}, "carol": "silent"})
    assert pos.status == "broken"
    settle(w)
    start = {(p, c): coins(10) for p in PEOPLE for c in ("ACoin", "BCoin")}
    assert {(p, c): v for p, c, v in totals_table(w, PEOPLE)} == start


def test_decoupling_twice_keeps_the_hedge_chain():
    edges = (("alice", "carol"), ("carol", "dave"), ("dave", "bob"))
    runs = []
    for nodes in ((), ("carol", "dave")):
        w = world(edges, fund=coins(3))
        pos = route_swaption(w, Path("ACoin", ("alice", "carol", "dave", "bob")),
                             Path("BCoin", ("bob", "dave", "carol", "alice")), T,
                             {"alice": {"exercise_at": 5}})
        for node in nodes:
            inner = [p for p in network(w).positions if node in [h.payee for h in p.hops_a[:-1]]]
            decouple(w, inner[0], node)
        settle(w)
        runs.append(totals_table(w, PEOPLE))
    assert runs[0] == runs[1]


def test_decouple_requires_intermediary_and_consent():
    w = world()
    pos = route_swaption(w, A3, B3, T)
    with pytest.raises(RoutingError):
        decouple(w, pos, "alice")
    same, none = decouple(w, pos, "carol", consent=False)
    assert same is pos and none is None
    outer, inner = decouple(w, pos, "carol")
    assert (outer.buyer, outer.writer) == ("alice", "carol")
    assert (inner.buyer, inner.writer) == ("carol", "bob")
    assert inner.E == outer.hops_b[0].expiry + 1
    assert outer.hash != inner.hash


def test_figure_seven_unwind():
    w = world()
    first = route_swaption(w, A3, B3, T)
    ac, cb = decouple(w, first, "carol")
    second = route_swaption(w, Path("ACoin", ("carol", "alice", "dave")),
                            Path("BCoin", ("dave", "alice", "carol")), T, mirror=ac)
    ca, ad = decouple(w, second, "alice")
    assert positions(w) == [("alice", "carol"), ("alice", "dave"), ("carol", "alice"),
                            ("carol", "bob")]
    trace = unwind(w, ac, ca)
    assert trace.outcome.initial == trace.outcome.balances
    assert positions(w) == [("alice", "dave"), ("carol", "bob")]
    with pytest.raises(RoutingError):
        unwind(w, ad, cb)


def test_unwind_rejects_non_opposite_positions():
    w = world(edges=(("alice", "bob"),))
    p1 = route_swaption(w, Path("ACoin", ("alice", "bob")), Path("BCoin", ("bob", "alice")), T)
    p2 = route_swaption(w, Path("ACoin", ("alice", "bob")), Path("BCoin", ("bob", "alice")), T)
    with pytest.raises(RoutingError):
        unwind(w, p1, p2)


@given(st.integers(1, 15), st.booleans(), st.booleans())
def test_totals_never_change_outside_premium_and_exercise(at, close, dec):
    w = world()
    pos = route_swaption(w, A3, B3, T, {"alice": {"exercise_at": at}})
    if dec:
        decouple(w, pos, "carol")
    if close:
        close_channel(w, network(w).channel("BCoin", "carol", "bob"))
    settle(w)
    totals = {(p, c): v for p, c, v in totals_table(w, PEOPLE)}
    for c in ("ACoin", "BCoin"):
        assert sum(totals[(p, c)] for p in PEOPLE) == len(PEOPLE) * coins(10)
    assert totals[("carol", "ACoin")] == totals[("carol", "BCoin")] == coins(10)
    assert totals[("alice", "BCoin")] == coins(11)
