from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from swaptionsim import SwaptionTerms, World, coins
from swaptionsim import lightning
from swaptionsim.econ import (ACOIN, BCOIN, Decision, FloatingPosition, MarginPolicy, as_price,
                              decompose, default_decision, default_gain, intrinsic_value, kinks,
                              open_future, payoff_curve, price_grid, remark, required_margin)
from swaptionsim.engine import Future, Honest, execute, solve
from swaptionsim.engine.protocols import Swaption
from swaptionsim.engine.runner import value_in_acoin

M = SwaptionTerms(coins("0.1"), coins(1), coins(1), coins("0.2"), coins("0.2"), margined=True)
PLAIN = SwaptionTerms(coins("0.1"), coins(1), coins(1))


def test_as_price_rejects_floats_and_nonpositive():
    with pytest.raises(TypeError):
        as_price(1.5)
    with pytest.raises(ValueError):
        as_price("0")
    assert as_price("1.25") == Fraction(5, 4)


@pytest.mark.parametrize("r,value", [("0.5", 0), ("1", 0), ("1.1", "0.1"), ("1.25", "0.25"),
                                     ("2", "0.4")])
def test_intrinsic_value_acoin(r, value):
    assert intrinsic_value(M, r) == Fraction(value) * 10**6


def test_intrinsic_value_bcoin_is_acoin_over_price():
    for r in ("0.8", "1.2", "1.6"):
        assert intrinsic_value(M, r, BCOIN) == intrinsic_value(M, r) / as_price(r)


def test_unmargined_is_capped_by_principal():
    assert intrinsic_value(PLAIN, "2") == 10**6


def test_default_decision():
    assert default_decision(M, "1.3", "bob") == Decision.DEFAULT
    assert default_decision(M, "1.25", "bob") == Decision.HONOR
    assert default_decision(M, "0.5", "alice") == Decision.HONOR
    assert default_gain(M, "1.3") > 0 > default_gain(M, "1.1")
    with pytest.raises(ValueError):
        default_decision(M, "1", "carol")


def test_kinks_both_numeraires():
    assert kinks(M) == [1, Fraction(5, 4)]
    assert kinks(M, BCOIN) == [Fraction(4, 5), 1]


def test_price_grid_inclusive():
    g = price_grid("0.5", "2.0", "0.01")
    assert len(g) == 151 and g[0] == Fraction(1, 2) and g[-1] == 2


terms_st = st.builds(
    lambda pa, pb, mb_frac: SwaptionTerms(10, pa, pb, max(1, pa // 5),
                                          max(1, min(pb - 1, pb * mb_frac // 100)),
                                          margined=True),
    st.integers(10, 10**7), st.integers(10, 10**7), st.integers(1, 99))
prices = st.fractions(Fraction(1, 4), 4)


@given(terms_st, prices, st.sampled_from([ACOIN, BCOIN]))
def test_decompose_matches_payoff_exactly(terms, x, numeraire):
    [(_, v)] = payoff_curve(terms, [x], numeraire)
    assert decompose(terms, numeraire).payoff(x) == v


@given(terms_st, st.lists(prices, min_size=3, max_size=3, unique=True))
def test_payoff_is_linear_between_kinks(terms, xs):
    xs = sorted(xs)
    ks = kinks(terms)
    if any(xs[0] < k < xs[2] for k in ks):
        return
    (x0, v0), (x1, v1), (x2, v2) = payoff_curve(terms, xs)
    assert (v1 - v0) * (x2 - x1) == (v2 - v1) * (x1 - x0)


@given(terms_st, prices, prices)
def test_acoin_curve_is_a_call_and_bcoin_a_put(terms, a, b):
    lo, hi = sorted((a, b))
    [(_, va), (_, vb)] = payoff_curve(terms, [lo, hi], ACOIN)
    assert va <= vb
    [(_, va), (_, vb)] = payoff_curve(terms, [lo, hi], BCOIN)
    assert va >= vb


def test_payoff_curve_rejects_empty_grid():
    with pytest.raises(ValueError):
        payoff_curve(M, [])


@pytest.mark.parametrize("r", ["0.5", "1", "1.1", "1.25", "1.3", "2"])
def test_game_tree_agrees_with_formula(r):
    proto = Swaption(M)
    world = proto.post_funding_world()
    oc, _ = solve(proto, {p: Honest() for p in proto.parties}, {"alice", "bob"}, r, world=world)
    assert value_in_acoin(proto, oc, "alice", r) + M.premium == intrinsic_value(M, r)


def test_required_margin():
    pol = MarginPolicy()
    assert required_margin(M, "1.5", pol) == 333_334
    assert required_margin(M, "0.8", pol) == 0
    assert required_margin(M, "1.5", MarginPolicy(headroom=7)) == required_margin(M, "1.5", pol) + 7
    with pytest.raises(ValueError):
        MarginPolicy(remark_interval=1)


def _floating(margin=coins("0.2"), bob_funds=coins(2)):
    w = World.create(["ACoin", "BCoin"])
    w.fund("alice", "BCoin", [coins(5)])
    w.fund("bob", "BCoin", [coins(5)])
    ch = lightning.open_channel(w, "BCoin", "alice", "bob", coins(2), bob_funds)
    c = lightning.margin_contract(ch, "m", M, margin, 10)
    bal = dict(ch.balances)
    bal["bob"] -= margin
    lightning.update_channel(ch, bal, lightning.ContractDelta(add=(c,)))
    return w, ch, FloatingPosition(M, ch, "m", margin, 10)


def test_remark_resizes_atomically():
    w, ch, pos = _floating()
    total = sum(ch.balances.values()) + ch.locked()
    res = remark(w, pos, "1.5", MarginPolicy())
    assert res.position.margin == required_margin(M, "1.5", MarginPolicy())
    assert sum(ch.balances.values()) + ch.locked() == total
    assert list(ch.contracts) == [res.position.contract_id]
    down = remark(w, res.position, "1.1", MarginPolicy())
    assert down.released > 0


def test_remark_without_cooperation_changes_nothing():
    w, ch, pos = _floating()
    before = (dict(ch.balances), list(ch.contracts))
    res = remark(w, pos, "1.5", MarginPolicy(), cooperative=False)
    assert not res.cooperated
    assert (dict(ch.balances), list(ch.contracts)) == before


def test_remark_flags_impending_default():
    w, ch, pos = _floating(bob_funds=coins("0.3"))
    res = remark(w, pos, "4", MarginPolicy())
    assert res.impending_default and res.position is pos


FUT = SwaptionTerms(0, coins(1), coins(1), coins("0.2"), coins("0.2"), margined=True)


@pytest.mark.parametrize("r", ["0.85", "0.95", "1", "1.1", "1.2"])
def test_future_is_a_forward_inside_no_default_band(r):
    tr = open_future(None, FUT, price_path=r)
    if as_price(r) != 1:
        # At the strike neither leg is worth exercising; the value is zero either way.
        assert tr.outcome.delta("alice", "ACoin") == -coins(1)
        assert tr.outcome.delta("alice", "BCoin") == coins(1)
    value = value_in_acoin(Future(FUT, price_path=r), tr.outcome, "alice", r)
    assert value == (as_price(r) - 1) * coins(1)
