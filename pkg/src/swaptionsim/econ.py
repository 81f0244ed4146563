"""Payoff arithmetic for margined swaptions.

Prices are exact ``Fraction`` values. ``r`` is always the ACoin value of one
BCoin; amounts are base units. Results that are values (not amounts to be
moved on chain) are returned as exact fractions of base units.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .terms import SwaptionTerms

ACOIN = "acoin"
BCOIN = "bcoin"


class Decision(enum.Enum):
    HONOR = "honor"
    DEFAULT = "default"


def as_price(r) -> Fraction:
    if isinstance(r, float):
        raise TypeError("prices must be exact; pass a Fraction, int, str or Decimal")
    if isinstance(r, Decimal):
        r = str(r)
    value = Fraction(r)
    if value <= 0:
        raise ValueError(f"price ratio must be positive, got {value}")
    return value


def _price(terms: SwaptionTerms, chain: str, r: Fraction) -> Fraction:
    return Fraction(1) if chain == terms.a_chain else r


def _legs(terms: SwaptionTerms, r: Fraction):
    """ACoin values of (buyer principal, writer principal, writer margin, buyer margin)."""
    b, w = terms.buyer, terms.writer
    pb = _price(terms, terms.chain_of(b), r)
    pw = _price(terms, terms.chain_of(w), r)
    w_cap = terms.margin_of(w) if terms.margined else terms.principal_of(w)
    b_cap = terms.margin_of(b) if terms.margined else terms.principal_of(b)
    return (terms.principal_of(b) * pb, terms.principal_of(w) * pw, w_cap * pw, b_cap * pb)


def _convert(terms: SwaptionTerms, value: Fraction, r: Fraction, numeraire: str) -> Fraction:
    if numeraire == ACOIN:
        return value
    if numeraire == BCOIN:
        return value / r
    raise ValueError(f"unknown numeraire {numeraire!r}")


def intrinsic_value(terms: SwaptionTerms, r, numeraire: str = ACOIN) -> Fraction:
    """Exercise value to the buyer, capped by the writer's margin.

    Excludes the premium and the buyer's own margin. Unmargined terms behave
    as if the writer's margin were the whole principal.
    """
    r = as_price(r)
    buyer_leg, writer_leg, writer_cap, _ = _legs(terms, r)
    value = max(Fraction(0), min(writer_cap, writer_leg - buyer_leg))
    return _convert(terms, value, r, numeraire)


def default_gain(terms: SwaptionTerms, r, writer_margin: Optional[int] = None) -> Fraction:
    """ACoin value the writer saves by defaulting instead of honoring (may be negative)."""
    r = as_price(r)
    buyer_leg, writer_leg, writer_cap, _ = _legs(terms, r)
    if writer_margin is not None:
        writer_cap = writer_margin * _price(terms, terms.chain_of(terms.writer), r)
    return max(Fraction(0), writer_leg - buyer_leg) - writer_cap


def default_decision(terms: SwaptionTerms, r, party: str) -> Decision:
    """Myopic margin decision at price ``r``; ties honor."""
    r = as_price(r)
    buyer_leg, writer_leg, writer_cap, buyer_cap = _legs(terms, r)
    if party == terms.writer:
        return Decision.DEFAULT if writer_leg - buyer_leg > writer_cap else Decision.HONOR
    if party == terms.buyer:
        # Defaulting forfeits the buyer's margin; the writer then forfeits theirs.
        walk_away = writer_cap - buyer_cap
        return Decision.DEFAULT if walk_away > intrinsic_value(terms, r) else Decision.HONOR
    raise ValueError(f"{party!r} is not a party to these terms")


def payoff_curve(terms: SwaptionTerms, grid: Iterable, numeraire: str = ACOIN) -> list:
    """Intrinsic value over a price grid.

    The grid holds the price of the underlying in the numeraire: BCoin priced
    in ACoin for ``acoin``, ACoin priced in BCoin for ``bcoin``. In those
    coordinates both curves are piecewise linear (a call and a put).
    """
    out = []
    for x in grid:
        x = as_price(x)
        r = x if numeraire == ACOIN else 1 / x
        out.append((x, intrinsic_value(terms, r, numeraire)))
    if not out:
        raise ValueError("empty price grid")
    return out


def price_grid(lo, hi, step) -> list:
    lo, hi, step = as_price(lo), as_price(hi), as_price(step)
    n = math.floor((hi - lo) / step)
    return [lo + i * step for i in range(n + 1)]


@dataclass(frozen=True)
class OptionLeg:
    kind: str           # "call" or "put"
    strike: Fraction
    quantity: int       # base units of the underlying

    def payoff(self, x: Fraction) -> Fraction:
        if self.kind == "call":
            return self.quantity * max(Fraction(0), x - self.strike)
        return self.quantity * max(Fraction(0), self.strike - x)


@dataclass(frozen=True)
class Spread:
    long: OptionLeg
    short: Optional[OptionLeg]

    def payoff(self, x) -> Fraction:
        x = as_price(x)
        value = self.long.payoff(x)
        if self.short is not None:
            value -= self.short.payoff(x)
        return value


def decompose(terms: SwaptionTerms, numeraire: str = ACOIN) -> Spread:
    """Long/short vanilla pair whose combined payoff equals the capped swaption.

    In ACoin this is a call spread with the upper leg sized so the slope above
    the default boundary equals the writer's margin; in BCoin it is a put spread.
    """
    if terms.buyer != terms.alice:
        raise ValueError("decomposition is stated for an ACoin-paying buyer")
    p_a, p_b = terms.p_a, terms.p_b
    cap = terms.m_b if terms.margined else p_b
    if numeraire == ACOIN:
        long = OptionLeg("call", Fraction(p_a, p_b), p_b)
        short = OptionLeg("call", Fraction(p_a, p_b - cap), p_b - cap) if cap < p_b else None
        return Spread(long, short)
    if numeraire == BCOIN:
        long = OptionLeg("put", Fraction(p_b, p_a), p_a)
        short = OptionLeg("put", Fraction(p_b - cap, p_a), p_a) if cap < p_b else None
        return Spread(long, short)
    raise ValueError(f"unknown numeraire {numeraire!r}")


def kinks(terms: SwaptionTerms, numeraire: str = ACOIN) -> list:
    spread = decompose(terms, numeraire)
    return sorted(leg.strike for leg in (spread.long, spread.short) if leg is not None)


@dataclass(frozen=True)
class MarginPolicy:
    threshold: int = 0          # ACoin base units of tolerated default gain
    headroom: int = 0           # extra writer-chain base units on top of the minimum
    remark_interval: int = 2

    def __post_init__(self):
        if self.threshold < 0 or self.headroom < 0:
            raise ValueError("threshold and headroom are non-negative")
        if self.remark_interval < 2:
            raise ValueError("remark interval must be at least two timesteps")


def required_margin(terms: SwaptionTerms, r, policy: MarginPolicy) -> int:
    """Smallest writer margin (base units, rounded up) keeping default gain under threshold."""
    r = as_price(r)
    buyer_leg, writer_leg, _, _ = _legs(terms, r)
    unit = _price(terms, terms.chain_of(terms.writer), r)
    need = (writer_leg - buyer_leg - policy.threshold) / unit
    return max(0, math.ceil(need)) + policy.headroom


@dataclass
class FloatingPosition:
    """A writer margin held as a contract inside a payment channel."""
    terms: SwaptionTerms
    channel: object
    contract_id: str
    margin: int
    margin_expiry: int
    generation: int = 0


@dataclass(frozen=True)
class RemarkResult:
    position: FloatingPosition
    released: int = 0           # returned to the writer's balance
    added: int = 0              # newly locked from the writer's balance
    impending_default: bool = False
    cooperated: bool = True


def remark(world, position: FloatingPosition, r, policy: MarginPolicy,
           cooperative: bool = True) -> RemarkResult:
    """Cancel the margin contract and recreate it at the current requirement.

    Both steps happen in one channel update, so either both land or neither.
    """
    from . import lightning

    channel = position.channel
    if not cooperative:
        return RemarkResult(position, cooperated=False)
    terms = position.terms
    new_margin = required_margin(terms, r, policy)
    writer = terms.writer
    delta = new_margin - position.margin
    if delta > channel.balances[writer]:
        return RemarkResult(position, impending_default=True)
    expiry = world.now + policy.remark_interval
    gen = position.generation + 1
    new_id = f"{position.contract_id.split('#')[0]}#{gen}"
    balances = dict(channel.balances)
    balances[writer] -= delta
    add = []
    if new_margin > 0:
        add.append(lightning.margin_contract(channel, new_id, terms, new_margin, expiry))
    lightning.update_channel(channel, balances,
                            lightning.ContractDelta(add=tuple(add),
                                                    remove=(position.contract_id,)))
    moved = replace(position, contract_id=new_id, margin=new_margin, margin_expiry=expiry,
                    generation=gen)
    return RemarkResult(moved, released=max(0, -delta), added=max(0, delta))


def open_future(world, strike_terms: SwaptionTerms, strategies=None, price_path=None):
    """Long call plus short put with one shared funding secret; returns the trace."""
    from .engine.protocols import Future
    from .engine.runner import execute

    protocol = Future(strike_terms, price_path=price_path, world=world)
    return execute(protocol, strategies or protocol.default_strategies())
