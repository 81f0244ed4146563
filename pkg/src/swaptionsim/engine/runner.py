"""Discrete-time execution, adversary enumeration and rational play.

Time only visits instants where something can change: timelock boundaries of
live outputs (one step either side as well), strategy hints, and the step after
any publication. At each visited instant parties act in ``(chain, party)``
order, in rounds, until a full round passes with nobody acting.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from ..chainsim import AbsTimeLeaf, RelTimeLeaf, World, iter_leaves
from .core import (DecisionPoint, Event, Move, Outcome, Protocol, Strategy, Trace,
                   amounts_of)

MAX_ROUNDS = 16


class DepthExceeded(RuntimeError):
    pass


class RoundLimit(RuntimeError):
    pass


def slots(protocol: Protocol) -> list:
    return [(c, p) for c in sorted(protocol.chains) for p in sorted(protocol.parties)]


def next_time(protocol: Protocol, world: World, touched: bool, hints=()) -> Optional[int]:
    now = world.now
    cands = set(protocol.hints(world)) | set(hints)
    if touched:
        cands.add(now + 1)
    for chain in world.chains.values():
        for out, conf in chain.utxos.values():
            for leaf in iter_leaves(out.predicate):
                if isinstance(leaf, AbsTimeLeaf):
                    cands.update((leaf.t - 1, leaf.t, leaf.t + 1))
                elif isinstance(leaf, RelTimeLeaf):
                    t = conf + leaf.delta
                    cands.update((t - 1, t, t + 1))
    later = [t for t in cands if now < t <= protocol.horizon]
    return min(later) if later else None


def _state(world: World) -> tuple:
    # Every published transaction is an ancestor of some unspent output, so
    # the UTXO set with confirmation times pins down the whole chain history.
    return tuple((frozenset((op, conf) for op, (_, conf) in c.utxos.items()),
                  frozenset((h, t) for h, (_, t) in c.revealed.items()))
                 for _, c in sorted(world.chains.items()))


_CACHE_LIMIT = 200_000


def _moves_at(protocol, world, chain, party):
    # Moves depend only on the clock and the chain contents. Cache them on the
    # world until either changes, and on the protocol across cloned worlds.
    stamp = (world.now,) + tuple(len(c.log) for c in world.chains.values())
    cache = world.__dict__.get("_moves")
    if cache is None or cache[0] != stamp:
        cache = world.__dict__["_moves"] = (stamp, {}, [None])
    per_party = cache[1].get(party)
    if per_party is None:
        if cache[2][0] is None:
            cache[2][0] = (world.now, _state(world), protocol.fingerprint(world))
        shared = protocol.__dict__.setdefault("_move_cache", {})
        key = (cache[2][0], party)
        per_party = shared.get(key)
        if per_party is None:
            if len(shared) > _CACHE_LIMIT:
                shared.clear()
            per_party = shared[key] = tuple(protocol.moves(world, party))
        cache[1][party] = per_party
    return tuple(m for m in per_party if m.chain == chain)


def apply_move(protocol: Protocol, world: World, move: Move, events: Optional[list] = None):
    if events is not None:
        events.append(Event(world.now, move.chain, move.party, f"decide:{move.action.value}"))
    for chain, tx in move.txs:
        txid = world.publish(chain, tx)
        if events is not None:
            events.append(Event(world.now, chain, move.party, f"publish:{tx.label}",
                                 txid.hex()[:16], amounts_of(protocol, tx), tx))


def _hints(strategies) -> set:
    out = set()
    for s in strategies.values():
        if isinstance(s, Strategy):
            out |= s.hints()
    return out


def execute(protocol: Protocol, strategies: dict, world: Optional[World] = None,
            max_rounds: int = MAX_ROUNDS, until: Optional[int] = None) -> Trace:
    """Run every party's strategy to the horizon and return the trace.

    With ``until`` the run stops once the clock would pass that time.
    """
    world = world.clone() if world is not None else protocol.initial_world()
    events: list = []
    hints = _hints(strategies)
    order = slots(protocol)
    touched = False
    while True:
        for _ in range(max_rounds):
            acted = False
            for chain, party in order:
                legal = _moves_at(protocol, world, chain, party)
                if not legal:
                    continue
                strat = strategies.get(party)
                move = strat(DecisionPoint(world.now, chain, party, legal), world, protocol) \
                    if strat is not None else None
                if move is not None:
                    apply_move(protocol, world, move, events)
                    acted = touched = True
            if not acted:
                break
        else:
            raise RoundLimit(f"parties still acting after {max_rounds} rounds at t={world.now}")
        t = next_time(protocol, world, touched, hints)
        if t is None or (until is not None and t > until):
            break
        world.now = t
        touched = False
    return Trace(protocol.name, events, protocol.outcome(world), world)


def replay(protocol: Protocol, trace: Trace) -> Outcome:
    """Republish a trace's transactions in order on a fresh world."""
    world = protocol.initial_world()
    for e in trace.events:
        if e.tx is None:
            continue
        world.now = e.time
        world.publish(e.chain, e.tx)
    return protocol.outcome(world)


def _key(protocol: Protocol, world: World, slot: int, active: bool, depth: int):
    return (world.now, slot, active, depth, _state(world), protocol.fingerprint(world))


@dataclass
class _Search:
    protocol: Protocol
    strategies: dict
    adversaries: frozenset
    hints: set
    max_nodes: int
    max_rounds: int
    memo: dict = field(default_factory=dict)
    nodes: int = 0
    order: list = field(default_factory=list)


def _explore(s: _Search, world: World, slot: int, active: bool, touched: bool, rounds: int,
             depth: int) -> dict:
    """Outcomes reachable from here -> one adversary profile producing each."""
    proto = s.protocol
    prefix: list = []
    while True:
        if slot == len(s.order):
            if active:
                rounds += 1
                if rounds >= s.max_rounds:
                    raise RoundLimit(f"parties still acting at t={world.now}")
                slot, active = 0, False
                continue
            t = next_time(proto, world, touched, s.hints)
            if t is None:
                return {proto.outcome(world): tuple(prefix)}
            world.now = t
            slot, rounds, touched = 0, 0, False
            continue
        chain, party = s.order[slot]
        legal = _moves_at(proto, world, chain, party)
        if not legal:
            slot += 1
            continue
        if party in s.adversaries and depth > 0:
            key = _key(proto, world, slot, active, depth) + (touched,)
            hit = s.memo.get(key)
            if hit is None:
                s.nodes += 1
                if s.nodes > s.max_nodes:
                    raise DepthExceeded(f"more than {s.max_nodes} adversary decision nodes")
                hit = {}
                for move in (None,) + legal:
                    w = world.clone()
                    if move is not None:
                        apply_move(proto, w, move)
                    sub = _explore(s, w, slot + 1, active or move is not None,
                                   touched or move is not None, rounds,
                                   depth - (move is not None))
                    step = () if move is None else ((world.now, party, move.label),)
                    for oc, prof in sub.items():
                        hit.setdefault(oc, step + prof)
                s.memo[key] = hit
            return {oc: tuple(prefix) + prof for oc, prof in hit.items()}
        if party in s.adversaries:
            move = None
        else:
            strat = s.strategies.get(party)
            move = strat(DecisionPoint(world.now, chain, party, legal), world, proto) \
                if strat is not None else None
        if move is not None:
            apply_move(proto, world, move)
            active = touched = True
        slot += 1


def explore(protocol: Protocol, strategies: dict, adversaries, depth: int = 6,
            max_nodes: int = 200_000, max_rounds: int = MAX_ROUNDS,
            world: Optional[World] = None) -> dict:
    """Every outcome reachable when ``adversaries`` may take any legal move.

    ``depth`` bounds how many non-wait actions the adversaries take in total;
    once spent they wait forever. ``world`` starts the search from a later
    state instead of the protocol's initial world. Returns ``{Outcome: profile}`` where profile
    lists ``(time, party, move label)`` of the adversary actions taken.
    """
    adversaries = frozenset(adversaries)
    search = _Search(protocol, strategies, adversaries, _hints(strategies), max_nodes,
                     max_rounds, order=slots(protocol))
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 20_000))
    try:
        start = world.clone() if world is not None else protocol.initial_world()
        return _explore(search, start, 0, False, False, 0, depth)
    finally:
        sys.setrecursionlimit(limit)


# -- rational play ---------------------------------------------------------------

def value_in_acoin(protocol: Protocol, outcome: Outcome, party: str, r) -> Fraction:
    """Change in ``party``'s holdings valued in the first chain's coin."""
    r = Fraction(r)
    first = protocol.chains[0]
    total = Fraction(0)
    for c in protocol.chains:
        price = 1 if c == first else r
        total += outcome.delta(party, c) * price
    return total


def _solve(s, world, slot, active, touched, rounds):
    proto = s.protocol
    while True:
        if slot == len(s.order):
            if active:
                rounds += 1
                if rounds >= s.max_rounds:
                    raise RoundLimit(f"parties still acting at t={world.now}")
                slot, active = 0, False
                continue
            t = next_time(proto, world, touched, s.hints)
            if t is None:
                return proto.outcome(world), ()
            world.now = t
            slot, rounds, touched = 0, 0, False
            continue
        chain, party = s.order[slot]
        legal = _moves_at(proto, world, chain, party)
        if not legal:
            slot += 1
            continue
        strat = s.strategies.get(party)
        point = DecisionPoint(world.now, chain, party, legal)
        if party in s.rational:
            key = _key(proto, world, slot, active, 0) + (touched,)
            hit = s.memo.get(key)
            if hit is None:
                s.nodes += 1
                if s.nodes > s.max_nodes:
                    raise DepthExceeded(f"more than {s.max_nodes} decision nodes")
                default = strat(point, world, proto) if strat is not None else None
                best = None
                for move in (default,) + tuple(m for m in (None,) + legal if m != default):
                    w = world.clone()
                    if move is not None:
                        apply_move(proto, w, move)
                    oc, path = _solve(s, w, slot + 1, active or move is not None,
                                      touched or move is not None, rounds)
                    v = value_in_acoin(proto, oc, party, s.price)
                    if best is None or v > best[0]:
                        step = () if move is None else ((world.now, party, move.label),)
                        best = (v, oc, step + path)
                hit = (best[1], best[2])
                s.memo[key] = hit
            return hit
        move = strat(point, world, proto) if strat is not None else None
        if move is not None:
            apply_move(proto, world, move)
            active = touched = True
        slot += 1


def solve(protocol: Protocol, strategies: dict, rational, price, world: Optional[World] = None,
          max_nodes: int = 200_000, max_rounds: int = MAX_ROUNDS):
    """Backward induction for ``rational`` parties valuing holdings at ``price``.

    Non-rational parties follow ``strategies``. Each rational party maximises
    its own ACoin-valued change; ties keep what its strategy would have done.
    Returns ``(Outcome, path)``.
    """
    search = _Search(protocol, strategies, frozenset(), _hints(strategies), max_nodes,
                     max_rounds, order=slots(protocol))
    search.rational = frozenset(rational)
    search.price = Fraction(price)
    world = world.clone() if world is not None else protocol.initial_world()
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 20_000))
    try:
        return _solve(search, world, 0, False, False, 0)
    finally:
        sys.setrecursionlimit(limit)
