"""Payment channels, routed swaptions, decoupling and unwinding.

A channel is a two-party ledger on one chain backed by a 2-of-2 funding
output. Updates are cooperative: both parties must consent, and balances plus
contract amounts always equal the funding amount. Closing materialises the
latest state on chain, after which the remaining contracts settle as ordinary
outputs.

A routed swaption is a cycle of HTLC contracts on the exercise hash: ACoin
hops from the buyer to the writer and BCoin hops back. The buyer claims the
last BCoin hop by revealing the secret; every other hop is claimed one step
after its claimant learns the secret from the hop below it, so each hop
expires exactly one step after the hop that teaches its claimant the secret.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .chainsim import (AllOf, Output, OutPoint, SigLeaf, World, hash_secret, make_tx, sign,
                       SigMode, Witness)
from .contracts import (HtlcSpec, MarginContractSpec, htlc_predicate,
                        margin_contract_predicate)
from .engine.core import Event, Outcome, Trace
from .terms import SwaptionTerms


class ChannelError(ValueError):
    pass


class InsufficientFunds(ChannelError):
    pass


class InsufficientCapacity(ChannelError):
    pass


class RoutingError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelContract:
    id: str
    output: Output
    meta: tuple = ()            # (key, value) pairs describing the contract's role

    @property
    def amount(self) -> int:
        return self.output.amount


@dataclass(frozen=True)
class ContractDelta:
    add: tuple = ()
    remove: tuple = ()


@dataclass(eq=False)
class Channel:
    id: str
    chain: str
    parties: tuple
    balances: dict
    capacity: int
    funding: OutPoint
    contracts: dict = field(default_factory=dict)    # id -> ChannelContract
    consent: dict = field(default_factory=dict)      # party -> bool
    closed: bool = False
    onchain: dict = field(default_factory=dict)      # contract id -> OutPoint after close
    version: int = 0

    def other(self, party: str) -> str:
        a, b = self.parties
        return b if party == a else a

    def locked(self) -> int:
        return sum(c.amount for c in self.contracts.values())

    def check(self) -> None:
        if any(v < 0 for v in self.balances.values()):
            raise ChannelError(f"{self.id}: negative balance")
        if sum(self.balances.values()) + self.locked() != self.capacity:
            raise ChannelError(f"{self.id}: balances and contracts do not add up to capacity")


@dataclass
class Network:
    channels: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    events: list = field(default_factory=list)
    fee_bps: int = 0
    ids: itertools.count = field(default_factory=itertools.count)

    def channel(self, chain: str, a: str, b: str) -> Channel:
        for ch in self.channels:
            if ch.chain == chain and set(ch.parties) == {a, b} and not ch.closed:
                return ch
        for ch in self.channels:
            if ch.chain == chain and set(ch.parties) == {a, b}:
                return ch
        raise RoutingError(f"no {chain} channel between {a} and {b}")

    def log(self, world, chain, party, event, amounts=()):
        self.events.append(Event(world.now, chain, party, event, "-", tuple(amounts)))


def network(world: World) -> Network:
    """The channel network living alongside ``world``'s chains."""
    net = world.__dict__.get("_network")
    if net is None:
        net = world.__dict__["_network"] = Network()
    return net


def party_totals(world: World, party: str) -> dict:
    """On-chain wallet plus open-channel balance, per chain."""
    out = {c: world.balance(party, c) for c in sorted(world.chains)}
    for ch in network(world).channels:
        if not ch.closed and party in ch.parties:
            out[ch.chain] += ch.balances[party]
    return out


# -- channel lifecycle -----------------------------------------------------------

def _two_of_two(a: str, b: str):
    return AllOf(SigLeaf(a), SigLeaf(b))


def open_channel(world: World, chain: str, a: str, b: str, fund_a: int, fund_b: int) -> Channel:
    if a == b:
        raise ChannelError("a channel needs two distinct parties")
    if fund_a < 0 or fund_b < 0 or fund_a + fund_b == 0:
        raise ChannelError("channel funding must be non-negative and not empty")
    inputs, outputs = [], [Output(fund_a + fund_b, _two_of_two(a, b))]
    for party, amount in ((a, fund_a), (b, fund_b)):
        if not amount:
            continue
        picked, total = [], 0
        for op, v in world.wallet(party, chain):
            if total >= amount:
                break
            picked.append((op, party))
            total += v
        if total < amount:
            raise InsufficientFunds(f"{party} has {total} of {amount} on {chain}")
        inputs += picked
        if total > amount:
            outputs.append(Output(total - amount, SigLeaf(party)))
    net = network(world)
    cid = f"ch{next(net.ids)}:{a}-{b}:{chain}"
    tx = make_tx([op for op, _ in inputs], outputs, 0, f"open/{cid}")
    for i, (_, party) in enumerate(inputs):
        tx = tx.with_witness(i, Witness(frozenset(), frozenset({sign(party, tx, SigMode.COMMIT_ALL, i)})))
    txid = world.publish(chain, tx)
    ch = Channel(cid, chain, (a, b), {a: fund_a, b: fund_b}, fund_a + fund_b, OutPoint(txid, 0),
                 consent={a: True, b: True})
    net.channels.append(ch)
    net.log(world, chain, a, f"open:{cid}", (f"{a}={fund_a}", f"{b}={fund_b}"))
    return ch


def update_channel(channel: Channel, new_balances: dict, delta: Optional[ContractDelta] = None,
                   consent: Optional[dict] = None) -> Channel:
    """Apply a cooperative state update; without both consents nothing changes."""
    delta = delta or ContractDelta()
    if channel.closed:
        raise ChannelError(f"{channel.id} is closed")
    if set(new_balances) != set(channel.parties):
        raise ChannelError("balances must name exactly the channel's two parties")
    consent = {**channel.consent, **(consent or {})}
    if not all(consent.get(p, False) for p in channel.parties):
        return channel
    contracts = dict(channel.contracts)
    for cid in delta.remove:
        if cid not in contracts:
            raise ChannelError(f"{channel.id}: no contract {cid!r}")
        del contracts[cid]
    for c in delta.add:
        if c.id in contracts:
            raise ChannelError(f"{channel.id}: duplicate contract {c.id!r}")
        contracts[c.id] = c
    if any(v < 0 for v in new_balances.values()):
        raise ChannelError(f"{channel.id}: negative balance")
    if sum(new_balances.values()) + sum(c.amount for c in contracts.values()) != channel.capacity:
        raise ChannelError(f"{channel.id}: update does not conserve the channel's funds")
    channel.balances = dict(new_balances)
    channel.contracts = contracts
    channel.version += 1
    return channel


def close_channel(world: World, channel: Channel):
    """Publish the latest state: balance outputs plus one output per live contract."""
    if channel.closed:
        raise ChannelError(f"{channel.id} is already closed")
    outs, ids = [], []
    for p in channel.parties:
        if channel.balances[p]:
            outs.append(Output(channel.balances[p], SigLeaf(p)))
            ids.append(None)
    for cid in sorted(channel.contracts):
        outs.append(channel.contracts[cid].output)
        ids.append(cid)
    tx = make_tx([channel.funding], outs, 0, f"close/{channel.id}")
    a, b = channel.parties
    sigs = frozenset(sign(p, tx, SigMode.COMMIT_ALL, 0) for p in (a, b))
    tx = tx.with_witness(0, Witness(frozenset(), sigs))
    txid = world.publish(channel.chain, tx)
    channel.closed = True
    channel.onchain = {cid: OutPoint(txid, i) for i, cid in enumerate(ids) if cid is not None}
    network(world).log(world, channel.chain, a, f"close:{channel.id}",
                       [f"{p}={channel.balances[p]}" for p in channel.parties])
    return [tx]


def margin_contract(channel: Channel, contract_id: str, terms: SwaptionTerms, amount: int,
                    expiry: int) -> ChannelContract:
    """Writer margin held inside ``channel`` for the buyer."""
    spec = MarginContractSpec(terms.writer, terms.buyer, amount, terms.principal_of(terms.writer),
                              expiry)
    return ChannelContract(contract_id, Output(amount, margin_contract_predicate(spec)),
                           (("kind", "margin"), ("expiry", expiry)))


# -- routed swaptions ------------------------------------------------------------

@dataclass(frozen=True)
class Path:
    chain: str
    nodes: tuple

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise RoutingError("a path needs at least two nodes")
        pairs = list(zip(self.nodes, self.nodes[1:]))
        if any(a == b for a, b in pairs):
            raise RoutingError("a path cannot step from a node to itself")
        if len({frozenset(p) for p in pairs}) != len(pairs):
            raise RoutingError("a path may not reuse a channel")


@dataclass(eq=False)
class Hop:
    channel: Channel
    contract_id: str
    payer: str
    payee: str
    amount: int
    expiry: int
    settled: Optional[str] = None      # "claimed" or "refunded"


@dataclass(eq=False)
class RoutedPosition:
    id: str
    buyer: str
    writer: str
    terms: SwaptionTerms
    hash: bytes
    secret_owner: str
    secret_label: str
    hops_a: list                       # buyer -> writer, ACoin
    hops_b: list                       # writer -> buyer, BCoin
    E: int
    status: str = "open"               # open, broken, settled, unwound
    exercise_at: Optional[int] = None
    hedge: Optional["RoutedPosition"] = None
    known: dict = field(default_factory=dict)   # party -> time the secret was learned

    def hops(self) -> list:
        """Hops in claim order (the buyer's BCoin hop first)."""
        return list(reversed(self.hops_b)) + list(reversed(self.hops_a))

    def expiries(self) -> list:
        return [h.expiry for h in self.hops()]

    def staircase_ok(self) -> bool:
        ex = self.expiries()
        return ex[0] == self.E and all(b == a + 1 for a, b in zip(ex, ex[1:]))

    def counterparties(self) -> tuple:
        return (self.buyer, self.writer)

    def live_hops(self) -> list:
        return [h for h in self.hops() if h.settled is None]


def _hop_predicate(hop_payee, hop_payer, h, expiry):
    return htlc_predicate(HtlcSpec(hop_payee, hop_payer, h, expiry))


def _install(world, net, pos: RoutedPosition, pairs, strategies) -> bool:
    """Install the hop contracts in funding order; stop at the first refusal."""
    for chain, payer, payee, amount, expiry, hops in pairs:
        ch = net.channel(chain, payer, payee)
        refusing = [p for p in (payer, payee) if strategies.get(p) == "silent"]
        if refusing:
            net.log(world, chain, refusing[0], f"refuse:{pos.id}")
            return False
        cid = f"{pos.id}/{len(pos.hops_a) + len(pos.hops_b)}"
        contract = ChannelContract(cid, Output(amount, _hop_predicate(payee, payer, pos.hash,
                                                                      expiry)),
                                   (("position", pos.id), ("expiry", expiry)))
        bal = dict(ch.balances)
        bal[payer] -= amount
        update_channel(ch, bal, ContractDelta(add=(contract,)))
        hops.append(Hop(ch, cid, payer, payee, amount, expiry))
        net.log(world, chain, payer, f"offer:{cid}", (f"{payee}={amount}", f"expiry={expiry}"))
    return True


def _staircase(path_a: Path, path_b: Path, E: int):
    """Expiry per hop: buyer's BCoin hop at E, +1 for every hop further round the cycle."""
    kb = len(path_b.nodes) - 1
    ka = len(path_a.nodes) - 1
    exp_b = [E + kb - 1 - i for i in range(kb)]
    exp_a = [E + kb + ka - 1 - i for i in range(ka)]
    return exp_a, exp_b


def _fee(amount: int, bps: int) -> int:
    return amount * bps // 10_000


def route_swaption(world: World, path_A: Path, path_B: Path, terms: SwaptionTerms,
                   strategies: Optional[dict] = None, fee_bps: Optional[int] = None,
                   mirror: Optional[RoutedPosition] = None) -> RoutedPosition:
    """Open a routed swaption: buyer at the head of ``path_A``, writer at its tail.

    Margined routing is not offered: hops lock full principals. ``mirror``
    builds the opposite of an existing position between the same two parties,
    on the same hash and expiring one step later, ready for ``unwind``.
    """
    if terms.margined or terms.cancellable:
        raise RoutingError("routed swaptions lock full principals and are not cancellable")
    strategies = dict(strategies or {})
    net = network(world)
    bps = net.fee_bps if fee_bps is None else fee_bps
    buyer, writer = path_A.nodes[0], path_A.nodes[-1]
    if path_B.nodes[0] != writer or path_B.nodes[-1] != buyer:
        raise RoutingError("path_B must run from the writer back to the buyer")
    if path_A.chain == path_B.chain:
        raise RoutingError("the two legs must be on different chains")
    p_buyer = terms.principal_of(terms.buyer)
    p_writer = terms.principal_of(terms.writer)
    E = terms.E if mirror is None else mirror.E + 1
    exp_a, exp_b = _staircase(path_A, path_B, E)
    # capacity check before touching anything
    premium_in = [terms.premium]
    for _ in path_A.nodes[1:-1]:
        premium_in.insert(0, premium_in[0] + _fee(premium_in[0], bps))
    legs = []
    for i, (u, v) in enumerate(zip(path_A.nodes, path_A.nodes[1:])):
        legs.append((path_A.chain, u, v, p_buyer, exp_a[i], premium_in[i]))
    for i, (u, v) in enumerate(zip(path_B.nodes, path_B.nodes[1:])):
        legs.append((path_B.chain, u, v, p_writer, exp_b[i], 0))
    for chain, u, v, amount, _, prem in legs:
        ch = net.channel(chain, u, v)
        if ch.closed:
            raise RoutingError(f"{ch.id} is closed")
        if ch.balances[u] < amount + prem:
            raise InsufficientCapacity(f"{u} has {ch.balances[u]} in {ch.id}, needs "
                                       f"{amount + prem}")
    pid = f"pos{next(net.ids)}"
    if mirror is not None:
        if buyer != mirror.writer or mirror.buyer not in path_A.nodes[1:]:
            raise RoutingError("a mirror is bought by the original writer through the "
                               "original buyer")
        h, owner, label = mirror.hash, mirror.secret_owner, mirror.secret_label
    else:
        label = f"{pid}/{buyer}"
        h, owner = hash_secret(world.secret(label)), buyer
    pos = RoutedPosition(pid, buyer, writer, terms, h, owner, label, [], [], E,
                         known={owner: -1})
    b = strategies.get(buyer)
    if isinstance(b, dict):
        pos.exercise_at = b.get("exercise_at")
    ok = _install(world, net, pos,
                  [(c, u, v, amt, ex, pos.hops_a) for c, u, v, amt, ex, _ in legs[:len(exp_a)]] +
                  [(c, u, v, amt, ex, pos.hops_b) for c, u, v, amt, ex, _ in legs[len(exp_a):]],
                  strategies)
    net.positions.append(pos)
    if not ok:
        pos.status = "broken"
        return pos
    for (chain, u, v, _, _, prem) in legs[:len(exp_a)]:
        if prem:
            ch = net.channel(chain, u, v)
            bal = dict(ch.balances)
            bal[u] -= prem
            bal[v] += prem
            update_channel(ch, bal)
            net.log(world, chain, u, f"premium:{pid}", (f"{v}={prem}",))
    return pos


def _nodes_a(pos):
    return [pos.hops_a[0].payer] + [h.payee for h in pos.hops_a]


def _nodes_b(pos):
    return [pos.hops_b[0].payer] + [h.payee for h in pos.hops_b]


def _replace_hops(world, net, pos, hops, new_hash, expiries):
    out = []
    for hop, ex in zip(hops, expiries):
        ch = hop.channel
        cid = f"{hop.contract_id}'"
        c = ChannelContract(cid, Output(hop.amount, _hop_predicate(hop.payee, hop.payer,
                                                                   new_hash, ex)),
                            (("position", pos.id), ("expiry", ex)))
        update_channel(ch, dict(ch.balances), ContractDelta(add=(c,), remove=(hop.contract_id,)))
        out.append(Hop(ch, cid, hop.payer, hop.payee, hop.amount, ex))
    return out


def decouple(world: World, position: RoutedPosition, node: str, consent: bool = True):
    """Split ``position`` at ``node`` into buyer-node and node-writer positions.

    The node becomes writer of the first and buyer of the second, on its own
    secret; when the first is exercised against it, it exercises the second a
    step later. Returns ``(outer, inner)``.
    """
    net = network(world)
    if position.status != "open" or position.live_hops() != position.hops():
        raise RoutingError("only an untouched open position can be decoupled")
    na, nb = _nodes_a(position), _nodes_b(position)
    if node not in na[1:-1] or node not in nb[1:-1]:
        raise RoutingError(f"{node} is not an intermediary on both paths")
    if not consent:
        return position, None
    ia, ib = na.index(node), nb.index(node)
    t = position.terms
    outer_a, inner_a = position.hops_a[:ia], position.hops_a[ia:]
    inner_b, outer_b = position.hops_b[:ib], position.hops_b[ib:]
    pa, pb = Path(position.hops_a[0].channel.chain, tuple(na[:ia + 1])), \
        Path(position.hops_b[0].channel.chain, tuple(nb[ib:]))
    ex_a, ex_b = _staircase(pa, pb, position.E)
    oid, iid = f"pos{next(net.ids)}", f"pos{next(net.ids)}"
    outer = RoutedPosition(oid, position.buyer, node, t, position.hash, position.secret_owner,
                           position.secret_label, [], [], position.E,
                           exercise_at=position.exercise_at, known=dict(position.known))
    outer.hops_a = _replace_hops(world, net, outer, outer_a, position.hash, ex_a)
    outer.hops_b = _replace_hops(world, net, outer, outer_b, position.hash, ex_b)
    # the node learns the secret when its BCoin hop to the buyer side is claimed
    e_node = outer.hops_b[0].expiry
    label = f"{iid}/{node}"
    h = hash_secret(world.secret(label))
    qa, qb = Path(pa.chain, tuple(na[ia:])), Path(pb.chain, tuple(nb[:ib + 1]))
    inner_E = e_node + 1
    ia_ex, ib_ex = _staircase(qa, qb, inner_E)
    inner = RoutedPosition(iid, node, position.writer, t, h, node, label, [], [], inner_E,
                           known={node: -1})
    inner.hops_a = _replace_hops(world, net, inner, inner_a, h, ia_ex)
    inner.hops_b = _replace_hops(world, net, inner, inner_b, h, ib_ex)
    outer.hedge = inner
    # whoever hedged with the old position now hedges with its outer half
    for p in net.positions:
        if p.hedge is position:
            p.hedge = outer
    position.status = "decoupled"
    net.positions.remove(position)
    net.positions += [outer, inner]
    net.log(world, pa.chain, node, f"decouple:{position.id}", (oid, iid))
    return outer, inner


def _is_direct(pos: RoutedPosition) -> bool:
    return len(pos.hops_a) == 1 and len(pos.hops_b) == 1


def unwind(world: World, pos1: RoutedPosition, pos2: RoutedPosition) -> Trace:
    """Cancel two opposite identical direct positions by exercising both at once.

    The flows are circular, so each party's holdings are unchanged; the four
    hop contracts simply disappear from the channels.
    """
    net = network(world)
    inner, outer = sorted((pos1, pos2), key=lambda p: p.E)
    if not (_is_direct(inner) and _is_direct(outer)):
        raise RoutingError("only direct positions between two parties can be unwound")
    if (inner.buyer, inner.writer) != (outer.writer, outer.buyer):
        raise RoutingError("positions are not opposite")
    ti, to = inner.terms, outer.terms
    if (ti.p_a, ti.p_b) != (to.p_a, to.p_b) or inner.hash != outer.hash:
        raise RoutingError("positions are not identical")
    if outer.E != inner.E + 1:
        raise RoutingError("the outer position must expire one step after the inner")
    if inner.live_hops() != inner.hops() or outer.live_hops() != outer.hops():
        raise RoutingError("positions already partly settled")
    parties = sorted({inner.buyer, inner.writer})
    chains = sorted(world.chains)
    before = tuple((p, c, v) for p in parties for c, v in _net_holdings(world, p).items())
    start = len(net.events)
    by_channel = {}
    for pos in (inner, outer):
        for hop in pos.hops():
            by_channel.setdefault(hop.channel.id, (hop.channel, []))[1].append(hop)
    for _, (ch, hops) in sorted(by_channel.items()):
        bal = dict(ch.balances)
        for hop in hops:
            bal[hop.payee] += hop.amount
            hop.settled = "claimed"
        update_channel(ch, bal, ContractDelta(remove=tuple(h.contract_id for h in hops)))
        net.log(world, ch.chain, inner.secret_owner, f"unwind:{ch.id}",
                [f"{h.payee}={h.amount}" for h in hops])
    inner.status = outer.status = "unwound"
    net.positions = [p for p in net.positions if p not in (inner, outer)]
    after = tuple((p, c, v) for p in parties for c, v in _net_holdings(world, p).items())
    return Trace("unwind", net.events[start:], Outcome(before, after, (), (), ()))


def _net_holdings(world: World, party: str) -> dict:
    """Totals plus amounts the party has locked into still-open hop contracts."""
    out = party_totals(world, party)
    for pos in network(world).positions:
        for hop in pos.live_hops():
            if hop.payer == party:
                out[hop.channel.chain] += hop.amount
    return out


def positions(world: World) -> list:
    """Live positions as ``(buyer, writer)`` pairs, sorted."""
    return sorted((p.buyer, p.writer) for p in network(world).positions
                  if p.status in ("open", "broken") and p.live_hops())


# -- settlement ------------------------------------------------------------------

def _claim(world, net, pos, hop, party, how):
    ch = hop.channel
    if not ch.closed:
        bal = dict(ch.balances)
        bal[party] += hop.amount
        update_channel(ch, bal, ContractDelta(remove=(hop.contract_id,)))
        net.log(world, ch.chain, party, f"{how}:{hop.contract_id}", (f"{party}={hop.amount}",))
    else:
        op = ch.onchain[hop.contract_id]
        if how == "claim":
            tx = make_tx([op], [Output(hop.amount, SigLeaf(party))], 0, f"claim/{hop.contract_id}")
            pre = frozenset({world.secret(pos.secret_label)})
        else:
            tx = make_tx([op], [Output(hop.amount, SigLeaf(party))], hop.expiry,
                         f"refund/{hop.contract_id}")
            pre = frozenset()
        tx = tx.with_witness(0, Witness(pre, frozenset({sign(party, tx, SigMode.COMMIT_ALL, 0)})))
        txid = world.publish(ch.chain, tx)
        net.events.append(Event(world.now, ch.chain, party, f"{how}:{hop.contract_id}",
                                txid.hex()[:16], (f"{party}={hop.amount}",)))
    hop.settled = "claimed" if how == "claim" else "refunded"


def step(world: World, strategies: Optional[dict] = None) -> bool:
    """Settle whatever is due at ``world.now``; True if anything happened."""
    strategies = strategies or {}
    net = network(world)
    now = world.now
    acted = False
    for pos in list(net.positions):
        if pos.status not in ("open", "broken"):
            continue
        for hop in pos.hops():
            if hop.settled is not None:
                continue
            who = hop.payee
            if strategies.get(who) == "silent":
                continue
            learned = pos.known.get(who)
            if who == pos.secret_owner and pos.status == "open":
                go = pos.exercise_at is not None and now >= pos.exercise_at
            else:
                go = learned is not None and learned < now
            if go and now <= hop.expiry:
                _claim(world, net, pos, hop, who, "claim")
                pos.known.setdefault(hop.payer, now)
                if pos.hedge is not None and hop.payer == pos.writer:
                    h = pos.hedge
                    if h.exercise_at is None or h.exercise_at > now + 1:
                        h.exercise_at = now + 1
                acted = True
        for hop in pos.hops():
            if hop.settled is None and now >= hop.expiry and strategies.get(hop.payer) != "silent":
                _claim(world, net, pos, hop, hop.payer, "refund")
                acted = True
        if not pos.live_hops():
            pos.status = "settled"
    return acted


def settle(world: World, strategies: Optional[dict] = None, until: Optional[int] = None) -> None:
    """Advance the clock, settling hops, until nothing is left or ``until`` passes."""
    net = network(world)
    while True:
        step(world, strategies)
        live = [h for p in net.positions for h in p.live_hops()]
        if not live:
            return
        targets = [h.expiry for h in live]
        targets += [p.exercise_at for p in net.positions if p.exercise_at is not None]
        nxt = world.now + 1
        if until is not None and nxt > until:
            return
        if nxt > max(targets) + 1:
            return
        world.now = nxt


def totals_table(world: World, parties) -> tuple:
    return tuple((p, c, v) for p in sorted(parties) for c, v in party_totals(world, p).items())
