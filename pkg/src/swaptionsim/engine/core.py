"""Moves, strategies, traces and the protocol base class."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from ..chainsim import (Output, OutPoint, SigLeaf, SigMode, Transaction, Witness, World,
                        format_amount, make_tx, sign, validate)
from ..contracts import ContractSetup, plain_owner


class Action(enum.Enum):
    FUND = "fund"
    ACCEPT = "accept"
    RENEGE = "renege"
    CLAIM = "claim"
    DEPOSIT_PRINCIPAL = "deposit_principal"
    DEFAULT = "default"
    EXERCISE = "exercise"
    CANCEL = "cancel"
    LET_EXPIRE = "let_expire"
    CHEAT = "cheat"
    PUBLISH_BREACH_REMEDY = "publish_breach_remedy"
    PUBLISH_REFUND = "publish_refund"
    WAIT = "wait"


class Underfunded(ValueError):
    pass


@dataclass(frozen=True)
class Move:
    party: str
    action: Action
    label: str
    txs: tuple          # ((chain, Transaction), ...) published in order

    @property
    def chain(self) -> str:
        return self.txs[0][0]


@dataclass(frozen=True)
class DecisionPoint:
    time: int
    chain: str
    party: str
    legal: tuple


@dataclass(frozen=True)
class Event:
    time: int
    chain: str
    party: str
    event: str
    txid: str = "-"
    amounts: tuple = ()
    tx: Optional[Transaction] = field(default=None, compare=False, repr=False)

    def record(self) -> str:
        return " ".join([str(self.time), self.chain, self.party, self.event, self.txid,
                         *self.amounts]).rstrip()

    def text(self) -> str:
        amounts = " ".join(self.amounts)
        return (f"t={self.time:<4} {self.chain:<6} {self.party:<6} {self.event:<34} "
                f"{self.txid:<16} {amounts}").rstrip()


@dataclass(frozen=True)
class Outcome:
    initial: tuple      # ((party, chain, units), ...)
    balances: tuple     # ((party, chain, units), ...)
    locked: tuple       # ((chain, contract, units), ...)
    published: tuple    # sorted tx labels
    revealed: tuple     # ((secret name, chain, time), ...)

    def balance(self, party: str, chain: str) -> int:
        for p, c, v in self.balances:
            if p == party and c == chain:
                return v
        return 0

    def start(self, party: str, chain: str) -> int:
        for p, c, v in self.initial:
            if p == party and c == chain:
                return v
        return 0

    def delta(self, party: str, chain: str) -> int:
        return self.balance(party, chain) - self.start(party, chain)

    def revealed_names(self) -> set:
        return {name for name, _, _ in self.revealed}

    def reveal_time(self, name: str) -> Optional[int]:
        times = [t for n, _, t in self.revealed if n == name]
        return min(times) if times else None


@dataclass
class Trace:
    protocol: str
    events: list
    outcome: Outcome
    world: World = field(repr=False, default=None)

    def records(self) -> str:
        lines = [e.record() for e in self.events]
        lines += [f"final {p} {c} {v}" for p, c, v in self.outcome.balances]
        return "\n".join(lines) + "\n"

    def text(self) -> str:
        lines = [f"# {self.protocol}"] + [e.text() for e in self.events]
        lines.append("# final balances")
        lines += [f"  {p:<8} {c:<6} {format_amount(v):>10}" for p, c, v in self.outcome.balances]
        if self.outcome.locked:
            lines.append("# still locked")
            lines += [f"  {c:<6} {name:<24} {format_amount(v):>10}"
                      for c, name, v in self.outcome.locked]
        return "\n".join(lines) + "\n"

    def labels(self) -> list:
        return [e.event.split(":", 1)[1] for e in self.events if e.event.startswith("publish:")]


# -- strategies ------------------------------------------------------------------

class Strategy:
    """Maps a decision point to one of its legal moves, or None to wait."""

    def choose(self, point: DecisionPoint, world: World, protocol: "Protocol"):
        raise NotImplementedError

    def hints(self) -> set:
        return set()

    def __call__(self, point, world, protocol):
        return self.choose(point, world, protocol)


@dataclass
class Honest(Strategy):
    intent: dict = field(default_factory=dict)

    def __init__(self, **intent):
        self.intent = intent

    def choose(self, point, world, protocol):
        return protocol.policy(world, point.party, point.legal, self.intent)

    def hints(self) -> set:
        return {v for k, v in self.intent.items() if k.endswith("_at") and v is not None}

    def __repr__(self):
        return f"Honest({', '.join(f'{k}={v!r}' for k, v in sorted(self.intent.items()))})"


class Scripted(Strategy):
    """Publish the named moves no earlier than the given times; otherwise wait.

    ``plan`` maps a move label to its earliest time. Moves not in the plan are
    never taken unless ``fallback`` (another strategy) picks them.
    """

    def __init__(self, plan: dict, fallback: Optional[Strategy] = None):
        self.plan = dict(plan)
        self.fallback = fallback

    def choose(self, point, world, protocol):
        for move in point.legal:
            at = self.plan.get(move.label)
            if at is not None and world.now >= at:
                return move
        if self.fallback is not None:
            move = self.fallback.choose(point, world, protocol)
            if move is not None and move.label not in self.plan:
                return move
        return None

    def hints(self) -> set:
        extra = self.fallback.hints() if self.fallback else set()
        return set(self.plan.values()) | extra

    def __repr__(self):
        return f"Scripted({self.plan!r})"


class Restricted(Strategy):
    """Wrap a strategy so it only ever takes moves whose label is in ``allowed``."""

    def __init__(self, inner: Strategy, allowed):
        self.inner = inner
        self.allowed = frozenset(allowed)

    def choose(self, point, world, protocol):
        legal = tuple(m for m in point.legal if m.label in self.allowed)
        if not legal:
            return None
        return self.inner.choose(DecisionPoint(point.time, point.chain, point.party, legal),
                                 world, protocol)

    def hints(self) -> set:
        return self.inner.hints()


class Silent(Strategy):
    def choose(self, point, world, protocol):
        return None

    def __repr__(self):
        return "Silent()"


# -- protocol base ---------------------------------------------------------------

class Protocol:
    """A two-party protocol as a set of legal moves over a world.

    Subclasses build ``self.world0`` and their static transactions in
    ``__init__`` and implement ``moves`` and ``policy``.
    """
    name = "protocol"
    parties: tuple = ()
    chains: tuple = ()
    horizon: int = 0

    def __init__(self, seed: bytes = b"swaptionsim"):
        self.seed = seed
        self.secrets = {}           # name -> (owner, secret)
        self.hash_names = {}        # hash -> name
        self.contract_names = {}    # predicate -> name
        self.setup = ContractSetup()
        self._cache = {}

    # secrets and knowledge
    def add_secret(self, world: World, name: str, owner: str, label: Optional[str] = None) -> bytes:
        from ..chainsim import hash_secret
        s = world.secret(label or name)
        self.secrets[name] = (owner, s)
        self.hash_names[hash_secret(s)] = name
        return hash_secret(s)

    def secret(self, name: str) -> bytes:
        return self.secrets[name][1]

    def hash_of(self, name: str) -> bytes:
        from ..chainsim import hash_secret
        return hash_secret(self.secrets[name][1])

    def knows(self, world: World, party: str, name: str) -> bool:
        owner, s = self.secrets[name]
        if owner == party:
            return True
        h = self.hash_of(name)
        return any(h in c.revealed for c in world.chains.values())

    def name_contract(self, name: str, predicate) -> None:
        self.contract_names[predicate] = name

    # world
    def initial_world(self) -> World:
        return self.world0.clone()

    def initial_balances(self) -> tuple:
        stamp = tuple(len(c.log) for c in self.world0.chains.values())
        cached = self.__dict__.get("_initial")
        if cached is None or cached[0] != stamp:
            cached = self.__dict__["_initial"] = (
                stamp, balances_of(self.world0, self.parties, self.chains))
        return cached[1]

    def outcome(self, world: World) -> Outcome:
        locked = []
        for cname in sorted(world.chains):
            for op, (out, _) in sorted(world.chains[cname].utxos.items()):
                if plain_owner(out.predicate) is None:
                    locked.append((cname, self.contract_names.get(out.predicate, "contract"),
                                   out.amount))
        published = sorted(tx.label for c in world.chains.values() for _, tx in c.log
                           if tx.label and not tx.label.startswith("wallet/"))
        revealed = sorted((self.hash_names.get(h, h.hex()[:8]), cname, t)
                          for cname, c in world.chains.items()
                          for h, (_, t) in c.revealed.items())
        return Outcome(self.initial_balances(),
                       balances_of(world, self.parties, self.chains),
                       tuple(sorted(locked)), tuple(published), tuple(revealed))

    def hints(self, world: World) -> set:
        return set()

    def moves(self, world: World, party: str) -> list:
        raise NotImplementedError

    def policy(self, world: World, party: str, moves, intent: dict):
        raise NotImplementedError

    def default_strategies(self) -> dict:
        return {p: Honest() for p in self.parties}

    def fingerprint(self, world: World):
        return ()

    # helpers for subclasses
    def live(self, world: World, chain: str, op: OutPoint) -> bool:
        return op in world.chains[chain].utxos

    def find(self, world: World, chain: str, predicate) -> Optional[OutPoint]:
        for op, (out, _) in sorted(world.chains[chain].utxos.items()):
            if out.predicate == predicate:
                return op
        return None

    def published(self, world: World, chain: str, txid: bytes) -> bool:
        return any(tx.txid == txid for _, tx in world.chains[chain].log)

    def complete(self, tx: Transaction, index: int, signers=(), preimages=(), presigs=()):
        sigs = frozenset(sign(p, tx, SigMode.COMMIT_ALL, index) for p in signers)
        return tx.with_witness(index, Witness(frozenset(preimages), sigs | frozenset(presigs)))

    def valid(self, world: World, chain: str, tx: Transaction) -> bool:
        try:
            validate(world.chains[chain], tx, world.now)
        except Exception:
            return False
        return True

    def select_coins(self, world: World, party: str, chain: str, amount: int,
                     reserved=frozenset()):
        """Exact single coin if one exists, else smallest-first accumulation."""
        coins = [(op, a) for op, a in world.wallet(party, chain) if op not in reserved]
        for op, a in coins:
            if a == amount:
                return [op], 0
        picked, total = [], 0
        for op, a in sorted(coins, key=lambda c: (c[1], c[0])):
            if total >= amount:
                break
            picked.append(op)
            total += a
        if total < amount:
            raise Underfunded(f"{party} holds {total} of {amount} needed on {chain}")
        return picked, total - amount

    def pay_from_wallet(self, world: World, party: str, chain: str, amount: int, predicate,
                        label: str, reserved=frozenset()) -> Transaction:
        picked, change = self.select_coins(world, party, chain, amount, reserved)
        outs = [Output(amount, predicate)]
        if change:
            outs.append(Output(change, SigLeaf(party)))
        tx = make_tx(picked, outs, 0, label)
        for i in range(len(picked)):
            tx = self.complete(tx, i, signers=(party,))
        return tx


def balances_of(world: World, parties: Iterable[str], chains: Iterable[str]) -> tuple:
    return tuple((p, c, world.balance(p, c)) for p in parties for c in chains)


def pick(moves, wanted: Iterable[str]):
    by_label = {m.label: m for m in moves}
    for label in wanted:
        if label in by_label:
            return by_label[label]
    return None


def amounts_of(protocol: Protocol, tx: Transaction) -> tuple:
    out = []
    for o in tx.outputs:
        who = plain_owner(o.predicate) or protocol.contract_names.get(o.predicate, "contract")
        out.append(f"{who}={o.amount}")
    return tuple(out)
