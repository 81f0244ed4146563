"""Deterministic UTXO chains sharing one discrete clock.

Spending conditions are small boolean trees (``Predicate``) over simulated
signatures, SHA-256 preimages and absolute/relative timelocks. Signatures are
attestations ``(signer, digest, mode)``; there is no real key material.

Canonical byte encoding (used for txids and signature digests):

* integers are unsigned big-endian, 8 bytes (counts and output indexes 4 bytes)
* byte strings and names are prefixed with a 4-byte big-endian length
* predicate trees are written pre-order with a 1-byte node tag::

      0x01 SigLeaf      party
      0x02 PreimageLeaf hash
      0x03 AbsTimeLeaf  t
      0x04 RelTimeLeaf  delta
      0x05 AllOf        n, children...
      0x06 AnyOf        n, children...
"""
from __future__ import annotations

import enum
import functools
import hashlib
import struct
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Iterable, Iterator, Union

COIN = 1_000_000
SECRET_SIZE = 32

TAG_SIG = 0x01
TAG_PREIMAGE = 0x02
TAG_ABSTIME = 0x03
TAG_RELTIME = 0x04
TAG_ALL = 0x05
TAG_ANY = 0x06


def coins(value: Union[str, int, Decimal]) -> int:
    """Convert a decimal coin amount to base units, refusing sub-unit dust."""
    units = Decimal(str(value)) * COIN
    if units != units.to_integral_value():
        raise ValueError(f"{value} is not a whole number of base units")
    if units < 0:
        raise ValueError("amounts are non-negative")
    return int(units)


def format_amount(units: int) -> str:
    q = (Decimal(units) / COIN).normalize()
    text = format(q, "f")
    return text


# -- hashing ----------------------------------------------------------------

def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_secret(secret: bytes) -> bytes:
    if len(secret) != SECRET_SIZE:
        raise ValueError(f"secrets are exactly {SECRET_SIZE} bytes")
    return sha256(secret)


# -- encoding helpers ---------------------------------------------------------

def _u64(n: int) -> bytes:
    return struct.pack(">Q", n)


def _u32(n: int) -> bytes:
    return struct.pack(">I", n)


def _lp(data: bytes) -> bytes:
    return _u32(len(data)) + data


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated encoding")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def lp(self) -> bytes:
        return self.take(self.u32())


# -- predicates ---------------------------------------------------------------

@dataclass(frozen=True)
class SigLeaf:
    party: str


@dataclass(frozen=True)
class PreimageLeaf:
    hash: bytes


@dataclass(frozen=True)
class AbsTimeLeaf:
    t: int


@dataclass(frozen=True)
class RelTimeLeaf:
    delta: int


@dataclass(frozen=True)
class AllOf:
    children: tuple

    def __init__(self, *children):
        if not children:
            raise ValueError("AllOf needs at least one child")
        object.__setattr__(self, "children", tuple(children))


@dataclass(frozen=True)
class AnyOf:
    children: tuple

    def __init__(self, *children):
        if not children:
            raise ValueError("AnyOf needs at least one child")
        object.__setattr__(self, "children", tuple(children))


Predicate = Union[SigLeaf, PreimageLeaf, AbsTimeLeaf, RelTimeLeaf, AllOf, AnyOf]


@functools.lru_cache(maxsize=4096)
def serialize_predicate(p: Predicate) -> bytes:
    if isinstance(p, SigLeaf):
        return bytes([TAG_SIG]) + _lp(p.party.encode())
    if isinstance(p, PreimageLeaf):
        return bytes([TAG_PREIMAGE]) + _lp(p.hash)
    if isinstance(p, AbsTimeLeaf):
        return bytes([TAG_ABSTIME]) + _u64(p.t)
    if isinstance(p, RelTimeLeaf):
        return bytes([TAG_RELTIME]) + _u64(p.delta)
    if isinstance(p, (AllOf, AnyOf)):
        tag = TAG_ALL if isinstance(p, AllOf) else TAG_ANY
        return bytes([tag]) + _u32(len(p.children)) + b"".join(
            serialize_predicate(c) for c in p.children)
    raise TypeError(f"not a predicate: {p!r}")


def _read_predicate(r: _Reader) -> Predicate:
    tag = r.u8()
    if tag == TAG_SIG:
        return SigLeaf(r.lp().decode())
    if tag == TAG_PREIMAGE:
        return PreimageLeaf(r.lp())
    if tag == TAG_ABSTIME:
        return AbsTimeLeaf(r.u64())
    if tag == TAG_RELTIME:
        return RelTimeLeaf(r.u64())
    if tag in (TAG_ALL, TAG_ANY):
        n = r.u32()
        kids = [_read_predicate(r) for _ in range(n)]
        return AllOf(*kids) if tag == TAG_ALL else AnyOf(*kids)
    raise ValueError(f"unknown predicate tag 0x{tag:02x}")


def deserialize_predicate(data: bytes) -> Predicate:
    r = _Reader(data)
    p = _read_predicate(r)
    if r.pos != len(data):
        raise ValueError("trailing bytes after predicate")
    return p


def iter_leaves(p: Predicate) -> Iterator[Predicate]:
    if isinstance(p, (AllOf, AnyOf)):
        for c in p.children:
            yield from iter_leaves(c)
    else:
        yield p


# -- transactions -------------------------------------------------------------

class SigMode(enum.Enum):
    COMMIT_ALL = 1
    ANYONE_CAN_PAY = 0x81


@dataclass(frozen=True, order=True)
class OutPoint:
    txid: bytes
    index: int

    def encode(self) -> bytes:
        return _lp(self.txid) + _u32(self.index)

    def __str__(self) -> str:
        return f"{self.txid.hex()[:16]}:{self.index}"


@dataclass(frozen=True)
class Output:
    amount: int
    predicate: Predicate

    def __post_init__(self):
        if self.amount <= 0:
            raise ValueError("output amount must be positive")

    def encode(self) -> bytes:
        return _u64(self.amount) + serialize_predicate(self.predicate)


@dataclass(frozen=True)
class SignatureRecord:
    signer: str
    digest: bytes
    mode: SigMode


@dataclass(frozen=True)
class Witness:
    preimages: frozenset = frozenset()
    signatures: frozenset = frozenset()

    def merge(self, other: "Witness") -> "Witness":
        return Witness(self.preimages | other.preimages,
                       self.signatures | other.signatures)


@dataclass(frozen=True)
class TxIn:
    outpoint: OutPoint
    witness: Witness = Witness()


@dataclass(frozen=True)
class Transaction:
    inputs: tuple
    outputs: tuple
    locktime: int = 0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("a transaction needs at least one input")
        if not self.outputs:
            raise ValueError("a transaction needs at least one output")

    def encode(self) -> bytes:
        body = _u32(len(self.inputs)) + b"".join(i.outpoint.encode() for i in self.inputs)
        body += _u32(len(self.outputs)) + b"".join(o.encode() for o in self.outputs)
        return body + _u64(self.locktime)

    @functools.cached_property
    def txid(self) -> bytes:
        return sha256(self.encode())

    def outpoint(self, index: int) -> OutPoint:
        if not 0 <= index < len(self.outputs):
            raise IndexError(index)
        return OutPoint(self.txid, index)

    def with_witness(self, index: int, witness: Witness) -> "Transaction":
        ins = list(self.inputs)
        ins[index] = TxIn(ins[index].outpoint, ins[index].witness.merge(witness))
        return replace(self, inputs=tuple(ins))

    def with_input(self, outpoint: OutPoint) -> "Transaction":
        return replace(self, inputs=self.inputs + (TxIn(outpoint),))


def make_tx(spends: Iterable[OutPoint], outputs: Iterable[Output], locktime: int = 0,
            label: str = "") -> Transaction:
    return Transaction(tuple(TxIn(op) for op in spends), tuple(outputs), locktime, label)


def tx_digest(tx: Transaction, mode: SigMode, own_input: int = 0) -> bytes:
    """Signature digest. ANYONE_CAN_PAY commits to one input's outpoint only."""
    if not 0 <= own_input < len(tx.inputs):
        raise IndexError(f"input {own_input} out of range")
    key = (mode, own_input if mode is SigMode.ANYONE_CAN_PAY else 0)
    cache = tx.__dict__.setdefault("_digests", {})
    if key not in cache:
        cache[key] = _digest(tx, mode, own_input)
    return cache[key]


def _digest(tx: Transaction, mode: SigMode, own_input: int) -> bytes:
    outs = _u32(len(tx.outputs)) + b"".join(o.encode() for o in tx.outputs)
    if mode is SigMode.COMMIT_ALL:
        ins = _u32(len(tx.inputs)) + b"".join(i.outpoint.encode() for i in tx.inputs)
    else:
        ins = tx.inputs[own_input].outpoint.encode()
    return sha256(bytes([mode.value]) + ins + outs + _u64(tx.locktime))


def sign(party: str, tx: Transaction, mode: SigMode = SigMode.COMMIT_ALL,
         own_input: int = 0) -> SignatureRecord:
    return SignatureRecord(party, tx_digest(tx, mode, own_input), mode)


@functools.lru_cache(maxsize=4096)
def _hash_cached(secret: bytes) -> bytes:
    return sha256(secret)


def verify(record: SignatureRecord, tx: Transaction, input_index: int) -> bool:
    return record.digest == tx_digest(tx, record.mode, input_index)


def eval_predicate(p: Predicate, w: Witness, now: int, spent_confirmed_at: int,
                   tx: Transaction, input_index: int) -> bool:
    if isinstance(p, SigLeaf):
        return any(r.signer == p.party and verify(r, tx, input_index) for r in w.signatures)
    if isinstance(p, PreimageLeaf):
        return any(_hash_cached(s) == p.hash for s in w.preimages if len(s) == SECRET_SIZE)
    if isinstance(p, AbsTimeLeaf):
        return now >= p.t and tx.locktime >= p.t
    if isinstance(p, RelTimeLeaf):
        return now >= spent_confirmed_at + p.delta
    if isinstance(p, AllOf):
        return all(eval_predicate(c, w, now, spent_confirmed_at, tx, input_index)
                   for c in p.children)
    if isinstance(p, AnyOf):
        return any(eval_predicate(c, w, now, spent_confirmed_at, tx, input_index)
                   for c in p.children)
    raise TypeError(f"not a predicate: {p!r}")


# -- chain state ----------------------------------------------------------------

class PublishError(Exception):
    """Base for rejected publishes."""


class MissingUtxo(PublishError):
    pass


class PredicateUnsatisfied(PublishError):
    pass


class LocktimeNotReached(PublishError):
    pass


class ValueCreated(PublishError):
    pass


@dataclass
class ChainState:
    chain: str
    utxos: dict = field(default_factory=dict)     # OutPoint -> (Output, confirmed_at)
    log: list = field(default_factory=list)       # [(confirmed_at, Transaction)]
    burned: int = 0
    revealed: dict = field(default_factory=dict)  # hash -> (secret, first seen time)

    def copy(self) -> "ChainState":
        return ChainState(self.chain, dict(self.utxos), list(self.log), self.burned,
                          dict(self.revealed))

    def total(self) -> int:
        return sum(o.amount for o, _ in self.utxos.values())

    def genesis(self, outputs: Iterable[Output], label: str = "genesis") -> Transaction:
        """Mint outputs from nothing; only used to seed scenario wallets."""
        outputs = tuple(outputs)
        marker = OutPoint(sha256(f"{self.chain}/{label}/{len(self.log)}".encode()), 0)
        tx = Transaction((TxIn(marker),), outputs, 0, label)
        txid = tx.txid
        for i, o in enumerate(outputs):
            self.utxos[OutPoint(txid, i)] = (o, 0)
        self.log.append((0, tx))
        return tx


def validate(chain: ChainState, tx: Transaction, now: int) -> int:
    """Raise a ``PublishError`` if ``tx`` cannot be published now; return the fee."""
    seen = set()
    value_in = 0
    for i, txin in enumerate(tx.inputs):
        op = txin.outpoint
        if op in seen or op not in chain.utxos:
            raise MissingUtxo(f"{chain.chain}: {op} unknown or already spent")
        seen.add(op)
    if tx.locktime > now:
        raise LocktimeNotReached(f"{chain.chain}: locktime {tx.locktime} > now {now}")
    for i, txin in enumerate(tx.inputs):
        out, conf = chain.utxos[txin.outpoint]
        if not eval_predicate(out.predicate, txin.witness, now, conf, tx, i):
            raise PredicateUnsatisfied(
                f"{chain.chain}: input {i} of {tx.label or 'tx'} does not satisfy its predicate")
        value_in += out.amount
    value_out = sum(o.amount for o in tx.outputs)
    if value_out > value_in:
        raise ValueCreated(f"{chain.chain}: outputs {value_out} exceed inputs {value_in}")
    return value_in - value_out


def publish(chain: ChainState, tx: Transaction, now: int) -> bytes:
    fee = validate(chain, tx, now)
    txid = tx.txid
    for txin in tx.inputs:
        del chain.utxos[txin.outpoint]
        for s in txin.witness.preimages:
            chain.revealed.setdefault(hash_secret(s), (s, now))
    for i, o in enumerate(tx.outputs):
        chain.utxos[OutPoint(txid, i)] = (o, now)
    chain.burned += fee
    chain.log.append((now, tx))
    return txid


def scan_secrets(chain: ChainState) -> set:
    found = set()
    for _, tx in chain.log:
        for txin in tx.inputs:
            for s in txin.witness.preimages:
                found.add((hash_secret(s), s))
    return found


# -- world --------------------------------------------------------------------

@dataclass
class World:
    chains: dict
    now: int = 0
    seed: bytes = b"swaptionsim"

    @classmethod
    def create(cls, chain_names: Iterable[str], seed: bytes = b"swaptionsim") -> "World":
        return cls({name: ChainState(name) for name in chain_names}, 0, seed)

    def clone(self) -> "World":
        return World({k: c.copy() for k, c in self.chains.items()}, self.now, self.seed)

    def chain(self, name: str) -> ChainState:
        return self.chains[name]

    def secret(self, label: str) -> bytes:
        """Deterministic per-seed secret; equal labels give equal secrets."""
        return sha256(self.seed + b"/secret/" + label.encode())

    def publish(self, chain: str, tx: Transaction) -> bytes:
        return publish(self.chains[chain], tx, self.now)

    def fund(self, party: str, chain: str, amounts: Iterable[int]) -> list:
        """Seed a party's wallet with one plain output per amount."""
        outs = [Output(a, SigLeaf(party)) for a in amounts]
        tx = self.chains[chain].genesis(outs, f"wallet/{party}")
        return [tx.outpoint(i) for i in range(len(outs))]

    def revealed(self) -> dict:
        """hash -> secret over every chain."""
        out = {}
        for c in self.chains.values():
            for h, (s, _) in c.revealed.items():
                out[h] = s
        return out

    def wallet(self, party: str, chain: str) -> list:
        owner = SigLeaf(party)
        return sorted((op, o.amount) for op, (o, _) in self.chains[chain].utxos.items()
                      if o.predicate == owner)

    def balance(self, party: str, chain: str) -> int:
        return sum(a for _, a in self.wallet(party, chain))


def advance_clock(world: World, delta: int) -> None:
    if delta < 0:
        raise ValueError("the clock never runs backwards")
    world.now += delta
