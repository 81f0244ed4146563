"""HTLC payment, atomic swap, swaption (plain, cancellable, margined) and futures.

Each protocol precomputes its transaction graph at construction, including
the counterparty pre-signatures exchanged before funding. Moves are then the
graph edges whose inputs are live, whose secrets the mover knows and whose
predicates and locktimes are satisfied now.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from ..chainsim import (Output, OutPoint, SigLeaf, SigMode, Transaction, World, coins,
                        make_tx, publish, sign)
from ..contracts import (AntiCheatSpec, HtlcSpec, MarginContractSpec, MissingPresignature,
                         anticheat_predicate, cancellable_buyer_predicate,
                         cancellable_writer_predicate, funding_contract_predicate,
                         htlc_predicate, margin_contract_predicate)
from ..terms import SwapTerms, SwaptionTerms
from .core import Action, Honest, Move, Protocol, Restricted, Underfunded, pick


@dataclass(frozen=True)
class Rule:
    """How ``party`` may spend an output carrying a given predicate."""
    label: str
    party: str
    action: Action
    build: Callable          # (OutPoint) -> Transaction
    secrets: tuple = ()


class GraphProtocol(Protocol):
    """Protocol whose moves come from a static table plus per-predicate rules."""

    def __init__(self, seed=b"swaptionsim"):
        super().__init__(seed)
        self.static = []        # (label, party, action, chain, tx, gate contract)
        self.rules = {}         # predicate -> [Rule]
        self.reserved = set()

    def add_static(self, label, party, action, chain, tx, gate=None):
        self.static.append((label, party, action, chain, tx, gate))

    def add_rule(self, predicate, rule: Rule):
        self.rules.setdefault(predicate, []).append(rule)

    def fund_from(self, world, party, chain, amount, predicate, label, gate=None):
        tx = self.pay_from_wallet(world, party, chain, amount, predicate, label,
                                  frozenset(self.reserved))
        self.reserved.update(i.outpoint for i in tx.inputs)
        self.add_static(label, party, Action.FUND, chain, tx, gate)
        return tx

    def _built(self, rule: Rule, op: OutPoint) -> Transaction:
        key = (rule.label, op)
        tx = self._cache.get(key)
        if tx is None:
            tx = self._cache[key] = rule.build(op)
        return tx

    def extra_moves(self, world: World, party: str) -> list:
        return []

    def moves(self, world: World, party: str) -> list:
        out = []
        for label, p, action, chain, tx, gate in self.static:
            if p != party or (gate and self.setup.missing(gate)):
                continue
            if self.valid(world, chain, tx):
                out.append(Move(p, action, label, ((chain, tx),)))
        for cname in sorted(world.chains):
            for op, (o, _) in world.chains[cname].utxos.items():
                for rule in self.rules.get(o.predicate, ()):
                    if rule.party != party:
                        continue
                    if not all(self.knows(world, party, s) for s in rule.secrets):
                        continue
                    tx = self._built(rule, op)
                    if self.valid(world, cname, tx):
                        out.append(Move(party, rule.action, rule.label, ((cname, tx),)))
        out.extend(self.extra_moves(world, party))
        return sorted(out, key=lambda m: m.label)

    def is_published(self, world: World, label: str) -> bool:
        return any(tx.label == label for c in world.chains.values() for _, tx in c.log)


def _default_world(chains, wallets, seed) -> World:
    world = World.create(chains, seed)
    for (party, chain), amounts in sorted(wallets.items()):
        world.fund(party, chain, amounts)
    return world


# -- Figure 1 ------------------------------------------------------------------

class HtlcPayment(GraphProtocol):
    name = "htlc_payment"

    def __init__(self, payer: str, payee: str, amount: int, T: int, chain: str = "BCoin",
                 world: Optional[World] = None, seed=b"swaptionsim"):
        super().__init__(seed)
        if amount <= 0:
            raise ValueError("amount must be positive")
        self.payer, self.payee, self.amount, self.T, self.chain = payer, payee, amount, T, chain
        self.parties = (payee, payer)
        self.chains = (chain,)
        self.horizon = T + 2
        w = world.clone() if world is not None else \
            _default_world([chain], {(payer, chain): [amount]}, seed)
        self.world0 = w
        h = self.add_secret(w, "A", payee)
        pred = htlc_predicate(HtlcSpec(payee, payer, h, T))
        self.name_contract("htlc", pred)
        self.fund_from(w, payer, chain, amount, pred, "fund")
        self.add_rule(pred, Rule("claim", payee, Action.ACCEPT, lambda op: self.complete(
            make_tx([op], [Output(amount, SigLeaf(payee))], 0, "claim"), 0, (payee,),
            (self.secret("A"),)), ("A",)))
        self.add_rule(pred, Rule("refund", payer, Action.PUBLISH_REFUND, lambda op: self.complete(
            make_tx([op], [Output(amount, SigLeaf(payer))], T, "refund"), 0, (payer,))))

    def policy(self, world, party, moves, intent):
        if party == self.payer:
            return pick(moves, ["fund", "refund"])
        if intent.get("phase1", "accept") == "accept":
            return pick(moves, ["claim"])
        return None


# -- Figure 2 ------------------------------------------------------------------

class AtomicSwap(GraphProtocol):
    name = "atomic_swap"

    def __init__(self, terms: SwapTerms, world: Optional[World] = None, seed=b"swaptionsim"):
        super().__init__(seed)
        t = self.terms = terms
        a, b, ca, cb = t.alice, t.bob, t.a_chain, t.b_chain
        self.parties = (a, b)
        self.chains = (ca, cb)
        self.horizon = max(t.a_lock, t.b_lock) + 2
        w = world.clone() if world is not None else _default_world(
            [ca, cb], {(a, ca): [t.a_amount], (b, cb): [t.b_amount]}, seed)
        self.world0 = w
        h = self.add_secret(w, "A", a)
        pa = htlc_predicate(HtlcSpec(b, a, h, t.a_lock))
        pb = htlc_predicate(HtlcSpec(a, b, h, t.b_lock))
        self.name_contract("htlc_a", pa)
        self.name_contract("htlc_b", pb)
        self.fund_a = self.fund_from(w, a, ca, t.a_amount, pa, "fund_a")
        self.fund_b = self.fund_from(w, b, cb, t.b_amount, pb, "fund_b")

        def spend(label, who, amount, locktime=0, secret=None):
            pre = (self.secret(secret),) if secret else ()
            return lambda op: self.complete(
                make_tx([op], [Output(amount, SigLeaf(who))], locktime, label), 0, (who,), pre)

        self.add_rule(pb, Rule("claim_b", a, Action.ACCEPT, spend("claim_b", a, t.b_amount,
                                                                  secret="A"), ("A",)))
        self.add_rule(pa, Rule("claim_a", b, Action.CLAIM, spend("claim_a", b, t.a_amount,
                                                                 secret="A"), ("A",)))
        self.add_rule(pa, Rule("refund_a", a, Action.PUBLISH_REFUND,
                               spend("refund_a", a, t.a_amount, t.a_lock)))
        self.add_rule(pb, Rule("refund_b", b, Action.PUBLISH_REFUND,
                               spend("refund_b", b, t.b_amount, t.b_lock)))

    def policy(self, world, party, moves, intent):
        t = self.terms
        if party == t.alice:
            want = [] if intent.get("phase1") == "abstain" else ["fund_a"]
            if intent.get("phase1", "accept") == "accept":
                want.append("claim_b")
            return pick(moves, want + ["refund_a"])
        want = []
        fund_a_live = self.live(world, t.a_chain, self.fund_a.outpoint(0))
        if fund_a_live and world.now < t.T:
            want.append("fund_b")
        return pick(moves, want + ["claim_a", "refund_b"])


# -- Figures 3, 4, 5 -----------------------------------------------------------

class Swaption(GraphProtocol):
    """Funding swap on secret A paying the premium, then the option on secret A2.

    The funding claims move each party's lock into either its swaption contract
    (unmargined) or its margin contract (margined). In the margined variant
    each party later tops its margin contract up to the full principal with a
    deposit; the counterparty pre-signs that deposit with ANYONE_CAN_PAY so the
    depositor can attach wallet inputs.
    """
    name = "swaption"

    def __init__(self, terms: SwaptionTerms, world: Optional[World] = None,
                 seed=b"swaptionsim", price_path=None, withhold=(), prefix: str = "",
                 shared: Optional[Protocol] = None, reserved: Optional[set] = None):
        super().__init__(seed)
        t = self.terms = terms
        self.prefix = prefix
        if reserved is not None:
            self.reserved = reserved
        self.setup.withheld.update(prefix + w for w in withhold)
        A, B, CA, CB = t.alice, t.bob, t.a_chain, t.b_chain
        buyer, writer = t.buyer, t.writer
        self.parties = (A, B)
        self.chains = (CA, CB)
        self.horizon = t.E + t.delay + 3
        self.price_path = _price_path(price_path)
        if world is None:
            world = _default_world([CA, CB], default_wallets(t), seed)
        elif shared is None:
            world = world.clone()
        self.world0 = w = world
        L = self.L = lambda s: prefix + s

        if shared is not None:
            self.secrets.update(shared.secrets)
            self.hash_names.update(shared.hash_names)
            hA = self.hash_of("A")
        else:
            hA = self.add_secret(w, "A", A, L("A"))
        h2 = self.add_secret(w, L("A2"), buyer)
        h3 = self.add_secret(w, L("A3"), buyer) if t.cancellable else None
        self.s2, self.s3 = L("A2"), L("A3")

        # swaption contracts
        bchain, wchain = t.chain_of(buyer), t.chain_of(writer)
        p_b, p_w = t.principal_of(buyer), t.principal_of(writer)
        self.bchain, self.wchain = bchain, wchain
        if t.cancellable:
            W = cancellable_writer_predicate(buyer, writer, h2, h3, t.E)
            Bc = cancellable_buyer_predicate(buyer, writer, h2, h3)
        else:
            W = htlc_predicate(HtlcSpec(buyer, writer, h2, t.E))
            Bc = htlc_predicate(HtlcSpec(writer, buyer, h2, t.E + 1))
        self.W, self.Bc = W, Bc
        self.name_contract(L("swaption_writer"), W)
        self.name_contract(L("swaption_buyer"), Bc)
        contract = {writer: W, buyer: Bc}

        # margin contracts
        margin = {}
        if t.margined:
            for p in (A, B):
                other = B if p == A else A
                spec = MarginContractSpec(p, other, t.margin_of(p), t.principal_of(p),
                                          t.margin_expiry_of(p))
                margin[p] = margin_contract_predicate(spec)
                self.name_contract(L(f"margin_{p}"), margin[p])
        self.margin = margin
        nxt = {p: margin.get(p, contract[p]) for p in (A, B)}
        nxt_amount = {p: t.margin_of(p) if t.margined else t.principal_of(p) for p in (A, B)}

        # funding swap
        fa = funding_contract_predicate(B, A, hA, A, t.T + 1)
        fb = funding_contract_predicate(A, B, hA, B, t.T)
        self.name_contract(L("funding_a"), fa)
        self.name_contract(L("funding_b"), fb)
        self.fund_a = self.fund_from(w, A, CA, t.lock_of(A), fa, L("fund_a"), L("funding_a"))
        self.fund_b = self.fund_from(w, B, CB, t.lock_of(B), fb, L("fund_b"), L("funding_b"))

        def claim_outputs(p):
            outs = []
            if p == buyer and t.premium:
                outs.append(Output(t.premium, SigLeaf(writer)))
            outs.append(Output(nxt_amount[p], nxt[p]))
            return outs

        claim_a = make_tx([self.fund_a.outpoint(0)], claim_outputs(A), 0, L("claim_a"))
        claim_b = make_tx([self.fund_b.outpoint(0)], claim_outputs(B), 0, L("claim_b"))
        self.setup.presign(L("claim_a"), A, claim_a)
        self.setup.presign(L("claim_b"), B, claim_b)
        self.setup.require(L("funding_a"), L("claim_b"))
        self.setup.require(L("funding_b"), L("claim_a"))
        self.claim_a, self.claim_b = claim_a, claim_b
        self.next_op = {A: claim_a.outpoint(len(claim_a.outputs) - 1),
                        B: claim_b.outpoint(len(claim_b.outputs) - 1)}

        def presigned(tx, label, signer, preimages=()):
            sigs = (self.setup.signature(label),) if self.setup.has(label) else ()
            return self.complete(tx, 0, (signer,), preimages, sigs)

        self.add_rule(fb, Rule(L("claim_b"), A, Action.ACCEPT, lambda op: presigned(
            claim_b, L("claim_b"), A, (self.secret("A"),)), ("A",)))
        self.add_rule(fa, Rule(L("claim_a"), B, Action.CLAIM, lambda op: presigned(
            claim_a, L("claim_a"), B, (self.secret("A"),)), ("A",)))
        self.add_rule(fa, Rule(L("refund_a"), A, Action.PUBLISH_REFUND, self._pay(
            L("refund_a"), A, t.lock_of(A), t.T + 1)))
        self.add_rule(fb, Rule(L("refund_b"), B, Action.PUBLISH_REFUND, self._pay(
            L("refund_b"), B, t.lock_of(B), t.T)))

        # margin phase
        self.deposit_skel = {}
        for p, pred in margin.items():
            other = B if p == A else A
            skel = make_tx([self.next_op[p]], [Output(t.principal_of(p), contract[p])], 0,
                           L(f"deposit_{p}"))
            self.deposit_skel[p] = skel
            self.setup.presign(L(f"deposit_{p}"), other, skel, 0, SigMode.ANYONE_CAN_PAY)
            self.setup.require(L("funding_a" if p == A else "funding_b"), L(f"deposit_{p}"))
            self.add_rule(pred, Rule(L(f"default_{p}"), other, Action.DEFAULT, self._pay(
                L(f"default_{p}"), other, t.margin_of(p), t.margin_expiry_of(p))))

        # option phase
        s2 = (self.secret(self.s2),)
        if not t.cancellable:
            self.add_rule(W, Rule(L("exercise"), buyer, Action.EXERCISE,
                                  self._pay(L("exercise"), buyer, p_w, 0, s2), (self.s2,)))
            self.add_rule(Bc, Rule(L("claim_exercise"), writer, Action.CLAIM,
                                   self._pay(L("claim_exercise"), writer, p_b, 0, s2), (self.s2,)))
            self.add_rule(W, Rule(L("expire_writer"), writer, Action.LET_EXPIRE,
                                  self._pay(L("expire_writer"), writer, p_w, t.E)))
            self.add_rule(Bc, Rule(L("expire_buyer"), buyer, Action.PUBLISH_REFUND,
                                   self._pay(L("expire_buyer"), buyer, p_b, t.E + 1)))
        else:
            s3 = (self.secret(self.s3),)
            ac_ex = anticheat_predicate(AntiCheatSpec(buyer, writer, h3, t.delay))
            ac_cx = anticheat_predicate(AntiCheatSpec(buyer, writer, h2, t.delay))
            self.name_contract(L("anticheat_exercise"), ac_ex)
            self.name_contract(L("anticheat_cancel"), ac_cx)
            w_op, b_op = self.next_op[writer], self.next_op[buyer]
            ex = make_tx([w_op], [Output(p_w, ac_ex)], 0, L("exercise"))
            cx = make_tx([b_op], [Output(p_b, ac_cx)], 0, L("cancel"))
            self.setup.presign(L("exercise"), writer, ex)
            self.setup.presign(L("cancel"), writer, cx)
            self.setup.require(L("funding_a" if buyer == A else "funding_b"),
                               L("exercise"), L("cancel"))
            self.exercise_tx = presigned(ex, L("exercise"), buyer, s2)
            self.cancel_tx = presigned(cx, L("cancel"), buyer, s3)
            self.add_rule(W, Rule(L("exercise"), buyer, Action.EXERCISE,
                                  lambda op: self.exercise_tx, (self.s2,)))
            self.add_rule(Bc, Rule(L("cancel"), buyer, Action.CANCEL,
                                   lambda op: self.cancel_tx, (self.s3,)))
            self.add_rule(W, Rule(L("reclaim"), writer, Action.CLAIM,
                                  self._pay(L("reclaim"), writer, p_w, 0, s3), (self.s3,)))
            self.add_rule(W, Rule(L("expire_writer"), writer, Action.LET_EXPIRE,
                                  self._pay(L("expire_writer"), writer, p_w, t.E)))
            self.add_rule(Bc, Rule(L("claim_exercise"), writer, Action.CLAIM,
                                   self._pay(L("claim_exercise"), writer, p_b, 0, s2), (self.s2,)))
            self.add_rule(ac_ex, Rule(L("deliver_exercise"), buyer, Action.CLAIM,
                                      self._pay(L("deliver_exercise"), buyer, p_w)))
            self.add_rule(ac_cx, Rule(L("deliver_cancel"), buyer, Action.CLAIM,
                                      self._pay(L("deliver_cancel"), buyer, p_b)))
            self.add_rule(ac_ex, Rule(L("breach_exercise"), writer, Action.PUBLISH_BREACH_REMEDY,
                                      self._pay(L("breach_exercise"), writer, p_w, 0, s3),
                                      (self.s3,)))
            self.add_rule(ac_cx, Rule(L("breach_cancel"), writer, Action.PUBLISH_BREACH_REMEDY,
                                      self._pay(L("breach_cancel"), writer, p_b, 0, s2),
                                      (self.s2,)))

    def _pay(self, label, who, amount, locktime=0, preimages=()):
        return lambda op: self.complete(
            make_tx([op], [Output(amount, SigLeaf(who))], locktime, label), 0, (who,), preimages)

    # -- moves built at decision time

    def _deposit(self, world: World, p: str) -> Optional[Move]:
        t = self.terms
        chain = t.chain_of(p)
        op = self.next_op[p]
        if op not in world.chains[chain].utxos or not self.setup.has(self.L(f"deposit_{p}")):
            return None
        need = t.principal_of(p) - t.margin_of(p)
        coins_ = [(o, a) for o, a in world.wallet(p, chain)]
        txs = []
        exact = [o for o, a in coins_ if a == need]
        if exact:
            src = exact[0]
        else:
            picked, total = [], 0
            for o, a in sorted(coins_, key=lambda c: (c[1], c[0])):
                if total >= need:
                    break
                picked.append(o)
                total += a
            if total < need:
                return None
            outs = [Output(need, SigLeaf(p))]
            if total > need:
                outs.append(Output(total - need, SigLeaf(p)))
            split = make_tx(picked, outs, 0, self.L(f"split_{p}"))
            for i in range(len(picked)):
                split = self.complete(split, i, (p,))
            txs.append((chain, split))
            src = split.outpoint(0)
        dep = self.deposit_skel[p].with_input(src)
        dep = self.complete(dep, 0, (p,), (), (self.setup.signature(self.L(f"deposit_{p}")),))
        dep = self.complete(dep, 1, (p,))
        txs.append((chain, dep))
        scratch = world.chains[chain].copy()
        try:
            for _, tx in txs:
                publish(scratch, tx, world.now)
        except Exception:
            return None
        return Move(p, Action.DEPOSIT_PRINCIPAL, self.L(f"deposit_{p}"), tuple(txs))

    def extra_moves(self, world, party):
        t = self.terms
        out = []
        if t.margined:
            m = self._deposit(world, party)
            if m is not None:
                out.append(m)
        if t.cancellable and party == t.buyer:
            pair = ((self.wchain, self.exercise_tx), (self.bchain, self.cancel_tx))
            pair = tuple(sorted(pair, key=lambda c: c[0]))
            if all(self.valid(world, c, tx) for c, tx in pair):
                out.append(Move(party, Action.CHEAT, self.L("cheat"), pair))
        return out

    # -- honest behaviour

    def price_at(self, now: int, intent: dict):
        if intent.get("price") is not None:
            return Fraction(intent["price"])
        return self.price_path(now)

    def exercise_pays(self, now, intent) -> bool:
        t = self.terms
        r = self.price_at(now, intent)
        value = {t.a_chain: Fraction(1), t.b_chain: r}
        return (t.principal_of(t.writer) * value[self.wchain] >
                t.principal_of(t.buyer) * value[self.bchain])

    def honors(self, world, party, intent) -> bool:
        from ..econ import Decision, default_decision
        mode = intent.get("margin", "honor")
        if mode == "rational":
            return default_decision(self.terms, self.price_at(world.now, intent),
                                    party) == Decision.HONOR
        return mode == "honor"

    def policy(self, world, party, moves, intent):
        t, L = self.terms, self.L
        A, B = t.alice, t.bob
        want = []
        phase1 = intent.get("phase1", "accept")
        if party == A:
            if phase1 != "abstain":
                want.append(L("fund_a"))
            if phase1 == "accept" and self.live(world, t.a_chain, self.fund_a.outpoint(0)):
                want.append(L("claim_b"))
            want.append(L("refund_a"))
        else:
            if (self.live(world, t.a_chain, self.fund_a.outpoint(0)) and world.now < t.T
                    and phase1 != "abstain"):
                want.append(L("fund_b"))
            want += [L("claim_a"), L("refund_b")]
        if t.margined:
            other = B if party == A else A
            if self.honors(world, party, intent):
                buyer_in = self.find(world, self.bchain, self.Bc) is not None
                if party == t.buyer or buyer_in:
                    want.append(L(f"deposit_{party}"))
            want.append(L(f"default_{other}"))
        if party == t.buyer:
            plan = intent.get("phase2", "exercise")
            at = intent.get("exercise_at") or 0
            if world.now >= at and (plan == "exercise" or
                                    (plan == "rational" and self.exercise_pays(world.now, intent))):
                want.append(L("exercise"))
            if plan == "cancel" and world.now >= (intent.get("cancel_at") or 0):
                want.append(L("cancel"))
            want += [L("deliver_exercise"), L("deliver_cancel")]
            if (t.cancellable and self.find(world, self.wchain, self.W) is None
                    and not self.is_published(world, L("exercise"))
                    and self.is_published(world, L("claim_a"))
                    and self.is_published(world, L("claim_b"))):
                want.append(L("cancel"))
            want.append(L("expire_buyer"))
        else:
            want += [L("claim_exercise"), L("breach_exercise"), L("breach_cancel"),
                     L("reclaim"), L("expire_writer")]
        return pick(moves, want)

    def hints(self, world):
        return self.price_path.times

    def default_strategies(self) -> dict:
        return {self.terms.alice: Honest(), self.terms.bob: Honest()}

    def phase_one_labels(self) -> set:
        return {self.L(s) for s in ("fund_a", "fund_b", "claim_a", "claim_b")}

    def post_funding_world(self, strategies=None) -> World:
        """World right after an honest funding swap, before any option-phase move."""
        from .runner import execute
        strategies = strategies or self.default_strategies()
        allowed = self.phase_one_labels()
        wrapped = {p: Restricted(s, allowed) for p, s in strategies.items()}
        world = execute(self, wrapped, until=self.terms.T - 1).world
        if not all(self.is_published(world, l) for l in allowed):
            raise RuntimeError("funding swap did not complete")
        return world


class _PricePath:
    def __init__(self, points):
        self.points = sorted(points.items())
        self.times = {t for t, _ in self.points}

    def __call__(self, now):
        price = None
        for t, r in self.points:
            if t <= now:
                price = r
        if price is None:
            if not self.points:
                raise ValueError("no price available: pass price= in the intent or a price path")
            price = self.points[0][1]
        return price


def _price_path(spec) -> _PricePath:
    from ..econ import as_price
    if spec is None:
        return _PricePath({})
    if isinstance(spec, _PricePath):
        return spec
    if isinstance(spec, dict):
        return _PricePath({int(t): as_price(r) for t, r in spec.items()})
    return _PricePath({0: as_price(spec)})


def default_wallets(t: SwaptionTerms) -> dict:
    """Exactly what each party needs: its funding lock plus any later top-up."""
    wallets = {}
    for p in (t.alice, t.bob):
        amounts = [t.lock_of(p)]
        if t.margined:
            amounts.append(t.principal_of(p) - t.margin_of(p))
        wallets[(p, t.chain_of(p))] = amounts
    return wallets


# -- futures -------------------------------------------------------------------

class Future(Protocol):
    """Long call plus short put at one strike, both opened on one funding secret.

    ``strike_terms`` describe the call (``buyer`` = alice); the put is the same
    swap with bob as buyer. Alice ends up swapping ``p_a`` for ``p_b`` whichever
    way the price moves, which is a forward.
    """
    name = "future"

    def __init__(self, strike_terms: SwaptionTerms, price_path=None,
                 world: Optional[World] = None, seed=b"swaptionsim"):
        super().__init__(seed)
        from dataclasses import replace
        t = strike_terms
        call = replace(t, buyer=t.alice)
        put = replace(t, buyer=t.bob)
        self.parties = (t.alice, t.bob)
        self.chains = (t.a_chain, t.b_chain)
        if world is None:
            wallets = {}
            for legt in (call, put):
                for k, v in default_wallets(legt).items():
                    wallets.setdefault(k, []).extend(v)
            world = _default_world(self.chains, wallets, seed)
        else:
            world = world.clone()
        self.world0 = world
        reserved = set()
        self.call = Swaption(call, world, seed, price_path, prefix="call.", reserved=reserved)
        self.put = Swaption(put, world, seed, price_path, prefix="put.", shared=self.call,
                            reserved=reserved)
        self.legs = (self.call, self.put)
        self.horizon = max(l.horizon for l in self.legs)
        for leg in self.legs:
            self.secrets.update(leg.secrets)
            self.hash_names.update(leg.hash_names)
            self.contract_names.update(leg.contract_names)
        self.price_path = self.call.price_path

    def moves(self, world, party):
        return [m for leg in self.legs for m in leg.moves(world, party)]

    def policy(self, world, party, moves, intent):
        for leg in self.legs:
            own = tuple(m for m in moves if m.label.startswith(leg.prefix))
            m = leg.policy(world, party, own, intent)
            if m is not None:
                return m
        return None

    def hints(self, world):
        return self.price_path.times

    def default_strategies(self) -> dict:
        s = dict(phase2="rational", margin="honor")
        return {self.terms_party(0): Honest(**s), self.terms_party(1): Honest(**s)}

    def terms_party(self, i):
        return self.parties[i]


# -- entry points ----------------------------------------------------------------

def _strategies(protocol, strategies):
    merged = protocol.default_strategies()
    merged.update(strategies or {})
    return merged


def run_htlc_payment(world, payer, payee, amount, T, strategies=None, chain=None):
    from .runner import execute
    if world is not None and chain is None:
        chain = sorted(world.chains)[-1]
    proto = HtlcPayment(payer, payee, amount, T, chain or "BCoin", world)
    return execute(proto, _strategies(proto, strategies))


def run_atomic_swap(world, terms: SwapTerms, strategies=None):
    from .runner import execute
    proto = AtomicSwap(terms, world)
    return execute(proto, _strategies(proto, strategies))


def _check_presigs(proto: Swaption):
    for contract in (proto.L("funding_a"), proto.L("funding_b")):
        proto.setup.check(contract)


def run_swaption(world, terms: SwaptionTerms, strategies=None, withhold=()):
    from .runner import execute
    if terms.cancellable or terms.margined:
        raise ValueError("use run_swaption_with_cancellation or run_margin_swaption")
    proto = Swaption(terms, world, withhold=withhold)
    _check_presigs(proto)
    return execute(proto, _strategies(proto, strategies))


def run_swaption_with_cancellation(world, terms: SwaptionTerms, strategies=None, withhold=()):
    from .runner import execute
    if not terms.cancellable:
        raise ValueError("terms are not cancellable")
    proto = Swaption(terms, world, withhold=withhold)
    _check_presigs(proto)
    return execute(proto, _strategies(proto, strategies))


def run_margin_swaption(world, terms: SwaptionTerms, strategies=None, price_path=None,
                        withhold=()):
    from .runner import execute
    if not terms.margined:
        raise ValueError("terms are not margined")
    proto = Swaption(terms, world, price_path=price_path, withhold=withhold)
    _check_presigs(proto)
    return execute(proto, _strategies(proto, strategies))
