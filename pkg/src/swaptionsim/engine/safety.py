"""Honest-party guarantees and the safety report over enumerated outcomes."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from ..terms import SwapTerms, SwaptionTerms
from .core import Outcome, Protocol
from .runner import explore


@dataclass(frozen=True)
class Violation:
    party: str
    guarantee: str
    outcome: Outcome
    profile: tuple


@dataclass
class SafetyReport:
    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.ok:
            return f"safe: {self.checked} outcomes, no violations"
        lines = [f"UNSAFE: {len(self.violations)} of {self.checked} outcomes violate a guarantee"]
        for v in self.violations[:10]:
            moves = ", ".join(f"t={t} {p} {label}" for t, p, label in v.profile) or "no action"
            lines.append(f"  {v.party}: {v.guarantee} [{moves}]")
            lines.append(f"    balances {v.outcome.balances}")
        return "\n".join(lines)


@dataclass(frozen=True)
class Guarantee:
    party: str
    name: str
    holds: Callable          # Outcome -> bool


def enumerate_strategies(protocol: Protocol, honest: Iterable[str], depth: int = 6,
                         strategies=None, max_nodes: int = 200_000) -> dict:
    """Outcomes reachable when every party outside ``honest`` plays adversarially."""
    honest = set(honest)
    strat = protocol.default_strategies()
    strat.update(strategies or {})
    strat = {p: s for p, s in strat.items() if p in honest}
    adversaries = [p for p in protocol.parties if p not in honest]
    return explore(protocol, strat, adversaries, depth=depth, max_nodes=max_nodes)


def check_safety(outcomes: dict, baseline: Iterable[Guarantee]) -> SafetyReport:
    """List every (outcome, profile) in which some guarantee fails."""
    report = SafetyReport(checked=len(outcomes))
    baseline = list(baseline)
    for oc, profile in sorted(outcomes.items(), key=lambda kv: repr(kv[0])):
        for g in baseline:
            if not g.holds(oc):
                report.violations.append(Violation(g.party, g.name, oc, profile))
    return report


# -- guarantee builders ---------------------------------------------------------

def swap_guarantee(terms: SwapTerms, party: str) -> Guarantee:
    """The honest party keeps its own asset or receives the full counter asset."""
    if party == terms.alice:
        own, other, counter = terms.a_chain, terms.b_chain, terms.b_amount
    else:
        own, other, counter = terms.b_chain, terms.a_chain, terms.a_amount

    def holds(oc: Outcome) -> bool:
        return oc.delta(party, own) >= 0 or oc.delta(party, other) >= counter
    return Guarantee(party, "keeps own asset or receives the counter asset", holds)


def swaption_guarantee(terms: SwaptionTerms, party: str) -> Guarantee:
    """Worst cases an honest party signs up for.

    Buyer: loses at most the premium, or pays the full principal (plus premium)
    only when the writer's full principal arrived. Writer: never loses the
    counter asset; any loss of its own asset is paid for by the buyer's margin
    (margined, a default) or principal (exercise), and the premium.
    """
    t = terms
    own = t.chain_of(party)
    other = t.b_chain if own == t.a_chain else t.a_chain
    if party == t.buyer:
        p_w, p_b = t.principal_of(t.writer), t.principal_of(t.buyer)

        def holds(oc: Outcome) -> bool:
            d_own, d_other = oc.delta(party, own), oc.delta(party, other)
            if d_other < 0:
                return False
            return d_own >= -t.premium or (d_other >= p_w and d_own >= -t.premium - p_b)
        return Guarantee(party, "buyer loses at most the premium unless exercised", holds)

    m_w, p_w = t.margin_of(party), t.principal_of(party)
    m_b, p_b = t.margin_of(t.buyer), t.principal_of(t.buyer)

    def holds_w(oc: Outcome) -> bool:
        d_own, d_other = oc.delta(party, own), oc.delta(party, other)
        if d_other < 0:
            return False
        if d_own >= 0:
            return True
        if t.margined and d_own >= -m_w and d_other >= m_b:
            return True
        return d_own >= -p_w and d_other >= p_b
    return Guarantee(party, "writer is paid the counter asset for any loss", holds_w)


def cheat_guarantee(terms: SwaptionTerms) -> Guarantee:
    """If both option secrets were out before expiry the writer holds both principals."""
    t = terms
    w, b = t.writer, t.buyer

    def holds(oc: Outcome) -> bool:
        names = {n for n, _, time in oc.revealed if time < t.E}
        if not ({"A2", "A3"} <= names):
            return True
        return (oc.delta(w, t.chain_of(w)) >= 0 and
                oc.delta(w, t.chain_of(b)) >= t.principal_of(b) + t.premium)
    return Guarantee(w, "cheating hands the writer both principals", holds)
