"""Scenario files: a small line-oriented format with ``[section]`` headers.

Every line is either blank, a ``#`` comment, a section header, or (inside a
section) ``key = value``. The ``[steps]`` section instead holds one command
per line. All problems are collected with their line numbers and reported
together.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Optional

from .chainsim import coins
from .terms import InvalidTerms, SwapTerms, SwaptionTerms

PROTOCOLS = ("htlc", "swap", "swaption", "future", "payoff", "lightning")
SECTIONS = ("scenario", "parties", "chains", "wallets", "terms", "prices", "enumerate", "expect",
            "channels", "steps", "payoff")
AMOUNT_KEYS = {"premium", "p_a", "p_b", "m_a", "m_b", "a_amount", "b_amount", "amount"}
INT_KEYS = {"T", "E", "M", "delay", "a_expiry", "b_expiry"}
BOOL_KEYS = {"cancellable", "margined", "equal_ratio", "swap_margin_expiries"}
NAME_KEYS = {"buyer", "payer", "payee", "chain"}
STRATEGY_KEYS = {"phase1", "phase2", "margin", "exercise_at", "cancel_at", "price", "script",
                 "silent"}
STEPS = {"route": (3, 5), "decouple": (4, 4), "unwind": (2, 2), "exercise": (2, 2),
         "close": (1, 1), "settle": (0, 1), "advance": (1, 1)}

_HEADER = re.compile(r"^\[([A-Za-z0-9_.]+)\]$")
_NAME = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


class ScenarioError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(f"line {n}: {msg}" if n else msg for n, msg in self.errors))


@dataclass
class Scenario:
    name: str
    protocol: str
    description: str = ""
    chains: tuple = ("ACoin", "BCoin")
    parties: tuple = ()
    wallets: dict = field(default_factory=dict)        # (party, chain) -> [units]
    terms: object = None
    strategies: dict = field(default_factory=dict)     # party -> dict of intent
    prices: dict = field(default_factory=dict)         # time -> price string
    enumerate: Optional[dict] = None                   # honest, depth
    expect: dict = field(default_factory=dict)         # key -> (line, value)
    channels: list = field(default_factory=list)       # (chain, a, b, fund_a, fund_b)
    steps: list = field(default_factory=list)          # (line, [words])
    payoff: dict = field(default_factory=dict)


def _bool(v: str) -> bool:
    if v.lower() in ("true", "yes", "1"):
        return True
    if v.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true or false, got {v!r}")


def _amounts(v: str) -> list:
    return [coins(x.strip()) for x in v.split(",") if x.strip()]


def _lex(text: str):
    """Yield (line number, section, key, value) and collect syntax errors."""
    errors, entries = [], []
    section = None
    seen = set()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            section = m.group(1)
            base = section.split(".", 1)[0]
            if base not in SECTIONS and base != "strategy":
                errors.append((n, f"unknown section [{section}]"))
            if section in seen:
                errors.append((n, f"duplicate section [{section}]"))
            seen.add(section)
            entries.append((n, section, None, None))
            continue
        if section is None:
            errors.append((n, "syntax error: content before the first [section]"))
            continue
        if section == "steps":
            entries.append((n, section, line, None))
            continue
        if "=" not in line:
            errors.append((n, f"syntax error: expected 'key = value', got {line!r}"))
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            errors.append((n, "empty key"))
            continue
        entries.append((n, section, key, value))
    if not entries and not errors:
        errors.append((0, "syntax error: empty file"))
    return entries, errors


def parse_scenario(text: str, default_name: str = "scenario") -> Scenario:
    entries, errors = _lex(text)
    raw = {}
    lines = {}
    for n, section, key, value in entries:
        if key is None:
            raw.setdefault(section, [] if section == "steps" else {})
            lines.setdefault((section, None), n)
            continue
        if section == "steps":
            raw.setdefault("steps", []).append((n, key.split()))
            continue
        sec = raw.setdefault(section, {})
        if not isinstance(sec, dict):
            continue
        if key in sec:
            errors.append((n, f"duplicate key {key!r} in [{section}]"))
        sec[key] = value
        lines[(section, key)] = n

    def err(section, key, msg):
        errors.append((lines.get((section, key), 0), msg))

    head = raw.get("scenario", {})
    if "scenario" not in raw and not errors:
        errors.append((0, "missing [scenario] section"))
    protocol = head.get("protocol", "")
    if "scenario" in raw and protocol not in PROTOCOLS:
        err("scenario", "protocol", f"unknown protocol {protocol!r}; expected one of "
                                    f"{', '.join(PROTOCOLS)}")
    sc = Scenario(head.get("name", default_name), protocol, head.get("description", ""))

    chains = raw.get("chains", {}).get("names")
    if chains:
        sc.chains = tuple(c.strip() for c in chains.split(","))
        if len(sc.chains) != 2 or len(set(sc.chains)) != 2:
            err("chains", "names", "exactly two distinct chains are supported")
    names = raw.get("parties", {}).get("names")
    if names:
        sc.parties = tuple(x.strip() for x in names.split(","))
        for x in sc.parties:
            if not _NAME.match(x):
                err("parties", "names", f"bad party name {x!r}")

    for key, value in raw.get("wallets", {}).items():
        party, _, chain = key.partition(".")
        if not _NAME.match(party) or chain not in sc.chains:
            err("wallets", key, f"wallet key must be party.chain with a known chain, got {key!r}")
            continue
        try:
            sc.wallets[(party, chain)] = _amounts(value)
        except (ValueError, InvalidOperation) as e:
            err("wallets", key, str(e))

    terms = {}
    for key, value in raw.get("terms", {}).items():
        try:
            if key in AMOUNT_KEYS:
                terms[key] = coins(value)
            elif key in INT_KEYS:
                terms[key] = int(value)
            elif key in BOOL_KEYS:
                terms[key] = _bool(value)
            elif key in NAME_KEYS:
                terms[key] = value
            else:
                err("terms", key, f"unknown term {key!r}")
        except (ValueError, InvalidOperation) as e:
            err("terms", key, f"bad value for {key}: {e}")

    for section, body in raw.items():
        if not section.startswith("strategy."):
            continue
        party = section.split(".", 1)[1]
        intent = {}
        for key, value in body.items():
            if key not in STRATEGY_KEYS:
                err(section, key, f"unknown strategy key {key!r}")
            elif key.endswith("_at"):
                try:
                    intent[key] = int(value)
                except ValueError:
                    err(section, key, f"{key} must be an integer time")
            elif key == "silent":
                try:
                    intent["silent"] = _bool(value)
                except ValueError as e:
                    err(section, key, str(e))
            elif key == "script":
                plan = {}
                for item in value.split(","):
                    label, _, at = item.strip().partition("@")
                    try:
                        plan[label] = int(at or 0)
                    except ValueError:
                        err(section, key, f"bad script entry {item.strip()!r}; use label@time")
                intent["script"] = plan
            else:
                intent[key] = value
        sc.strategies[party] = intent

    for key, value in raw.get("prices", {}).items():
        try:
            Decimal(value)
            sc.prices[int(key)] = value
        except (ValueError, InvalidOperation):
            err("prices", key, "price lines are 'time = ratio'")

    if "enumerate" in raw:
        body = raw["enumerate"]
        honest = tuple(x.strip() for x in body.get("honest", "").split(",") if x.strip())
        try:
            depth = int(body.get("depth", "8"))
        except ValueError:
            err("enumerate", "depth", "depth must be an integer")
            depth = 8
        sc.enumerate = {"honest": honest, "depth": depth}

    sc.expect = {k: (lines[("expect", k)], v) for k, v in raw.get("expect", {}).items()}
    sc.payoff = dict(raw.get("payoff", {}))

    for key, value in raw.get("channels", {}).items():
        pair, _, chain = key.partition(".")
        a, _, b = pair.partition("-")
        try:
            fa, fb = _amounts(value) if "," in value else (coins(value), 0)
            lines[("channels", f"{a}-{b}.{chain}")] = lines[("channels", key)]
            sc.channels.append((chain, a, b, fa, fb))
        except (ValueError, InvalidOperation):
            err("channels", key, "channel lines are 'a-b.Chain = fund_a, fund_b'")
    sc.steps = raw.get("steps", [])
    for n, words in sc.steps:
        verb, args = words[0], words[1:]
        if verb not in STEPS:
            errors.append((n, f"unknown step {verb!r}; expected one of {', '.join(sorted(STEPS))}"))
        elif not STEPS[verb][0] <= len(args) <= STEPS[verb][1]:
            errors.append((n, f"step {verb!r} takes {STEPS[verb][0]} to {STEPS[verb][1]} "
                              f"arguments, got {len(args)}"))
    if sc.steps and protocol and protocol != "lightning":
        errors.append((sc.steps[0][0], "[steps] is only meaningful for the lightning protocol"))

    # Every party mentioned anywhere must be declared when [parties] is given.
    if sc.parties:
        mentioned = {p for p, _ in sc.wallets} | set(sc.strategies)
        mentioned |= {x for ch in sc.channels for x in ch[1:3]}
        for who in sorted(mentioned - set(sc.parties)):
            errors.append((lines.get(("parties", "names"), 0), f"undeclared party {who!r}"))
    for chain, a, b, _, _ in sc.channels:
        if chain not in sc.chains or not a or not b:
            err("channels", f"{a}-{b}.{chain}", f"bad channel {a}-{b}.{chain}")

    if not errors and protocol:
        try:
            sc.terms = _build_terms(sc, terms)
        except (InvalidTerms, ValueError, TypeError) as e:
            where = lines.get(("terms", None), lines.get(("scenario", "protocol"), 0))
            errors.append((where, f"invalid terms: {e}"))
    if errors:
        raise ScenarioError(sorted(errors))
    return sc


def _build_terms(sc: Scenario, t: dict):
    if sc.protocol == "htlc":
        for k in ("amount", "T", "payer", "payee"):
            if k not in t:
                raise ValueError(f"htlc needs term {k!r}")
        extra = set(t) - {"amount", "T", "payer", "payee", "chain"}
        if extra:
            raise ValueError(f"terms not used by an htlc: {', '.join(sorted(extra))}")
        if t.get("chain", sc.chains[1]) not in sc.chains:
            raise ValueError(f"unknown chain {t['chain']!r}")
        if t["amount"] <= 0:
            raise ValueError("htlc amount must be positive")
        return dict(t)
    if sc.protocol == "swap":
        keys = {"a_amount", "b_amount", "T", "a_expiry", "b_expiry"}
        extra = set(t) - keys
        if extra:
            raise ValueError(f"terms not used by a swap: {', '.join(sorted(extra))}")
        return SwapTerms(**t, a_chain=sc.chains[0], b_chain=sc.chains[1])
    allowed = {"premium", "p_a", "p_b", "m_a", "m_b", "T", "E", "M", "delay", "buyer"} | BOOL_KEYS
    extra = set(t) - allowed
    if extra:
        raise ValueError(f"terms not used by a swaption: {', '.join(sorted(extra))}")
    for k in ("premium", "p_a", "p_b"):
        if k not in t:
            raise ValueError(f"swaption needs term {k!r}")
    return SwaptionTerms(**t, a_chain=sc.chains[0], b_chain=sc.chains[1])
