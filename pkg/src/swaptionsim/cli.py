"""Command-line scenario runner.

    swaptionsim list
    swaptionsim run NAME... [--scenario PATH] [--enumerate] [--honest a,b] ...

Exit codes: 0 when every check passes, 1 when a safety violation or a failed
expectation is found, 2 for usage and parse errors.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from importlib import resources
from pathlib import Path as FsPath
from typing import Optional

from . import econ, lightning
from .chainsim import COIN, World, coins, format_amount
from .engine import (AtomicSwap, Future, Honest, HtlcPayment, Outcome, Scripted, Silent,
                     Swaption, Trace, check_safety, cheat_guarantee, enumerate_strategies,
                     execute, swap_guarantee, swaption_guarantee)
from .engine.protocols import _default_world, default_wallets
from .scenario import Scenario, ScenarioError, parse_scenario

OK, FAILED, USAGE = 0, 1, 2
SEED = b"swaptionsim"


class UsageError(Exception):
    pass


@dataclass
class Options:
    enumerate: bool = False
    honest: Optional[tuple] = None
    depth: Optional[int] = None
    grid: Optional[tuple] = None
    numeraire: str = "acoin"
    format: str = "text"
    numeraire_given: bool = False


# -- scenario lookup -------------------------------------------------------------

def bundled() -> list:
    root = resources.files("swaptionsim") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_text(name: str) -> tuple:
    """Return (display name, text) for a bundled name or a file path."""
    if os.path.exists(name):
        return FsPath(name).stem, FsPath(name).read_text()
    root = resources.files("swaptionsim") / "scenarios"
    path = root / f"{name}.ini"
    if not path.is_file():
        raise UsageError(f"no bundled scenario {name!r}; try 'swaptionsim list'")
    return name, path.read_text()


# -- helpers ---------------------------------------------------------------------

def _strategy(intent: dict):
    intent = dict(intent)
    if intent.pop("silent", False):
        return Silent()
    script = intent.pop("script", None)
    honest = Honest(**intent)
    return Scripted(script, honest) if script is not None else honest


def _world(sc: Scenario, defaults: dict) -> World:
    wallets = dict(sc.wallets) if sc.wallets else defaults
    return _default_world(list(sc.chains), wallets, SEED)


def _protocol(sc: Scenario):
    t = sc.terms
    if sc.protocol == "htlc":
        chain = t.get("chain", sc.chains[1])
        world = _world(sc, {(t["payer"], chain): [t["amount"]]})
        return HtlcPayment(t["payer"], t["payee"], t["amount"], t["T"], chain, world, SEED)
    if sc.protocol == "swap":
        world = _world(sc, {(t.alice, t.a_chain): [t.a_amount], (t.bob, t.b_chain): [t.b_amount]})
        return AtomicSwap(t, world, SEED)
    prices = sc.prices or None
    if sc.protocol == "swaption":
        return Swaption(t, _world(sc, default_wallets(t)), SEED, price_path=prices)
    if sc.protocol == "future":
        world = _world(sc, {}) if sc.wallets else None
        return Future(t, price_path=prices, world=world, seed=SEED)
    raise UsageError(f"protocol {sc.protocol!r} has no executable protocol")


def _coin_text(v: Fraction) -> str:
    v = Fraction(v) / COIN
    d = Decimal(v.numerator) / Decimal(v.denominator)
    if Fraction(d) != v:
        return str(v)
    text = format(d.normalize(), "f")
    return text


def _parse_amount(text: str) -> int:
    text = text.strip()
    sign = -1 if text.startswith("-") else 1
    return sign * coins(text.lstrip("+-"))


def _labels(value: str) -> list:
    return [x.strip() for x in value.split(",") if x.strip()]


class _Checker:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.lines = []
        self.failed = False

    def check(self, key: str, got, want, ok: bool):
        n = self.sc.expect[key][0]
        if ok:
            self.lines.append(f"expect {key}: ok")
        else:
            self.failed = True
            self.lines.append(f"expect {key}: FAILED (line {n}: wanted {want}, got {got})")

    def outcome(self, oc: Outcome, labels=(), handled=()):
        for key, (_, value) in sorted(self.sc.expect.items()):
            if key in handled:
                continue
            kind, _, rest = key.partition(".")
            if kind in ("delta", "final"):
                party, _, chain = rest.partition(".")
                got = oc.delta(party, chain) if kind == "delta" else oc.balance(party, chain)
                want = _parse_amount(value)
                self.check(key, format_amount(got), value, got == want)
            elif kind == "published":
                missing = [l for l in _labels(value) if l not in labels]
                self.check(key, "missing " + ",".join(missing), value, not missing)
            elif kind == "absent":
                present = [l for l in _labels(value) if l in labels]
                self.check(key, "present " + ",".join(present), value, not present)
            elif kind == "revealed":
                names = set(oc.revealed_names())
                missing = [l for l in _labels(value) if l not in names]
                self.check(key, ",".join(sorted(names)) or "none", value, not missing)
            elif key not in handled:
                self.check(key, "unsupported key", value, False)

    def count(self, key: str, got: int):
        if key not in self.sc.expect:
            return
        value = self.sc.expect[key][1].strip()
        if value.startswith(">="):
            ok = got >= int(value[2:])
        else:
            ok = got == int(value)
        self.check(key, got, value, ok)


# -- runners ---------------------------------------------------------------------

def _render(trace: Trace, fmt: str) -> str:
    return trace.records() if fmt == "records" else trace.text()


def _guarantees(sc: Scenario, honest) -> list:
    t = sc.terms
    if sc.protocol == "swap":
        return [swap_guarantee(t, p) for p in honest]
    if sc.protocol == "swaption":
        out = [swaption_guarantee(t, p) for p in honest]
        if t.cancellable and t.writer in honest:
            out.append(cheat_guarantee(t))
        return out
    raise UsageError(f"enumeration is not defined for protocol {sc.protocol!r}")


def _run_protocol(sc: Scenario, opts: Options) -> tuple:
    proto = _protocol(sc)
    strategies = proto.default_strategies()
    strategies.update({p: _strategy(i) for p, i in sc.strategies.items()})
    out = []
    checker = _Checker(sc)
    failed = False
    setting = sc.enumerate or {}
    handled = {"violations", "outcomes"}
    trace = execute(proto, strategies)
    out.append(_render(trace, opts.format).rstrip("\n"))
    checker.outcome(trace.outcome, trace.labels(), handled)
    if opts.enumerate or sc.enumerate:
        honest = opts.honest or setting.get("honest") or ()
        if not honest:
            raise UsageError("enumeration needs --honest or an [enumerate] honest list")
        unknown = set(honest) - set(proto.parties)
        if unknown:
            raise UsageError(f"unknown honest party {', '.join(sorted(unknown))}")
        depth = opts.depth if opts.depth is not None else setting.get("depth", 8)
        guarantees = _guarantees(sc, honest)
        found = enumerate_strategies(proto, honest, depth=depth, strategies=strategies)
        report = check_safety(found, guarantees)
        out.append(f"# enumeration: honest {','.join(sorted(honest))}, depth {depth}")
        out.append(f"{len(report.violations)} violations over {report.checked} outcomes")
        if not report.ok:
            out.append(report.summary())
        if "violations" in sc.expect:
            checker.count("violations", len(report.violations))
        elif not report.ok:
            failed = True
        checker.count("outcomes", report.checked)
    out += checker.lines
    return (FAILED if failed or checker.failed else OK), "\n".join(out) + "\n"


def _run_payoff(sc: Scenario, opts: Options) -> tuple:
    grid = opts.grid
    if grid is None:
        spec = sc.payoff.get("grid", "0.5:2.0:0.01")
        grid = _grid(spec)
    numeraire = opts.numeraire if opts.numeraire_given else sc.payoff.get("numeraire", "acoin")
    if numeraire not in (econ.ACOIN, econ.BCOIN):
        raise UsageError(f"unknown numeraire {numeraire!r}")
    t = sc.terms
    underlying = "bcoin_in_acoin" if numeraire == econ.ACOIN else "acoin_in_bcoin"
    out = [f"# payoff {sc.name}: buyer {t.buyer}, value in {numeraire}",
           f"{underlying} value"]
    for x, v in econ.payoff_curve(t, econ.price_grid(*grid), numeraire):
        out.append(f"{_coin_text(x * COIN)} {_coin_text(v)}")
    ks = econ.kinks(t, numeraire)
    out.append("# kinks " + " ".join(_coin_text(k * COIN) for k in ks))
    checker = _Checker(sc)
    key = f"kinks.{numeraire}"
    if key in sc.expect:
        want = [Fraction(x) for x in _labels(sc.expect[key][1])]
        checker.check(key, " ".join(_coin_text(k * COIN) for k in ks), sc.expect[key][1],
                      want == ks)
    out += checker.lines
    return (FAILED if checker.failed else OK), "\n".join(out) + "\n"


def _grid(spec: str) -> tuple:
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be LO:HI:STEP, got {spec!r}")
    try:
        lo, hi, step = (econ.as_price(p) for p in parts)
    except (ValueError, ZeroDivisionError) as e:
        raise UsageError(f"bad grid {spec!r}: {e}")
    if hi < lo:
        raise UsageError("grid upper bound is below the lower bound")
    return lo, hi, step


def _run_lightning(sc: Scenario, opts: Options) -> tuple:
    world = World.create(list(sc.chains), SEED)
    for (party, chain), amounts in sorted(sc.wallets.items()):
        world.fund(party, chain, amounts)
    parties = sorted(sc.parties or {p for p, _ in sc.wallets})
    initial = lightning.totals_table(world, parties)
    strategies = {p: ("silent" if i.get("silent") else
                      {k: v for k, v in i.items() if k != "silent"})
                  for p, i in sc.strategies.items()}
    net = lightning.network(world)
    for chain, a, b, fa, fb in sc.channels:
        lightning.open_channel(world, chain, a, b, fa, fb)
    named = {}
    unwinds = []
    checker = _Checker(sc)
    errors = []
    for n, words in sc.steps:
        verb, args = words[0], words[1:]
        try:
            if verb == "route":
                opts_kv = dict(a.split("=", 1) for a in args[1:] if "=" in a)
                paths = {}
                for chain in sc.chains:
                    if chain not in opts_kv:
                        raise lightning.RoutingError(f"route needs {chain}=node,node,...")
                    paths[chain] = lightning.Path(chain, tuple(_labels(opts_kv[chain])))
                mirror = named[opts_kv["mirror"]] if "mirror" in opts_kv else None
                fee = int(opts_kv["fee"]) if "fee" in opts_kv else None
                named[args[0]] = lightning.route_swaption(
                    world, paths[sc.chains[0]], paths[sc.chains[1]], sc.terms, strategies,
                    fee_bps=fee, mirror=mirror)
            elif verb == "decouple":
                outer, inner = lightning.decouple(world, named[args[0]], args[1])
                named[args[2]], named[args[3]] = outer, inner
            elif verb == "unwind":
                unwinds.append(lightning.unwind(world, named[args[0]], named[args[1]]))
            elif verb == "exercise":
                at = args[1]
                named[args[0]].exercise_at = world.now + int(at[1:]) if at.startswith("+") \
                    else int(at)
            elif verb == "close":
                pair, _, chain = args[0].partition(".")
                a, _, b = pair.partition("-")
                lightning.close_channel(world, net.channel(chain, a, b))
            elif verb == "settle":
                lightning.settle(world, strategies, int(args[0]) if args else None)
            elif verb == "advance":
                t = int(args[0])
                if t < world.now:
                    raise ValueError("the clock cannot run backwards")
                world.now = t
        except KeyError as e:
            errors.append(f"step line {n}: unknown position {e.args[0]!r}")
            break
        except (lightning.ChannelError, lightning.RoutingError, ValueError) as e:
            errors.append(f"step line {n}: {e}")
            break
    final = lightning.totals_table(world, parties)
    oc = Outcome(initial, final, (), (), ())
    trace = Trace("lightning", list(net.events), oc, world)
    out = [_render(trace, opts.format).rstrip("\n")]
    live = lightning.positions(world)
    out.append("# positions " + (" ".join(f"{b}-{w}" for b, w in live) or "none"))
    handled = {"positions", "net_unchanged"} | {k for k in sc.expect if k.startswith("status.")}
    if "positions" in sc.expect:
        want = sorted(tuple(x.split("-", 1)) for x in _labels(sc.expect["positions"][1]))
        checker.check("positions", [f"{b}-{w}" for b, w in live], sc.expect["positions"][1],
                      want == live)
    if "net_unchanged" in sc.expect:
        ok = bool(unwinds) and all(u.outcome.initial == u.outcome.balances for u in unwinds)
        checker.check("net_unchanged", ok, "true", ok)
    for key in sorted(k for k in sc.expect if k.startswith("status.")):
        pos = named.get(key.split(".", 1)[1])
        got = pos.status if pos else "missing"
        checker.check(key, got, sc.expect[key][1], got == sc.expect[key][1])
    checker.outcome(oc, (), handled)
    out += errors + checker.lines
    code = FAILED if errors or checker.failed else OK
    return code, "\n".join(out) + "\n"


def run(sc: Scenario, opts: Optional[Options] = None) -> tuple:
    """Execute one parsed scenario; returns ``(exit code, output text)``."""
    opts = opts or Options()
    if opts.grid is not None and sc.protocol != "payoff":
        raise UsageError("--grid only applies to payoff scenarios")
    if sc.protocol == "payoff":
        return _run_payoff(sc, opts)
    if sc.protocol == "lightning":
        if opts.enumerate:
            raise UsageError("enumeration is not defined for lightning scenarios")
        return _run_lightning(sc, opts)
    return _run_protocol(sc, opts)


def _job(args) -> tuple:
    name, text, opts = args
    try:
        sc = parse_scenario(text, name)
        code, out = run(sc, opts)
    except ScenarioError as e:
        return USAGE, name, "", f"{name}: parse error\n{e}\n"
    except UsageError as e:
        return USAGE, name, "", f"{name}: {e}\n"
    return code, sc.name, out, ""


# -- entry point -----------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swaptionsim", description="Run swaption protocol scenarios.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list bundled scenarios")
    r = sub.add_parser("run", help="run scenarios")
    r.add_argument("names", nargs="*", help="bundled scenario names or .ini paths")
    r.add_argument("--scenario", action="append", default=[], metavar="PATH")
    r.add_argument("--enumerate", action="store_true", help="enumerate adversary strategies")
    r.add_argument("--honest", metavar="NAME[,NAME]")
    r.add_argument("--depth", type=int, metavar="N")
    r.add_argument("--grid", metavar="LO:HI:STEP")
    r.add_argument("--numeraire", choices=("acoin", "bcoin"))
    r.add_argument("--format", choices=("text", "records"), default="text")
    r.add_argument("--out", metavar="DIR")
    r.add_argument("--jobs", type=int, default=1, metavar="N")
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code else OK
    if args.command == "list":
        for name in bundled():
            print(name)
        return OK
    try:
        inputs = [load_text(n) for n in args.names] + [load_text(p) for p in args.scenario]
        if not inputs:
            raise UsageError("no scenarios given")
        if args.depth is not None and args.depth < 0:
            raise UsageError("--depth must be non-negative")
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        grid = _grid(args.grid) if args.grid else None
    except UsageError as e:
        print(f"swaptionsim: {e}", file=sys.stderr)
        return USAGE
    honest = tuple(_labels(args.honest)) if args.honest else None
    opts = Options(args.enumerate, honest, args.depth, grid, args.numeraire or "acoin",
                   args.format, args.numeraire is not None)
    jobs = [(name, text, opts) for name, text in inputs]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    worst = OK
    ext = "records" if args.format == "records" else "txt"
    for code, name, out, err in results:
        worst = max(worst, code)
        if err:
            sys.stderr.write(err)
            continue
        if args.out:
            FsPath(args.out, f"{name}.{ext}").write_text(out)
            print(f"{name}: {'ok' if code == OK else 'FAILED'}")
        else:
            if len(results) > 1:
                print(f"## {name}")
            sys.stdout.write(out)
    return worst


if __name__ == "__main__":
    sys.exit(main())
