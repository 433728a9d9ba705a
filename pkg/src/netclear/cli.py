"""Command-line interface: scenario loading, dispatch, report emission.

Scenario files are JSON (schema ``"version": 1``) of three kinds:

``network``::

    {"version": 1, "kind": "network",
     "trades": [{"id": "a1", "seller": "s1", "buyer": "f"}, ...],
     "utilities": {"f": [{"bundle": ["a1", "b1"], "expr": "2 - p[a1] + p[b1]"},
                         ...], ...},
     "analysis": {"box": [-1, 3], "step": 0.25,
                  "eps_tie": 1e-9, "eps_eq": 1e-7, "seed": 42}}

``matching``::

    {"version": 1, "kind": "matching",
     "hospitals": {"h1": [{"doctors": ["d1"], "expr": "3 - p[d1]"}, ...]},
     "doctors": {"d1": {"outside": 0, "offers": {"h1": "1 + t"}}},
     "analysis": {...}}

(hospital expressions are over salaries ``p[d]``; doctor offers are
expressions in the salary ``t``)

``exchange``::

    {"version": 1, "kind": "exchange",
     "objects": ["x", "y"],
     "agents": {"A": {"endowment": ["x"],
                      "utility": [{"objects": ["x"], "expr": "3 + t"}, ...]}},
     "analysis": {...}}

(agent expressions are in the net money transfer ``t``)

Exit codes: 0 success / property passed, 2 property violation found,
1 error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import adapters, expr as ex
from .demand import EPS_TIE, demand_set
from .equilibrium import (
    EPS_EQ,
    extremal_equilibria,
    find_equilibria,
    surplus,
    verify_lattice_pair,
    verify_rural_hospitals_pair,
)
from .errors import (
    NetclearError,
    ScenarioParseError,
    ScenarioValidationError,
    SchemaVersionMismatch,
)
from .mechanisms import SearchConfig, buyer_optimal_mechanism
from .model import PriceVector, TradeNetwork, build_network, terminal_roles
from .properties import (
    check_aggregate_law,
    check_cross_side,
    check_full_substitutability,
    check_monotone_substitutability,
    check_nib,
    check_same_side,
    grid_pattern_pairs,
)
from .utility import FirmUtility, UtilityProfile

SCHEMA_VERSION = 1


@dataclass
class Analysis:
    box: tuple[float, float] = (-1.0, 3.0)
    step: float = 0.25
    eps_tie: float = EPS_TIE
    eps_eq: float = EPS_EQ
    seed: int = 42


@dataclass
class Scenario:
    kind: str
    network: TradeNetwork
    profile: UtilityProfile
    analysis: Analysis
    induced: adapters.InducedExchange | None = None
    path: str = ""


def _fail(msg: str, exc=ScenarioValidationError):
    raise exc(msg)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ScenarioParseError(str(e)) from e
    except json.JSONDecodeError as e:
        raise ScenarioParseError(
            f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if raw.get("version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"expected version {SCHEMA_VERSION}, got {raw.get('version')!r}")
    kind = raw.get("kind", "network")
    a = raw.get("analysis", {})
    analysis = Analysis(
        box=tuple(a.get("box", (-1.0, 3.0))),
        step=float(a.get("step", 0.25)),
        eps_tie=float(a.get("eps_tie", EPS_TIE)),
        eps_eq=float(a.get("eps_eq", EPS_EQ)),
        seed=int(a.get("seed", 42)),
    )
    if kind == "network":
        return _load_network(raw, analysis, path)
    if kind == "matching":
        return _load_matching(raw, analysis, path)
    if kind == "exchange":
        return _load_exchange(raw, analysis, path)
    _fail(f"unknown scenario kind {kind!r}")


def _load_network(raw: dict, analysis: Analysis, path: str) -> Scenario:
    trades = []
    for i, t in enumerate(raw.get("trades", [])):
        for key in ("id", "seller", "buyer"):
            if key not in t:
                _fail(f"trades[{i}]: missing {key!r}")
        trades.append((t["id"], t["seller"], t["buyer"]))
    network = build_network(trades)
    ids = [t.id for t in network.trades]
    firms = {}
    for f, entries in raw.get("utilities", {}).items():
        if f not in network.firms:
            _fail(f"utilities: unknown firm {f!r}")
        table = {}
        for j, entry in enumerate(entries):
            bundle = entry.get("bundle", [])
            for tid in bundle:
                if tid not in network.index:
                    _fail(f"utilities[{f}][{j}]: unknown trade {tid!r}")
            mask = network.mask_of(bundle)
            table[mask] = ex.parse_expr(entry["expr"], allowed_trades=ids)
        firms[f] = FirmUtility(f, network, table)
    missing = network.firms - set(firms)
    if missing:
        _fail(f"no utilities for firms {sorted(missing)}")
    profile = UtilityProfile(network, firms)
    return Scenario("network", network, profile, analysis, path=path)


def _load_matching(raw: dict, analysis: Analysis, path: str) -> Scenario:
    hospitals = {}
    for h, entries in raw.get("hospitals", {}).items():
        table = {}
        for entry in entries:
            docs = frozenset(entry.get("doctors", []))
            table[docs] = ex.parse_expr(entry["expr"],
                                        allowed_trades=None)
        hospitals[h] = table
    doctors = {}
    outside = {}
    for d, spec in raw.get("doctors", {}).items():
        outside[d] = float(spec.get("outside", 0.0))
        doctors[d] = {h: ex.parse_expr(text, allowed_trades=None,
                                       allow_vars=("t",))
                      for h, text in spec.get("offers", {}).items()}
    market = adapters.MatchingMarket(
        tuple(sorted(hospitals)), tuple(sorted(doctors)),
        hospitals, doctors, outside)
    network, profile = adapters.induce_from_matching(market)
    return Scenario("matching", network, profile, analysis, path=path)


def _load_exchange(raw: dict, analysis: Analysis, path: str) -> Scenario:
    objects = tuple(raw.get("objects", []))
    endowments = {}
    tables = {}
    for agent, spec in raw.get("agents", {}).items():
        endowments[agent] = tuple(spec.get("endowment", []))
        table = {}
        for entry in spec.get("utility", []):
            table[frozenset(entry.get("objects", []))] = ex.parse_expr(
                entry["expr"], allowed_trades=None, allow_vars=("t",))
        tables[agent] = table
    economy = adapters.ExchangeEconomy(objects, endowments, tables)
    induced = adapters.induce_from_exchange(economy)
    return Scenario("exchange", induced.network, induced.profile, analysis,
                    induced=induced, path=path)


# -- reporting ---------------------------------------------------------------

@dataclass
class RunResult:
    exit_code: int
    text: str
    payload: dict
    csv_rows: list[list] | None = None


def emit_report(result: RunResult, out_dir: str | None, stem: str,
                formats=("text", "json")) -> list[str]:
    written = []
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        if "text" in formats:
            p = os.path.join(out_dir, f"{stem}.txt")
            with open(p, "w", encoding="utf-8") as fh:
                fh.write(result.text)
            written.append(p)
        if "json" in formats:
            p = os.path.join(out_dir, f"{stem}.json")
            with open(p, "w", encoding="utf-8") as fh:
                json.dump(result.payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
            written.append(p)
        if "csv" in formats and result.csv_rows is not None:
            p = os.path.join(out_dir, f"{stem}.csv")
            with open(p, "w", encoding="utf-8", newline="") as fh:
                csv.writer(fh).writerows(result.csv_rows)
            written.append(p)
    return written


def _ids(network: TradeNetwork, mask: int) -> list[str]:
    return sorted(network.ids_of(mask))


# -- commands ----------------------------------------------------------------

def cmd_demand(sc: Scenario, args) -> RunResult:
    firm = args.firm or sorted(sc.profile.firms)[0]
    prices = PriceVector.of(sc.network, [float(v) for v in args.prices])
    d = demand_set(sc.profile.firms[firm], prices, sc.analysis.eps_tie)
    bundles = [_ids(sc.network, m) for m in d.bundles]
    lines = [f"demand of {firm} at {list(prices.values)}:"]
    lines += [f"  {b}" for b in bundles]
    lines.append(f"indirect utility: {d.indirect:.9g}")
    payload = {"firm": firm, "prices": list(prices.values),
               "bundles": bundles, "indirect": d.indirect}
    return RunResult(0, "\n".join(lines) + "\n", payload)


_PROPERTIES = {
    "sss": lambda u, v, pairs, eps: check_same_side(u, v, pairs, eps),
    "csc": lambda u, v, pairs, eps: check_cross_side(u, v, pairs, eps),
    "fs": lambda u, v, pairs, eps: check_full_substitutability(u, v, pairs, eps),
    "lad": lambda u, v, pairs, eps: check_aggregate_law(u, "demand", v, pairs, eps),
    "las": lambda u, v, pairs, eps: check_aggregate_law(u, "supply", v, pairs, eps),
    "monotone-substitutability":
        lambda u, v, pairs, eps: check_monotone_substitutability(u, pairs, eps),
}


def cmd_check(sc: Scenario, args) -> RunResult:
    firm = args.firm or sorted(
        f for f, r in terminal_roles(sc.network).items()
        if r == "intermediate") or sorted(sc.profile.firms)
    if isinstance(firm, list):
        firm = firm[0]
    u = sc.profile.firms[firm]
    if args.property == "nib":
        lo, hi = sc.analysis.box
        levels = np.round(np.arange(lo, hi + sc.analysis.step / 2,
                                    sc.analysis.step), 12)
        rng = np.random.default_rng(sc.analysis.seed)
        grid = []
        for _ in range(50):
            grid.append(PriceVector(sc.network, tuple(
                float(levels[rng.integers(len(levels))])
                for _ in range(sc.network.n))))
        report = check_nib(u, grid, eps_tie=sc.analysis.eps_tie)
    else:
        pairs = []
        for side in ("purchase-raise", "sale-lower"):
            pairs.extend(grid_pattern_pairs(
                u, sc.analysis.box, sc.analysis.step, side, count=200,
                seed=sc.analysis.seed))
        report = _PROPERTIES[args.property](u, args.variant, pairs,
                                            sc.analysis.eps_tie)
    lines = [f"{report.name} ({report.variant}) for {firm}: {report.verdict} "
             f"[{report.pairs_tested} pairs]"]
    for v in report.violations[:10]:
        lines.append(f"  witness: p={list(v.p)} p'={list(v.p2)} "
                     f"bundle={_ids(sc.network, v.bundle)}")
    payload = {"firm": firm, "property": report.name,
               "variant": report.variant, "verdict": report.verdict,
               "pairs_tested": report.pairs_tested,
               "violations": [
                   {"p": list(v.p), "p2": list(v.p2),
                    "bundle": _ids(sc.network, v.bundle), "detail": v.detail}
                   for v in report.violations]}
    return RunResult(0 if report.ok else 2, "\n".join(lines) + "\n", payload)


def _records_payload(sc: Scenario, records) -> list[dict]:
    out = []
    for rec in sorted(records, key=lambda r: r.prices.values):
        out.append({
            "prices": list(rec.prices.values),
            "supports": [_ids(sc.network, m) for m in rec.supports],
            "net_indices": rec.net_indices,
            "surplus": rec.surplus,
        })
    return out


def _solve(sc: Scenario, args):
    return find_equilibria(sc.profile, sc.analysis.box, sc.analysis.step,
                           refine=not getattr(args, "no_refine", False),
                           eps_eq=sc.analysis.eps_eq,
                           eps_tie=sc.analysis.eps_tie)


def cmd_solve(sc: Scenario, args) -> RunResult:
    records = _solve(sc, args)
    payload = {"equilibria": _records_payload(sc, records)}
    lines = [f"{len(records)} equilibria on grid "
             f"{list(sc.analysis.box)} step {sc.analysis.step}:"]
    for entry in payload["equilibria"]:
        lines.append(f"  p={entry['prices']} supports={entry['supports']}")
    csv_rows = None
    if getattr(args, "csv", False):
        csv_rows = [["trade:" + t.id for t in sc.network.trades] + ["Z"]]
        from .equilibrium import _CompiledProfile
        cp = _CompiledProfile(sc.profile)
        lo, hi = sc.analysis.box
        axis = np.round(np.arange(lo, hi + sc.analysis.step / 2,
                                  sc.analysis.step), 12)
        import itertools
        for point in itertools.product(axis, repeat=sc.network.n):
            csv_rows.append(list(map(float, point))
                            + [cp.surplus_at(tuple(map(float, point)))])
    return RunResult(0, "\n".join(lines) + "\n", payload, csv_rows)


def cmd_lattice(sc: Scenario, args) -> RunResult:
    records = _solve(sc, args)
    payload = {"pairs": []}
    violations = 0
    lines = []
    for i in range(len(records)):
        for j in range(i + 1, len(records)):
            rep = verify_lattice_pair(sc.profile, records[i], records[j],
                                      sc.analysis.eps_eq, sc.analysis.eps_tie)
            entry = {
                "p": list(records[i].prices.values),
                "p2": list(records[j].prices.values),
                "join": list(rep.join_prices),
                "meet": list(rep.meet_prices),
                "join_equilibrium": rep.join_record is not None,
                "meet_equilibrium": rep.meet_record is not None,
            }
            payload["pairs"].append(entry)
            if not rep.ok:
                violations += 1
                lines.append(
                    f"lattice failure: join {entry['join']} equilibrium: "
                    f"{entry['join_equilibrium']}, meet {entry['meet']} "
                    f"equilibrium: {entry['meet_equilibrium']}")
    head = (f"lattice check over {len(records)} equilibria: "
            f"{violations} failing pair(s)")
    return RunResult(0 if violations == 0 else 2,
                     head + "\n" + "\n".join(lines) + "\n", payload)


def cmd_rural(sc: Scenario, args) -> RunResult:
    records = _solve(sc, args)
    payload = {"pairs": []}
    violations = 0
    for i in range(len(records)):
        for j in range(i + 1, len(records)):
            rep = verify_rural_hospitals_pair(sc.profile, records[i],
                                              records[j], sc.analysis.eps_eq)
            entry = {"p": list(records[i].prices.values),
                     "p2": list(records[j].prices.values),
                     "unmatched": [_ids(sc.network, m) for m in rep.unmatched]}
            payload["pairs"].append(entry)
            if not rep.ok:
                violations += 1
    head = (f"rural-hospitals check over {len(records)} equilibria: "
            f"{violations} failing pair(s)")
    return RunResult(0 if violations == 0 else 2, head + "\n", payload)


def cmd_extremal(sc: Scenario, args) -> RunResult:
    records = _solve(sc, args)
    rep = extremal_equilibria(sc.profile, records)
    payload = {
        "seller_optimal": (list(rep.seller_optimal.prices.values)
                           if rep.seller_optimal else None),
        "buyer_optimal": (list(rep.buyer_optimal.prices.values)
                          if rep.buyer_optimal else None),
        "seller_dominant": rep.seller_dominant,
        "buyer_dominant": rep.buyer_dominant,
    }
    lines = [f"seller-optimal: {payload['seller_optimal']}",
             f"buyer-optimal: {payload['buyer_optimal']}"]
    code = 0 if rep.seller_dominant and rep.buyer_dominant else 2
    if not rep.seller_dominant:
        lines.append("no seller-dominant equilibrium in the found set")
    if not rep.buyer_dominant:
        lines.append("no buyer-dominant equilibrium in the found set")
    return RunResult(code, "\n".join(lines) + "\n", payload)


def cmd_mechanism(sc: Scenario, args) -> RunResult:
    cfg = SearchConfig(sc.analysis.box, sc.analysis.step,
                       sc.analysis.eps_eq, sc.analysis.eps_tie)
    outcome = buyer_optimal_mechanism(sc.profile, cfg)
    payload = {
        "rule": outcome.rule,
        "bundle": _ids(sc.network, outcome.bundle),
        "prices": list(outcome.prices.values),
        "allocation_prices": outcome.allocation_prices,
        "utilities": outcome.utilities,
    }
    lines = [f"{outcome.rule}: bundle {payload['bundle']} at "
             f"prices {payload['prices']}"]
    return RunResult(0, "\n".join(lines) + "\n", payload)


def cmd_adapt(sc: Scenario, args) -> RunResult:
    if sc.kind == "network":
        return RunResult(1, "scenario is already a plain network\n",
                         {"error": "nothing to adapt"})
    roles = terminal_roles(sc.network)
    payload = {
        "kind": sc.kind,
        "trades": [{"id": t.id, "seller": t.seller, "buyer": t.buyer}
                   for t in sc.network.trades],
        "roles": roles,
    }
    lines = [f"induced network with {sc.network.n} trades:"]
    lines += [f"  {t.id}: {t.seller} -> {t.buyer}" for t in sc.network.trades]
    return RunResult(0, "\n".join(lines) + "\n", payload)


_COMMANDS = {
    "demand": cmd_demand,
    "check": cmd_check,
    "solve": cmd_solve,
    "lattice": cmd_lattice,
    "rural": cmd_rural,
    "extremal": cmd_extremal,
    "mechanism": cmd_mechanism,
    "adapt": cmd_adapt,
}


def run_command(cmd: str, scenario: Scenario, args) -> RunResult:
    return _COMMANDS[cmd](scenario, args)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="netclear",
        description="Demand, equilibria, and structural checks for trading "
                    "networks with frictions.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--out", help="directory for text/JSON reports")
        p.add_argument("--box", nargs=2, type=float, metavar=("LO", "HI"))
        p.add_argument("--step", type=float)

    p = sub.add_parser("demand", help="demand correspondence at given prices")
    common(p)
    p.add_argument("--firm")
    p.add_argument("--prices", nargs="+", required=True)

    p = sub.add_parser("check", help="substitutability / law checks")
    common(p)
    p.add_argument("--firm")
    p.add_argument("--property", required=True,
                   choices=sorted(_PROPERTIES) + ["nib"])
    p.add_argument("--variant", default="expansion",
                   choices=["weak", "expansion", "contraction", "strong"])

    p = sub.add_parser("solve", help="find equilibria on a grid")
    common(p)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--csv", action="store_true",
                   help="also dump the surplus grid as CSV")

    for name, hlp in (("lattice", "join/meet closure over found equilibria"),
                      ("rural", "net-trade index matching over equilibria"),
                      ("extremal", "seller-/buyer-optimal equilibria"),
                      ("mechanism", "buyer-optimal mechanism outcome"),
                      ("adapt", "show the induced trading network")):
        p = sub.add_parser(name, help=hlp)
        common(p)
        if name in ("lattice", "rural", "extremal"):
            p.add_argument("--no-refine", action="store_true")

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("NETCLEAR_THREADS")
    if threads is not None:
        # caps BLAS-style parallelism in the vectorized scans
        os.environ.setdefault("OMP_NUM_THREADS", threads)
    try:
        sc = load_scenario(args.scenario)
        if args.box:
            sc.analysis.box = (args.box[0], args.box[1])
        if args.step:
            sc.analysis.step = args.step
        result = run_command(args.cmd, sc, args)
    except NetclearError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    sys.stdout.write(result.text)
    stem = f"{os.path.splitext(os.path.basename(args.scenario))[0]}-{args.cmd}"
    formats = ["text", "json"]
    if getattr(args, "csv", False):
        formats.append("csv")
    emit_report(result, args.out, stem, formats)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
