"""Canonical small instances used by tests, docs, and bundled scenarios.

Each builder returns ready-made networks / utilities exercising a specific
phenomenon: frictional intermediation with only weak substitutability,
lattice failure, missing seller-optimal equilibria, kinked demand with an
aggregate-law violation, and so on.
"""

from __future__ import annotations

from .expr import parse_expr
from .model import TradeNetwork, build_network
from .utility import FirmUtility, UtilityProfile, make_quasilinear


def _table(network: TradeNetwork, firm: str, entries: dict[frozenset | tuple, str]) -> FirmUtility:
    table = {}
    for ids, text in entries.items():
        mask = network.mask_of(ids)
        table[mask] = parse_expr(text, allowed_trades=[t.id for t in network.trades])
    return FirmUtility(firm, network, table)


# -- star intermediary: two purchases, two sales, exp frictions on the full
#    bundle; satisfies only the weak substitutability conditions ------------

def star_network() -> TradeNetwork:
    return build_network([
        ("a1", "s1", "f"),
        ("a2", "s2", "f"),
        ("b1", "f", "x1"),
        ("b2", "f", "x2"),
    ])


def star_intermediary(network: TradeNetwork | None = None) -> FirmUtility:
    n = network or star_network()
    return _table(n, "f", {
        (): "0",
        ("a1", "b1"): "2 - p[a1] + p[b1]",
        ("a1", "b2"): "2 - p[a1] + p[b2]",
        ("a2", "b1"): "2 - p[a2] + p[b1]",
        ("a2", "b2"): "2 - p[a2] + p[b2]",
        ("a1", "a2", "b1", "b2"):
            "4 - exp((p[a1] + p[a2])/2 - 1) - exp(1 - (p[b1] + p[b2])/2)",
    })


def star_market() -> UtilityProfile:
    n = star_network()
    firms = {"f": star_intermediary(n)}
    for i, tid in (("1", "a1"), ("2", "a2")):
        firms[f"s{i}"] = _table(n, f"s{i}", {(): "0", (tid,): f"p[{tid}]"})
    for i, tid in (("1", "b1"), ("2", "b2")):
        firms[f"x{i}"] = _table(n, f"x{i}", {(): "0", (tid,): f"2 - p[{tid}]"})
    return UtilityProfile(n, firms)


# -- three-supplier buyer: logistic friction on the triple, third supplier
#    cannot actually deliver; no seller-optimal equilibrium exists ----------

def three_supplier_network() -> TradeNetwork:
    return build_network([
        ("w1", "s1", "f"),
        ("w2", "s2", "f"),
        ("w3", "s3", "f"),
    ])


def three_supplier_buyer(network: TradeNetwork | None = None) -> FirmUtility:
    n = network or three_supplier_network()
    return _table(n, "f", {
        (): "0",
        ("w1", "w2"): "2 - p[w1] - p[w2]",
        ("w1", "w2", "w3"): "1 - 1/(1 + exp(-(p[w1] + p[w2] + p[w3])))",
    })


def three_supplier_market() -> UtilityProfile:
    n = three_supplier_network()
    firms = {"f": three_supplier_buyer(n)}
    firms["s1"] = _table(n, "s1", {(): "0", ("w1",): "p[w1]"})
    firms["s2"] = _table(n, "s2", {(): "0", ("w2",): "p[w2]"})
    firms["s3"] = _table(n, "s3", {(): "0"})  # cannot deliver w3
    return UtilityProfile(n, firms)


# -- triple-trade buyer with a sqrt kink on the full bundle; a single price
#    rise collapses demand from the full bundle to the far singletons -------

def triple_trade_network() -> TradeNetwork:
    return build_network([
        ("w1", "s1", "f"),
        ("w2", "s2", "f"),
        ("w3", "s3", "f"),
    ])


def triple_trade_buyer(network: TradeNetwork | None = None) -> FirmUtility:
    n = network or triple_trade_network()
    return _table(n, "f", {
        (): "0",
        ("w1",): "3 - p[w1]",
        ("w2",): "3 - p[w2]",
        ("w3",): "3 - p[w3]",
        ("w1", "w2"): "4 - p[w1] - p[w2]",
        ("w1", "w3"): "4 - p[w1] - p[w3]",
        ("w2", "w3"): "4 - p[w2] - p[w3]",
        ("w1", "w2", "w3"): (
            "piecewise{ p[w1] + p[w2] + p[w3] <= 0 :"
            " 4 - p[w1] - p[w2] - p[w3];"
            " p[w1] + p[w2] + p[w3] <= 6 :"
            " 4 - 3*sqrt((p[w1] + p[w2] + p[w3])/6);"
            " else : 7 - p[w1] - p[w2] - p[w3] }"),
    })


# -- kinked-pair buyer: quadratic kink on the pair; violates the strong law
#    of aggregate demand while the weak law holds ---------------------------

def kinked_pair_network() -> TradeNetwork:
    return build_network([
        ("w1", "q", "f"),
        ("w2", "q", "f"),
    ])


def kinked_pair_buyer(network: TradeNetwork | None = None) -> FirmUtility:
    n = network or kinked_pair_network()
    return _table(n, "f", {
        (): "0",
        ("w1",): "3 - p[w1]",
        ("w2",): "3 - p[w2]",
        ("w1", "w2"): (
            "piecewise{ p[w1] + p[w2] <= 2 : 4 - p[w1] - p[w2];"
            " p[w1] + p[w2] <= 4 : 2 - ((p[w1] + p[w2])^2 - 4)/12;"
            " else : 5 - p[w1] - p[w2] }"),
    })


def kinked_pair_market() -> UtilityProfile:
    """Adds the two-trade seller; the rural-hospitals property fails here."""
    n = kinked_pair_network()
    firms = {
        "f": kinked_pair_buyer(n),
        "q": _table(n, "q", {
            (): "0",
            ("w1",): "p[w1]",
            ("w2",): "p[w2]",
            ("w1", "w2"): "p[w1] + p[w2] - 1.5",
        }),
    }
    return UtilityProfile(n, firms)


# -- simple quasi-linear assignment fixture builder --------------------------

def assignment_market(sellers: int, buyers: int,
                      values: dict[tuple[int, int], float],
                      costs: dict[int, float] | None = None) -> UtilityProfile:
    """Unit-supply sellers, unit-demand buyers, quasi-linear throughout.

    ``values[(i, j)]`` is buyer j's value for seller i's unit; missing pairs
    have no trade.  ``costs[i]`` is seller i's cost of producing (default 0).
    """
    costs = costs or {}
    trades = []
    for i in range(sellers):
        for j in range(buyers):
            if (i, j) in values:
                trades.append((f"t{i}{j}", f"s{i}", f"b{j}"))
    n = build_network(trades)
    firms: dict[str, FirmUtility] = {}
    for i in range(sellers):
        own = [t.id for t in n.trades if t.seller == f"s{i}"]
        if not own:
            continue
        valuation = {0: 0.0}
        for tid in own:
            valuation[n.mask_of([tid])] = -float(costs.get(i, 0.0))
        firms[f"s{i}"] = make_quasilinear(f"s{i}", n, valuation)
    for j in range(buyers):
        own = [t.id for t in n.trades if t.buyer == f"b{j}"]
        if not own:
            continue
        valuation = {0: 0.0}
        for tid in own:
            i = int(tid[1:-1])
            valuation[n.mask_of([tid])] = float(values[(i, j)])
        firms[f"b{j}"] = make_quasilinear(f"b{j}", n, valuation)
    return UtilityProfile(n, firms)
