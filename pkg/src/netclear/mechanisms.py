"""Buyer-optimal mechanism selection and group-strategy-proofness search."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import itertools

from . import expr as ex
from .demand import EPS_TIE
from .equilibrium import (
    EPS_EQ,
    EquilibriumRecord,
    extremal_equilibria,
    find_equilibria,
)
from .errors import NoEquilibriumFound, NotTerminalBuyers
from .model import PriceVector, terminal_roles
from .utility import FirmUtility, UtilityProfile, is_unit_demand, truncate_at_outside


@dataclass(frozen=True)
class SearchConfig:
    box: tuple[float, float]
    step: float = 0.25
    eps_eq: float = EPS_EQ
    eps_tie: float = EPS_TIE
    refine: bool = False  # grid-aligned instances do not need descent


@dataclass(frozen=True)
class MechanismOutcome:
    bundle: int  # designated global support
    prices: PriceVector
    allocation_prices: dict[str, float]  # realized trades only
    utilities: dict[str, float]  # per firm, under the reported profile
    rule: str
    record: EquilibriumRecord


def buyer_optimal_mechanism(u: UtilityProfile,
                            search: SearchConfig) -> MechanismOutcome:
    """Pick the equilibrium every terminal buyer weakly prefers.

    Falls back to the lexicographically smallest price vector if no record
    dominates for all buyers (hypothesis failure; flagged by rule suffix).
    Designated support is the lowest bundle in bitset order.
    """
    found = find_equilibria(u, search.box, search.step, refine=search.refine,
                            eps_eq=search.eps_eq, eps_tie=search.eps_tie)
    if not found:
        raise NoEquilibriumFound("no equilibrium on the search grid")
    report = extremal_equilibria(u, found)
    rule = "buyer-optimal"
    rec = report.buyer_optimal
    if rec is None:
        rec = min(found, key=lambda r: r.prices.values)
        rule = "buyer-optimal/fallback-lex-min"
    bundle = rec.designated_support
    alloc = {t.id: rec.prices.values[i]
             for i, t in enumerate(u.network.trades) if bundle >> i & 1}
    utilities = {
        f: _utility_of(u.firms[f], bundle, rec.prices)
        for f in sorted(u.firms)}
    return MechanismOutcome(bundle, rec.prices, alloc, utilities, rule, rec)


def _utility_of(fu: FirmUtility, global_bundle: int, p: PriceVector) -> float:
    v = fu.value(global_bundle & fu.omega, p.values)
    from .utility import INFEASIBLE
    assert v is not INFEASIBLE, "mechanism allocation infeasible for a firm"
    return v


# -- misreport families ------------------------------------------------------

def truncation_reports(fu: FirmUtility, levels: Iterable[float]):
    """Unit-demand outside-option truncations."""
    for lvl in levels:
        yield f"truncate@{lvl}", truncate_at_outside(fu, lvl)


def uplift_reports(fu: FirmUtility, amounts: Iterable[float]):
    """Raise the reported value of one upstream trade by a constant."""
    buys = fu.network.buys_mask(fu.firm)
    for i, t in enumerate(fu.network.trades):
        mask = 1 << i
        if not (buys & mask) or mask not in fu.table:
            continue
        for a in amounts:
            table = dict(fu.table)
            table[mask] = ex.add(table[mask], ex.num(a))
            yield f"uplift[{t.id}]+{a}", FirmUtility(fu.firm, fu.network, table)


@dataclass(frozen=True)
class Deviation:
    descriptors: tuple[str, ...]
    deltas: dict[str, float]  # true-utility change per coalition member


@dataclass(frozen=True)
class ManipulationReport:
    coalition: tuple[str, ...]
    tried: int
    all_gain: Deviation | None  # every member strictly better off
    some_gain: tuple[Deviation, ...]  # diagnostics: at least one member gains

    @property
    def ok(self) -> bool:
        return self.all_gain is None


def manipulation_search(u_true: UtilityProfile, coalition: Sequence[str],
                        search: SearchConfig,
                        truncation_levels: Sequence[float] = (),
                        uplift_amounts: Sequence[float] = (),
                        mech=buyer_optimal_mechanism,
                        gain_tol: float = 1e-9) -> ManipulationReport:
    """Scan joint misreports drawn from the truncation and single-trade
    uplift families; a violation needs EVERY coalition member to strictly
    gain under their true utilities."""
    roles = terminal_roles(u_true.network)
    for f in coalition:
        if roles.get(f) != "terminal-buyer" or not is_unit_demand(u_true.firms[f]):
            raise NotTerminalBuyers(f)
    if not coalition:
        return ManipulationReport((), 0, None, ())

    truthful = mech(u_true, search)
    base = {f: _utility_of(u_true.firms[f], truthful.bundle, truthful.prices)
            for f in coalition}

    def member_options(f: str):
        fu = u_true.firms[f]
        opts = [("truthful", fu)]
        opts.extend(truncation_reports(fu, truncation_levels))
        opts.extend(uplift_reports(fu, uplift_amounts))
        return opts

    tried = 0
    all_gain = None
    some_gain = []
    for combo in itertools.product(*(member_options(f) for f in coalition)):
        if all(name == "truthful" for name, _ in combo):
            continue
        tried += 1
        reported = u_true.replace(**{
            f: fu for f, (_name, fu) in zip(coalition, combo)})
        try:
            outcome = mech(reported, search)
        except NoEquilibriumFound:
            continue
        deltas = {
            f: _utility_of(u_true.firms[f], outcome.bundle, outcome.prices)
            - base[f]
            for f in coalition}
        dev = Deviation(tuple(name for name, _ in combo), deltas)
        if all(d > gain_tol for d in deltas.values()):
            all_gain = dev
            break
        if any(d > gain_tol for d in deltas.values()) and len(some_gain) < 10:
            some_gain.append(dev)
    return ManipulationReport(tuple(coalition), tried, all_gain,
                              tuple(some_gain))
