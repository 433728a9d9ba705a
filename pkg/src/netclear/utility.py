"""Per-firm utility tables over (bundle, prices).

A bundle absent from a firm's table is infeasible (utility minus infinity).
Infeasibility is a tagged value, ``INFEASIBLE``, never a float sentinel, so
arithmetic and argmax code never see NaN or -inf.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import expr as ex
from .errors import (
    AllInfeasible,
    BundleOutOfScope,
    NonMonotoneExpr,
    NotTerminalBuyer,
    NotUnitDemand,
    UnknownFirm,
)
from .model import PriceVector, TradeNetwork, partition_bundle, terminal_roles


class _Infeasible:
    """Singleton tag for price-independent infeasibility (utility -inf)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFEASIBLE"


INFEASIBLE = _Infeasible()


@dataclass(frozen=True)
class FirmUtility:
    """A firm's utility: map from feasible bundle masks to expressions."""

    firm: str
    network: TradeNetwork
    table: Mapping[int, ex.Expr]
    _scalar: dict = field(default_factory=dict, compare=False, repr=False)
    _vector: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.firm not in self.network.firms:
            raise UnknownFirm(self.firm)
        if not self.table:
            raise AllInfeasible(f"firm {self.firm} has no feasible bundle")
        omega = self.network.omega_mask(self.firm)
        for mask in self.table:
            if mask & ~omega:
                raise BundleOutOfScope(
                    f"bundle {self.network.ids_of(mask)} not within "
                    f"firm {self.firm}'s trades")

    @property
    def omega(self) -> int:
        return self.network.omega_mask(self.firm)

    def feasible_masks(self) -> tuple[int, ...]:
        return tuple(sorted(self.table))

    def scalar_fn(self, mask: int):
        fn = self._scalar.get(mask)
        if fn is None:
            fn = ex.compile_expr(self.table[mask], self.network.index)
            self._scalar[mask] = fn
        return fn

    def vector_fn(self, mask: int):
        fn = self._vector.get(mask)
        if fn is None:
            fn = ex.compile_expr(self.table[mask], self.network.index,
                                 vectorized=True)
            self._vector[mask] = fn
        return fn

    def value(self, mask: int, values: tuple[float, ...]):
        """Utility at a price tuple, or INFEASIBLE."""
        if mask not in self.table:
            return INFEASIBLE
        return self.scalar_fn(mask)(values)


def eval_utility(u: FirmUtility, bundle: int | Iterable[str], p: PriceVector):
    """u^f(bundle, p); a global bundle is first restricted to the firm."""
    if not isinstance(bundle, int):
        bundle = u.network.mask_of(bundle)
    return u.value(bundle & u.omega, p.values)


@dataclass(frozen=True)
class UtilityProfile:
    network: TradeNetwork
    firms: Mapping[str, FirmUtility]

    def __post_init__(self):
        missing = self.network.firms - set(self.firms)
        if missing:
            raise UnknownFirm(f"profile missing firms {sorted(missing)}")
        for f, fu in self.firms.items():
            if fu.firm != f or fu.network != self.network:
                raise UnknownFirm(f"utility for {fu.firm} registered under {f}")

    def replace(self, **updates: FirmUtility) -> "UtilityProfile":
        firms = dict(self.firms)
        firms.update(updates)
        return UtilityProfile(self.network, firms)


# -- builders ----------------------------------------------------------------

def _quasilinear_expr(network: TradeNetwork, firm: str, mask: int,
                      value: float) -> ex.Expr:
    up, down = partition_bundle(network, firm, mask)
    e: ex.Expr = ex.num(value)
    for i, t in enumerate(network.trades):
        if down >> i & 1:
            e = ex.add(e, ex.Price(t.id))
        elif up >> i & 1:
            e = ex.sub(e, ex.Price(t.id))
    return e


def make_quasilinear(firm: str, network: TradeNetwork,
                     valuation: Mapping[int, float]) -> FirmUtility:
    """Quasi-linear utility: valuation plus sale receipts minus purchase costs.

    ``valuation`` maps bundle masks to finite values; omitted bundles are
    infeasible.
    """
    table = {}
    for mask, v in valuation.items():
        if v is INFEASIBLE or v is None:
            continue
        table[mask] = _quasilinear_expr(network, firm, mask, float(v))
    if not table:
        raise AllInfeasible(f"firm {firm}: no finite valuation")
    return FirmUtility(firm, network, table)


def make_unit_demand(firm: str, network: TradeNetwork,
                     trade_exprs: Mapping[str, ex.Expr],
                     outside: float = 0.0,
                     monotonicity_samples: int = 25) -> FirmUtility:
    """Unit-demand terminal buyer: outside option plus one singleton per trade.

    Each expression must be strictly decreasing in its own trade's price
    (sampled check over a coarse range).
    """
    roles = terminal_roles(network)
    if roles.get(firm) != "terminal-buyer":
        raise NotTerminalBuyer(firm)
    table = {0: ex.num(outside)}
    for tid, e in trade_exprs.items():
        mask = network.mask_of([tid])
        if not mask & network.buys_mask(firm):
            raise BundleOutOfScope(f"{firm} is not the buyer of {tid}")
        refs = ex.price_refs(e)
        if not refs <= {tid}:
            raise BundleOutOfScope(
                f"expression for {tid} references other trades: {sorted(refs)}")
        samples = np.linspace(-10.0, 10.0, monotonicity_samples)
        vals = [ex.eval_expr(e, {tid: s}) for s in samples]
        if not all(b < a for a, b in zip(vals, vals[1:])):
            raise NonMonotoneExpr(f"expression for {tid} is not decreasing")
        table[mask] = e
    return FirmUtility(firm, network, table)


def is_unit_demand(u: FirmUtility) -> bool:
    """Table is outside option plus upstream singletons only."""
    buys = u.network.buys_mask(u.firm)
    if 0 not in u.table:
        return False
    for mask in u.table:
        if mask == 0:
            continue
        if mask.bit_count() != 1 or not mask & buys:
            return False
    return True


# -- transformations ---------------------------------------------------------

def endowment_transform(u: FirmUtility, endowed: int,
                        p_bar: PriceVector) -> FirmUtility:
    """Endow the firm with trades it may execute at frozen prices.

    The transformed utility at bundle B is the best over add-ons X drawn from
    the endowment (disjoint from B): u(B ∪ X) with X's prices pinned at
    ``p_bar``.  The inner max is materialized as an explicit max-expression.
    """
    omega = u.omega
    if endowed & ~omega:
        raise BundleOutOfScope(
            f"endowment {u.network.ids_of(endowed)} outside firm "
            f"{u.firm}'s trades")
    endow_ids = [t.id for i, t in enumerate(u.network.trades) if endowed >> i & 1]
    table: dict[int, ex.Expr] = {}
    # candidate bundles: every subset of a feasible bundle obtained by
    # stripping endowed trades (others stay infeasible after the transform)
    candidates = set()
    for mask in u.table:
        free = mask & endowed
        sub = free
        while True:
            candidates.add(mask & ~sub)
            if sub == 0:
                break
            sub = (sub - 1) & free
    for b in sorted(candidates):
        arms = []
        remaining = endowed & ~b
        sub = remaining
        while True:
            full = b | sub
            if full in u.table:
                pinned = {tid: p_bar[tid]
                          for tid in endow_ids
                          if sub >> u.network.index[tid] & 1}
                arms.append(ex.substitute(u.table[full], prices=pinned))
            if sub == 0:
                break
            sub = (sub - 1) & remaining
        if arms:
            table[b] = arms[0] if len(arms) == 1 else ex.NAry("max", tuple(arms))
    return FirmUtility(u.firm, u.network, table)


def truncate_at_outside(u: FirmUtility, new_outside: float) -> FirmUtility:
    """Replace a unit-demand buyer's outside-option value."""
    if not is_unit_demand(u):
        raise NotUnitDemand(u.firm)
    table = dict(u.table)
    table[0] = ex.num(new_outside)
    return FirmUtility(u.firm, u.network, table)


# -- checks ------------------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityReport:
    samples: int
    violations: tuple[tuple, ...]  # (bundle ids, trade id, direction, p, p')

    @property
    def ok(self) -> bool:
        return not self.violations


def check_monotonicity(u: FirmUtility, samples: int = 200,
                       box: tuple[float, float] = (-2.0, 4.0),
                       seed: int = 42, delta: float = 0.125) -> MonotonicityReport:
    """Sampled check: utility strictly rises in sale prices and falls in
    purchase prices, bundle by bundle."""
    rng = np.random.default_rng(seed)
    lo, hi = box
    n = u.network.n
    buys = u.network.buys_mask(u.firm)
    sells = u.network.sells_mask(u.firm)
    violations = []
    for _ in range(samples):
        base = tuple(rng.uniform(lo, hi, size=n).tolist())
        for mask, _e in u.table.items():
            if mask == 0:
                continue
            v0 = u.value(mask, base)
            for i in range(n):
                if not mask >> i & 1:
                    continue
                bumped = list(base)
                bumped[i] += delta
                v1 = u.value(mask, tuple(bumped))
                if sells >> i & 1 and not v1 > v0:
                    violations.append((u.network.ids_of(mask),
                                       u.network.trades[i].id, "sale",
                                       base, tuple(bumped)))
                if buys >> i & 1 and not v1 < v0:
                    violations.append((u.network.ids_of(mask),
                                       u.network.trades[i].id, "purchase",
                                       base, tuple(bumped)))
        if len(violations) > 20:
            break
    return MonotonicityReport(samples, tuple(violations))
