"""netclear: demand, competitive equilibria, and structural verification for
trading networks with imperfectly transferable utility and frictions."""

from .model import (
    Arrangement,
    PriceVector,
    Trade,
    TradeNetwork,
    build_network,
    join_meet_prices,
    net_index,
    partition_bundle,
    terminal_roles,
)
from .utility import (
    INFEASIBLE,
    FirmUtility,
    UtilityProfile,
    check_monotonicity,
    endowment_transform,
    eval_utility,
    make_quasilinear,
    make_unit_demand,
    truncate_at_outside,
)
from .expr import parse_expr
from .demand import (
    DemandResult,
    demand_set,
    demand_invariance_check,
    indirect_utility,
    is_single_valued,
    joint_tiebreak_selection,
    nib_witness,
)
from .equilibrium import (
    DescentConfig,
    EquilibriumRecord,
    extremal_equilibria,
    find_equilibria,
    is_equilibrium,
    surplus,
    verify_lattice_pair,
    verify_rural_hospitals_pair,
)
from .properties import (
    PropertyReport,
    check_aggregate_law,
    check_bounds,
    check_cross_side,
    check_full_substitutability,
    check_monotone_substitutability,
    check_nib,
    check_same_side,
    check_single_improvement,
    exhaustive_pattern_pairs,
    grid_pattern_pairs,
)
from .mechanisms import (
    MechanismOutcome,
    SearchConfig,
    buyer_optimal_mechanism,
    manipulation_search,
    truncation_reports,
    uplift_reports,
)
from .adapters import (
    ExchangeEconomy,
    MatchingMarket,
    economy_demand,
    economy_equilibrium_check,
    induce_from_exchange,
    induce_from_matching,
    salary_vector,
    uniform_price_lift,
    uniform_price_project,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
