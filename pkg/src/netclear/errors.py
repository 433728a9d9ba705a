"""Exception types shared across the package."""


class NetclearError(Exception):
    """Base class for all package-specific errors."""


# -- network construction ----------------------------------------------------

class DuplicateTradeId(NetclearError):
    pass


class SelfLoop(NetclearError):
    pass


class UnknownFirm(NetclearError):
    pass


class NetworkMismatch(NetclearError):
    pass


class NetworkTooLarge(NetclearError):
    pass


# -- expressions -------------------------------------------------------------

class ExpressionSyntaxError(NetclearError):
    pass


class UnknownPriceSymbol(NetclearError):
    pass


# -- utility tables ----------------------------------------------------------

class AllInfeasible(NetclearError):
    pass


class BundleOutOfScope(NetclearError):
    pass


class NotTerminalBuyer(NetclearError):
    pass


class NonMonotoneExpr(NetclearError):
    pass


class NotUnitDemand(NetclearError):
    pass


# -- demand ------------------------------------------------------------------

class ScheduleExhausted(NetclearError):
    """Tie-breaking perturbation schedule ran out before reaching a
    single-valued selection.  Carries the partial selection for diagnostics."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or {}


class NotDemanded(NetclearError):
    pass


# -- property checkers -------------------------------------------------------

class PatternViolation(NetclearError):
    """A price pair does not match the comparison pattern a checker needs."""


# -- equilibrium -------------------------------------------------------------

class NotAnEquilibriumInput(NetclearError):
    pass


class EmptyBox(NetclearError):
    pass


class EmptySet(NetclearError):
    pass


class NoEquilibriumFound(NetclearError):
    pass


class NotTerminalBuyers(NetclearError):
    pass


# -- adapters ----------------------------------------------------------------

class NotInducedNetwork(NetclearError):
    pass


# -- cli / scenarios ---------------------------------------------------------

class ScenarioParseError(NetclearError):
    pass


class SchemaVersionMismatch(NetclearError):
    pass


class ScenarioValidationError(NetclearError):
    pass
