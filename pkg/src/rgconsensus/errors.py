"""Exception hierarchy shared by all modules."""


class RgError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(RgError, ValueError):
    pass


# --- numerics -------------------------------------------------------------

class LpError(RgError):
    pass


class Infeasible(LpError):
    """Empty feasible region (LP, 2-D projection, or governor initialisation)."""


class Unbounded(LpError):
    pass


class IterationLimit(LpError):
    """Simplex pivot cap reached; usually a sign of degeneracy."""


class NoConvergence(RgError):
    pass


# --- polytope ---------------------------------------------------------------

class OriginNotInterior(RgError, ValueError):
    pass


# --- regulator --------------------------------------------------------------

class NoUnitEigenvector(RgError):
    pass


class ScalingImpossible(RgError):
    pass


class RegulatorInfeasible(RgError):
    pass


# --- mcai -------------------------------------------------------------------

class HorizonExceeded(RgError):
    pass


class EmptyInterior(RgError):
    pass


class EmptyInterval(RgError, ValueError):
    pass


# --- governor / simulator ---------------------------------------------------

class InvariantBroken(RgError):
    """A property guaranteed by construction did not hold (a bug, not bad input)."""


class NotInitialized(RgError):
    pass


class NotConverged(RgError):
    pass


class NegativeDiagonal(RgError, ValueError):
    pass


class AssumptionFailure(RgError):
    pass


class ConstraintViolation(InvariantBroken):
    pass


class ConfigError(RgError, ValueError):
    pass
