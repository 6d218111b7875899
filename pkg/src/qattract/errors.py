"""Exception types raised across the package."""


class QattractError(Exception):
    """Base class for library-specific failures."""


class NoTransversalRoot(QattractError):
    """No equilibrium c with g(c) = f0 and g'(c) != 0 exists."""


class WrongNonlinearity(QattractError):
    """Operation requires a different nonlinearity family."""


class NewtonDiverged(QattractError):
    """Harmonic-balance Newton iteration failed to contract."""


class SmallDivisorOverflow(QattractError):
    """A lattice frequency |omega . nu| fell below the safe threshold."""


class DegenerateDenominator(QattractError):
    """Secant-slope denominator vanished where a ratio was requested."""


class SolutionSignChange(QattractError):
    """The spectral solution changes sign; the odd-case bounds need a
    definite sign (dissipation too small)."""


class GammaTooSmall(QattractError):
    """Dissipation below the threshold needed by a construction."""


class GammaBelowThreshold(QattractError):
    """Hexagon construction rejected: gamma^2 below the required bound."""

    def __init__(self, gamma_sq, bound_top, bound_bottom):
        self.gamma_sq = gamma_sq
        self.bound_top = bound_top
        self.bound_bottom = bound_bottom
        super().__init__(
            f"gamma^2 = {gamma_sq:g} < max({bound_top:g}, {bound_bottom:g}) "
            "required for the trapping hexagon"
        )


class BracketFailure(QattractError):
    """Root bracketing failed (should not happen on valid inputs)."""


class NoValidCusp(QattractError):
    """No positive cusp coefficient satisfies the blow-up conditions."""


class EmptyRegion(QattractError):
    """Requested region is empty for these parameters."""


class MissingEvent(QattractError):
    """Trajectory was produced without the requested event registered."""


class ConfigError(QattractError):
    """System definition file is malformed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
