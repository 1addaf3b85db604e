"""Exception hierarchy and warning categories shared by all modules."""


class WvsimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(WvsimError):
    """A run configuration is malformed or fails validation."""


class GridMismatchError(WvsimError):
    """Two objects that must share a grid do not."""


class DomainError(WvsimError):
    """A state or field does not fit inside the computational domain."""


class ResolutionError(WvsimError):
    """A length scale is too small for the grid spacing to resolve."""


class HermiticityError(WvsimError):
    """A Hermitian form produced an imaginary residue above tolerance."""


class UnsupportedOperatorError(WvsimError):
    """Operator tag outside the supported set."""


class UnsupportedBasisError(WvsimError):
    """Post-selection basis outside the supported set."""


class MaskError(WvsimError):
    """A masked-region contract was violated (all masked, or too much
    density weight sits on masked points)."""


class DegenerateStateError(WvsimError):
    """Construction produced a (numerically) null state."""


class CalibrationError(WvsimError):
    """Ancilla calibration invariants failed."""


class SupportOverflowError(WvsimError):
    """Shifted pointer support leaves the ancilla grid."""


class BoundaryLeakError(WvsimError):
    """Probability density reached the domain boundary above threshold."""


class PhysicsInvariantError(WvsimError):
    """A runtime physics invariant (conservation, identity) was violated."""


class BinningError(WvsimError):
    """Conditional-average binning request is degenerate."""


class InsufficientDataError(WvsimError):
    """Not enough samples / horizon for the requested statistic."""


class DisconnectedSupportWarning(UserWarning):
    """Density support splits into disjoint components; relative phase
    between components is not identifiable from the current field."""


class FormulaDisagreementWarning(UserWarning):
    """Two supposedly equivalent formulas disagreed beyond tolerance."""


class SymmetryWarning(UserWarning):
    """A state expected to be exchange-(anti)symmetric is not."""
