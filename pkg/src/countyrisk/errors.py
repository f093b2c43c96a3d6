"""Exception hierarchy shared by every stage of the pipeline."""


class CountyRiskError(Exception):
    """Base class for all package errors."""


class InputError(CountyRiskError, ValueError):
    """Malformed or inadmissible input."""


class IsolatedUnitError(InputError):
    """An areal unit has no neighbours."""

    def __init__(self, units):
        self.units = list(units)
        super().__init__(f"isolated unit(s) with no neighbours: {', '.join(map(str, self.units))}")


class DegenerateInputError(InputError):
    """Input for which the statistic is undefined (e.g. a constant field)."""


class NormalizationError(DegenerateInputError):
    """Min-max normalization on a sample whose scores are all identical."""


class ResolutionError(InputError):
    """Sampling grid too coarse to place any sample inside a polygon."""


class CoverageError(InputError):
    """No valid raster cells fall inside a polygon."""


class EstimationError(CountyRiskError, ArithmeticError):
    """A numerical fit failed (singular matrix, non-convergence, ...)."""
