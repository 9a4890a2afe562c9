"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures without a
lookup table: 2 for invalid input, 3 for numerical failure, 4 for missing
classification evidence.
"""


class GFTError(Exception):
    exit_code = 1


class ValidationError(GFTError):
    exit_code = 2


class ManifestError(ValidationError):
    pass


class OutOfChart(ValidationError):
    pass


class NonPositiveDefinite(ValidationError):
    pass


class ResolutionTooLow(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class NotUnitary(ValidationError):
    pass


class LabelMismatch(ValidationError):
    pass


class UnsupportedRank(ValidationError):
    pass


class DimensionUnsupported(ValidationError):
    pass


class NonDiagonalMetric(ValidationError):
    pass


class NotSeparable(ValidationError):
    pass


class IndexInvalid(ValidationError):
    pass


class NotCatalogIsometry(ValidationError):
    pass


class InconsistentCompactness(ValidationError):
    pass


class RequiresFullSpectrum(ValidationError):
    pass


class NumericalFailure(GFTError):
    exit_code = 3


class ConvergenceFailure(NumericalFailure):
    pass


class ClusterAmbiguity(NumericalFailure):
    pass


class NonInvariantFiber(NumericalFailure):
    pass


class MissingFrobeniusEvidence(GFTError):
    exit_code = 4
