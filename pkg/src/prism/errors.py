"""Exception and warning types shared across the package."""


class PrismError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(PrismError):
    pass


# --- dataset ---------------------------------------------------------------

class DatasetError(PrismError):
    pass


class MalformedLine(DatasetError):
    def __init__(self, line_no: int, message: str = ""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if message else f"line {line_no}")


class EmptyDataset(DatasetError):
    pass


class SingleClass(DatasetError):
    pass


class DegenerateSplit(DatasetError):
    pass


class BadK(DatasetError):
    pass


class EmptyTestSet(DatasetError):
    pass


# --- optimization ----------------------------------------------------------

class InfeasibleSet(PrismError):
    """The dual feasible set is empty for the requested nu."""


class InfeasibleNu(InfeasibleSet):
    pass


class TooLarge(PrismError):
    """Instance too large for the exhaustive reference solver."""


class SolverFailure(PrismError):
    """Solver did not converge and the caller demanded convergence."""


# --- rule mining -----------------------------------------------------------

class MiningError(PrismError):
    pass


class NoOppositeClass(MiningError):
    pass


class TooFewFeatures(MiningError):
    pass


# --- warnings --------------------------------------------------------------

class EmptyPriorSetWarning(UserWarning):
    """A mined rule selects no training points; its penalty term vanishes."""


class PriorConflictWarning(UserWarning):
    """A training point satisfies both the positive and the negative rule."""


class SmallNuMaxWarning(UserWarning):
    """Class imbalance pushes the largest feasible nu below the usual grid start."""


class MultiplierBoundWarning(UserWarning):
    """A supplied multiplier exceeds its admissible bound."""
