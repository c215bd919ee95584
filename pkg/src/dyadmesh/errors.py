"""Exception hierarchy shared by all modules."""


class MeshError(Exception):
    """Base class for mesh bookkeeping errors."""


class NoMotherError(MeshError, ValueError):
    """Raised when a cell on the coarsest level is asked for its mother or siblings."""


class InconsistentGridError(MeshError):
    """Raised when a grid does not tile the domain or violates the regularity bound."""


class GridMismatchError(MeshError, ValueError):
    """Raised when two grids are not related by refinement/coarsening as required."""


class NumericalError(ArithmeticError):
    """Base class for failures of the time stepping schemes."""


class NonPhysicalStateError(NumericalError):
    """Negative density or pressure encountered in the Euler solver."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class InstabilityError(NumericalError):
    """A solution component exceeded the blow-up guard."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell
