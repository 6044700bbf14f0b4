"""Exception hierarchy shared by all modules."""


class LayerDagError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(LayerDagError, ValueError):
    pass


class CycleError(LayerDagError, ValueError):
    """Raised when an edge set contains a directed cycle.

    ``witness`` holds the nodes of one offending cycle, closed (first == last).
    """

    def __init__(self, witness):
        self.witness = list(witness)
        super().__init__("directed cycle: " + " -> ".join(map(str, self.witness)))


class InsufficientDataError(LayerDagError, ValueError):
    pass


class SingularMatrixError(LayerDagError, ArithmeticError):
    pass


class InvalidPrecisionError(LayerDagError, ArithmeticError):
    """A precision matrix has a non-positive diagonal entry."""


class DataFormatError(LayerDagError, ValueError):
    """Malformed CSV/JSON input; message carries row/column context."""


class EmptyResultError(LayerDagError, ValueError):
    pass
