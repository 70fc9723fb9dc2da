"""Exception types shared across the package."""


class NbcsError(Exception):
    """Base class for all package-specific errors."""


class DegenerateSimplexError(NbcsError):
    """Vertex set is (numerically) affinely dependent."""


class OutsideRootError(NbcsError):
    """A query point lies outside the root simplex.

    Carries the most negative barycentric coefficient and its index.
    """

    def __init__(self, coefficient: float, index: int):
        self.coefficient = coefficient
        self.index = index
        super().__init__(
            f"point outside root simplex: coefficient {index} = {coefficient:.3e}"
        )


class SplitError(NbcsError):
    """Invalid split request (non-leaf target or non-interior point)."""


class DataFormatError(NbcsError):
    """Malformed input data file; message carries the line number."""


class NumericalError(NbcsError):
    """A numerical routine failed (singular system, domain violation, ...)."""
