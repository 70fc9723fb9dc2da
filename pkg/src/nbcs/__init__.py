"""Nested barycentric coordinate embeddings.

Sparse simplicial feature maps, a linear SVM trained on them, and a
convex-body approximation engine, with a CLI for experiments.
"""

from .backend import BACKEND_NAME, available_backends
from .errors import (
    DataFormatError,
    DegenerateSimplexError,
    NbcsError,
    NumericalError,
    OutsideRootError,
    SplitError,
)
from .geometry import Simplex, regular_simplex
from .system import (
    NestedSystem,
    SparseEmbedding,
    SplitRecord,
    WeightVector,
    decision_values,
    hyperplane_weights,
    lift_weights,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "available_backends",
    "NbcsError",
    "DataFormatError",
    "DegenerateSimplexError",
    "NumericalError",
    "OutsideRootError",
    "SplitError",
    "Simplex",
    "regular_simplex",
    "NestedSystem",
    "SparseEmbedding",
    "SplitRecord",
    "WeightVector",
    "decision_values",
    "hyperplane_weights",
    "lift_weights",
    "__version__",
]
