"""Product decompositions of finite metric spaces and finite-dimensional normed spaces."""

from .metric_core import FiniteMetricSpace, StructuralError, Tolerance, product, validate
from .metric_factorizer import Budget, enumerate_witnesses, factorize, isometry_group, verify_exact_sequence
from .normed_space import NormedSpace, is_product_decomposition, norm
from .product_structure import ProductWitness, assemble_from_fibers
from .subspace import Subspace

__version__ = "0.1.0"

__all__ = [
    "Budget", "FiniteMetricSpace", "NormedSpace", "ProductWitness", "StructuralError", "Subspace",
    "Tolerance", "assemble_from_fibers", "enumerate_witnesses", "factorize", "is_product_decomposition",
    "isometry_group", "norm", "product", "validate", "verify_exact_sequence",
]
