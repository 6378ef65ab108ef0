"""Scalar and neural set function extensions, with exact verification oracles."""

from .core import (
    InfeasibleSetError,
    PairDistribution,
    SetFunctionOracle,
    SizeLimitError,
    Subset,
    SupportedDistribution,
    cardinality_oracle,
    modular_oracle,
    random_table_oracle,
    table_oracle,
)
from .lp import convex_closure
from .neural import NeuralConfig, neural_decode, neural_evaluate, neural_support, top_k_eigen
from .objectives import Graph, ProblemKind, brute_force, clique_objective, cut_function, mis_objective
from .optimizer import NeuralMode, SolveConfig, minimize_neural, minimize_scalar
from .scalar import LOVASZ, ExtensionKind, bounded, decode, evaluate, support

__version__ = "0.1.0"

__all__ = [
    "ExtensionKind", "Graph", "InfeasibleSetError", "LOVASZ", "NeuralConfig", "NeuralMode",
    "PairDistribution", "ProblemKind", "SetFunctionOracle", "SizeLimitError", "SolveConfig",
    "Subset", "SupportedDistribution", "bounded", "cardinality_oracle", "modular_oracle",
    "random_table_oracle", "brute_force", "clique_objective",
    "convex_closure", "cut_function", "decode", "evaluate", "minimize_neural", "minimize_scalar",
    "mis_objective", "neural_decode", "neural_evaluate", "neural_support", "support",
    "table_oracle", "top_k_eigen",
]
