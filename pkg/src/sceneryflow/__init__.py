"""Neighbourhood-system automata, separation certificates and scenery-flow
diagnostics for self-similar measures with exact algebraic coefficients."""

__version__ = "0.1.0"

from .numfield import QQ, AlgebraicField, FieldElement, golden_field, rational_field
from .ifs import IFS, Ball, CoverBox, Similarity, normalize_ifs
from .config import ConfigError, load_system

__all__ = [
    "QQ",
    "AlgebraicField",
    "FieldElement",
    "golden_field",
    "rational_field",
    "IFS",
    "Ball",
    "CoverBox",
    "Similarity",
    "normalize_ifs",
    "ConfigError",
    "load_system",
    "__version__",
]
