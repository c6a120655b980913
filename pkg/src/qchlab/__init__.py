"""Curvature of explicit Kahler surfaces and checks of the quasi-constant holomorphic curvature identities."""
from .catalog import FAMILIES, make_family
from .curvature import MetricField, curvature_data, riemann
from .errors import QchError
from .estimator import QchCoefficientTransformer
from .qch import QchCoefficients, extract_coefficients, qch_residual

__version__ = "0.1.0"

__all__ = [
    "FAMILIES",
    "MetricField",
    "QchCoefficientTransformer",
    "QchCoefficients",
    "QchError",
    "curvature_data",
    "extract_coefficients",
    "make_family",
    "qch_residual",
    "riemann",
]
