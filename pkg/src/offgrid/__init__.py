"""Off-the-grid sparse spike recovery with Riemannian kernel geometry."""

from .measure import GridMeasure, HilbertVector, MeasureMismatch
from .dictionary import DictionarySpec, DomainError, RegularityReport, check_regularity
from .kernel import DegenerateMetric, KernelContext, gaussian_scenario, gaussian_limit_constants

__all__ = [
    "GridMeasure",
    "HilbertVector",
    "MeasureMismatch",
    "DictionarySpec",
    "DomainError",
    "RegularityReport",
    "check_regularity",
    "DegenerateMetric",
    "KernelContext",
    "gaussian_scenario",
    "gaussian_limit_constants",
]

__version__ = "0.1.0"
