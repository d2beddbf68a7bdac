"""Curve classification with mixtures of hidden logistic process regressions.

Each class of curves is modeled by a mixture of clusters, each cluster by a
piecewise polynomial regression whose regimes switch according to a logistic
process over time. New curves are classified by the maximum a posteriori rule.
"""

__version__ = "0.1.0"

from .basis import PolynomialBasis, SplineBasis
from .curves import LabeledCurveSet, TimeGrid, read_curves_csv, write_curves_csv
from .errors import (
    ConfigurationError,
    CurveFormatError,
    CurveSegError,
    DataError,
    DomainError,
    NumericalError,
)
from .evaluation import EvalReport, adjusted_rand_index, cross_validate, intra_class_inertia
from .fmda import FmdaModel, classify, load_model, mean_curves, save_model, train
from .mixrhlp import FitConfig, FitReport, MixRhlpParams, RhlpParams, e_step, fit
from .selection import SelectionGrid, bic, count_free_parameters, select

__all__ = [
    "PolynomialBasis",
    "SplineBasis",
    "LabeledCurveSet",
    "TimeGrid",
    "read_curves_csv",
    "write_curves_csv",
    "CurveSegError",
    "DataError",
    "CurveFormatError",
    "ConfigurationError",
    "DomainError",
    "NumericalError",
    "EvalReport",
    "cross_validate",
    "intra_class_inertia",
    "adjusted_rand_index",
    "FmdaModel",
    "train",
    "classify",
    "mean_curves",
    "save_model",
    "load_model",
    "FitConfig",
    "FitReport",
    "MixRhlpParams",
    "RhlpParams",
    "e_step",
    "fit",
    "SelectionGrid",
    "bic",
    "count_free_parameters",
    "select",
]
