"""Numerical laboratory for minimum excess risk in Bayesian learning.

The exact layer (finite models, enumeration, information measures, bound
battery) is importable from here; the Gaussian, Monte Carlo and extension
paths live in :mod:`merlab.linreg`, :mod:`merlab.mc` and
:mod:`merlab.extensions`.
"""
__version__ = "0.1.0"

from merlab._backend import BACKEND
from merlab.core import (LOG, QUADRATIC, ZERO_ONE, BoundedTableLoss, DataSequence, DiscreteModel, FiniteDist,
                         InvalidModelError, RngStream, bias_model, ensure_valid, loss_from_name, model_from_json,
                         model_to_json, random_discrete_model, sample_dataset, validate_model)
from merlab.oracle import (ExceedsEnumerationBudget, ImpossibleDataError, bayes_envelope, bayes_risk_data,
                           fundamental_limit, mer, posterior_predictive, posterior_w)
from merlab.info import cmi_wy, mi_chain, mi_w_data
from merlab.bounds import battery
from merlab.report import BoundReport, Estimate

__all__ = [
    "BACKEND", "LOG", "QUADRATIC", "ZERO_ONE", "BoundedTableLoss", "DataSequence", "DiscreteModel",
    "FiniteDist", "InvalidModelError", "RngStream", "bias_model", "ensure_valid", "loss_from_name",
    "model_from_json", "model_to_json", "random_discrete_model", "sample_dataset", "validate_model",
    "ExceedsEnumerationBudget", "ImpossibleDataError", "bayes_envelope", "bayes_risk_data",
    "fundamental_limit", "mer", "posterior_predictive", "posterior_w", "cmi_wy", "mi_chain", "mi_w_data",
    "battery", "BoundReport", "Estimate", "__version__",
]
