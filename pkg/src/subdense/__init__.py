"""Transition densities of subordinators: saddle-point and contour inversion,
two-sided estimate envelopes, Green functions and Monte Carlo oracles."""
from .bernstein import (Model, custom, gamma_subordinator, load_model, log_stable,
                        model_from_dict, power, power_log, pure_drift, stable, tempered)
from .errors import (CapabilityError, ModelInvalidError, ModelSpecError,
                     NumericalIntegrityError, OutOfRangeError, SupportError)

__all__ = [
    "Model", "custom", "gamma_subordinator", "load_model", "log_stable",
    "model_from_dict", "power", "power_log", "pure_drift", "stable", "tempered",
    "CapabilityError", "ModelInvalidError", "ModelSpecError",
    "NumericalIntegrityError", "OutOfRangeError", "SupportError",
]
