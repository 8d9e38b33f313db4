"""Epidemic-style models of information spreading on social media."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DomainError, FitFailure, IngestError, IntegratorFault,
                     MeasurementError, MemeticError, StiffnessError, StructuralError,
                     UndefinedScoreError)
from .models import (ModelKind, ModelParams, StateVector, critical_time, logistic_closed_form,
                     reproduction_number, rhs, robustness_metric, sis_limits)
from .ode import IntegratorConfig, Trajectory, find_peak, integrate
