"""Certified-accuracy solvers for linear and nonlinear Schroedinger equations."""

__version__ = "0.1.0"

from .core import (BudgetInfeasible, ConfigError, Family, GridFunction, InitialState, NumericFailure,
                   PotentialModel, ProblemSpec, SamplingError, SchroCertError)
from .budget import BudgetConstants, ErrorBudget, plan, replay
from .pipeline import solve

__all__ = ["__version__", "BudgetConstants", "BudgetInfeasible", "ConfigError", "ErrorBudget", "Family",
           "GridFunction", "InitialState", "NumericFailure", "PotentialModel", "ProblemSpec",
           "SamplingError", "SchroCertError", "plan", "replay", "solve"]
