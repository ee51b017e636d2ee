"""Numerical toolkit for the fractal dimension of gamma-Liouville quantum gravity.

Closed-form bounds, white-noise and discrete GFF samplers, the LQG measure,
Liouville graph distance, LFPP, mated-CRT ball growth, and a reproducible CLI.
"""

__version__ = "0.1.0"

from .errors import DomainError, InsufficientDataError, MissingInputError, ResolutionError
from .formulas import (
    GAMMA_PURE_GRAVITY,
    bounds_table,
    discrete_lfpp_exponent,
    heat_kernel_exponent,
    lfpp_lambda,
    lfpp_xi,
    lower_bound,
    lqg_q,
    quad_guess,
    upper_bound,
    watabiki,
)

__all__ = [
    "__version__",
    "DomainError",
    "InsufficientDataError",
    "MissingInputError",
    "ResolutionError",
    "GAMMA_PURE_GRAVITY",
    "bounds_table",
    "discrete_lfpp_exponent",
    "heat_kernel_exponent",
    "lfpp_lambda",
    "lfpp_xi",
    "lower_bound",
    "lqg_q",
    "quad_guess",
    "upper_bound",
    "watabiki",
]
