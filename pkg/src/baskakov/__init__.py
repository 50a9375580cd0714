"""Baskakov-type operators: the Goodman-Sharma variant V_n, its modification
V~_n = sum_k v_{n,k}(f) (P_{n,k} - Dt P_{n,k}/n), exact identity checks and
numerical experiments on their approximation properties."""

from .basis import basis_row, basis_value, dtilde_basis, dtilde_modified_basis, modified_basis, psi, t_values
from .calculus import REGISTRY, TestFunction, dtilde_pow, get_function, k_functional_upper, lambda_theta, sup_norm
from .coefficients import QuadratureConfig, coefficient_table, gs_coefficient, gs_coefficient_batch
from .errors import BaskakovError, ConvergenceError, DomainError, PoleError, TruncationError
from .operators import (
    OperatorImage,
    TruncationConfig,
    baskakov_apply,
    dtilde_image,
    dtilde_squared_of_triple,
    gs_apply,
    iterate_modified,
    modified_gs_apply,
)

__version__ = "0.1.0"
