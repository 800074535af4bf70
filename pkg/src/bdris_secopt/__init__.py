"""Secrecy-rate maximization for BD-RIS-assisted MIMO wiretap channels.

Penalized Riemannian conjugate-gradient optimization of the transmit
beamformer and the (block) symmetric-unitary RIS scattering matrix, plus a
channel simulator, baseline schemes, and a Monte-Carlo experiment harness.
"""

from .baselines import optimize_dris, optimize_fixed_theta, upper_bound
from .channels import ChannelSet, SystemConfig, default_config, draw_channels
from .harness import (ExperimentSpec, TrialResult, compute_rmse, parse_config,
                      read_results, run_experiment, write_results)
from .manifold import ProductDims, ProductPoint, TangentVector
from .objective import secrecy_rate, secrecy_rate_imcsi
from .solver import SolverParams, pprcgd

__all__ = [
    "ChannelSet",
    "SystemConfig",
    "default_config",
    "draw_channels",
    "ProductDims",
    "ProductPoint",
    "TangentVector",
    "SolverParams",
    "pprcgd",
    "optimize_fixed_theta",
    "optimize_dris",
    "upper_bound",
    "secrecy_rate",
    "secrecy_rate_imcsi",
    "ExperimentSpec",
    "TrialResult",
    "parse_config",
    "run_experiment",
    "compute_rmse",
    "write_results",
    "read_results",
]
