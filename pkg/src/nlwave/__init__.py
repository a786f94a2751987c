"""Semi-discrete solver for the nonlocal nonlinear wave equation ``u_tt = (beta * f(u))_xx``."""

__version__ = "0.1.0"

from .grid_ops import Grid, GridSequence, convolve, diff_backward, diff_forward, diff_second, norm_lp
from .integrator import IntegrationOutcome, IntegratorConfig, detect_blowup, integrate, step_rk4
from .kernels import Kernel, KernelWeights, apply_weights, kernel_by_name, second_difference_weights
from .semidiscrete import Nonlinearity, Problem, SystemState, nonlinearity_quadratic, rhs

__all__ = [
    "Grid", "GridSequence", "convolve", "diff_backward", "diff_forward", "diff_second", "norm_lp",
    "IntegrationOutcome", "IntegratorConfig", "detect_blowup", "integrate", "step_rk4",
    "Kernel", "KernelWeights", "apply_weights", "kernel_by_name", "second_difference_weights",
    "Nonlinearity", "Problem", "SystemState", "nonlinearity_quadratic", "rhs",
]
