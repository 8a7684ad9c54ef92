"""Stein-Malliavin normal approximation for Poisson U-statistics of order two.

The worked example is the edge count of a random geometric graph on the unit
torus: simulate the point process, evaluate the pathwise Malliavin terms of the
Wasserstein bound, measure the empirical distance to the normal law, and fit
convergence rates.
"""
from .asymptotics import OptimalityConstants, RateFit, edge_asymptotics, optimality_constants, rate_fit
from .experiment import ExperimentConfig, RunResult, run_experiment
from .kernel_algebra import (ChaosKernels, DegenerateKernelError, KernelSpec, constant_kernel,
                             contraction_11, contraction_21, contraction_h1h2, indicator_kernel,
                             ustat_constants)
from .malliavin import (BoundReport, LinearStatistic, NormalizedUStat, inner_product_DF,
                        pathwise_DF, pathwise_DL1F, phi1, phi2, wasserstein_upper_bound)
from .point_process import (DensitySpec, PointConfiguration, TorusDomain, sample_poisson_process,
                            sine_density, uniform_density)
from .rgg import count_edges, degree
from .stein import (SteinSolutionSin, empirical_w1, hermite_check, normal_inv_cdf,
                    optimality_functional, stein_sin_eval)

__version__ = "0.1.0"

__all__ = [n for n in dir() if not n.startswith("_")]
