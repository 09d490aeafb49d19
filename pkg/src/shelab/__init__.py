"""Monte Carlo laboratory for the 1+1d stochastic heat equation with
multiplicative space-time white noise and narrow-wedge (Dirac) initial data.

Subpackages:
  kernels      exact heat-kernel evaluations and identities
  noise        counter-based reproducible white-noise increments
  sim          positivity-preserving operator-splitting field evolution
  green        shared-noise Green's functions and ratio estimators
  stats        mergeable covariance / spatial-average / normality statistics
  oracles      deterministic quadrature oracles (simulator-independent)
  experiments  experiment configs, parallel drivers, CSV + report output
  fieldio      flat binary field checkpoints
"""

__version__ = "0.1.0"

from .kernels import (fourier_indicator, heat_kernel, kernel_product_identity,
                      kernel_shift_identity, log_heat_kernel)
from .noise import NoiseSlice, NoiseStream, ZeroNoise, draw_slice
from .sim import (Field, GridSpec, HeightResidual, default_grid, evolve,
                  heat_step, height_residual, init_dirac, noise_step)
from .green import (GreenField, estimate_g, estimate_gbar_moment,
                    evolve_shared, green_row_adjoint, verify_shift_identity)
from .stats import (CovarianceAccumulator, CovarianceEstimate,
                    SpatialAverageSample, TestReport, estimate_height_covariance,
                    fdd_covariance, ks_normality, spatial_average)
from .oracles import (QuadratureResult, lemma_2, lemma_s0, lemma_twotime,
                      lemma_y, limiting_constant, reduced_cov_integral,
                      second_moment_volterra)
from .experiments import ExperimentConfig, FitDecayResult, RunReport, fit_decay, run
