"""Invex-regularized sparse reconstruction: regularizers, proximal operators,
proximal solvers, frame-based denoising and an experiment harness."""

from .errors import (
    ConfigurationError,
    DivergenceError,
    InputError,
    InvexError,
    ParameterError,
)
from .linops import (
    LinearOperator,
    compose,
    estimate_lipschitz,
    make_gaussian_blur,
    make_gaussian_sensing,
    make_haar,
)
from .metrics import ImageBuffer, add_awgn, experimental_snr, psnr, ssim
from .prox import brute_force_prox, prox_scalar, prox_vector
from .regularizers import Interval, Kind, Regularizer, evaluate, min_epsilon, subdiff_scalar
from .solvers import (
    Denoiser,
    Problem,
    SolverConfig,
    SolverTrace,
    apg,
    averaged_shrink_denoiser,
    folded_pg,
    pnp_apg,
)

__version__ = "0.1.0"
