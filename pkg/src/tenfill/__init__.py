"""tenfill: tensor completion from sparse random samples.

A multi-way data array with hidden low-rank structure can be recovered
from a small fraction of its entries.  The main engine is variational
Bayesian CP factorization with automatic rank determination; a classical
compressed-sensing baseline (per-slice DCT basis + l1 recovery) is
included for comparison, along with seeded data generators, a sparse
tensor file format, and experiment protocols.
"""

from .bayescp import (CompletionResult, HyperParams, PosteriorState,
                      SolverConfig, compute_elbo, init_state,
                      predicted_rank, prune_components, run, update_factor,
                      update_lambda, update_tau)
from .core import (CpModel, DenseTensor, cp_evaluate_entry, cp_reconstruct,
                   frobenius_norm, generalized_inner_product, inner_product,
                   relative_error)
from .errors import (DomainError, ModelError, OperatorError, ShapeError,
                     SolverError, TnsBoundsError, TnsDataError, TnsFormatError)
from .experiments import (ExperimentReport, complete_experiment,
                          default_ratio_grid, noisy_observations, run_compare,
                          run_rank_study, run_sweep, vp_experiment)
from .synth import (NoiseSpec, ObservationSet, WaferParams, add_gaussian_noise,
                    observe, random_cp_tensor, sample_mask, wafer_base_surface,
                    wafer_pattern)
from .tnsio import load_tns, write_tns
from .vp import (DctBasis2D, FistaInfo, LassoConfig, dct_matrix, fista_lasso,
                 vp_recover_slice, vp_recover_stack)

__version__ = "0.1.0"
