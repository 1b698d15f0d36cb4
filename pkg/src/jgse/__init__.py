"""Joint graphical screening and estimation of sparse VAR(1) networks.

Stage 1 screens the joint association graph of the transition matrix B and
the noise precision Omega with GIST and splits the network into subnetworks;
stage 2 fits each subnetwork with FLOG (proximal-gradient B-steps alternating
with graphical-lasso Omega-steps).
"""

__version__ = "0.1.0"

from .baselines import covariance_threshold_screen, scdg, sgtg
from .decompose import (Decomposition, assemble_blocks, eigengap_suggest_d, exact_blocks,
                        spectral_cluster, split_dataset)
from .flog import FlogConfig, FlogResult, flog_b_step, glasso
from .gist import GistConfig, GistResult, gist_screen
from .metrics import (ForecastConfig, bic, model_error_B, model_error_Omega, rand_index,
                      rolling_mse, tpr_fpr, trimmed_mean)
from .model import (DataError, TimeSeriesDataset, assemble_dataset, grad_B, grad_Omega,
                    neg_log_likelihood)
from .pipeline import (ConfigError, JgseConfig, JgseResult, flog_whole, jgse, tune_by_bic,
                       tune_by_validation)
from .synth import NetworkSpec, generate_network, simulate
from .thresholding import (build_jag, group_threshold, hard_threshold, quantile_group_threshold,
                           soft_threshold)

__all__ = [
    "ConfigError", "DataError", "Decomposition", "FlogConfig", "FlogResult", "ForecastConfig",
    "GistConfig", "GistResult", "JgseConfig", "JgseResult", "NetworkSpec", "TimeSeriesDataset",
    "assemble_blocks", "assemble_dataset", "bic", "build_jag", "covariance_threshold_screen",
    "eigengap_suggest_d", "exact_blocks", "flog_b_step", "flog_whole", "generate_network",
    "gist_screen", "glasso", "grad_B", "grad_Omega", "group_threshold", "hard_threshold",
    "jgse", "model_error_B", "model_error_Omega", "neg_log_likelihood",
    "quantile_group_threshold", "rand_index", "rolling_mse", "scdg", "sgtg", "simulate",
    "soft_threshold", "spectral_cluster", "split_dataset", "tpr_fpr", "trimmed_mean",
    "tune_by_bic", "tune_by_validation",
]
