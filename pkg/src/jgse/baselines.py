"""Single-graph comparators: sparse transition only, sparse concentration only."""

from __future__ import annotations

import numpy as np

from .flog import FlogConfig, flog_b_step, glasso, penalty_matrices
from .model import TimeSeriesDataset


def sgtg(data: TimeSeriesDataset, lam: float, *, penalize_diagonal: bool = False,
         max_iter: int = 5000, tol: float = 1e-12) -> np.ndarray:
    """Lasso regression of every Y column on X (noise precision fixed at I)."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    LB, _ = penalty_matrices(FlogConfig(lambda_b=lam), data.p)
    if penalize_diagonal:
        np.fill_diagonal(LB, lam)
    return flog_b_step(data, np.eye(data.p), LB, max_iter=max_iter, tol=tol).B


def scdg(data: TimeSeriesDataset, lam: float, **glasso_kw) -> np.ndarray:
    """Graphical lasso on ``S = Y^T Y / n`` (B taken as 0).

    ``lam`` is on the scale of the joint loss, i.e. the standard-form
    penalty is ``2 lam / n``; the diagonal is unpenalized.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    S = data.Syy / data.n
    _, LO = penalty_matrices(FlogConfig(lambda_omega=lam), data.p)
    return glasso(S, LO, n_samples=data.n, **glasso_kw).Omega


def covariance_threshold_screen(data: TimeSeriesDataset, lam: float) -> np.ndarray:
    """Symmetric pattern ``|s_ij| > lam`` of ``S = Y^T Y / n`` (diagonal False)."""
    S = data.Syy / data.n
    pattern = np.abs(S) > lam
    np.fill_diagonal(pattern, False)
    return pattern
