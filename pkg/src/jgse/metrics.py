"""Identification and estimation accuracy, model selection and forecasting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .model import TimeSeriesDataset, assemble_dataset, cholesky_logdet, neg_log_likelihood


def _offdiag_upper(M) -> np.ndarray:
    M = np.asarray(M)
    iu, ju = np.triu_indices(M.shape[0], 1)
    return M[iu, ju]


def tpr_fpr(estimated, truth):
    """True and false positive rates over unordered off-diagonal pairs.

    Both arguments are symmetric p x p masks (nonzero = edge).  A rate whose
    denominator is empty is returned as nan.
    """
    est = np.asarray(estimated) != 0
    tru = np.asarray(truth) != 0
    if est.shape != tru.shape:
        raise ValueError("patterns must have the same shape")
    e, t = _offdiag_upper(est), _offdiag_upper(tru)
    pos, neg = t.sum(), (~t).sum()
    tpr = float((e & t).sum() / pos) if pos else float("nan")
    fpr = float((e & ~t).sum() / neg) if neg else float("nan")
    return tpr, fpr


def model_error_B(B_hat, B, Sxx) -> float:
    """``tr{(B_hat - B)^T Sxx (B_hat - B)}``."""
    D = np.asarray(B_hat, dtype=float) - np.asarray(B, dtype=float)
    Sxx = np.asarray(Sxx, dtype=float)
    if D.shape[0] != Sxx.shape[0]:
        raise ValueError("dimension mismatch")
    return float(np.sum(D * (Sxx @ D)))


def model_error_Omega(Omega_hat, Omega) -> float:
    """Squared Frobenius distance."""
    D = np.asarray(Omega_hat, dtype=float) - np.asarray(Omega, dtype=float)
    return float(np.sum(D * D))


def rand_index(labels_a, labels_b) -> float:
    """Fraction of node pairs on which two partitions agree."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("label vectors differ in length")
    n = a.size
    if n < 2:
        return 1.0
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    agree = _offdiag_upper(same_a == same_b)
    return float(agree.mean())


def trimmed_mean(values, fraction: float = 0.25) -> float:
    """Mean after dropping ``floor(fraction * count)`` values from each end."""
    if not 0.0 <= fraction < 0.5:
        raise ValueError("fraction must lie in [0, 0.5)")
    return float(stats.trim_mean(np.asarray(values, dtype=float), fraction))


def degrees_of_freedom(B_hat, Omega_hat=None) -> int:
    df = int(np.count_nonzero(B_hat))
    if Omega_hat is not None:
        df += int(np.count_nonzero(np.triu(Omega_hat)))
    return df


def bic(B_hat, Omega_hat, data: TimeSeriesDataset) -> float:
    """``2 L(B, Omega) + df log n``.

    With ``Omega_hat=None`` the noise precision is profiled as
    ``I / sigma2`` with ``sigma2`` the pooled residual variance, and only the
    nonzeros of B are counted.
    """
    B_hat = np.asarray(B_hat, dtype=float)
    if Omega_hat is None:
        R = data.Y - data.X @ B_hat
        sigma2 = float(np.sum(R * R)) / R.size
        if sigma2 <= 0:
            raise ValueError("zero residual variance")
        Omega_eff = np.eye(data.p) / sigma2
    else:
        Omega_eff = np.asarray(Omega_hat, dtype=float)
        if cholesky_logdet(Omega_eff) is None:
            raise ValueError("Omega_hat is not positive definite")
    loss = neg_log_likelihood(B_hat, Omega_eff, data)
    return 2.0 * loss + degrees_of_freedom(B_hat, Omega_hat) * np.log(data.n)


@dataclass(frozen=True)
class ForecastConfig:
    window: int
    horizon: int = 1
    center: bool = True
    normalize: bool = False


def rolling_mse(series, cfg: ForecastConfig, estimator: Callable) -> float:
    """Rolling-origin h-step forecast error.

    For each origin ``t = W .. N - h`` (1-based, ``N`` = series length) the
    estimator is refitted on ``x_{t-W+1} .. x_t`` and the forecast iterates
    ``x_hat_{s} = B^T x_hat_{s-1}`` from ``x_hat_t = x_t`` in the window's
    centered/scaled coordinates, with the window means added back.

    ``estimator(dataset)`` returns B, or a tuple whose first item is B.
    """
    x = np.asarray(series, dtype=float)
    N = x.shape[0]
    W, h = cfg.window, cfg.horizon
    if h < 1 or W < 3 or W + h > N:
        raise ValueError(f"need 3 <= W and W + h <= N (W={W}, h={h}, N={N})")
    errs = []
    for t in range(W, N - h + 1):
        window = x[t - W:t]
        data = assemble_dataset(window, center=cfg.center, normalize=cfg.normalize)
        out = estimator(data)
        B = out[0] if isinstance(out, tuple) else out
        xhat = window[-1]
        for _ in range(h):
            xhat = data.predict_next(B, xhat)
        target = x[t + h - 1]
        errs.append(float(np.sum((target - xhat) ** 2)))
    return float(np.mean(errs))
