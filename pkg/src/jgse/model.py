"""Lagged VAR(1) datasets, the joint Gaussian loss and its gradients.

Rows of ``X`` are ``x_1 .. x_n`` and rows of ``Y`` are ``x_2 .. x_{n+1}``, so
the model reads ``Y = X @ B + E`` with ``B = A.T`` and the rows of ``E``
distributed as ``N(0, inv(Omega))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg


class DataError(ValueError):
    """Raised when raw series cannot be turned into a usable dataset."""


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """Design matrices of a first-order linear dynamical network.

    Attributes
    ----------
    series : ndarray, shape (n + 1, p)
        Observations after log/difference transforms, before centering.
    X, Y : ndarray, shape (n, p)
        Lagged design and response, after centering / normalization.
    x_mean, y_mean : ndarray, shape (p,)
        Column means removed from X and Y (zeros when not centered).
    x_scale : ndarray, shape (p,)
        Column norms X was divided by (ones when not normalized).
    names : tuple of str
        Node names.
    """

    series: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    x_mean: np.ndarray
    y_mean: np.ndarray
    x_scale: np.ndarray
    names: tuple
    Sxx: np.ndarray = field(init=False, repr=False)
    Sxy: np.ndarray = field(init=False, repr=False)
    Syy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=float)
        Y = np.ascontiguousarray(self.Y, dtype=float)
        if X.shape != Y.shape or X.ndim != 2:
            raise DataError("X and Y must be 2-d arrays of equal shape")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "Sxx", X.T @ X)
        object.__setattr__(self, "Sxy", X.T @ Y)
        object.__setattr__(self, "Syy", Y.T @ Y)
        for name in ("X", "Y", "Sxx", "Sxy", "Syy", "series"):
            arr = getattr(self, name)
            if isinstance(arr, np.ndarray):
                arr.flags.writeable = False

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, nodes: Sequence[int]) -> "TimeSeriesDataset":
        """Restrict to a node subset, keeping the column statistics."""
        idx = np.asarray(nodes, dtype=int)
        if idx.size == 0:
            raise DataError("empty node subset")
        return TimeSeriesDataset(
            series=self.series[:, idx],
            X=self.X[:, idx],
            Y=self.Y[:, idx],
            x_mean=self.x_mean[idx],
            y_mean=self.y_mean[idx],
            x_scale=self.x_scale[idx],
            names=tuple(self.names[i] for i in idx),
        )

    def with_unit_norm_columns(self) -> "TimeSeriesDataset":
        """Copy whose X columns have unit Euclidean norm.

        A transition matrix fitted on the copy maps back to this dataset's
        coordinates as ``B / norms[:, None]``.
        """
        norms = np.linalg.norm(self.X, axis=0)
        if np.any(norms == 0):
            raise DataError("cannot normalize a constant X column")
        return TimeSeriesDataset(
            series=self.series,
            X=self.X / norms,
            Y=self.Y,
            x_mean=self.x_mean,
            y_mean=self.y_mean,
            x_scale=self.x_scale * norms,
            names=self.names,
        )

    def predict_next(self, B: np.ndarray, x_prev: np.ndarray) -> np.ndarray:
        """One-step forecast in the units of ``series`` (means re-added)."""
        z = (np.asarray(x_prev, dtype=float) - self.x_mean) / self.x_scale
        return self.y_mean + z @ B


def assemble_dataset(raw, *, log: bool = False, difference: bool = False,
                     center: bool = False, normalize: bool = False,
                     names: Optional[Sequence[str]] = None) -> TimeSeriesDataset:
    """Build lagged ``X, Y`` from consecutive snapshots of a p-variate series.

    Transforms are applied in the order log, difference, center, normalize.
    Centering removes the column means of X and Y separately; normalizing
    scales the X columns to unit Euclidean norm (Y is left unscaled).
    """
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError("raw series must be a sequence of p-vectors")
    if arr.shape[0] < 3:
        raise DataError(f"need at least 3 observations, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise DataError("series contains missing or non-finite values")
    if log:
        if np.any(arr <= 0):
            raise DataError("log transform requires strictly positive values")
        arr = np.log(arr)
    if difference:
        arr = np.diff(arr, axis=0)
    if arr.shape[0] < 3:
        raise DataError(f"fewer than 2 usable rows after transforms "
                        f"({arr.shape[0] - 1} left)")
    p = arr.shape[1]
    if names is None:
        names = tuple(f"x{i}" for i in range(p))
    elif len(names) != p:
        raise DataError("names length does not match the series dimension")
    X = arr[:-1].copy()
    Y = arr[1:].copy()
    x_mean = np.zeros(p)
    y_mean = np.zeros(p)
    x_scale = np.ones(p)
    if center:
        x_mean = X.mean(axis=0)
        y_mean = Y.mean(axis=0)
        X -= x_mean
        Y -= y_mean
    if normalize:
        norms = np.linalg.norm(X, axis=0)
        if np.any(norms == 0):
            bad = int(np.flatnonzero(norms == 0)[0])
            raise DataError(f"column {names[bad]!r} is constant; cannot normalize")
        X /= norms
        x_scale = norms
    arr.flags.writeable = False
    return TimeSeriesDataset(series=arr, X=X, Y=Y, x_mean=x_mean,
                             y_mean=y_mean, x_scale=x_scale, names=tuple(names))


def _check_dims(B, Omega, data):
    p = data.p
    if B.shape != (p, p) or Omega.shape != (p, p):
        raise ValueError(f"expected {p}x{p} matrices, got B{B.shape}, Omega{Omega.shape}")


def cholesky_logdet(Omega: np.ndarray) -> Optional[float]:
    """``log|Omega|`` via Cholesky, or None when Omega is not positive definite."""
    try:
        L = np.linalg.cholesky(Omega)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(L)
    if not np.all(d > 0):
        return None
    return 2.0 * float(np.sum(np.log(d)))


def residual_gram(B: np.ndarray, data: TimeSeriesDataset) -> np.ndarray:
    """``(Y - XB)^T (Y - XB)`` from the cached Gram blocks."""
    SxyTB = data.Sxy.T @ B
    R = data.Syy - SxyTB - SxyTB.T + B.T @ data.Sxx @ B
    return 0.5 * (R + R.T)


def neg_log_likelihood(B, Omega, data: TimeSeriesDataset) -> float:
    """``1/2 tr{(Y-XB) Omega (Y-XB)^T} - n/2 log|Omega|``; +inf if Omega is not PD."""
    B = np.asarray(B, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    _check_dims(B, Omega, data)
    logdet = cholesky_logdet(Omega)
    if logdet is None:
        return np.inf
    R = data.Y - data.X @ B
    quad = float(np.sum((R @ Omega) * R))
    return 0.5 * quad - 0.5 * data.n * logdet


def grad_B(B, Omega, data: TimeSeriesDataset) -> np.ndarray:
    """``(Sxx B - Sxy) Omega``."""
    B = np.asarray(B, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    _check_dims(B, Omega, data)
    return (data.Sxx @ B - data.Sxy) @ Omega


def grad_Omega(B, Omega, data: TimeSeriesDataset) -> np.ndarray:
    """``1/2 (Y-XB)^T (Y-XB) - n/2 Omega^{-1}``, returned exactly symmetric.

    Raises ``numpy.linalg.LinAlgError`` when Omega is not positive definite.
    """
    B = np.asarray(B, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    _check_dims(B, Omega, data)
    cho = scipy.linalg.cho_factor(Omega)
    Oinv = scipy.linalg.cho_solve(cho, np.eye(data.p))
    R = data.Y - data.X @ B
    G = 0.5 * (R.T @ R) - 0.5 * data.n * Oinv
    return 0.5 * (G + G.T)
