"""Fine learning of graphs (FLOG).

Alternates a proximal-gradient B-step (Omega fixed) with a graphical-lasso
Omega-step (B fixed).  Screening constraints enter as infinite entries of the
penalty matrices.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .model import TimeSeriesDataset, cholesky_logdet, neg_log_likelihood, residual_gram

logger = logging.getLogger(__name__)

_B_STATUS = {_kernels.MAX_ITER: "max-iter", _kernels.CONVERGED: "converged",
             _kernels.STEP_FLOOR: "step-floor"}


class GlassoWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class FlogConfig:
    lambda_b: float = 0.0
    lambda_omega: float = 0.0
    mask: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    c1: float = 1e-4
    c2: float = 1e-6
    max_outer: int = 50
    max_inner: int = 500
    tol: float = 1e-6
    inner_tol: float = 1e-8
    glasso_tol: float = 1e-8
    glasso_max_sweeps: int = 500
    # optional extra stop test on the largest entry change of (B, Omega);
    # objective changes shrink quadratically, so tight solves need this
    step_tol: Optional[float] = None

    def __post_init__(self):
        if self.lambda_b < 0 or self.lambda_omega < 0:
            raise ValueError("penalty levels must be nonnegative")
        if self.step_tol is not None and not self.step_tol > 0:
            raise ValueError("step_tol must be positive")


def penalty_matrices(cfg: FlogConfig, p: int):
    """``(Lambda_B, Lambda_Omega)``: lambda off the diagonal, inf where masked, 0 on it."""
    LB = np.full((p, p), float(cfg.lambda_b))
    LO = np.full((p, p), float(cfg.lambda_omega))
    if cfg.mask is not None:
        mask = np.asarray(cfg.mask, dtype=bool)
        if mask.shape != (p, p):
            raise ValueError(f"mask must be {p}x{p}")
        LB[~mask] = np.inf
        LO[~mask] = np.inf
    np.fill_diagonal(LB, 0.0)
    np.fill_diagonal(LO, 0.0)
    return LB, LO


def l1_penalty(M: np.ndarray, Lam: np.ndarray) -> float:
    """``sum Lam_ij |M_ij|`` with ``inf * 0 = 0``."""
    absM = np.abs(M)
    inf = np.isinf(Lam)
    if np.any(absM[inf] > 0):
        return np.inf
    return float(np.sum(Lam[~inf] * absM[~inf]))


def b_objective(B, Omega, data: TimeSeriesDataset, Lam_B) -> float:
    """``1/2 tr{(Y-XB) Omega (Y-XB)^T} + sum Lam_B |B|``."""
    R = residual_gram(B, data)
    return 0.5 * float(np.sum(R * Omega)) + l1_penalty(B, Lam_B)


def penalized_objective(B, Omega, data: TimeSeriesDataset, Lam_B, Lam_O) -> float:
    """Joint loss plus both weighted l1 penalties."""
    return (neg_log_likelihood(B, Omega, data) + l1_penalty(B, Lam_B)
            + l1_penalty(Omega, Lam_O))


@dataclass
class BStepResult:
    B: np.ndarray
    n_iter: int
    status: str


def flog_b_step(data: TimeSeriesDataset, Omega, Lam_B, B_init=None, *,
                c1: float = 1e-4, c2: float = 1e-6, max_iter: int = 500,
                tol: float = 1e-10) -> BStepResult:
    """Minimize the weighted-lasso B problem with Omega held fixed.

    Each iteration soft-thresholds ``B - alpha G`` at ``alpha Lam_B`` with
    ``alpha`` reset to 1 and divided by 10 until the Armijo test passes.
    Stops when the largest entry change falls below ``tol`` (relative).
    """
    p = data.p
    Omega = np.ascontiguousarray(Omega, dtype=float)
    Lam_B = np.ascontiguousarray(Lam_B, dtype=float)
    B0 = np.zeros((p, p)) if B_init is None else np.array(B_init, dtype=float)
    B, it, status = _kernels.prox_grad_b(data.Sxx, data.Sxy, Omega, Lam_B,
                                         np.ascontiguousarray(B0), c1, c2,
                                         max_iter, tol)
    return BStepResult(B, int(it), _B_STATUS[int(status)])


@dataclass
class GlassoResult:
    Omega: np.ndarray
    W: np.ndarray
    sweeps: int
    converged: bool
    Beta: Optional[np.ndarray] = field(default=None, repr=False)


def glasso(S, penalty, *, n_samples: Optional[int] = None, tol: float = 1e-10,
           max_sweeps: int = 500, warm: Optional[GlassoResult] = None) -> GlassoResult:
    """Graphical lasso with an elementwise penalty matrix.

    Minimizes ``tr(S Omega) - log|Omega| + sum rho_ij |omega_ij|`` where
    ``rho = penalty`` or, when ``n_samples`` is given, ``rho = 2 penalty / n``
    (the scaling of ``1/2 tr{n S Omega} - n/2 log|Omega| + sum penalty |omega|``).
    Infinite entries force zeros.

    ``warm`` (a previous result on a nearby S) seeds the covariance and the
    column regressions.  It is used only if its covariance with the new
    diagonal is positive definite, and a cold start is run whenever the warm
    one fails to converge to a finite answer.
    """
    S = np.array(S, dtype=float)
    S = 0.5 * (S + S.T)
    p = S.shape[0]
    rho = np.array(penalty, dtype=float)
    if rho.ndim == 0:
        rho = np.full((p, p), float(rho))
    if rho.shape != (p, p):
        raise ValueError("penalty must be a scalar or a p x p matrix")
    if np.any(rho < 0):
        raise ValueError("penalty entries must be nonnegative")
    if not np.all(np.diag(S) > 0):
        raise ValueError("S must have a strictly positive diagonal")
    if n_samples is not None:
        rho = 2.0 * rho / n_samples
    rho = np.ascontiguousarray(rho)
    if warm is not None and warm.Beta is not None and warm.W.shape == (p, p):
        W0 = warm.W.copy()
        np.fill_diagonal(W0, np.diag(S) + np.diag(rho))
        if cholesky_logdet(W0) is not None:
            Theta, W, Beta, sweeps, ok = _kernels.glasso_cd(
                S, rho, W0, np.ascontiguousarray(warm.Beta), tol, min(max_sweeps, 100),
                tol * 1e-2, 1000)
            if ok and np.all(np.isfinite(Theta)):
                Theta = 0.5 * (Theta + Theta.T)
                return GlassoResult(Theta, W, int(sweeps), True, Beta)
    Theta, W, Beta, sweeps, ok = _kernels.glasso_cd(
        S, rho, S.copy(), np.zeros((p, p)), tol, max_sweeps, tol * 1e-2, 1000)
    Theta = 0.5 * (Theta + Theta.T)
    if not ok:
        warnings.warn(f"glasso did not converge in {max_sweeps} sweeps",
                      GlassoWarning, stacklevel=2)
    return GlassoResult(Theta, W, int(sweeps), bool(ok), Beta)


@dataclass
class FlogResult:
    B: np.ndarray
    Omega: np.ndarray
    objective_trace: list
    n_outer: int
    converged: bool
    notes: list = field(default_factory=list)


def flog(data: TimeSeriesDataset, cfg: FlogConfig, init=None) -> FlogResult:
    """Alternate B-steps and glasso Omega-steps until the objective settles.

    ``init = (B0, Omega0)`` warm-starts the alternation; by default
    ``B0 = 0`` and ``Omega0 = I``.  The first step is a B-step.
    """
    p, n = data.p, data.n
    LB, LO = penalty_matrices(cfg, p)
    if init is None:
        B = np.zeros((p, p))
        Omega = np.eye(p)
    else:
        B = np.where(np.isinf(LB), 0.0, np.asarray(init[0], dtype=float))
        Omega = np.asarray(init[1], dtype=float)
        if cholesky_logdet(Omega) is None or np.any(Omega[np.isinf(LO)] != 0):
            Omega = np.eye(p)
    obj = penalized_objective(B, Omega, data, LB, LO)
    trace = [obj]
    notes = []
    converged = False
    warm = None
    k = 0
    for k in range(1, cfg.max_outer + 1):
        B_prev, Omega_prev = B, Omega
        step = flog_b_step(data, Omega, LB, B, c1=cfg.c1, c2=cfg.c2,
                           max_iter=cfg.max_inner, tol=cfg.inner_tol)
        B = step.B
        if step.status == "max-iter":
            notes.append(f"outer {k}: B-step hit max_inner")
        S = residual_gram(B, data) / n
        if not np.all(np.diag(S) > 0):
            notes.append(f"outer {k}: zero residual variance; Omega kept")
            trace.append(penalized_objective(B, Omega, data, LB, LO))
            break
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", GlassoWarning)
            g = glasso(S, LO, n_samples=n, tol=cfg.glasso_tol,
                       max_sweeps=cfg.glasso_max_sweeps, warm=warm)
        if caught:
            notes.append(f"outer {k}: glasso did not converge")
        cur = penalized_objective(B, Omega, data, LB, LO)
        new = penalized_objective(B, g.Omega, data, LB, LO)
        # slack at rounding level so a converged glasso update is not refused
        if new <= cur + 1e-13 * max(1.0, abs(cur)):
            Omega = g.Omega
            warm = g
        else:
            new = cur
        trace.append(new)
        if abs(trace[-2] - new) <= cfg.tol * max(1.0, abs(new)):
            if cfg.step_tol is None or max(np.abs(B - B_prev).max(),
                                           np.abs(Omega - Omega_prev).max()) <= cfg.step_tol:
                converged = True
                break
    for note in notes:
        logger.debug(note)
    return FlogResult(B, Omega, trace, k, converged, notes)
