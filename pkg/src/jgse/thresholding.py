"""Scalar, group and quantile thresholding rules."""

from __future__ import annotations

import numpy as np


def soft_threshold(t, lam):
    """``sgn(t) (|t| - lam)_+``, elementwise; ``lam = inf`` gives 0."""
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.sign(t) * np.maximum(np.abs(t) - lam, 0.0)
    out = np.where(np.isinf(lam), 0.0, out)
    return out[()] if out.ndim == 0 else out


def hard_threshold(t, lam):
    """``t 1{|t| > lam}``, elementwise; the boundary maps to 0."""
    t = np.asarray(t, dtype=float)
    out = np.where(np.abs(t) > lam, t, 0.0)
    return out[()] if out.ndim == 0 else out


_RULES = {"soft": soft_threshold, "hard": hard_threshold}


def group_threshold(v, lam: float, rule: str = "soft") -> np.ndarray:
    """Threshold the norm of ``v`` and keep its direction.

    The zero vector maps to the zero vector.
    """
    v = np.asarray(v, dtype=float)
    try:
        theta = _RULES[rule]
    except KeyError:
        raise ValueError(f"unknown rule {rule!r}; expected 'soft' or 'hard'") from None
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return np.zeros_like(v)
    return v * (float(theta(norm, lam)) / norm)


def build_jag(B, Omega, phi: float = 1.0) -> np.ndarray:
    """Joint association graph ``c_ij = sqrt(b_ij^2 + b_ji^2 + 2 phi^2 w_ij^2)``.

    The diagonal is set to zero.  Omega is assumed symmetric; only ``w_ij``
    (not ``w_ji``) is read for each pair.
    """
    B = np.asarray(B, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    Bsq = B * B
    Wu = np.triu(Omega, 1)
    Wsym = Wu + Wu.T
    C = np.sqrt(Bsq + Bsq.T + 2.0 * phi * phi * Wsym * Wsym)
    np.fill_diagonal(C, 0.0)
    return C


def top_pairs_mask(C: np.ndarray, m: int) -> np.ndarray:
    """Symmetric boolean mask of the ``m`` largest upper-triangle entries of C.

    Ties at the cutoff go to the lexicographically smaller ``(i, j)``.
    The diagonal is always False.
    """
    p = C.shape[0]
    iu, ju = np.triu_indices(p, 1)
    n_pairs = iu.size
    if m < 0 or m > n_pairs:
        raise ValueError(f"m must be in [0, {n_pairs}], got {m}")
    mask = np.zeros((p, p), dtype=bool)
    if m == 0:
        return mask
    if m == n_pairs:
        keep = np.arange(n_pairs)
    else:
        # stable sort on -c keeps the row-major (lexicographic) order among ties
        keep = np.argsort(-C[iu, ju], kind="stable")[:m]
    mask[iu[keep], ju[keep]] = True
    mask |= mask.T
    return mask


def quantile_group_threshold(B, Omega, phi: float, m: int):
    """Keep the ``m`` node pairs with the largest association strength.

    Every entry ``b_ij, b_ji, w_ij, w_ji`` of a discarded pair is set to 0;
    diagonals of B and Omega are untouched.

    Returns
    -------
    B_new, Omega_new : ndarray
        Thresholded copies.
    C : ndarray
        JAG of the survivors (zero outside the kept pairs).
    """
    B = np.asarray(B, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    C = build_jag(B, Omega, phi)
    keep = top_pairs_mask(C, m)
    np.fill_diagonal(keep, True)
    return np.where(keep, B, 0.0), np.where(keep, Omega, 0.0), np.where(keep, C, 0.0)


def pairs_for_quantile(q: float, p: int) -> int:
    """Number of pairs kept by quantile ``q``: ``ceil(q (p^2 - p))`` capped at ``p(p-1)/2``."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    return min(int(np.ceil(q * (p * p - p) - 1e-9)), p * (p - 1) // 2)
