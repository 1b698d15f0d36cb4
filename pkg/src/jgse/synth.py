"""Ground-truth sparse block networks and VAR(1) simulation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .model import TimeSeriesDataset, assemble_dataset

OMEGA_STYLES = ("sparse_random", "compound", "identity")


@dataclass(frozen=True)
class NetworkSpec:
    """Recipe for a block-diagonal (B, Omega) pair.

    ``b_density`` is the fraction of nonzero entries inside each diagonal
    block of B (self-loops included); ``omega_density`` the fraction of
    nonzero off-diagonal pairs inside each block of a ``sparse_random`` Omega.
    ``compound`` blocks have covariance 1 on the diagonal and ``rho`` off it.
    """

    p: int
    block_sizes: tuple
    b_density: float = 0.1
    b_magnitude: float = 1.0
    omega_style: str = "sparse_random"
    omega_density: float = 0.1
    rho: float = 0.5
    spectral_radius: float = 0.9
    min_eig: float = 0.1
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        object.__setattr__(self, "block_sizes", sizes)
        if sum(sizes) != self.p or any(s < 1 for s in sizes):
            raise ValueError(f"block sizes {sizes} must be positive and sum to p={self.p}")
        if not 0.0 <= self.b_density <= 1.0 or not 0.0 <= self.omega_density <= 1.0:
            raise ValueError("densities must lie in [0, 1]")
        if self.omega_style not in OMEGA_STYLES:
            raise ValueError(f"omega_style must be one of {OMEGA_STYLES}")
        if not 0.0 < self.spectral_radius < 1.0:
            raise ValueError("spectral_radius must lie in (0, 1)")

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ValueError("network spec must be a JSON object")
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown spec fields: {sorted(unknown)}")
        return cls(**raw)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def blocks(self) -> list:
        edges = np.cumsum((0,) + self.block_sizes)
        return [np.arange(a, b) for a, b in zip(edges[:-1], edges[1:])]


def _sparse_b_block(k: int, density: float, magnitude: float, rng) -> np.ndarray:
    nnz = int(np.ceil(density * k * k - 1e-9))
    M = np.zeros((k, k))
    if nnz:
        pos = rng.choice(k * k, size=nnz, replace=False)
        vals = rng.uniform(0.5, 1.0, size=nnz) * rng.choice([-1.0, 1.0], size=nnz)
        M.flat[pos] = magnitude * vals
    return M


def _sparse_omega_block(k: int, density: float, min_eig: float, rng) -> np.ndarray:
    iu, ju = np.triu_indices(k, 1)
    nnz = int(np.ceil(density * iu.size - 1e-9))
    if not nnz:
        return np.eye(k)
    M = np.zeros((k, k))
    pick = rng.choice(iu.size, size=nnz, replace=False)
    vals = rng.uniform(0.5, 1.0, size=nnz) * rng.choice([-1.0, 1.0], size=nnz)
    M[iu[pick], ju[pick]] = vals
    M = M + M.T
    shift = min_eig - np.linalg.eigvalsh(M)[0]
    return M + shift * np.eye(k)


def _compound_omega_block(k: int, rho: float) -> np.ndarray:
    Sigma = np.full((k, k), rho)
    np.fill_diagonal(Sigma, 1.0)
    return np.linalg.inv(Sigma)


def generate_network(spec: NetworkSpec):
    """Draw block-diagonal ``(B, Omega)``.

    B is rescaled so its spectral radius is at most ``spec.spectral_radius``;
    Omega is symmetric positive definite with exact zeros across blocks.
    """
    rng = np.random.default_rng(spec.seed)
    p = spec.p
    B = np.zeros((p, p))
    Omega = np.zeros((p, p))
    for idx in spec.blocks():
        k = idx.size
        B[np.ix_(idx, idx)] = _sparse_b_block(k, spec.b_density, spec.b_magnitude, rng)
        if spec.omega_style == "identity":
            Ob = np.eye(k)
        elif spec.omega_style == "compound":
            Ob = _compound_omega_block(k, spec.rho)
        else:
            Ob = _sparse_omega_block(k, spec.omega_density, spec.min_eig, rng)
        Omega[np.ix_(idx, idx)] = Ob
    radius = float(np.max(np.abs(np.linalg.eigvals(B)))) if p else 0.0
    if radius > spec.spectral_radius:
        B *= spec.spectral_radius / radius
    Omega = 0.5 * (Omega + Omega.T)
    return B, Omega


def simulate_series(B, *, sigma=None, omega=None, length: int,
                    burn_in: int = 200, seed: int = 0) -> np.ndarray:
    """``length`` consecutive states of ``x_t = B^T x_{t-1} + eps_t``.

    Innovations are ``N(0, Sigma)``; pass either ``sigma`` or ``omega``.
    """
    B = np.asarray(B, dtype=float)
    p = B.shape[0]
    if (sigma is None) == (omega is None):
        raise ValueError("pass exactly one of sigma or omega")
    Sigma = np.asarray(sigma, dtype=float) if sigma is not None else np.linalg.inv(omega)
    Sigma = 0.5 * (Sigma + Sigma.T)
    radius = float(np.max(np.abs(np.linalg.eigvals(B)))) if p else 0.0
    if radius >= 1.0:
        raise ValueError(f"transition matrix is not stable (spectral radius {radius:.4f})")
    L = np.linalg.cholesky(Sigma)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((burn_in + length, p)) @ L.T
    x = np.zeros(p)
    out = np.empty((length, p))
    for t in range(burn_in + length):
        x = x @ B + eps[t]
        if t >= burn_in:
            out[t - burn_in] = x
    return out


def simulate(B, *, sigma=None, omega=None, n: int, burn_in: int = 200,
             seed: int = 0, center: bool = False, normalize: bool = False
             ) -> TimeSeriesDataset:
    """Simulate ``n + 1`` snapshots and return the lagged dataset (``n`` rows)."""
    series = simulate_series(B, sigma=sigma, omega=omega, length=n + 1,
                             burn_in=burn_in, seed=seed)
    return assemble_dataset(series, center=center, normalize=normalize)
