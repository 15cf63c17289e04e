"""Seeded random state families.

Full-rank and rank-``r`` states use the (induced) Hilbert-Schmidt measure:
``G G^dag / tr(G G^dag)`` with ``G`` a ``dim x r`` complex Ginibre matrix.
Pure states are normalised complex Gaussian vectors (Haar measure).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, NotPure
from .qcore import DensityMatrix, as_matrix

__all__ = [
    "EnsembleSpec",
    "ENSEMBLE_KINDS",
    "NOISE_KINDS",
    "random_fullrank",
    "random_rank_r",
    "random_pure",
    "noise_mixture",
    "maximally_mixed",
    "draw",
]

ENSEMBLE_KINDS = ("fullrank_hs", "rank_r", "haar_pure", "noise_mixture")
NOISE_KINDS = ("maximally_mixed", "random_fullrank")
PURITY_TOL = 1e-8


def _ginibre(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def _from_factor(g):
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real)


def random_rank_r(dim, r, seed):
    if not 1 <= r <= dim:
        raise ValueError(f"rank {r} outside 1..{dim}")
    rng = np.random.default_rng(seed)
    return _from_factor(_ginibre(rng, dim, r))


def random_fullrank(dim, seed):
    if dim < 2:
        raise ValueError("dim must be >= 2")
    return random_rank_r(dim, dim, seed)


def random_pure(dim, seed):
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = np.random.default_rng(seed)
    psi = _ginibre(rng, dim, 1)[:, 0]
    return DensityMatrix.from_vector(psi)


def maximally_mixed(dim):
    return DensityMatrix(np.eye(dim) / dim)


def noise_mixture(psi, sigma, epsilon):
    """``(1 - eps) |psi><psi| + eps sigma``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon {epsilon} outside [0, 1]")
    p = as_matrix(psi)
    purity = float(np.real(np.vdot(p, p)))
    if abs(purity - 1.0) > PURITY_TOL:
        raise NotPure(f"purity {purity:.10f}")
    mixed = (1.0 - epsilon) * p + epsilon * as_matrix(sigma)
    return DensityMatrix(0.5 * (mixed + mixed.conj().T))


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str = "fullrank_hs"
    dim: int = 16
    r: int | None = None
    epsilon: float | None = None
    noise_kind: str = "random_fullrank"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ConfigError(f"unknown ensemble kind {self.kind!r}")
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.noise_kind!r}")
        if self.r is not None and not 1 <= self.r <= self.dim:
            raise ConfigError(f"rank {self.r} outside 1..{self.dim}")
        if self.epsilon is not None and not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon {self.epsilon} outside [0, 1]")
        if self.kind == "rank_r" and self.r is None:
            raise ConfigError("rank_r ensemble needs r")
        if self.kind == "noise_mixture" and self.epsilon is None:
            raise ConfigError("noise_mixture ensemble needs epsilon")

    def to_dict(self):
        return asdict(self)


def draw(spec, seed=None):
    """Draw one state from ``spec``; ``seed`` overrides ``spec.seed``.

    ``seed`` may be anything ``numpy.random.default_rng`` accepts.
    """
    seed = spec.seed if seed is None else seed
    if spec.kind == "fullrank_hs":
        return random_fullrank(spec.dim, seed)
    if spec.kind == "rank_r":
        return random_rank_r(spec.dim, spec.r, seed)
    if spec.kind == "haar_pure":
        return random_pure(spec.dim, seed)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    psi_seed, noise_seed = ss.spawn(2)
    psi = random_pure(spec.dim, psi_seed)
    if spec.noise_kind == "maximally_mixed":
        sigma = maximally_mixed(spec.dim)
    else:
        sigma = random_fullrank(spec.dim, noise_seed)
    return noise_mixture(psi, sigma, spec.epsilon)
