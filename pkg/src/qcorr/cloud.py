"""Random atomic clouds, the pairwise scattering kernel and disorder statistics.

Lengths are measured in units of 1/k0 and the laser propagates along +z, so
the incident wave vector is the unit vector ``(0, 0, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform

from .errors import CloudSamplingError

LASER_AXIS = np.array([0.0, 0.0, 1.0])

# Each round redraws every atom that sits too close to a lower-indexed one.
MAX_REDRAW_ROUNDS = 200


@dataclass(frozen=True)
class CloudConfig:
    n_atoms: int
    sigma: float
    min_separation: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma!r}")
        if not self.min_separation > 0:
            raise ValueError(f"min_separation must be > 0, got {self.min_separation!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


@dataclass(frozen=True, eq=False)
class AtomCloud:
    positions: np.ndarray
    config: CloudConfig

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.shape != (self.config.n_atoms, 3):
            raise ValueError(
                f"positions must have shape ({self.config.n_atoms}, 3), got {pos.shape}"
            )
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_atoms(self) -> int:
        return self.config.n_atoms

    def pair_distances(self) -> np.ndarray:
        """Full N x N matrix of interatomic distances."""
        return squareform(pdist(self.positions))


@dataclass(frozen=True)
class DetectionGeometry:
    """Far-field detection direction; angles in radians."""

    theta: float
    phi: float = 0.0
    k_out: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        st = np.sin(self.theta)
        k = np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])
        object.__setattr__(self, "k_out", k)

    @property
    def momentum_transfer(self) -> np.ndarray:
        """k - k0 in units of k0."""
        return self.k_out - LASER_AXIS


def _close_atoms(pos, eps):
    """Indices of atoms lying within ``eps`` of some lower-indexed atom."""
    pairs = cKDTree(pos).query_pairs(eps, output_type="ndarray")
    if len(pairs) == 0:
        return np.empty(0, dtype=int)
    return np.unique(pairs.max(axis=1))


def sample_cloud(config: CloudConfig) -> AtomCloud:
    """Draw an isotropic Gaussian cloud, redrawing atoms that come too close.

    Each coordinate is normal with standard deviation ``config.sigma``.  The
    result depends only on ``config`` (the generator is seeded from
    ``config.seed``).

    Raises
    ------
    CloudSamplingError
        If some atoms still violate ``min_separation`` after
        ``MAX_REDRAW_ROUNDS`` redraw rounds.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_atoms
    pos = rng.normal(scale=config.sigma, size=(n, 3))
    for _ in range(MAX_REDRAW_ROUNDS):
        bad = _close_atoms(pos, config.min_separation)
        if bad.size == 0:
            return AtomCloud(pos, config)
        pos[bad] = rng.normal(scale=config.sigma, size=(bad.size, 3))
    raise CloudSamplingError(
        f"could not place {n} atoms with sigma={config.sigma} at separation "
        f">= {config.min_separation} after {MAX_REDRAW_ROUNDS} redraw rounds"
    )


def kernel_matrix(cloud: AtomCloud) -> np.ndarray:
    """Pairwise coupling exp(i r)/(i r) with a zero diagonal."""
    r = cloud.pair_distances()
    n = cloud.n_atoms
    off = ~np.eye(n, dtype=bool)
    gamma = np.zeros((n, n), dtype=complex)
    gamma[off] = np.exp(1j * r[off]) / (1j * r[off])
    return gamma


def detection_phases(cloud: AtomCloud, geom: DetectionGeometry) -> np.ndarray:
    """exp(-i k.r_j) for every atom."""
    return np.exp(-1j * (cloud.positions @ geom.k_out))


def structure_factor(cloud: AtomCloud, geom: DetectionGeometry) -> complex:
    q = geom.momentum_transfer
    return complex(np.mean(np.exp(-1j * (cloud.positions @ q))))


def gaussian_s_infinity(sigma: float, theta: float) -> float:
    """Continuum structure factor of a Gaussian cloud of rms size ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    return float(np.exp(-2.0 * sigma**2 * np.sin(theta / 2.0) ** 2))


def r_factor_numeric(clouds: Sequence[AtomCloud], geom: DetectionGeometry) -> float:
    """Ratio-of-averages estimate <|S_N|^4> / <|S_N|^2>^2 over realizations."""
    if len(clouds) < 2:
        raise ValueError("need at least two cloud realizations")
    s2 = np.array([abs(structure_factor(c, geom)) ** 2 for c in clouds])
    return float(np.mean(s2**2) / np.mean(s2) ** 2)


def r_factor_analytic(n_atoms: int, s2: float) -> float:
    """Gaussian-statistics approximation of R with s2 = |S_inf|^2."""
    if not 0.0 <= s2 <= 1.0:
        raise ValueError("s2 must lie in [0, 1]")
    ns = n_atoms * s2
    return (2.0 + 4.0 * ns + ns * ns) / (1.0 + ns) ** 2


def q_factor(n_atoms: int, s2: float) -> float:
    """Amplitude of the transient term in the factorized-state g2."""
    ns = n_atoms * s2
    return r_factor_analytic(n_atoms, s2) - (2.0 + ns) / (1.0 + ns)


def k2_k4_moments(cloud: AtomCloud, geom: DetectionGeometry) -> tuple[float, float]:
    """Restricted phase sums K2 (p != j) and K4 (all four indices distinct).

    Both follow from the power sums of z_j = exp(i(k0 - k).r_j) by
    inclusion-exclusion, so the cost is O(N).
    """
    n = cloud.n_atoms
    z = np.exp(-1j * (cloud.positions @ geom.momentum_transfer))
    s1 = z.sum()
    s2 = (z * z).sum()
    abs_s1 = abs(s1) ** 2
    k2 = (abs_s1 - n) / n**2

    # ordered pairs j != m, summed over ordered pairs p != q
    pairs = abs(s1 * s1 - s2) ** 2
    # {p, q} = {j, m}: two coincidences, each term is |z_j z_m|^2 = 1
    double = 2.0 * n * (n - 1)
    # exactly one shared index; four equivalent placements
    single = n * (abs_s1 - n) - 2.0 * abs_s1 + 2.0 * n
    k4 = (pairs - double - 4.0 * single) / n**4
    return float(k2), float(k4)
