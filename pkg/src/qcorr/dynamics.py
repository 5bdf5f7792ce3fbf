"""Driven single-excitation dipole amplitudes beta_j(t).

The amplitudes obey the linear system d(beta)/dt = M beta + b with

    M_jj = i*detuning - 1/2,   M_jm = -gamma_jm / 2,   b_j = -(i*rabi/2) exp(i z_j).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .analytic import collective_rate
from .cloud import AtomCloud, DetectionGeometry, detection_phases, kernel_matrix
from .errors import IntegratorError, SingularSystemError
from .integrate import integrate

WEAK_FIELD_LIMIT = 0.1


@dataclass(frozen=True)
class DriveParams:
    rabi: float
    detuning: float

    def __post_init__(self):
        if not self.rabi >= 0:
            raise ValueError(f"rabi must be >= 0, got {self.rabi!r}")
        if self.weak_field_violated:
            warnings.warn(
                f"rabi={self.rabi} exceeds {WEAK_FIELD_LIMIT}; the linear-response "
                "model assumes a weak drive",
                stacklevel=3,
            )

    @property
    def weak_field_violated(self) -> bool:
        return self.rabi > WEAK_FIELD_LIMIT


@dataclass(frozen=True, eq=False)
class CouplingSystem:
    evolution_matrix: np.ndarray
    drive_vector: np.ndarray
    kernel: np.ndarray
    cloud: AtomCloud
    drive: DriveParams

    @property
    def n_atoms(self) -> int:
        return self.cloud.n_atoms

    def rate_estimate(self) -> float:
        """Collective decay rate used to size steps and horizons."""
        cfg = self.cloud.config
        if cfg.sigma > 0:
            return collective_rate(cfg.n_atoms, cfg.sigma)
        return float(cfg.n_atoms)

    def step_size(self) -> float:
        h = min(0.01, 0.1 / (1.0 + abs(self.drive.detuning) + self.rate_estimate()))
        # keeps h*|lambda| inside the RK4 stability region for tightly bound pairs
        norm = np.max(np.sum(np.abs(self.evolution_matrix), axis=1))
        return min(h, 2.0 / norm)


@dataclass(frozen=True, eq=False)
class BetaTrajectory:
    times: np.ndarray
    amplitudes: np.ndarray

    def at(self, i: int) -> np.ndarray:
        return self.amplitudes[i]


def assemble_system(cloud: AtomCloud, drive: DriveParams) -> CouplingSystem:
    gamma = kernel_matrix(cloud)
    n = cloud.n_atoms
    m = (1j * drive.detuning - 0.5) * np.eye(n) - 0.5 * gamma
    b = -0.5j * drive.rabi * np.exp(1j * cloud.positions[:, 2])
    for arr in (m, b, gamma):
        arr.setflags(write=False)
    return CouplingSystem(m, b, gamma, cloud, drive)


def steady_state(system: CouplingSystem) -> np.ndarray:
    """Solve M beta + b = 0 directly."""
    m, b = system.evolution_matrix, system.drive_vector
    try:
        beta = np.linalg.solve(m, -b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(beta)):
        raise SingularSystemError("steady state is not finite")
    return beta


def evolve_beta(system: CouplingSystem, beta0, t_grid) -> BetaTrajectory:
    """RK4 propagation of the amplitudes from ``beta0`` over ``t_grid``."""
    m, b = system.evolution_matrix, system.drive_vector
    beta0 = np.asarray(beta0, dtype=complex)

    def rhs(_t, y):
        return m @ y + b

    amps = integrate(rhs, beta0, t_grid, system.step_size())
    bound = 10.0 * (system.drive.rabi + np.max(np.abs(beta0), initial=0.0))
    if np.max(np.abs(amps), initial=0.0) > bound:
        raise IntegratorError("amplitudes left the linear-response sanity bound")
    return BetaTrajectory(np.asarray(t_grid, dtype=float), amps)


def beta_at(system: CouplingSystem, t: float) -> np.ndarray:
    """Amplitudes at time ``t`` after switching the drive on; ``inf`` means stationary."""
    if math.isinf(t):
        return steady_state(system)
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return np.zeros(system.n_atoms, dtype=complex)
    zero = np.zeros(system.n_atoms, dtype=complex)
    return evolve_beta(system, zero, [0.0, t]).amplitudes[-1]


def intensity(cloud: AtomCloud, beta, geom: DetectionGeometry) -> float:
    return float(abs(detection_phases(cloud, geom) @ np.asarray(beta)) ** 2)
