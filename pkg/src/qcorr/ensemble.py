"""Disorder averaging over seeded cloud realizations.

Numerators and intensities are averaged separately and divided afterwards
(ratio of averages).  Standard errors come from a leave-one-out jackknife
over realizations.  Reductions always run in realization order, so results
do not depend on how many worker processes computed them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import analytic
from .cloud import (
    CloudConfig,
    DetectionGeometry,
    gaussian_s_infinity,
    q_factor,
    r_factor_analytic,
    sample_cloud,
    structure_factor,
)
from .correlations import (
    TERM_FUNCTIONS,
    CorrelationCurve,
    RealizationTerms,
    divide_real,
    g1_terms,
)
from .dynamics import DriveParams, assemble_system
from .errors import QcorrError, RealizationError

EXACT_MODELS = ("single_excitation", "product", "classical")
ANALYTIC_MODELS = ("analytic_td", "analytic_eberly")
MODELS = EXACT_MODELS + ANALYTIC_MODELS
QUANTITIES = ("g2", "g1", "r_factor")
SWEEP_PARAMETERS = ("sigma", "theta", "detuning", "n_atoms")


def derive_seed(master_seed: int, index: int, sweep_index: int = 0) -> int:
    """Stable 64-bit seed for one realization of one sweep point."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(sweep_index), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    cloud_config: CloudConfig
    drive: DriveParams
    geometry: DetectionGeometry
    model: str
    t: float
    tau_grid: np.ndarray
    n_realizations: int
    master_seed: int = 0
    quantity: str = "g2"
    r_source: str = "analytic"
    product_initial: str = "operator"
    # optional overrides for the closed-form models
    gamma_n: float | None = None
    r_factor: float | None = None
    q_factor: float | None = None

    def __post_init__(self):
        tau = np.asarray(self.tau_grid, dtype=float)
        if tau.ndim != 1 or tau.size == 0 or tau[0] != 0.0 or np.any(np.diff(tau) <= 0):
            raise ValueError("tau_grid must be non-empty, start at 0 and increase strictly")
        object.__setattr__(self, "tau_grid", tau)
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.quantity not in QUANTITIES:
            raise ValueError(f"quantity must be one of {QUANTITIES}, got {self.quantity!r}")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.r_source not in ("analytic", "numeric"):
            raise ValueError("r_source must be 'analytic' or 'numeric'")
        if self.product_initial not in ("operator", "element"):
            raise ValueError("product_initial must be 'operator' or 'element'")
        if not (self.t >= 0):
            raise ValueError("t must be >= 0 or inf")

    @property
    def needs_realizations(self) -> bool:
        if self.quantity == "r_factor" or self.model in EXACT_MODELS:
            return True
        return self.r_source == "numeric" and self.quantity == "g2"


@dataclass
class EnsembleAccumulator:
    """Per-realization numerators and intensities, kept in realization order."""

    power: int
    numerators: list = field(default_factory=list)
    intensities: list = field(default_factory=list)

    def add(self, terms: RealizationTerms):
        self.numerators.append(np.asarray(terms.numerator))
        self.intensities.append(float(terms.intensity))

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        if other.power != self.power:
            raise ValueError("cannot merge accumulators of different order")
        return EnsembleAccumulator(
            self.power, self.numerators + other.numerators, self.intensities + other.intensities
        )

    @property
    def count(self) -> int:
        return len(self.intensities)

    def stacked(self):
        return np.stack(self.numerators), np.asarray(self.intensities)

    def estimate(self) -> np.ndarray:
        num, inten = self.stacked()
        return ratio_of_averages(num, inten, self.power)

    def stderr(self) -> np.ndarray:
        num, inten = self.stacked()
        return jackknife(lambda a, b: ratio_of_averages(a, b, self.power), num, inten)


def ratio_of_averages(num, inten, power):
    num = np.asarray(num)
    n = len(inten)
    # one row-wise reduction for both, so identical data sum identically
    sums = np.column_stack([num, np.asarray(inten, dtype=num.dtype)]).sum(axis=0)
    means = divide_real(sums, n)
    return divide_real(means[:-1], means[-1].real ** power)


def jackknife(stat: Callable, num: np.ndarray, inten: np.ndarray) -> np.ndarray:
    """Leave-one-out standard error of ``stat(num, inten)``; NaN for one sample."""
    n = len(inten)
    full = np.asarray(stat(num, inten))
    if n < 2:
        return np.full(full.shape, np.nan)
    keep = np.ones(n, dtype=bool)
    loo = []
    for i in range(n):
        keep[i] = False
        loo.append(stat(num[keep], inten[keep]))
        keep[i] = True
    loo = np.asarray(loo)
    dev = np.abs(loo - loo.mean(axis=0)) ** 2
    return np.sqrt((n - 1) / n * dev.sum(axis=0))


@dataclass(eq=False)
class EnsembleResult:
    curve: CorrelationCurve
    accumulator: EnsembleAccumulator | None
    per_realization_seeds: list
    extras: dict = field(default_factory=dict)


@dataclass(eq=False)
class SweepTable:
    parameter: str
    values: list
    results: list

    def rows(self):
        return list(zip(self.values, self.results))


# --- per-realization work -----------------------------------------------------

@dataclass(frozen=True)
class _Failure:
    message: str


def _structure_terms(cloud, geom):
    s2 = abs(structure_factor(cloud, geom)) ** 2
    return RealizationTerms(np.array([s2 * s2]), s2)


def _realization(spec: EnsembleSpec, seed: int):
    try:
        cloud = sample_cloud(replace(spec.cloud_config, seed=seed))
        if spec.quantity == "r_factor" or spec.model in ANALYTIC_MODELS:
            return _structure_terms(cloud, spec.geometry)
        system = assemble_system(cloud, spec.drive)
        if spec.quantity == "g1":
            return g1_terms(system, spec.geometry, spec.t, spec.tau_grid)
        fn = TERM_FUNCTIONS[spec.model]
        if spec.model == "product":
            return fn(system, spec.geometry, spec.t, spec.tau_grid, spec.product_initial)
        return fn(system, spec.geometry, spec.t, spec.tau_grid)
    except (QcorrError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _Failure(f"{type(exc).__name__}: {exc}")


def _call(args):
    return _realization(*args)


def _collect(spec, seeds, workers):
    jobs = [(spec, s) for s in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


# --- closed-form curves ------------------------------------------------------

def _disorder_statistics(spec, num, inten):
    """(R, Q) from realization data, or from the continuum structure factor."""
    n = spec.cloud_config.n_atoms
    if num is None:
        s2 = gaussian_s_infinity(spec.cloud_config.sigma, spec.geometry.theta) ** 2
        r, q = r_factor_analytic(n, s2), q_factor(n, s2)
    else:
        m2 = np.mean(inten)
        r = float(np.mean(num[:, 0]) / m2**2)
        # <|S_N|^2> ~ 1/N + |S_inf|^2
        ns2 = max(n * m2 - 1.0, 0.0)
        q = r - (2.0 + ns2) / (1.0 + ns2)
    if spec.r_factor is not None:
        r = spec.r_factor
    if spec.q_factor is not None:
        q = spec.q_factor
    return r, q


def _analytic_curve(spec, gamma_n, num=None, inten=None):
    tau = spec.tau_grid
    delta = spec.drive.detuning
    if spec.quantity == "g1":
        return analytic.g1_timed_dicke(spec.t, tau, delta, gamma_n)
    r, q = _disorder_statistics(spec, num, inten)
    if spec.model == "analytic_td":
        return analytic.g2_timed_dicke(spec.t, tau, r, delta, gamma_n)
    if not math.isinf(spec.t):
        raise ValueError("the factorized-state closed form is stationary; use t = inf")
    return analytic.g2_eberly(tau, r, q, delta, gamma_n)


def _gamma_n(spec):
    if spec.gamma_n is not None:
        return float(spec.gamma_n)
    return analytic.collective_rate(spec.cloud_config.n_atoms, spec.cloud_config.sigma)


# --- public API ---------------------------------------------------------------

def run_ensemble(spec: EnsembleSpec, workers: int = 1, sweep_index: int = 0) -> EnsembleResult:
    """Average one correlation function over ``spec.n_realizations`` clouds.

    Raises
    ------
    RealizationError
        On the first failing realization (in index order), carrying its seed.
    """
    meta = {
        "model": spec.model,
        "quantity": spec.quantity,
        "t": spec.t,
        "theta": spec.geometry.theta,
        "phi": spec.geometry.phi,
        "rabi": spec.drive.rabi,
        "detuning": spec.drive.detuning,
        "n_atoms": spec.cloud_config.n_atoms,
        "sigma": spec.cloud_config.sigma,
        "master_seed": spec.master_seed,
        "estimator": "ratio_of_averages",
    }
    extras = {}
    seeds = []
    acc = None
    if spec.needs_realizations:
        seeds = [derive_seed(spec.master_seed, i, sweep_index) for i in range(spec.n_realizations)]
        power = 1 if spec.quantity == "g1" else 2
        acc = EnsembleAccumulator(power)
        for i, (seed, out) in enumerate(zip(seeds, _collect(spec, seeds, workers))):
            if isinstance(out, _Failure):
                raise RealizationError(i, seed, out.message)
            acc.add(out)

    if spec.model in ANALYTIC_MODELS:
        gamma_n = _gamma_n(spec)
        extras["gamma_n"] = gamma_n
        if spec.quantity == "r_factor":
            values, stderr = acc.estimate(), acc.stderr()
        elif acc is not None:
            num, inten = acc.stacked()
            values = _analytic_curve(spec, gamma_n, num, inten)
            stderr = jackknife(lambda a, b: _analytic_curve(spec, gamma_n, a, b), num, inten)
            extras["r_factor"], extras["q_factor"] = _disorder_statistics(spec, num, inten)
        else:
            values = _analytic_curve(spec, gamma_n)
            stderr = np.zeros(len(spec.tau_grid))
            if spec.quantity == "g2":
                extras["r_factor"], extras["q_factor"] = _disorder_statistics(spec, None, None)
    else:
        values, stderr = acc.estimate(), acc.stderr()

    if acc is not None and acc.count < 2:
        meta["stderr_defined"] = False
    tau = spec.tau_grid if spec.quantity != "r_factor" else np.zeros(1)
    curve = CorrelationCurve(tau, np.asarray(values), np.asarray(stderr), meta)
    return EnsembleResult(curve, acc, seeds, extras)


def with_parameter(spec: EnsembleSpec, parameter: str, value) -> EnsembleSpec:
    if parameter == "sigma":
        return replace(spec, cloud_config=replace(spec.cloud_config, sigma=float(value)))
    if parameter == "n_atoms":
        return replace(spec, cloud_config=replace(spec.cloud_config, n_atoms=int(value)))
    if parameter == "theta":
        return replace(spec, geometry=DetectionGeometry(float(value), spec.geometry.phi))
    if parameter == "detuning":
        return replace(spec, drive=DriveParams(spec.drive.rabi, float(value)))
    raise ValueError(f"cannot sweep {parameter!r}; choose from {SWEEP_PARAMETERS}")


def sweep(parameter: str, values: Sequence, spec: EnsembleSpec, workers: int = 1) -> SweepTable:
    """One ensemble per value; value ``i`` draws its seeds from sweep stream ``i``."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"cannot sweep {parameter!r}; choose from {SWEEP_PARAMETERS}")
    results = [
        run_ensemble(with_parameter(spec, parameter, v), workers=workers, sweep_index=i)
        for i, v in enumerate(values)
    ]
    return SweepTable(parameter, list(values), results)
