"""Exact two-time correlation functions for one disorder realization.

Every correlator is returned in two pieces, a numerator curve and the
detected intensity I(t), so that ensembles can average them separately:

    g1(t, tau) = <num> / <I>,        g2(t, tau) = <num> / <I>^2.

The two-time second moments come from the regression equation

    dH/dtau = conj(M) H + H M + conj(f) d^T + conj(d) f^T,

where ``f`` solves the amplitude equation df/dtau = M f + d.  H is indexed
(m, j) and the detected combination is u^H H u with u_j = exp(-i k.r_j).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.linalg import expm

from .cloud import detection_phases
from .dynamics import CouplingSystem, beta_at, evolve_beta, steady_state
from .errors import BudgetExceededError, DegenerateIntensityError, IntegratorError
from .integrate import check_grid, integrate

MIN_INTENSITY = 1e-30
HERMITIAN_RTOL = 1e-9
BRUTE_FORCE_MAX_N = 16

ProductInitial = Literal["operator", "element"]


@dataclass(frozen=True, eq=False)
class HMatrixState:
    h: np.ndarray
    tau: float
    model_tag: str


@dataclass(eq=False)
class CorrelationCurve:
    tau_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class RealizationTerms:
    """Per-realization numerator curve and the intensity that normalises it."""

    numerator: np.ndarray
    intensity: float


def _meta(system, geom, t, model):
    return {
        "model": model,
        "t": t,
        "theta": geom.theta,
        "phi": geom.phi,
        "rabi": system.drive.rabi,
        "detuning": system.drive.detuning,
        "n_atoms": system.n_atoms,
        "sigma": system.cloud.config.sigma,
        "seed": system.cloud.config.seed,
    }


def _detected(system, geom, t):
    """Detection phases, beta(t) and I(t) with the degenerate-intensity guard."""
    u = detection_phases(system.cloud, geom)
    beta_t = beta_at(system, t)
    c = u @ beta_t
    inten = float((np.conj(c) * c).real)
    if inten < MIN_INTENSITY:
        raise DegenerateIntensityError(f"I(t={t}) = {inten:g} is below {MIN_INTENSITY:g}")
    return u, beta_t, c, inten


def divide_real(num, den: float):
    """``num / den`` for a real ``den``, componentwise so that x / x == 1 exactly."""
    num = np.asarray(num)
    if np.iscomplexobj(num):
        return num.real / den + 1j * (num.imag / den)
    return num / den


def _curve(terms: RealizationTerms, power: int, tau, meta) -> CorrelationCurve:
    values = divide_real(terms.numerator, terms.intensity**power)
    return CorrelationCurve(np.asarray(tau, dtype=float), values, np.zeros(len(values)), meta)


def _check_hermitian(h):
    scale = np.max(np.abs(h))
    if np.max(np.abs(h - h.conj().T)) > HERMITIAN_RTOL * max(scale, 1e-300):
        raise IntegratorError("second-moment matrix lost Hermiticity during propagation")


def _integrate_moments(system, f0, h0, drive, tau_grid, observe):
    """Co-propagate (f, H) and return ``observe(H)`` on the delay grid."""
    m = system.evolution_matrix
    mc = m.conj()
    n = system.n_atoms

    def rhs(_t, y):
        f = y[:n]
        h = y[n:].reshape(n, n)
        dh = mc @ h + h @ m + np.outer(f.conj(), drive) + np.outer(drive.conj(), f)
        return np.concatenate([m @ f + drive, dh.ravel()])

    def obs(y):
        h = y[n:].reshape(n, n)
        _check_hermitian(h)
        return observe(h)

    y0 = np.concatenate([np.asarray(f0, dtype=complex), np.asarray(h0, dtype=complex).ravel()])
    return integrate(rhs, y0, tau_grid, system.step_size(), observe=obs)


def _projector(u):
    uc = u.conj()
    return lambda h: np.atleast_1d(uc @ h @ u)


# --- first order -----------------------------------------------------------

def g1_terms(system: CouplingSystem, geom, t: float, tau_grid) -> RealizationTerms:
    u, beta_t, c, inten = _detected(system, geom, t)
    traj = evolve_beta(system, beta_t, tau_grid)
    num = np.conj(c) * (traj.amplitudes @ u)
    # zero delay is the intensity itself, so g1(t, 0) = 1 exactly
    num[0] = inten
    return RealizationTerms(num, inten)


def g1_exact(system: CouplingSystem, geom, t: float, tau_grid) -> CorrelationCurve:
    """Rotating-frame g1 of one realization (identical for both atomic states)."""
    terms = g1_terms(system, geom, t, tau_grid)
    return _curve(terms, 1, tau_grid, _meta(system, geom, t, "g1"))


# --- single-excitation state -----------------------------------------------

def evolve_h_single(system: CouplingSystem, tau_grid, beta0=None) -> list[HMatrixState]:
    """Full H(tau) for the single-excitation state, H(0) = 0.

    The source amplitudes beta(tau) are co-integrated from ``beta0``
    (ground state by default) so every Runge-Kutta stage sees them exactly.
    """
    tau_grid = check_grid(tau_grid)
    n = system.n_atoms
    f0 = np.zeros(n, dtype=complex) if beta0 is None else beta0
    hs = _integrate_moments(
        system, f0, np.zeros((n, n)), system.drive_vector, tau_grid, lambda h: h.copy()
    )
    return [HMatrixState(h, float(tau), "single_excitation") for h, tau in zip(hs, tau_grid)]


def g2_single_excitation_terms(system: CouplingSystem, geom, t: float, tau_grid) -> RealizationTerms:
    u, _beta_t, _c, inten = _detected(system, geom, t)
    n = system.n_atoms
    w = _integrate_moments(
        system, np.zeros(n), np.zeros((n, n)), system.drive_vector, tau_grid, _projector(u)
    )[:, 0]
    # |P(t)|^2 equals I(t) for a single realization
    return RealizationTerms(inten * w.real, inten)


def g2_single_excitation(system: CouplingSystem, geom, t: float, tau_grid) -> CorrelationCurve:
    terms = g2_single_excitation_terms(system, geom, t, tau_grid)
    return _curve(terms, 2, tau_grid, _meta(system, geom, t, "single_excitation"))


# --- product state ----------------------------------------------------------

def evolve_f_product(
    system: CouplingSystem, beta_t, q: int, tau_grid, method: str = "direct"
) -> np.ndarray:
    """Amplitudes started from beta(t) with atom ``q`` (0-based) emptied.

    ``method="direct"`` integrates the amplitude equation; ``"propagator"``
    uses the superposition beta(t + tau) - exp(M tau) e_q beta_q(t) with
    dense matrix exponentials.  Returns an array of shape (len(tau), N).
    """
    beta_t = np.asarray(beta_t, dtype=complex)
    n = system.n_atoms
    if not 0 <= q < n:
        raise IndexError(f"atom index {q} out of range for N={n}")
    if method == "direct":
        f0 = beta_t.copy()
        f0[q] = 0.0
        return evolve_beta(system, f0, tau_grid).amplitudes
    if method == "propagator":
        m = system.evolution_matrix
        bst = steady_state(system)
        out = np.empty((len(tau_grid), n), dtype=complex)
        for i, tau in enumerate(check_grid(tau_grid)):
            prop = expm(m * tau)
            out[i] = bst + prop @ (beta_t - bst) - prop[:, q] * beta_t[q]
        return out
    raise ValueError(f"unknown method {method!r}")


def _product_initial(beta_t, a, total, rule):
    w = a * beta_t
    fbar0 = total * beta_t - w
    if rule == "operator":
        # vanishes whenever the two raised or the two lowered indices coincide
        h0 = np.outer(fbar0.conj(), fbar0)
    elif rule == "element":
        # vanishes only at the single element (m, j) = (p, q)
        h0 = abs(total) ** 2 * np.outer(beta_t.conj(), beta_t) - np.outer(w.conj(), w)
    else:
        raise ValueError(f"unknown product initial rule {rule!r}")
    # exact Hermitian part; removes rounding residue when the two outer products nearly cancel
    return fbar0, 0.5 * (h0 + h0.conj().T)


def g2_product_terms(
    system: CouplingSystem, geom, t: float, tau_grid, initial: ProductInitial = "operator"
) -> RealizationTerms:
    """Product-state numerator via one weighted regression solve.

    By linearity, sum_{p,q} conj(a_p) a_q H^{(p,q)} with a = u * beta(t) obeys
    the same regression equation as each H^{(p,q)}, driven by
    Fbar = sum_q a_q F^{(q)} (itself an amplitude solution with drive A b,
    A = sum a).  A single N x N solve therefore replaces N^2 of them.
    """
    u, beta_t, c, inten = _detected(system, geom, t)
    a = u * beta_t
    total = c
    fbar0, h0 = _product_initial(beta_t, a, total, initial)
    w = _integrate_moments(
        system, fbar0, h0, total * system.drive_vector, tau_grid, _projector(u)
    )[:, 0]
    return RealizationTerms(w.real, inten)


def g2_product(
    system: CouplingSystem, geom, t: float, tau_grid, initial: ProductInitial = "operator"
) -> CorrelationCurve:
    terms = g2_product_terms(system, geom, t, tau_grid, initial)
    meta = _meta(system, geom, t, "product")
    meta["product_initial"] = initial
    return _curve(terms, 2, tau_grid, meta)


def g2_product_bruteforce_terms(
    system: CouplingSystem, geom, t: float, tau_grid, initial: ProductInitial = "operator"
) -> RealizationTerms:
    """Literal per-(p, q) evaluation; O(N^2) matrix solves, small N only."""
    n = system.n_atoms
    if n > BRUTE_FORCE_MAX_N:
        raise BudgetExceededError(
            f"per-(p,q) product solver limited to N <= {BRUTE_FORCE_MAX_N}, got {n}"
        )
    u, beta_t, _c, inten = _detected(system, geom, t)
    m = system.evolution_matrix
    mc = m.conj()
    b = system.drive_vector
    base = np.outer(beta_t.conj(), beta_t)
    proj = _projector(u)
    total = np.zeros(len(tau_grid))

    for p in range(n):
        fp0 = beta_t.copy()
        fp0[p] = 0.0
        for q in range(n):
            fq0 = beta_t.copy()
            fq0[q] = 0.0
            h0 = base.copy()
            if initial == "operator":
                h0[p, :] = 0.0
                h0[:, q] = 0.0
            else:
                h0[p, q] = 0.0

            def rhs(_t, y):
                fp, fq = y[:n], y[n:2 * n]
                h = y[2 * n:].reshape(n, n)
                dh = mc @ h + h @ m + np.outer(fp.conj(), b) + np.outer(b.conj(), fq)
                return np.concatenate([m @ fp + b, m @ fq + b, dh.ravel()])

            y0 = np.concatenate([fp0, fq0, h0.ravel()])
            wpq = integrate(
                rhs, y0, tau_grid, system.step_size(),
                observe=lambda y: proj(y[2 * n:].reshape(n, n)),
            )[:, 0]
            weight = np.conj(u[p] * beta_t[p]) * u[q] * beta_t[q]
            total = total + (weight * wpq).real
    return RealizationTerms(total, inten)


# --- classical dipoles ------------------------------------------------------

def g2_classical_terms(system: CouplingSystem, geom, t: float, tau_grid) -> RealizationTerms:
    u, beta_t, c, inten = _detected(system, geom, t)
    later = evolve_beta(system, beta_t, tau_grid).amplitudes @ u
    later[0] = c
    return RealizationTerms(inten * (np.conj(later) * later).real, inten)


def g2_classical(system: CouplingSystem, geom, t: float, tau_grid) -> CorrelationCurve:
    terms = g2_classical_terms(system, geom, t, tau_grid)
    return _curve(terms, 2, tau_grid, _meta(system, geom, t, "classical"))


TERM_FUNCTIONS = {
    "single_excitation": g2_single_excitation_terms,
    "product": g2_product_terms,
    "classical": g2_classical_terms,
}

