"""Closed-form results for uniformly excited clouds.

All rates are in units of the single-atom linewidth and ``t = math.inf``
selects the stationary limit.  Functions accept scalar or array ``tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import IntegratorError


@dataclass(frozen=True)
class CollectiveParams:
    gamma_n: float
    delta: float
    r_factor: float
    q_factor: float = 0.0


def collective_rate(n_atoms: float, sigma: float) -> float:
    """Superradiant decay rate of a Gaussian cloud, by angular quadrature.

    The azimuthal integral is trivial for an isotropic cloud, leaving
    1 + (N/2) * int_0^pi sin(theta) |S_inf(theta)|^2 dtheta.
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0")

    def integrand(theta):
        return math.sin(theta) * math.exp(-4.0 * sigma**2 * math.sin(theta / 2.0) ** 2)

    # the integrand is confined to theta < ~1/sigma for large clouds
    cut = min(math.pi, 8.0 / sigma)
    points = [cut] if cut < math.pi else None
    val, err = quad(
        integrand, 0.0, math.pi, epsabs=1e-14, epsrel=1e-13, limit=200, points=points
    )
    if err > 1e-9:
        raise IntegratorError(f"collective-rate quadrature did not converge (err={err:g})")
    return 1.0 + 0.5 * n_atoms * val


def collective_rate_closed_form(n_atoms: float, sigma: float) -> float:
    x = 4.0 * sigma**2
    return 1.0 + n_atoms * (-math.expm1(-x)) / x


def steady_amplitude(omega0: float, delta: float, gamma_n: float) -> complex:
    return omega0 / (2.0 * delta + 1j * gamma_n)


def _rate(delta, gamma_n):
    return 1j * delta - 0.5 * gamma_n


def timed_dicke_beta(t, omega0: float, delta: float, gamma_n: float):
    if gamma_n <= 0:
        raise ValueError("gamma_n must be > 0")
    bst = steady_amplitude(omega0, delta, gamma_n)
    t = np.asarray(t, dtype=float)
    out = bst * -np.expm1(_rate(delta, gamma_n) * t)
    return out[()] if out.ndim == 0 else out


def abc_coefficients(tau, omega0: float, delta: float, gamma_n: float):
    """Coefficients (A, B, C) expressing |beta(t + tau)|^2 in terms of beta(t)."""
    tau = np.asarray(tau, dtype=float)
    bst = steady_amplitude(omega0, delta, gamma_n)
    half = np.exp(-0.5 * gamma_n * tau)
    a = abs(bst) ** 2 * (1.0 + half**2 - 2.0 * half * np.cos(delta * tau))
    b = half * np.conj(bst) * (np.exp(1j * delta * tau) - half)
    c = half**2
    if tau.ndim == 0:
        return float(a), complex(b), float(c)
    return a, b, c


def g1_timed_dicke(t: float, tau, delta: float, gamma_n: float):
    """Rotating-frame first-order coherence; ``t`` must be positive."""
    if not t > 0:
        raise ValueError("g1 is undefined at t = 0 (no light has been scattered)")
    tau = np.asarray(tau, dtype=float)
    lam = _rate(delta, gamma_n)
    if math.isinf(t):
        out = np.ones_like(tau, dtype=complex)
    else:
        out = np.expm1(lam * (t + tau)) / np.expm1(lam * t)
    return out[()] if out.ndim == 0 else out


def _dip(x, delta, gamma_n):
    """|1 - exp((i delta - gamma_n/2) x)|^2 written in real form."""
    half = np.exp(-0.5 * gamma_n * x)
    return 1.0 + half**2 - 2.0 * half * np.cos(delta * x)


def g2_timed_dicke(t: float, tau, r: float, delta: float, gamma_n: float):
    """Second-order coherence of the timed Dicke state.

    For finite ``t`` this is the transient form normalised by the intensity
    at ``t``; ``t = inf`` gives the stationary curve R |1 - e^{(i delta - gamma_n/2) tau}|^2.
    """
    tau = np.asarray(tau, dtype=float)
    num = _dip(tau, delta, gamma_n)
    if math.isinf(t):
        out = r * num
    else:
        den = _dip(t, delta, gamma_n)
        if not den > 1e-300:
            raise ZeroDivisionError(f"timed Dicke intensity vanishes at t={t}")
        out = r * num / den
    return out[()] if out.ndim == 0 else out


def g2_eberly(tau, r: float, q: float, delta: float, gamma_n: float):
    """Stationary g2 of the uniformly excited product state."""
    tau = np.asarray(tau, dtype=float)
    half = np.exp(-0.5 * gamma_n * tau)
    out = r + 2.0 * q * (half**2 - half * np.cos(delta * tau))
    return out[()] if out.ndim == 0 else out
