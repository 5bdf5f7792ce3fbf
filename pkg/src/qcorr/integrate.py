"""Fixed-step classical Runge-Kutta with a step-halving (Richardson) check."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import IntegratorError

RTOL = 1e-6
MAX_HALVINGS = 6


def _rk4_run(rhs, y0, grid, counts, observe):
    """RK4 with ``counts[i]`` equal steps across grid interval ``i``."""
    y = np.array(y0, dtype=complex)
    out = [observe(y)]
    for t0, t1, n in zip(grid[:-1], grid[1:], counts):
        dt = (t1 - t0) / n
        t = t0
        for _ in range(n):
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
            k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
            k4 = rhs(t + dt, y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += dt
        out.append(observe(y))
    return out


def check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("time grid must be a non-empty 1-d sequence")
    if grid[0] != 0.0:
        raise ValueError("time grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return grid


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    grid,
    h_max: float,
    observe: Callable[[np.ndarray], np.ndarray] | None = None,
    rtol: float = RTOL,
    max_halvings: int = MAX_HALVINGS,
) -> np.ndarray:
    """Integrate ``dy/dt = rhs(t, y)`` and return ``observe(y)`` on ``grid``.

    The run is repeated with every step halved.  Once the two agree to
    ``rtol`` relative to the largest observed magnitude, the Richardson
    combination fine + (fine - coarse)/15 is returned (the fourth-order
    error term cancels); otherwise the step keeps halving.  ``observe`` must
    be linear in the state for the extrapolation to be meaningful.
    """
    grid = check_grid(grid)
    if observe is None:
        observe = np.copy
    h = float(h_max)
    counts = np.maximum(1, np.ceil(np.diff(grid) / h - 1e-9).astype(int))
    coarse = np.asarray(_rk4_run(rhs, y0, grid, counts, observe))
    for _ in range(max_halvings):
        counts = 2 * counts
        fine = np.asarray(_rk4_run(rhs, y0, grid, counts, observe))
        scale = np.max(np.abs(fine)) if fine.size else 0.0
        diff = np.max(np.abs(fine - coarse)) if fine.size else 0.0
        if diff <= rtol * scale or diff == 0.0:
            return fine + (fine - coarse) / 15.0
        coarse = fine
    h_final = float(np.max(np.diff(grid) / counts)) if grid.size > 1 else h
    raise IntegratorError(
        f"step refinement did not converge (final step {h_final:g}, discrepancy {diff:g})"
    )
