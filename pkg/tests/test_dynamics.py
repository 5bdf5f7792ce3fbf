import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from qcorr.cloud import AtomCloud, CloudConfig, DetectionGeometry, sample_cloud, structure_factor
from qcorr.dynamics import (
    DriveParams,
    assemble_system,
    beta_at,
    evolve_beta,
    intensity,
    steady_state,
)
from qcorr.errors import IntegratorError
from qcorr.integrate import check_grid, integrate


def single_atom(rabi=0.01, detuning=5.0):
    cloud = AtomCloud(np.zeros((1, 3)), CloudConfig(1, 1.0))
    return assemble_system(cloud, DriveParams(rabi, detuning))


def random_system(n, sigma, seed, rabi=0.01, detuning=2.0):
    return assemble_system(sample_cloud(CloudConfig(n, sigma, seed=seed)), DriveParams(rabi, detuning))


def test_single_atom_matrices():
    s = single_atom(0.02, 3.0)
    assert s.evolution_matrix[0, 0] == 3.0j - 0.5
    assert s.drive_vector[0] == pytest.approx(-0.01j)
    assert steady_state(s)[0] == pytest.approx(0.02 / (6.0 + 1j), rel=1e-14)


def test_pair_at_distance_pi():
    pos = np.array([[0.0, 0.0, 0.0], [math.pi, 0.0, 0.0]])
    s = assemble_system(AtomCloud(pos, CloudConfig(2, 1.0)), DriveParams(0.01, 0.0))
    expected = -0.5 * (1j / math.pi)
    assert s.evolution_matrix[0, 1] == pytest.approx(expected, abs=1e-15)
    assert s.evolution_matrix[1, 0] == pytest.approx(expected, abs=1e-15)


def test_system_is_immutable():
    s = single_atom()
    with pytest.raises(ValueError):
        s.evolution_matrix[0, 0] = 0


def test_strong_drive_warns():
    with pytest.warns(UserWarning):
        DriveParams(0.5, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        DriveParams(0.1, 0.0)
    with pytest.raises(ValueError):
        DriveParams(-1.0, 0.0)


def test_zero_drive_stays_dark():
    s = random_system(10, 1.0, 0, rabi=0.0)
    assert np.all(s.drive_vector == 0)
    assert np.all(steady_state(s) == 0)
    assert np.all(evolve_beta(s, np.zeros(10), [0.0, 1.0, 5.0]).amplitudes == 0)


def test_single_atom_trajectory_closed_form():
    s = single_atom(0.01, 5.0)
    t = np.linspace(0, 10, 101)
    bst = 0.01 / (10.0 + 1j)
    ref = bst * (1 - np.exp((5j - 0.5) * t))
    got = evolve_beta(s, [0.0], t).amplitudes[:, 0]
    assert np.max(np.abs(got - ref)) < 1e-6 * abs(bst)


@pytest.mark.parametrize("n,sigma,seed", [(2, 0.5, 1), (8, 1.0, 2), (32, 2.0, 3), (20, 0.4, 4)])
def test_rk4_matches_matrix_exponential(n, sigma, seed):
    s = random_system(n, sigma, seed)
    m, b = s.evolution_matrix, s.drive_vector
    minv_b = np.linalg.solve(m, b)
    t = np.array([0.0, 0.7, 2.0, 6.0])
    got = evolve_beta(s, np.zeros(n), t).amplitudes
    for ti, row in zip(t, got):
        ref = (expm(m * ti) - np.eye(n)) @ minv_b
        assert np.linalg.norm(row - ref) <= 1e-6 * max(np.linalg.norm(ref), 1e-300) + 1e-18


@settings(max_examples=15, deadline=None)
@given(n=st.integers(1, 25), sigma=st.floats(0.2, 5.0), seed=st.integers(0, 2**32),
       scale=st.floats(0.1, 10.0))
def test_linearity_in_drive(n, sigma, seed, scale):
    cloud = sample_cloud(CloudConfig(n, sigma, seed=seed))
    s1 = assemble_system(cloud, DriveParams(0.005, 1.0))
    s2 = assemble_system(cloud, DriveParams(0.005 * scale, 1.0))
    t = [0.0, 1.0, 3.0]
    a = evolve_beta(s1, np.zeros(n), t).amplitudes
    b = evolve_beta(s2, np.zeros(n), t).amplitudes
    assert np.allclose(b, scale * a, rtol=1e-10, atol=1e-18)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 40), sigma=st.floats(0.1, 8.0), seed=st.integers(0, 2**32))
def test_spectrum_decays_and_steady_state_residual(n, sigma, seed):
    s = random_system(n, sigma, seed)
    assert np.linalg.eigvals(s.evolution_matrix).real.max() < 0
    bst = steady_state(s)
    res = s.evolution_matrix @ bst + s.drive_vector
    assert np.max(np.abs(res)) < 1e-12 * np.max(np.abs(s.drive_vector))


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_relaxes_to_steady_state(seed):
    # dilute cloud: every mode decays near the collective rate.  Dense clouds host
    # subradiant modes that outlive a 40 / Gamma_N horizon.
    s = random_system(30, 30.0, seed)
    horizon = 40.0 / s.rate_estimate()
    end = evolve_beta(s, np.zeros(30), [0.0, horizon]).amplitudes[-1]
    bst = steady_state(s)
    assert np.max(np.abs(end - bst)) < 1e-6 * np.max(np.abs(bst))


def test_fixed_point_is_stationary():
    s = random_system(12, 1.0, 5)
    bst = steady_state(s)
    traj = evolve_beta(s, bst, np.linspace(0, 5, 11)).amplitudes
    assert np.max(np.abs(traj - bst)) < 1e-10 * np.max(np.abs(bst))


def test_beta_at():
    s = random_system(6, 1.0, 0)
    assert np.all(beta_at(s, 0.0) == 0)
    assert np.array_equal(beta_at(s, math.inf), steady_state(s))
    assert np.allclose(beta_at(s, 2.0), evolve_beta(s, np.zeros(6), [0.0, 2.0]).amplitudes[-1])
    with pytest.raises(ValueError):
        beta_at(s, -1.0)


def test_step_size_policy():
    s = random_system(50, 3.0, 0, detuning=5.0)
    assert s.step_size() <= min(0.01, 0.1 / (1 + 5.0 + s.rate_estimate()))


def test_intensity():
    cloud = sample_cloud(CloudConfig(40, 1.5, seed=2))
    geom = DetectionGeometry(0.4, 1.1)
    assert intensity(cloud, np.zeros(40), geom) == 0
    one = sample_cloud(CloudConfig(1, 1.0, seed=3))
    assert intensity(one, [0.3 + 0.4j], geom) == pytest.approx(0.25)
    # uniformly phased by the laser: N^2 |S_N|^2 |beta|^2
    beta = 0.1 * np.exp(1j * cloud.positions[:, 2])
    expected = 40**2 * abs(structure_factor(cloud, geom)) ** 2 * 0.01
    assert intensity(cloud, beta, geom) == pytest.approx(expected, rel=1e-12)


def test_integrator_grid_checks():
    with pytest.raises(ValueError):
        check_grid([0.1, 0.2])
    with pytest.raises(ValueError):
        check_grid([0.0, 0.2, 0.2])
    with pytest.raises(ValueError):
        check_grid([])


def test_integrator_exponential():
    out = integrate(lambda _t, y: -2.0 * y, np.array([1.0 + 0j]), [0.0, 0.5, 1.0], 0.1)
    assert np.allclose(out[:, 0], np.exp(-2.0 * np.array([0.0, 0.5, 1.0])), rtol=1e-7)


def test_integrator_refinement_budget():
    # a step far outside RK4 stability cannot be rescued within one halving
    with pytest.raises(IntegratorError):
        integrate(lambda _t, y: -1e4 * y, np.array([1.0 + 0j]), [0.0, 1.0], 1.0, max_halvings=1)
