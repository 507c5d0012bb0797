import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochac.errors import ParameterError
from stochac.noise import brownian_from_values, mollified_approximation, sample_brownian, zero_path
from stochac.oracle import FRONT_SIGN, planar_front_1d, radial_ensemble, radial_flow


def _still(horizon=1.0, dt=1e-4):
    n = int(round(horizon / dt)) + 1
    return brownian_from_values(np.zeros(n), dt)


def test_deterministic_circle_radius():
    r = radial_flow(1.0, 2, 0.0, _still())
    assert abs(r.at(0.25) - math.sqrt(0.5)) <= 1e-4
    t = np.linspace(0, 0.4, 9)
    np.testing.assert_allclose(r.at(t), np.sqrt(1 - 2 * t), atol=1e-4)


@pytest.mark.parametrize("d,R0", [(2, 1.0), (3, 1.0), (2, 0.7)])
def test_deterministic_extinction_time(d, R0):
    r = radial_flow(R0, d, 0.0, _still(dt=2.5e-5))
    expected = R0**2 / (2 * (d - 1))
    assert r.extinct
    assert abs(r.T_star - expected) <= 1e-3 * expected
    assert r.substeps_used > 0
    assert np.all(r.R[r.times > r.T_star] == 0.0)


def test_no_extinction_within_short_horizon():
    r = radial_flow(1.0, 2, 0.0, _still(0.2))
    assert not r.extinct and math.isinf(r.T_star)


def test_radial_second_moment(a0):
    ens = radial_ensemble(1.0, 2, a0, range(2000), horizon=0.05, dt=1e-4)
    m2 = ens.second_moment(0.05)
    # 2000 paths: the standard error of R^2 is about 0.3 / sqrt(2000)
    assert abs(m2 - (1 + (a0**2 - 2) * 0.05)) <= 0.03
    assert 0.9 < ens.survival(0.05) < 1.0


def test_second_moment_counts_extinct_fronts_as_zero(a0):
    ens = radial_ensemble(0.3, 2, a0, range(50), horizon=0.1, dt=5e-6)
    t = 0.1
    alive = ens.T_star > t
    assert 0 < alive.sum() < 50
    assert ens.second_moment(t) == pytest.approx(np.mean(np.where(alive, ens.R[:, -1], 0.0) ** 2))
    assert ens.second_moment(t, survivors_only=True) == pytest.approx(np.mean(ens.R[alive, -1] ** 2))


def test_time_step_refinement_is_first_order(a0):
    # coarse paths are subsamples of one fine path so all levels see the same noise
    t = 0.1
    levels = {8: [], 4: [], 1: []}
    for s in range(200):
        fine = sample_brownian(s, t, 1e-4 / 8)
        for f in levels:
            p = brownian_from_values(fine.values[::f], fine.dt * f, seed=s)
            levels[f].append(radial_flow(1.0, 2, a0, p).at(t))
    ref = np.array(levels[1])
    e8 = np.sqrt(np.mean((np.array(levels[8]) - ref) ** 2))
    e4 = np.sqrt(np.mean((np.array(levels[4]) - ref) ** 2))
    assert 1.4 < e8 / e4 < 3.0
    assert e8 <= 10 * 1e-4


def test_bridge_refinement_preserves_path():
    p = sample_brownian(4, 0.2, 1e-4)
    coarse = radial_flow(1.0, 2, 1.0, p)
    fine = radial_flow(1.0, 2, 1.0, p, dt=2.5e-5)
    assert np.max(np.abs(coarse.R - fine.at(coarse.times))) < 5e-3
    again = radial_flow(1.0, 2, 1.0, p, dt=2.5e-5)
    np.testing.assert_array_equal(fine.R, again.R)


def test_path_sharing():
    p = sample_brownian(11, 0.5, 1e-4)
    q = sample_brownian(11, 0.5, 1e-4)
    a = radial_flow(1.0, 2, 2.0, p)
    b = radial_flow(1.0, 2, 2.0, q)
    np.testing.assert_array_equal(a.R, b.R)
    assert a.T_star == b.T_star or (math.isinf(a.T_star) and math.isinf(b.T_star))


def test_radial_errors():
    p = _still(0.1)
    with pytest.raises(ParameterError):
        radial_flow(0.0, 2, 1.0, p)
    with pytest.raises(ParameterError):
        radial_flow(1.0, 1, 1.0, p)
    with pytest.raises(ParameterError, match="divide"):
        radial_flow(1.0, 2, 1.0, p, dt=3e-5)
    coarse = _still(0.1, 1e-3)
    with pytest.raises(ParameterError, match="1e-4"):
        radial_flow(1.0, 2, 1.0, coarse)


def test_radial_horizon_cut():
    r = radial_flow(1.0, 2, 0.0, _still(), T=0.3)
    assert r.times[-1] == pytest.approx(0.3)


def test_planar_front_trivial_cases():
    t, x = planar_front_1d(0.3, 2.0, _still(0.1))
    np.testing.assert_array_equal(x, 0.3)
    p = sample_brownian(2, 0.5, 1e-3)
    t, x = planar_front_1d(0.3, 0.0, p)
    np.testing.assert_array_equal(x, 0.3)
    t, x = planar_front_1d(-0.1, 1.0, zero_path(0.5, 1e-3))
    np.testing.assert_array_equal(x, -0.1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5.0), st.floats(-1, 1))
def test_planar_front_is_linear_in_alpha0(seed, alpha0, x0):
    p = sample_brownian(seed, 0.2, 1e-3)
    _, x1 = planar_front_1d(x0, alpha0, p)
    _, x2 = planar_front_1d(x0, 2 * alpha0, p)
    np.testing.assert_allclose(x2 - x0, 2 * (x1 - x0), atol=1e-12)
    np.testing.assert_allclose(x1 - x0, FRONT_SIGN * alpha0 * p.values, atol=1e-12)


def test_planar_front_accepts_mild_paths():
    base = sample_brownian(2, 1.0, 1e-4)
    m = mollified_approximation(base, 0.04, 0.4)
    t, x = planar_front_1d(0.0, 1.0, m)
    np.testing.assert_array_equal(x, FRONT_SIGN * m.samples[0])
    with pytest.raises(ParameterError):
        planar_front_1d(0.0, 1.0, np.zeros(4))
