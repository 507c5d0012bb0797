import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochac.errors import ParameterError, RangeError
from stochac.noise import (
    bump,
    bump_mass,
    brownian_from_values,
    eval_path,
    kernel_weights,
    mildness_report,
    mixing_approximation,
    mollified_approximation,
    sample_brownian,
    zero_path,
)


def test_path_starts_at_zero_and_has_expected_length():
    p = sample_brownian(7, 1.0, 1e-3)
    assert p.values[0] == 0.0
    assert p.values.size == 1001


@given(st.integers(0, 2**63 - 1))
@settings(max_examples=25, deadline=None)
def test_same_seed_is_bit_identical(seed):
    a = sample_brownian(seed, 0.5, 1e-3)
    b = sample_brownian(seed, 0.5, 1e-3)
    assert np.array_equal(a.values, b.values)


def test_values_are_read_only():
    p = sample_brownian(1, 1.0, 1e-2)
    with pytest.raises(ValueError):
        p.values[1] = 3.0


def test_terminal_variance_matches_time():
    end = np.array([sample_brownian(s, 1.0, 1e-2).values[-1] for s in range(10_000)])
    assert abs(end.var() - 1.0) <= 0.05
    assert abs(end.mean()) <= 4 / math.sqrt(10_000)


def test_increments_are_standard_gaussian():
    inc = sample_brownian(3, 10.0, 1e-3).increments() / math.sqrt(1e-3)
    assert abs(inc.mean()) < 0.02
    assert abs(inc.std() - 1.0) < 0.01


@pytest.mark.parametrize("horizon,dt", [(0.0, 1e-3), (1.0, 0.0), (-1.0, 1e-3), (1.0, 2.0)])
def test_bad_grid_rejected(horizon, dt):
    with pytest.raises(ParameterError):
        sample_brownian(0, horizon, dt)


def test_kernel_has_unit_mass_and_is_even():
    s = np.linspace(-1, 1, 20001)
    assert np.allclose(bump(s), bump(-s))
    assert bump(1.0) == 0.0 and bump(-1.5) == 0.0
    w = kernel_weights(0.2, 1e-3)
    assert abs(w[0].sum() - 1.0) <= 1e-12
    assert bump_mass() > 0


def test_mollified_affine_base_is_reproduced():
    dt = 1e-3
    base = brownian_from_values(dt * np.arange(1001), dt)
    p = mollified_approximation(base, 0.05, 0.4)
    t = np.linspace(0.0, 1.0, 37)
    assert np.allclose(eval_path(p, t, 0), t, atol=1e-12)
    assert np.allclose(eval_path(p, t, 1), 1.0, atol=1e-9)
    assert np.allclose(eval_path(p, t, 2), 0.0, atol=1e-6)


def test_mollified_zero_base_is_zero():
    base = brownian_from_values(np.zeros(1001), 1e-3)
    p = mollified_approximation(base, 0.05, 0.4)
    for k in range(3):
        assert np.all(eval_path(p, p.times, k) == 0.0)
    r = mildness_report(p, base)
    assert r.sup_path_gap == r.sup_eps_deriv == r.sup_eps_second == 0.0


def test_mollified_starts_at_zero():
    p = mollified_approximation(sample_brownian(4, 1.0, 1e-4), 0.04, 0.4)
    assert abs(eval_path(p, 0.0, 0)) < 1e-14


@pytest.mark.parametrize("gamma", [0.0, 0.5, 0.7, -0.1])
def test_mollified_gamma_range(gamma):
    with pytest.raises(ParameterError):
        mollified_approximation(sample_brownian(0, 1.0, 1e-4), 0.05, gamma)


@pytest.mark.parametrize("gamma", [0.0, 1 / 3, 0.5])
def test_mixing_gamma_range(gamma):
    with pytest.raises(ParameterError):
        mixing_approximation(0, 0.05, gamma, 1.0)


def test_mollified_rejects_coarse_base():
    with pytest.raises(ParameterError):
        mollified_approximation(sample_brownian(0, 1.0, 1e-2), 0.01, 0.4)


@pytest.mark.invariant
def test_mollified_gap_shrinks_with_eps():
    # ensemble over 100 paths: the sup gap decreases when eps is halved
    gaps = {0.1: [], 0.05: []}
    for s in range(100):
        base = sample_brownian(s, 1.0, 1e-4)
        for e in gaps:
            gaps[e].append(mildness_report(mollified_approximation(base, e, 0.4), base).sup_path_gap)
    assert np.mean(gaps[0.05]) < np.mean(gaps[0.1])
    assert np.median(gaps[0.05]) < np.median(gaps[0.1])


@pytest.mark.invariant
def test_mildness_trend_medians():
    med = []
    for e in (0.2, 0.1, 0.05):
        rows = []
        for s in range(100):
            base = sample_brownian(s, 1.0, 1e-4)
            r = mildness_report(mollified_approximation(base, e, 0.4), base)
            rows.append((r.sup_path_gap, r.sup_eps_deriv, r.sup_eps_second))
        med.append(np.median(rows, axis=0))
    med = np.array(med)
    assert np.all(np.diff(med, axis=0) <= 0)


def test_mixing_starts_at_zero_and_bound():
    eps, gamma, M = 0.05, 0.3, 1.0
    p = mixing_approximation(11, eps, gamma, M, horizon=1.0)
    assert eval_path(p, 0.0, 0) == 0.0
    d1 = eval_path(p, p.times, 1)
    assert np.max(np.abs(eps * d1)) <= M * eps ** (1 - gamma) * (1 + 1e-12)
    # xi and its derivative are bounded by M on the grid
    xi = p.samples[1] * eps**gamma
    dxi = p.samples[2] * eps ** (3 * gamma)
    assert np.max(np.abs(xi)) <= M + 1e-12
    assert np.max(np.abs(dxi)) <= M + 1e-12


@pytest.mark.invariant
def test_mixing_time_average_vanishes():
    eps, gamma = 0.05, 0.3
    T = 1e3 * eps ** (2 * gamma)
    means = []
    for s in range(20):
        p = mixing_approximation(s, eps, gamma, 1.0, horizon=T)
        means.append(eval_path(p, T, 0) / T)
    # a mean-zero process with O(1) correlation time averages to O(T^-1/2)
    assert abs(np.mean(means)) <= 3 * np.std(means) / math.sqrt(20) + 1e-12
    assert np.max(np.abs(means)) <= 1.0 / eps**gamma * 0.2


def test_mixing_deterministic():
    a = mixing_approximation(5, 0.05, 0.3, 1.0)
    b = mixing_approximation(5, 0.05, 0.3, 1.0)
    assert np.array_equal(a.samples, b.samples)


@pytest.mark.parametrize("kind", ["mollified", "mixing"])
def test_derivatives_match_finite_differences(kind):
    if kind == "mollified":
        p = mollified_approximation(sample_brownian(2, 1.0, 1e-4), 0.05, 0.4)
    else:
        p = mixing_approximation(2, 0.05, 0.3, 1.0)
    h = p.dt
    t = p.times[2:-2]
    for k in (0, 1):
        fd = (eval_path(p, t + h, k) - eval_path(p, t - h, k)) / (2 * h)
        ex = eval_path(p, t, k + 1)
        scale = np.max(np.abs(ex)) + 1.0
        assert np.max(np.abs(fd - ex)) <= 0.01 * scale


def test_eval_is_continuous_between_nodes():
    p = mollified_approximation(sample_brownian(9, 1.0, 1e-4), 0.05, 0.4)
    t = np.linspace(0.3, 0.3 + 5 * p.dt, 501)
    v = eval_path(p, t, 1)
    assert np.max(np.abs(np.diff(v))) < 1e-2 * (np.max(np.abs(v)) + 1)


def test_eval_out_of_range():
    p = zero_path(1.0)
    with pytest.raises(RangeError):
        eval_path(p, 1.5)
    with pytest.raises(RangeError):
        eval_path(p, -0.1)
    with pytest.raises(ParameterError):
        eval_path(p, 0.5, order=3)


def test_report_horizon_mismatch():
    base = sample_brownian(0, 1.0, 1e-4)
    p = mollified_approximation(sample_brownian(0, 0.5, 1e-4), 0.05, 0.4)
    with pytest.raises(ParameterError):
        mildness_report(p, base)


@pytest.mark.parametrize("gamma", [1e-3, 0.499])
def test_report_finite_at_gamma_edges(gamma):
    base = sample_brownian(1, 1.0, 1e-4)
    eps = 0.1
    if 0.05 ** (2 * gamma) / 10 < base.dt:
        base = sample_brownian(1, 1.0, 1e-5)
    r = mildness_report(mollified_approximation(base, eps, gamma), base)
    vals = np.array(list(r.as_dict().values()))
    assert np.all(np.isfinite(vals)) and np.all(vals >= 0)


def test_mixing_report_finite_near_edge():
    p = mixing_approximation(1, 0.05, 0.333, 1.0)
    base = brownian_from_values(p.samples[0] - p.samples[0][0], p.dt)
    vals = np.array(list(mildness_report(p, base).as_dict().values()))
    assert np.all(np.isfinite(vals)) and np.all(vals >= 0)
