import math

import numpy as np
import pytest

from stochac.allen_cahn import (
    GUARD_BAND,
    ACParams,
    ac_run,
    ac_step,
    constant_equilibrium,
    default_ac_dt,
    well_prepared_init,
)
from stochac.errors import BlowUpError, ParameterError
from stochac.grid import circle_distance, plane_distance, read_field, uniform_grid
from stochac.noise import mollified_approximation, sample_brownian
from stochac.reaction_wave import equilibria, forcing_level

EPS = 0.05


@pytest.fixture(scope="module")
def mild():
    base = sample_brownian(3, 1.0, 1e-4)
    return mollified_approximation(base, 0.04, 0.4)


@pytest.mark.parametrize("level", [1.0, 0.0, -1.0])
@pytest.mark.parametrize("dim", [1, 2])
def test_constant_equilibria_are_fixed(level, dim):
    g = uniform_grid(0, 1, 0.05, dim=dim)
    u = g.with_values(np.full(g.shape, level))
    out = ac_step(u, ACParams(EPS), None, 0.0)
    assert np.array_equal(out.values, u.values)


def test_standing_profile_barely_moves():
    g = uniform_grid(-2, 2, EPS / 4)
    dx = g.spacing[0]
    # off-node front so that symmetry does not pin it
    u0 = well_prepared_init(plane_distance(g, 0.3 * dx), EPS)
    p = ACParams(EPS)
    run = ac_run(u0, p, None, 100 * p.step_for(u0), observe_every=100)
    assert len(run.times) == 2
    assert abs(run.metric[-1] - run.metric[0]) <= 1e-3 * dx


def test_planar_front_constant_over_unit_time():
    g = uniform_grid(-2, 2, EPS / 4)
    run = ac_run(well_prepared_init(plane_distance(g, 0.1), EPS), ACParams(EPS), None, 1.0)
    assert np.max(np.abs(run.metric - 0.1)) <= 2 * g.spacing[0]


def test_well_prepared_examples(table):
    g = uniform_grid(-1, 1, EPS / 4)
    x = g.axis(0)
    u0 = well_prepared_init(plane_distance(g), EPS)
    i0 = np.argmin(np.abs(x))
    assert u0.values[i0] == 0.0
    far = np.argmin(np.abs(x - 10 * EPS))
    assert 0 < 1 - u0.values[far] <= 2 * math.exp(-10 * math.sqrt(2))
    np.testing.assert_allclose(u0.values[::-1], -u0.values, atol=1e-12)
    with pytest.raises(ParameterError):
        well_prepared_init(plane_distance(g), 0.0)


def test_well_prepared_with_noise_has_wave_midpoint(mild):
    eps = 0.04
    g = uniform_grid(-1, 1, eps / 4)
    u0 = well_prepared_init(plane_distance(g), eps, mild)
    b = forcing_level(eps, mild, 0.0)
    e = equilibria(b)
    i0 = np.argmin(np.abs(g.axis(0)))
    assert abs(u0.values[i0] - e.h_zero) <= 1e-9
    assert np.all((u0.values >= e.h_minus - 1e-12) & (u0.values <= e.h_plus + 1e-12))
    # strictly inside the wells where the layer is resolved
    near = np.abs(g.axis(0)) < 5 * eps
    assert np.all((u0.values[near] > e.h_minus) & (u0.values[near] < e.h_plus))


@pytest.mark.invariant
@pytest.mark.parametrize("shift", [0.05, 0.2])
def test_comparison_principle(shift, mild, tmp_path):
    eps = 0.04
    g = uniform_grid(-1, 1, eps / 4, dim=2)
    p = ACParams(eps)
    u0 = well_prepared_init(circle_distance(g, 0.6), eps, mild)
    v0 = well_prepared_init(circle_distance(g, 0.6 + shift), eps, mild)
    assert np.all(u0.values <= v0.values)
    ru = ac_run(u0, p, mild, 0.05, n_obs=5, dump_dir=tmp_path / "u")
    rv = ac_run(v0, p, mild, 0.05, n_obs=5, dump_dir=tmp_path / "v")
    for a, b in zip(ru.dumps, rv.dumps):
        fu, tu = read_field(a)
        fv, tv = read_field(b)
        assert tu == tv
        assert np.all(fu.values <= fv.values + 1e-12)


@pytest.mark.invariant
def test_maximum_principle_with_forcing(mild):
    eps = 0.04
    g = uniform_grid(-1, 1, eps / 4, dim=2)
    u0 = well_prepared_init(circle_distance(g, 0.6), eps, mild)
    run = ac_run(u0, ACParams(eps), mild, 0.2)
    ts = np.linspace(0, 0.2, 2001)
    roots = [equilibria(forcing_level(eps, mild, t)) for t in ts]
    kappa = max(max(-r.h_minus, r.h_plus) for r in roots) - 1
    assert run.max_abs <= max(np.max(np.abs(u0.values)), 1 + kappa) + 1e-6
    assert kappa < GUARD_BAND


@pytest.mark.parametrize("eps", [0.08, 0.04, 0.02])
def test_constant_state_tracks_upper_equilibrium(eps):
    base = sample_brownian(3, 1.0, 1e-4)
    m = mollified_approximation(base, eps, 0.4)
    g = uniform_grid(0, 1, 0.1, bc="periodic")
    u = g.with_values(np.full(g.shape, constant_equilibrium(eps, m, 0.0)))
    p = ACParams(eps)
    dt = p.step_for(u)
    t, err = 0.0, 0.0
    for k in range(int(0.5 / dt)):
        u = ac_step(u, p, m, t)
        t += dt
        if k % 20 == 0:
            err = max(err, float(np.max(np.abs(u.values - constant_equilibrium(eps, m, t)))))
    curv = float(np.max(np.abs(m.samples[2])))
    assert err <= eps * curv
    # quasi-static lag is eps^2 d/dt h_+ / f'(h_+) = O(eps^3 B'')
    assert err <= eps**3 * curv


def test_grid_refinement_is_second_order():
    radii = []
    for f in (2, 4, 8):
        g = uniform_grid(0, 1.5, EPS / f, dim=2)
        run = ac_run(well_prepared_init(circle_distance(g, 1.0), EPS), ACParams(EPS), None, 0.1, n_obs=1)
        radii.append(run.metric[-1])
    d1 = abs(radii[0] - radii[1])
    d2 = abs(radii[1] - radii[2])
    assert 2.5 < d1 / d2 < 6.5
    assert abs(radii[-1] - math.sqrt(0.8)) < 0.01


def test_imex_agrees_with_explicit():
    g = uniform_grid(0, 1.5, EPS / 4, dim=2)
    u0 = well_prepared_init(circle_distance(g, 1.0), EPS)
    ex = ac_run(u0, ACParams(EPS), None, 0.1, n_obs=1)
    im = ac_run(u0, ACParams(EPS, dt=EPS**2 / 10, scheme="imex"), None, 0.1, n_obs=1)
    assert abs(ex.metric[-1] - im.metric[-1]) <= g.spacing[0]


def test_imex_periodic_keeps_constants():
    g = uniform_grid(0, 1, 0.05, bc="periodic", dim=2)
    u = g.with_values(np.ones(g.shape))
    out = ac_step(u, ACParams(EPS, scheme="imex"), None, 0.0)
    np.testing.assert_allclose(out.values, 1.0, atol=1e-12)


def test_step_limits():
    g = uniform_grid(0, 1, 0.01)
    assert default_ac_dt(EPS, 0.01) == pytest.approx(2e-5)
    u = g.with_values(np.zeros(g.shape))
    with pytest.raises(ParameterError, match="diffusion"):
        ac_step(u, ACParams(EPS, dt=1e-4), None, 0.0)
    with pytest.raises(ParameterError, match="reaction"):
        ac_step(u, ACParams(EPS, dt=EPS**2), None, 0.0)
    with pytest.raises(ParameterError):
        ACParams(0.0)
    with pytest.raises(ParameterError):
        ACParams(EPS, scheme="rk4")


def test_blow_up_reports_time_and_size():
    g = uniform_grid(0, 1, 0.05)
    u = g.with_values(np.full(g.shape, 1.3))
    with pytest.raises(BlowUpError) as info:
        ac_step(u, ACParams(EPS), None, 0.0)
    assert info.value.max_abs == pytest.approx(1.3)
    assert info.value.t == 0.0


def test_blow_up_under_strong_forcing():
    # amplified forcing pushes eps * B' past the fold, so u leaves the wells
    base = sample_brownian(0, 1.0, 1e-4)
    m = mollified_approximation(base, 0.04, 0.4)
    strong = type(m)(m.kind, m.eps, m.gamma, m.horizon, m.dt, 200 * m.samples, m.params)
    g = uniform_grid(0, 1, 0.05, bc="periodic")
    u0 = g.with_values(np.ones(g.shape))
    with pytest.raises(BlowUpError) as info:
        ac_run(u0, ACParams(0.04), strong, 0.5)
    assert 0 < info.value.t <= 0.5
    assert info.value.max_abs > 1 + GUARD_BAND


def test_horizon_check(mild):
    g = uniform_grid(0, 1, 0.05)
    with pytest.raises(ParameterError, match="horizon"):
        ac_run(g.with_values(np.ones(g.shape)), ACParams(EPS), mild, 2.0)


def test_observation_schedule():
    g = uniform_grid(-1, 1, EPS / 4)
    u0 = well_prepared_init(plane_distance(g), EPS)
    run = ac_run(u0, ACParams(EPS), None, 0.01, n_obs=10)
    assert len(run.times) == 11
    assert run.times[-1] == 0.01
    np.testing.assert_allclose(np.diff(run.times), 0.001, rtol=1e-9)
    assert run.params["steps"] % 10 == 0
    with pytest.raises(ParameterError):
        ac_run(u0, ACParams(EPS), None, 0.01, observe_every=0)


def test_field_dumps_round_trip(tmp_path):
    g = uniform_grid(-1, 1, EPS / 4)
    u0 = well_prepared_init(plane_distance(g), EPS)
    run = ac_run(u0, ACParams(EPS), None, 0.004, n_obs=2, dump_dir=tmp_path / "f")
    assert len(run.dumps) == 3
    with open(run.dumps[-1], "rb") as fh:
        header = fh.readline().decode().split()
    assert header[0] == "1" and header[1] == str(g.shape[0])
    f, t = read_field(run.dumps[-1], origin=g.origin)
    assert t == pytest.approx(0.004)
    np.testing.assert_array_equal(f.values, run.final.values)


def test_dump_failure_names_path(tmp_path):
    blocker = tmp_path / "not_a_dir"
    blocker.write_text("x")
    g = uniform_grid(-1, 1, EPS / 4)
    u0 = well_prepared_init(plane_distance(g), EPS)
    with pytest.raises(OSError, match="not_a_dir"):
        ac_run(u0, ACParams(EPS), None, 0.004, n_obs=2, dump_dir=blocker / "sub")
