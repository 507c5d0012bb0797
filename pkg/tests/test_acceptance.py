"""Exit criteria of the package, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
Runtime limits are part of the criteria and are checked on wall time.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from stochac.allen_cahn import ACParams, ac_run, well_prepared_init
from stochac.grid import circle_distance, uniform_grid
from stochac.harness import parse_config, run_sweep
from stochac.level_set import mcf_run
from stochac.oracle import radial_ensemble
from stochac.reaction_wave import alpha_zero, solve_wave
from stochac.supersolution import drifted_flow, supersolution_residual

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SEEDS = range(10)


def test_standing_wave(criterion_report):
    t0 = time.perf_counter()
    w = solve_wave(0.0)
    wall = time.perf_counter() - t0
    err = float(np.max(np.abs(w.q - np.tanh(w.xi / math.sqrt(2)))))
    ok = err <= 1e-6 and abs(w.c) <= 1e-10 and wall < 1.0
    criterion_report(1, ok, f"sup|q - tanh| = {err:.2e}, |c(0)| = {abs(w.c):.2e}, {wall:.2f} s")
    assert ok


def test_alpha_zero(criterion_report):
    t0 = time.perf_counter()
    a0 = alpha_zero()
    slope = -(solve_wave(0.01).c - solve_wave(-0.01).c) / 0.02
    wall = time.perf_counter() - t0
    exact = 3 / math.sqrt(2)
    ok = abs(a0 - exact) <= 1e-5 and abs(slope - a0) <= 1e-3 and wall < 5.0
    criterion_report(
        2, ok, f"alpha0 = {a0:.8f} (exact {exact:.8f}), -dc/db(0) = {slope:.6f}, {wall:.2f} s"
    )
    assert ok


def test_slope_law(criterion_report):
    t0 = time.perf_counter()
    a0 = alpha_zero()
    bs = (0.01, -0.01, 0.02, -0.02, 0.05, -0.05)
    ratio = {b: abs(solve_wave(b).c / b + a0) / abs(b) for b in bs}
    wall = time.perf_counter() - t0
    C = max(ratio.values())
    # the remainder must not grow relative to b^2 as b shrinks
    shrinking = max(ratio[0.01], ratio[-0.01]) <= max(ratio[0.05], ratio[-0.05])
    ok = math.isfinite(C) and shrinking and wall < 10.0
    detail = ", ".join(f"{b:+.2f}: {r:.4f}" for b, r in ratio.items())
    criterion_report(3, ok, f"C = {C:.4f} ({detail}), {wall:.1f} s")
    assert ok


def test_deterministic_circle(criterion_report):
    t0 = time.perf_counter()
    eps = 0.02
    g = uniform_grid(-2, 2, eps / 4, dim=2)
    ac = ac_run(well_prepared_init(circle_distance(g, 1.0), eps), ACParams(eps), None, 0.25, n_obs=5)
    R_ac = float(ac.metric[-1])
    gm = uniform_grid(-2, 2, 4 / 256, dim=2)
    mcf = mcf_run(circle_distance(gm, 1.0), None, 0.6, alpha0=0.0)
    R_mcf = float(np.interp(0.25, mcf.times, mcf.metric))
    wall = time.perf_counter() - t0
    exact = math.sqrt(0.5)
    e_ac, e_mcf = abs(R_ac / exact - 1), abs(R_mcf / exact - 1)
    e_T = abs(mcf.T_star / 0.5 - 1)
    ok = e_ac <= 0.03 and e_mcf <= 0.03 and e_T <= 0.03 and wall < 600
    criterion_report(
        4, ok,
        f"R_ac = {R_ac:.4f} ({e_ac:.2%}), R_mcf = {R_mcf:.4f} ({e_mcf:.2%}), "
        f"T* = {mcf.T_star:.4f} ({e_T:.2%}), {wall:.0f} s",
    )
    assert ok


def test_pathwise_planar_limit(criterion_report):
    t0 = time.perf_counter()
    passed, rows = 0, []
    for seed in SEEDS:
        rec = run_sweep(parse_config(f"scenario = ac_vs_oracle_1d\neps = 0.08, 0.04, 0.02\nseed = {seed}\n"))
        g = rec.gaps
        good = not rec.failed and g[0] > g[1] > g[2]
        passed += good
        rows.append(f"{seed}:{'+' if good else '-'}")
    wall = time.perf_counter() - t0
    ok = passed >= 8 and wall < 900
    criterion_report(5, ok, f"{passed}/10 seeds strictly decreasing [{' '.join(rows)}], {wall:.0f} s")
    assert ok


def test_pathwise_radial_limit(criterion_report):
    t0 = time.perf_counter()
    passed, rows = 0, []
    for seed in SEEDS:
        rec = run_sweep(parse_config(f"scenario = ac_vs_mcf_2d\neps = 0.04, 0.02\nseed = {seed}\n"))
        if rec.failed:
            rows.append(f"{seed}:failed")
            continue
        coarse, fine = (e.metrics for e in rec.entries)
        within = coarse["ac_oracle"] <= 2 * coarse["mcf_oracle"]
        shrink = fine["ac_oracle"] < coarse["ac_oracle"] and fine["mcf_oracle"] < coarse["mcf_oracle"]
        passed += within and shrink
        rows.append(f"{seed}:{'+' if within and shrink else '-'}")
    wall = time.perf_counter() - t0
    ok = passed >= 7 and wall < 3600
    criterion_report(6, ok, f"{passed}/10 seeds [{' '.join(rows)}], {wall:.0f} s")
    assert ok


def test_path_stability(criterion_report):
    t0 = time.perf_counter()
    gaps = []
    for seed in range(20):
        rec = run_sweep(parse_config(f"scenario = path_stability\neps = 0.2, 0.1, 0.05\nseed = {seed}\n"))
        assert not rec.failed
        gaps.append(rec.gaps)
    wall = time.perf_counter() - t0
    med = np.median(np.array(gaps), axis=0)
    ok = bool(med[0] >= med[1] >= med[2]) and wall < 1200
    criterion_report(7, ok, f"median gaps {', '.join(f'{m:.4f}' for m in med)} vs eps_path 0.2, 0.1, 0.05, {wall:.0f} s")
    assert ok


def test_radial_second_moment(criterion_report):
    t0 = time.perf_counter()
    ens = radial_ensemble(1.0, 2, 3 / math.sqrt(2), range(10_000), horizon=0.05, dt=1e-4)
    m2 = ens.second_moment(0.05)
    wall = time.perf_counter() - t0
    rel = abs(m2 / 1.125 - 1)
    ok = rel <= 0.03 and wall < 60
    criterion_report(8, ok, f"E[R^2(0.05)] = {m2:.4f} ({rel:.2%} from 1.125), {wall:.1f} s")
    assert ok


def test_invariant_suites(criterion_report):
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-m", "invariant", "-p", "no:cacheprovider", "tests"],
        cwd=ROOT, capture_output=True, text=True,
    )
    wall = time.perf_counter() - t0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and wall < 600
    criterion_report(9, ok, f"{tail}, {wall:.0f} s")
    assert ok, proc.stdout[-3000:]


def test_supersolution_diagnostic(criterion_report):
    t0 = time.perf_counter()
    delta, a = 0.1, 0.1
    g = uniform_grid(-2, 2, 0.01, dim=2)
    # zero noise: the flow does not depend on eps and is solved once
    flow = drifted_flow(circle_distance(g, 1.0), delta, a, None, 0.25)
    stats = [supersolution_residual(e, delta, a, flow=flow, T=0.25) for e in (0.04, 0.02, 0.01)]
    wall = time.perf_counter() - t0
    fr = [s.fraction_negative for s in stats]
    ok = fr[0] > fr[1] > fr[2] and wall < 1200
    detail = ", ".join(f"eps {s.eps}: {s.fraction_negative:.4f} (tol_res {s.tol_res:.3g})" for s in stats)
    criterion_report(10, ok, f"fraction below -tol_res {detail}, {wall:.0f} s")
    assert ok
