"""Reduced front dynamics for symmetric data.

A sphere of radius ``R`` moving with normal velocity ``-curvature + α0 dB``
obeys ``dR = -(d-1)/R dt + α0 dB``. A planar front in 1D translates rigidly
with the path. Both consume the increments of a shared ``BrownianPath``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ParameterError
from .noise import BrownianPath, MildPath, sample_brownian

__all__ = [
    "FRONT_SIGN",
    "RadialEnsemble",
    "RadialTrajectory",
    "planar_front_1d",
    "radial_ensemble",
    "radial_flow",
]

# Front displacement per unit of alpha0 * B for a 1D front whose inside is
# {x > x0}: the inside grows when B increases, so the front moves left.
FRONT_SIGN = -1
SUBSTEPS = 10


@dataclass(frozen=True)
class RadialTrajectory:
    times: np.ndarray
    R: np.ndarray
    T_star: float
    extinct: bool
    substeps_used: int = 0

    def at(self, t):
        """Linear interpolation of ``R`` (0 after extinction)."""
        return np.interp(t, self.times, self.R)


@njit(cache=True)
def _em_run(R, k0, n, dt, c, alpha0, dB, thresh, out):
    # returns (k, flag): flag 0 done, 1 below threshold before step k,
    # 2 crossed zero during step k
    for k in range(k0, n):
        if R < thresh:
            return k, 1
        R_new = R - c / R * dt + alpha0 * dB[k]
        if R_new <= 0.0:
            return k, 2
        out[k + 1] = R_new
        R = R_new
    return n, 0


def _bridge(dB: float, dt: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` Gaussian sub-increments conditioned to sum to ``dB``."""
    z = rng.normal(0.0, math.sqrt(dt / m), m)
    return z - (z.sum() - dB) / m


def _refine(path: BrownianPath, factor: int) -> np.ndarray:
    inc = path.increments()
    if factor == 1:
        return inc
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([abs(int(path.seed)), 0x5EED, factor])))
    z = rng.normal(0.0, math.sqrt(path.dt / factor), (inc.size, factor))
    z -= (z.sum(axis=1) - inc)[:, None] / factor
    return z.ravel()


def radial_flow(
    R0: float,
    d: int,
    alpha0: float,
    path: BrownianPath,
    dt: float | None = None,
    T: float | None = None,
) -> RadialTrajectory:
    """Euler-Maruyama for ``dR = -(d-1)/R dt + alpha0 dB`` on the path's increments.

    ``dt`` defaults to the path step; a smaller ``dt`` must divide it, the
    path then being refined by Brownian bridges. Once ``R`` drops below
    ``5 sqrt(dt) max(1, alpha0)`` each step is split into ten bridge
    sub-steps. The radius is absorbed at 0 and the extinction time is
    interpolated linearly inside the step that crosses zero.
    """
    if not R0 > 0:
        raise ParameterError(f"R0 must be positive, got {R0}")
    if d < 2:
        raise ParameterError("the radial flow needs d >= 2")
    dt = path.dt if dt is None else float(dt)
    factor = int(round(path.dt / dt))
    if factor < 1 or abs(factor * dt - path.dt) > 1e-9 * path.dt:
        raise ParameterError(f"dt={dt:g} must divide the path step {path.dt:g}")
    if dt > 1e-4 * R0**2 * (1 + 1e-9):
        raise ParameterError(f"dt={dt:g} exceeds 1e-4 * R0^2 = {1e-4 * R0**2:g}")
    dB = _refine(path, factor)
    n = dB.size
    if T is not None:
        n = min(n, int(math.floor(T / dt + 1e-9)))
    c = float(d - 1)
    thresh = 5.0 * math.sqrt(dt) * max(1.0, abs(alpha0))
    out = np.zeros(n + 1)
    out[0] = R0
    k, R = 0, float(R0)
    T_star = math.inf
    rng = None
    used = 0
    while k < n:
        k, flag = _em_run(R, k, n, dt, c, alpha0, dB, thresh, out)
        if flag == 0:
            break
        R = out[k]
        if flag == 2:
            R_new = R - c / R * dt + alpha0 * dB[k]
            T_star = (k + R / (R - R_new)) * dt
            break
        # fine sub-steps through a Brownian bridge
        if rng is None:
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([abs(int(path.seed)), 0xB81D])))
        used += 1
        h = dt / SUBSTEPS
        for j, db in enumerate(_bridge(dB[k], dt, SUBSTEPS, rng)):
            R_new = R - c / R * h + alpha0 * db
            if R_new <= 0.0:
                T_star = k * dt + (j + R / (R - R_new)) * h
                break
            R = R_new
        if not math.isinf(T_star):
            break
        out[k + 1] = R
        k += 1
    times = dt * np.arange(n + 1)
    if not math.isinf(T_star):
        cut = int(math.floor(T_star / dt)) + 1
        out[cut:] = 0.0
    return RadialTrajectory(times, out, T_star, not math.isinf(T_star), used)


@dataclass(frozen=True)
class RadialEnsemble:
    times: np.ndarray
    R: np.ndarray
    T_star: np.ndarray
    seeds: tuple

    def second_moment(self, t: float, survivors_only: bool = False) -> float:
        """Mean of ``R(t)^2`` over paths, an extinct front counting as ``R = 0``.

        This is ``E[R(t)^2; t < T*]``, which equals
        ``R0^2 + (alpha0^2 - 2(d-1)) E[min(t, T*)]``. With
        ``survivors_only`` the mean is conditioned on survival instead.
        """
        j = int(round(t / (self.times[1] - self.times[0])))
        r = self.R[:, j]
        if survivors_only:
            r = r[self.T_star > self.times[j]]
        return float(np.mean(r**2))

    def survival(self, t: float) -> float:
        return float(np.mean(self.T_star > t))


def radial_ensemble(R0, d, alpha0, seeds, horizon: float, dt: float) -> RadialEnsemble:
    """Independent radial trajectories, one Brownian path per seed."""
    seeds = tuple(int(s) for s in seeds)
    runs = [radial_flow(R0, d, alpha0, sample_brownian(s, horizon, dt)) for s in seeds]
    return RadialEnsemble(
        runs[0].times, np.array([r.R for r in runs]), np.array([r.T_star for r in runs]), seeds
    )


def planar_front_1d(x0: float, alpha0: float, path) -> tuple[np.ndarray, np.ndarray]:
    """``X(t) = x0 + FRONT_SIGN * alpha0 * B(t)`` on the path grid."""
    if isinstance(path, MildPath):
        return path.times, x0 + FRONT_SIGN * alpha0 * path.samples[0]
    if isinstance(path, BrownianPath):
        return path.times, x0 + FRONT_SIGN * alpha0 * path.values
    raise ParameterError(f"unsupported path type {type(path).__name__}")
