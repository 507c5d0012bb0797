"""Finite differences for the forced Allen-Cahn equation.

Solves ``u_t = Δu - eps^-2 f(u) + eps^-1 B_eps'(t)`` on a node grid with
periodic or homogeneous Neumann boundaries, starting from well-prepared data
``u0 = q(rho/eps; b(0))``. The front is the zero level set of ``u`` and the
inside is ``{u > 0}``.

Two schemes are available:

``explicit``
    forward Euler with the ``2 dim + 1`` point Laplacian, compiled.
``imex``
    exponential Euler: ``Δ_h + eps^-2`` is integrated exactly in the
    discrete cosine (Neumann) or Fourier (periodic) basis and the remainder
    ``-u³/eps² + forcing`` is explicit. Only ``dt <= eps²/2`` is required.

The forcing is sampled at the midpoint of each step.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from . import _kernels
from .errors import BlowUpError, ParameterError
from .front_geometry import FrontSet, extract_zero_set, mean_radius
from .grid import ScalarField
from .noise import MildPath, eval_path
from .reaction_wave import CUBIC, WaveTable, default_table, equilibria, forcing_level

__all__ = [
    "ACParams",
    "ACRun",
    "GUARD_BAND",
    "ac_run",
    "ac_step",
    "default_ac_dt",
    "well_prepared_init",
]

GUARD_BAND = 0.25
SAFETY = 1 / 1.1
STIFF_SAFETY = 0.5
SCHEMES = ("explicit", "imex")


def default_ac_dt(eps: float, dx: float) -> float:
    return min(dx * dx / 5.0, eps * eps / 10.0)


@dataclass(frozen=True)
class ACParams:
    """Interface width, time step and scheme.

    ``dt=None`` selects ``min(dx²/5, eps²/10)`` on the grid it is used with.
    """

    eps: float
    dt: float | None = None
    scheme: str = "explicit"

    def __post_init__(self):
        if not self.eps > 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.dt is not None and not self.dt > 0:
            raise ParameterError("dt must be positive")

    def step_for(self, u: ScalarField) -> float:
        """The time step on ``u``'s grid, validated against the stability limits."""
        dx = min(u.spacing)
        dt = default_ac_dt(self.eps, dx) if self.dt is None else float(self.dt)
        stiff = STIFF_SAFETY * self.eps**2
        if dt > stiff * (1 + 1e-12):
            raise ParameterError(f"dt={dt:g} exceeds the reaction limit eps^2/2={stiff:g}")
        if self.scheme == "explicit":
            diff = SAFETY * dx * dx / (2 * u.dim)
            if dt > diff * (1 + 1e-12):
                raise ParameterError(f"dt={dt:g} exceeds the diffusion limit dx^2/(2 dim 1.1)={diff:g}")
        return dt


def well_prepared_init(
    rho: ScalarField,
    eps: float,
    noise: MildPath | None = None,
    table: WaveTable | None = None,
) -> ScalarField:
    """``u0 = q(rho/eps; b(0))`` with ``b(0) = forcing_level(eps, noise, 0)``.

    ``rho`` should be a signed distance, positive on the initial inside.
    Without noise ``b(0) = 0`` and ``q`` is the standing wave.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    table = table or default_table()
    b = 0.0 if noise is None else forcing_level(eps, noise, 0.0)
    xi = np.asarray(rho.values) / eps
    return rho.with_values(table.evaluate(xi, b).q)


# --------------------------------------------------------------------------
# stepping


def _forcing(noise: MildPath | None, eps: float, t0: float, dt: float, n: int) -> np.ndarray:
    if noise is None:
        return np.zeros(n)
    mids = t0 + dt * (np.arange(n) + 0.5)
    return eval_path(noise, mids, 1) / eps


def _symbol(u: ScalarField) -> np.ndarray:
    """Eigenvalues of the discrete Laplacian in the transform basis of ``u``."""
    parts = []
    for n, h in zip(u.shape, u.spacing):
        k = np.arange(n)
        if u.periodic:
            lam = -4.0 / h**2 * np.sin(np.pi * k / n) ** 2
        else:
            lam = -4.0 / h**2 * np.sin(np.pi * k / (2 * (n - 1))) ** 2
        parts.append(lam)
    if u.dim == 1:
        return parts[0]
    return parts[0][:, None] + parts[1][None, :]


class _Imex:
    def __init__(self, u: ScalarField, eps: float, dt: float):
        lam = _symbol(u) + 1.0 / eps**2
        self.E = np.exp(lam * dt)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(np.abs(lam * dt) > 1e-12, np.expm1(lam * dt) / lam, dt)
        self.phi = phi
        self.eps = eps
        self.periodic = u.periodic

    def _fwd(self, v):
        return fft.fftn(v) if self.periodic else fft.dctn(v, type=1)

    def _inv(self, v):
        return fft.ifftn(v).real if self.periodic else fft.idctn(v, type=1)

    def run(self, v, forcing, bound):
        peak_all = 0.0
        for s, g in enumerate(forcing):
            nl = -(v**3) / self.eps**2 + g
            v = self._inv(self.E * self._fwd(v) + self.phi * self._fwd(nl))
            peak = float(np.max(np.abs(v)))
            peak_all = max(peak_all, peak)
            if peak > bound:
                return v, s + 1, peak_all
        return v, len(forcing), peak_all


def _advance(v, u: ScalarField, p: ACParams, dt: float, forcing: np.ndarray, bound: float, imex=None):
    if p.scheme == "imex":
        return imex.run(v, forcing, bound)
    if u.dim == 1:
        return _kernels.ac_explicit_1d(v, forcing.size, dt, u.spacing[0], p.eps, forcing, u.periodic, bound)
    return _kernels.ac_explicit_2d(
        v, forcing.size, dt, u.spacing[0], u.spacing[1], p.eps, forcing, u.periodic, bound
    )


def _check_band(u: ScalarField, bound: float, t: float):
    m = float(np.max(np.abs(u.values)))
    if m > bound:
        raise BlowUpError(f"|u|={m:.4g} outside the guard band {bound:g} at t={t:g}", t, m)
    return m


def ac_step(u: ScalarField, p: ACParams, noise: MildPath | None, t: float) -> ScalarField:
    """One step from ``t`` to ``t + dt``.

    Raises
    ------
    BlowUpError
        If ``|u|`` leaves ``[-1 - GUARD_BAND, 1 + GUARD_BAND]`` before or
        after the step.
    ParameterError
        If the time step violates the stability limits.
    """
    bound = 1.0 + GUARD_BAND
    dt = p.step_for(u)
    _check_band(u, bound, t)
    forcing = _forcing(noise, p.eps, t, dt, 1)
    imex = _Imex(u, p.eps, dt) if p.scheme == "imex" else None
    v, done, peak = _advance(np.ascontiguousarray(u.values), u, p, dt, forcing, bound, imex)
    if peak > bound:
        raise BlowUpError(f"|u|={peak:.4g} outside the guard band {bound:g} at t={t + dt:g}", t + dt, peak)
    return u.with_values(v)


@dataclass
class ACRun:
    """Observed trajectory of an Allen-Cahn run.

    ``metric`` is the mean front position (1D) or the length-weighted mean
    radius about ``center`` (2D); ``dumps`` lists field files written.
    """

    times: np.ndarray
    fronts: list
    metric: np.ndarray
    max_abs: float
    final: ScalarField
    dt: float
    dumps: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def rows(self):
        return [(float(t), float(m)) for t, m in zip(self.times, self.metric)]


def _metric(front: FrontSet, center) -> float:
    if front.empty:
        return 0.0 if front.dim == 2 else float("nan")
    if front.dim == 1:
        return float(np.mean(front.points))
    return mean_radius(front, center)


def ac_run(
    u0: ScalarField,
    p: ACParams,
    noise: MildPath | None,
    T: float,
    observe_every: int | None = None,
    dump_dir=None,
    center=(0.0, 0.0),
    n_obs: int = 50,
) -> ACRun:
    """Advance ``u0`` to ``T``, extracting the front at observation times.

    With ``observe_every=None`` the step count is rounded up to a multiple of
    ``n_obs`` and the front is observed at ``n_obs`` evenly spaced times;
    otherwise every ``observe_every`` steps and at ``T``. The time step is
    shrunk so that ``T`` is hit exactly.

    Raises
    ------
    BlowUpError
        On leaving the guard band; ``t`` and ``max_abs`` are attached.
    OSError
        If a field dump cannot be written; the message names the path.
    """
    dt0 = p.step_for(u0)
    if noise is not None and T > noise.horizon * (1 + 1e-12):
        raise ParameterError(f"T={T:g} exceeds the noise horizon {noise.horizon:g}")
    if observe_every is None:
        blocks = max(1, math.ceil(T / (n_obs * dt0) - 1e-9))
        n = n_obs * blocks
        stride = blocks
    else:
        if observe_every < 1:
            raise ParameterError("observe_every must be at least 1")
        n = max(1, math.ceil(T / dt0 - 1e-9))
        stride = int(observe_every)
    dt = T / n
    bound = 1.0 + GUARD_BAND
    max_abs = _check_band(u0, bound, 0.0)
    if dump_dir is not None:
        os.makedirs(dump_dir, exist_ok=True)
    imex = _Imex(u0, p.eps, dt) if p.scheme == "imex" else None

    v = np.ascontiguousarray(u0.values)
    f0 = extract_zero_set(u0)
    times, fronts, metric, dumps = [0.0], [f0], [_metric(f0, center)], []

    def dump(field_, t):
        if dump_dir is not None:
            path = os.path.join(dump_dir, f"field_{len(dumps):05d}.bin")
            field_.write(path, t)
            dumps.append(path)

    dump(u0, 0.0)
    k = 0
    while k < n:
        m = min(stride, n - k)
        t0 = k * dt
        forcing = _forcing(noise, p.eps, t0, dt, m)
        v, done, peak = _advance(v, u0, p, dt, forcing, bound, imex)
        max_abs = max(max_abs, peak)
        if peak > bound:
            t_bad = t0 + done * dt
            raise BlowUpError(f"|u|={peak:.4g} outside the guard band {bound:g} at t={t_bad:g}", t_bad, peak)
        k += m
        t = T if k == n else k * dt
        cur = u0.with_values(v)
        f = extract_zero_set(cur)
        times.append(t)
        fronts.append(f)
        metric.append(_metric(f, center))
        dump(cur, t)
    params = {"eps": p.eps, "dt": dt, "scheme": p.scheme, "dx": list(u0.spacing), "bc": u0.bc, "steps": n}
    return ACRun(np.asarray(times), fronts, np.asarray(metric), max_abs, u0.with_values(v), dt, dumps, params)


def constant_equilibrium(eps: float, noise: MildPath | None, t: float = 0.0, reaction=CUBIC) -> float:
    """The upper quasi-equilibrium ``h_+(eps B_eps'(t))`` of the forced reaction."""
    b = 0.0 if noise is None else forcing_level(eps, noise, t)
    return equilibria(b, reaction).h_plus
