"""Brownian paths and their mild (C^2-in-time) approximations.

Two constructions of a smooth path ``B_eps`` are provided:

* ``mollified``: ``B_eps = B * rho_h`` with the unit-mass bump kernel
  ``rho(s) ~ exp(-1/(1-s^2))`` rescaled to the window ``h = eps**gamma``;
  derivatives come from the analytically differentiated kernel.
* ``mixing``: ``dB_eps/dt (t) = eps**-gamma * xi(eps**(-2 gamma) t)`` where
  ``xi`` is a smoothed random telegraph signal, stationary, mean zero,
  exponentially mixing, with ``max(|xi|, |xi'|) <= M``.

Randomness comes from numpy's Philox4x64 counter-based bit generator, so
a seed reproduces a path bit-for-bit on every platform numpy supports.

Every path is stored on a uniform time grid together with its first three
derivatives; off-grid evaluation uses cubic Hermite interpolation of the
requested order and the next one, which keeps ``eval_path`` continuous and
consistent between orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, signal

from .errors import ParameterError, RangeError

__all__ = [
    "BrownianPath",
    "MildPath",
    "MildnessReport",
    "brownian_from_values",
    "bump",
    "eval_path",
    "mildness_report",
    "mixing_approximation",
    "mollified_approximation",
    "sample_brownian",
    "zero_path",
]

_GRID_TOL = 1e-9


def _grid_size(horizon: float, dt: float) -> int:
    return int(math.floor(horizon / dt + _GRID_TOL)) + 1


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BrownianPath:
    """A sampled Brownian trajectory ``B(k dt)``, ``k = 0..floor(horizon/dt)``."""

    seed: int
    horizon: float
    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        n = _grid_size(self.horizon, self.dt)
        if self.values.shape != (n,):
            raise ParameterError(
                f"expected {n} samples for horizon={self.horizon}, dt={self.dt}; "
                f"got shape {self.values.shape}"
            )
        if self.values[0] != 0.0:
            raise ParameterError("Brownian paths start at the origin")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def __call__(self, t):
        """Piecewise-linear interpolation of the path."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -_GRID_TOL) or np.any(t > (self.values.size - 1) * self.dt + _GRID_TOL):
            raise RangeError(f"t outside [0, {self.horizon}]")
        return np.interp(t, self.times, self.values)


def sample_brownian(seed: int, horizon: float, dt: float) -> BrownianPath:
    """Sample a standard Brownian path on ``[0, horizon]`` with step ``dt``."""
    if not (horizon > 0 and dt > 0):
        raise ParameterError("horizon and dt must be positive")
    if dt > horizon:
        raise ParameterError("dt must not exceed the horizon")
    n = _grid_size(horizon, dt)
    incr = _rng(seed).standard_normal(n - 1) * math.sqrt(dt)
    values = np.concatenate(([0.0], np.cumsum(incr)))
    return BrownianPath(seed=int(seed), horizon=float(horizon), dt=float(dt), values=values)


def brownian_from_values(values, dt: float, seed: int = -1) -> BrownianPath:
    """Wrap deterministic samples (test injections) as a ``BrownianPath``."""
    values = np.asarray(values, dtype=float)
    return BrownianPath(seed=seed, horizon=(values.size - 1) * dt, dt=dt, values=values)


# --------------------------------------------------------------------------
# bump kernel


def bump(s, order: int = 0):
    """Unnormalised bump ``exp(-1/(1-s^2))`` on ``(-1, 1)`` and its derivatives.

    ``order`` may be 0..3; values outside the support are zero.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    x = s[inside]
    m = 1.0 - x * x
    phi = np.exp(-1.0 / m)
    if order == 0:
        out[inside] = phi
        return out
    g1 = -2.0 * x / m**2
    if order == 1:
        out[inside] = phi * g1
        return out
    g2 = -2.0 / m**2 - 8.0 * x * x / m**3
    if order == 2:
        out[inside] = phi * (g2 + g1 * g1)
        return out
    if order == 3:
        g3 = -24.0 * x / m**3 - 48.0 * x**3 / m**4
        out[inside] = phi * (g3 + 3.0 * g1 * g2 + g1**3)
        return out
    raise ParameterError("bump derivative order must be 0..3")


@lru_cache(maxsize=None)
def bump_mass() -> float:
    """``int_{-1}^{1} exp(-1/(1-s^2)) ds``."""
    val, _ = integrate.quad(lambda s: math.exp(-1.0 / (1.0 - s * s)), -1.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


def kernel_weights(half_width: float, step: float) -> np.ndarray:
    """Discrete convolution weights for the kernel and its three derivatives.

    Returns an array ``w`` of shape ``(4, 2K+1)`` for offsets ``s_k = k*step``,
    ``k = -K..K``. Each row is the analytic kernel derivative sampled on the
    grid and then rescaled so that the discrete moments are exact: row ``j``
    maps ``t**j / j!`` to 1, so polynomials up to the matching degree are
    reproduced to rounding.
    """
    K = int(math.floor(half_width / step))
    if K < 2:
        raise ParameterError(
            f"kernel half-width {half_width:g} unresolved by step {step:g}"
        )
    s = np.arange(-K, K + 1) * step
    u = s / half_width
    rows = np.empty((4, s.size))
    for j in range(4):
        rows[j] = bump(u, j) * step / half_width ** (j + 1)
    # moment normalisation: sum_k w_j(s_k) (t - s_k)^j / j! == 1
    rows[0] /= rows[0].sum()
    rows[1] /= -(s * rows[1]).sum()
    rows[2] /= 0.5 * (s * s * rows[2]).sum()
    rows[3] /= -(s**3 * rows[3]).sum() / 6.0
    return rows


# --------------------------------------------------------------------------
# mild paths


@dataclass(frozen=True)
class MildPath:
    """A C^2 approximation ``B_eps`` stored on a uniform evaluation grid.

    ``samples[j]`` holds the j-th time derivative (j = 0..3) at ``k*dt``.
    ``params`` records the construction (base seed, window, bound ``M``...).
    """

    kind: str
    eps: float
    gamma: float
    horizon: float
    dt: float
    samples: np.ndarray = field(repr=False)
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(self.samples))
        if self.kind not in ("mollified", "mixing"):
            raise ParameterError(f"unknown mild path kind {self.kind!r}")
        if self.samples.ndim != 2 or self.samples.shape[0] != 4:
            raise ParameterError("samples must have shape (4, n)")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.shape[1]) * self.dt

    def __call__(self, t, order: int = 0):
        return eval_path(self, t, order)


def mollified_approximation(base: BrownianPath, eps: float, gamma: float) -> MildPath:
    """Convolve ``base`` with the bump kernel of half-width ``eps**gamma``.

    The base path is extended past both ends by point reflection,
    ``B(-s) = 2B(0) - B(s)``, which keeps affine paths affine and gives
    ``B_eps(0) = 0`` exactly.
    """
    if not 0.0 < gamma < 0.5:
        raise ParameterError(f"mollified paths need gamma in (0, 1/2), got {gamma}")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    h = eps**gamma
    if base.dt > eps ** (2 * gamma) / 10 * (1 + 1e-9):
        raise ParameterError(
            f"base dt={base.dt:g} too coarse for window {h:g}; need dt <= eps^(2 gamma)/10"
        )
    w = kernel_weights(h, base.dt)
    K = (w.shape[1] - 1) // 2
    B = base.values
    if K > B.size - 1:
        raise ParameterError(f"mollifier window {h:g} exceeds the path horizon {base.horizon:g}")
    left = 2.0 * B[0] - B[K:0:-1]
    right = 2.0 * B[-1] - B[-2 : -K - 2 : -1]
    ext = np.concatenate((left, B, right))
    samples = np.array([signal.oaconvolve(ext, w[j], mode="valid") for j in range(4)])
    return MildPath(
        kind="mollified",
        eps=float(eps),
        gamma=float(gamma),
        horizon=base.horizon,
        dt=base.dt,
        samples=samples,
        params={"base_seed": base.seed, "window": h},
    )


def mixing_approximation(
    seed: int,
    eps: float,
    gamma: float,
    M: float,
    horizon: float = 1.0,
    ds: float | None = None,
) -> MildPath:
    """Time-rescaled integral of a smoothed random telegraph process.

    ``xi = rho_w * x`` where ``x`` switches between ``+A`` and ``-A`` at the
    events of a Poisson clock of rate ``A**2`` (so the integral of ``x`` has
    unit diffusivity) and ``rho_w`` is the bump kernel of half-width ``w``.
    With ``w = 2 max(rho)`` one gets ``|xi'| <= A sum|rho_w'| ~ A``; ``A`` is
    then shrunk by the discrete value of ``sum|rho_w'|`` so that
    ``max(|xi|, |xi'|) <= M`` holds exactly on the grid. ``ds`` is the step
    in process time (default ``w/64``).
    """
    if not 0.0 < gamma < 1.0 / 3.0:
        raise ParameterError(f"mixing paths need gamma in (0, 1/3), got {gamma}")
    if eps <= 0 or M <= 0 or horizon <= 0:
        raise ParameterError("eps, M and horizon must be positive")
    w = 2.0 * math.exp(-1.0) / bump_mass()
    tscale = eps ** (-2.0 * gamma)
    span = horizon * tscale
    ds = w / 64 if ds is None else float(ds)
    ds = span / math.ceil(span / ds - _GRID_TOL)
    kw = kernel_weights(w, ds)
    K = (kw.shape[1] - 1) // 2
    A = M / max(1.0, np.abs(kw[1]).sum())
    rate = A * A

    n = _grid_size(span, ds)
    s = (np.arange(-K, n + K)) * ds
    rng = _rng(seed)
    sign0 = 1.0 if rng.random() < 0.5 else -1.0
    total = s[-1] - s[0]
    events = []
    acc = 0.0
    chunk = max(16, int(rate * total * 1.2) + 16)
    while acc <= total:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        pts = acc + np.cumsum(gaps)
        events.append(pts)
        acc = pts[-1]
    ev = np.concatenate(events) + s[0]
    parity = np.searchsorted(ev, s, side="right") % 2
    x = A * sign0 * np.where(parity == 0, 1.0, -1.0)

    xi = signal.oaconvolve(x, kw[0], mode="valid")
    dxi = signal.oaconvolve(x, kw[1], mode="valid")
    ddxi = signal.oaconvolve(x, kw[2], mode="valid")

    dt = ds / tscale
    d1 = eps ** (-gamma) * xi
    d2 = eps ** (-3.0 * gamma) * dxi
    d3 = eps ** (-5.0 * gamma) * ddxi
    b0 = np.concatenate(([0.0], np.cumsum(0.5 * (d1[1:] + d1[:-1]) * dt)))
    # trapezoid + end correction keeps B_eps' consistent with d1 to O(dt^4)
    b0[1:] -= np.cumsum((d2[1:] - d2[:-1]) * dt * dt / 12.0)
    return MildPath(
        kind="mixing",
        eps=float(eps),
        gamma=float(gamma),
        horizon=float(horizon),
        dt=dt,
        samples=np.array([b0, d1, d2, d3]),
        params={"seed": int(seed), "M": float(M), "amplitude": A, "switch_rate": rate, "smoothing": w},
    )


def zero_path(horizon: float = 1.0, dt: float = 1e-3) -> MildPath:
    """Deterministic zero forcing, ``B_eps == 0``."""
    n = _grid_size(horizon, dt)
    return MildPath(
        kind="mollified", eps=0.0, gamma=0.25, horizon=(n - 1) * dt, dt=dt,
        samples=np.zeros((4, n)), params={"base_seed": None, "window": 0.0},
    )


def eval_path(p: MildPath, t, order: int = 0):
    """Evaluate ``B_eps`` (order 0), its first or second derivative."""
    if order not in (0, 1, 2):
        raise ParameterError("order must be 0, 1 or 2")
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = p.samples.shape[1]
    tmax = (n - 1) * p.dt
    if np.any(t < -_GRID_TOL * max(1.0, tmax)) or np.any(t > tmax * (1 + _GRID_TOL) + _GRID_TOL):
        bad = t[(t < 0) | (t > tmax)][0]
        raise RangeError(f"t={bad:g} outside [0, {tmax:g}]")
    x = np.clip(t / p.dt, 0.0, n - 1)
    k = np.minimum(np.floor(x).astype(np.int64), n - 2)
    s = x - k
    y0, y1 = p.samples[order, k], p.samples[order, k + 1]
    m0, m1 = p.samples[order + 1, k] * p.dt, p.samples[order + 1, k + 1] * p.dt
    s2, s3 = s * s, s * s * s
    val = (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * m0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * m1
    )
    return float(val[0]) if scalar else val


@dataclass(frozen=True)
class MildnessReport:
    sup_path_gap: float
    sup_eps_deriv: float
    sup_eps_second: float
    origin_offset: float = 0.0

    def as_dict(self) -> dict:
        return {
            "sup_path_gap": self.sup_path_gap,
            "sup_eps_deriv": self.sup_eps_deriv,
            "sup_eps_second": self.sup_eps_second,
            "origin_offset": self.origin_offset,
        }


def mildness_report(p: MildPath, base: BrownianPath) -> MildnessReport:
    """Suprema of ``|B_eps - B|``, ``eps|B_eps'|``, ``eps|B_eps''|`` on the base grid."""
    if abs(p.horizon - base.horizon) > 1e-9 * max(1.0, base.horizon):
        raise ParameterError(
            f"horizon mismatch: mild path {p.horizon:g} vs base {base.horizon:g}"
        )
    t = np.minimum(base.times, p.horizon)
    gap = np.abs(eval_path(p, t, 0) - base.values)
    d1 = np.abs(eval_path(p, t, 1))
    d2 = np.abs(eval_path(p, t, 2))
    return MildnessReport(
        sup_path_gap=float(gap.max()),
        sup_eps_deriv=float(p.eps * d1.max()),
        sup_eps_second=float(p.eps * d2.max()),
        origin_offset=float(abs(p.samples[0, 0])),
    )
