"""Bistable reaction term and its traveling waves.

The wave problem is ``c q' + q'' = f(q) - b`` on the line with
``q(-inf) = h_-(b)``, ``q(+inf) = h_+(b)`` and the phase condition
``q(0) = h_0(b)``, where ``h_- < h_0 < h_+`` solve ``f(h) = b``.

It is truncated to ``[-L, L]``, discretised with fourth-order centred
differences (second order on the two nodes next to the boundary, where the
profile is flat to machine precision) and solved by damped Newton on the
unknowns ``(q_1..q_{n-2}, c)``. The converged Jacobian is reused to get the
exact discrete sensitivities ``dq/db`` and ``dc/db``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate, optimize

from .errors import ParameterError, RootCollisionError, SolverError
from .noise import MildPath, eval_path

__all__ = [
    "CUBIC",
    "Equilibria",
    "ReactionFunction",
    "TravelingWave",
    "WaveTable",
    "alpha_zero",
    "equilibria",
    "evaluate_reaction",
    "forcing_level",
    "q_eps",
    "solve_wave",
]


@dataclass(frozen=True)
class ReactionFunction:
    """A bistable ``f`` with stable zeros at -1, +1 and an unstable zero at 0."""

    f: Callable
    fprime: Callable
    name: str = "custom"

    def __call__(self, u):
        return self.f(u)

    @property
    def b0(self) -> float:
        return _forcing_limit(self)

    def validate(self, samples: int = 2001) -> None:
        """Raise ``ParameterError`` unless ``f`` has the equal-well bistable shape."""
        f, fp = self.f, self.fprime
        for z in (-1.0, 0.0, 1.0):
            if abs(float(f(z))) > 1e-14:
                raise ParameterError(f"f({z:g}) = {float(f(z)):.3e} is not zero")
        if not (fp(-1.0) > 0 and fp(1.0) > 0 and fp(0.0) < 0):
            raise ParameterError("need f'(+-1) > 0 and f'(0) < 0")
        left = np.linspace(-1, 0, samples)[1:-1]
        right = np.linspace(0, 1, samples)[1:-1]
        if np.any(f(left) <= 0) or np.any(f(right) >= 0):
            raise ParameterError("f must be positive on (-1,0) and negative on (0,1)")
        mass, _ = integrate.quad(f, -1.0, 1.0, epsabs=1e-13, epsrel=1e-13)
        if abs(mass) > 1e-10:
            raise ParameterError(f"wells have unequal depth: int f = {mass:.3e}")


CUBIC = ReactionFunction(f=lambda u: u**3 - u, fprime=lambda u: 3 * u**2 - 1, name="cubic")


def evaluate_reaction(u, reaction: ReactionFunction = CUBIC):
    """Return ``(f(u), f'(u))``."""
    return reaction.f(u), reaction.fprime(u)


@lru_cache(maxsize=None)
def _critical(reaction: ReactionFunction):
    """Local max of f in (-1, 0) and local min in (0, 1)."""
    if reaction is CUBIC:
        r = 1.0 / math.sqrt(3.0)
        return -r, r
    lo = optimize.minimize_scalar(lambda u: -reaction.f(u), bounds=(-1, 0), method="bounded",
                                  options={"xatol": 1e-13})
    hi = optimize.minimize_scalar(reaction.f, bounds=(0, 1), method="bounded",
                                  options={"xatol": 1e-13})
    return float(lo.x), float(hi.x)


@lru_cache(maxsize=None)
def _forcing_limit(reaction: ReactionFunction) -> float:
    if reaction is CUBIC:
        return 2.0 / (3.0 * math.sqrt(3.0))
    umax, umin = _critical(reaction)
    return float(min(reaction.f(umax), -reaction.f(umin)))


def _safeguarded_newton(g, dg, lo, hi, x0, tol=1e-15, max_iter=200):
    glo = g(lo)
    x = min(max(x0, lo), hi)
    for _ in range(max_iter):
        gx = g(x)
        if gx == 0.0:
            return x
        if (gx < 0) == (glo < 0):
            lo, glo = x, gx
        else:
            hi = x
        d = dg(x)
        step = gx / d if d != 0 else np.inf
        xn = x - step
        if not (min(lo, hi) < xn < max(lo, hi)):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(1.0, abs(x)):
            return xn
        x = xn
    return x


class Equilibria(NamedTuple):
    h_minus: float
    h_zero: float
    h_plus: float

    @property
    def min_gap(self) -> float:
        return min(self.h_zero - self.h_minus, self.h_plus - self.h_zero)

    @property
    def near_collision(self) -> bool:
        """Two roots closer than 0.1: ``b`` is close to the fold ``b0``."""
        return self.min_gap < 0.1


def equilibria(b: float, reaction: ReactionFunction = CUBIC) -> Equilibria:
    """The three solutions ``h_- < h_0 < h_+`` of ``f(h) = b``."""
    b = float(b)
    b0 = _forcing_limit(reaction)
    if abs(b) >= b0:
        raise RootCollisionError(f"|b|={abs(b):.6g} >= b0={b0:.6g}: fewer than three equilibria")
    umax, umin = _critical(reaction)

    def g(u):
        return float(reaction.f(u)) - b

    def dg(u):
        return float(reaction.fprime(u))

    lo = -1.0
    while g(lo) >= 0:
        lo -= 1.0
    hi = 1.0
    while g(hi) <= 0:
        hi += 1.0
    roots = (
        _safeguarded_newton(g, dg, lo, umax, -1.0),
        _safeguarded_newton(g, dg, umax, umin, 0.0),
        _safeguarded_newton(g, dg, umin, hi, 1.0),
    )
    return Equilibria(*roots)


# --------------------------------------------------------------------------
# wave solve


@dataclass(frozen=True)
class TravelingWave:
    """Discrete traveling wave on ``xi in [-L, L]``.

    ``q_b`` and ``c_b`` are the derivatives of the profile and speed with
    respect to the forcing level. ``lam`` and ``C_decay`` are fitted so that
    the tail gaps, ``q_xi`` and ``|q_xixi|`` are all below
    ``C_decay * exp(-lam |xi|)`` on the resolved part of the grid
    (gaps above ``1e-9``).
    """

    b: float
    c: float
    xi: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    q_xi: np.ndarray = field(repr=False)
    q_b: np.ndarray = field(repr=False)
    c_b: float
    h_minus: float
    h_zero: float
    h_plus: float
    lam: float
    C_decay: float
    residual: float
    iterations: int
    reaction: ReactionFunction = field(default=CUBIC, repr=False, compare=False)

    @property
    def L(self) -> float:
        return float(self.xi[-1])

    @property
    def h(self) -> float:
        return float(self.xi[1] - self.xi[0])

    @property
    def q_xixi(self) -> np.ndarray:
        return self.reaction.f(self.q) - self.b - self.c * self.q_xi

    def gradient_energy(self) -> float:
        """``int q_xi^2 dxi`` by the trapezoid rule (spectrally accurate here)."""
        return float(integrate.trapezoid(self.q_xi**2, self.xi))

    def resolved(self, floor: float = 1e-9) -> np.ndarray:
        """Mask of nodes whose tail gap exceeds ``floor``."""
        gap = np.where(self.xi >= 0, self.h_plus - self.q, self.q - self.h_minus)
        return gap > floor


@lru_cache(maxsize=16)
def _operators(n: int, h: float):
    """Full-length first/second derivative matrices (rows 0 and n-1 unused)."""
    d1 = sp.diags(
        [1.0, -8.0, 0.0, 8.0, -1.0], [-2, -1, 0, 1, 2], shape=(n, n), format="lil"
    ) / (12.0 * h)
    d2 = sp.diags(
        [-1.0, 16.0, -30.0, 16.0, -1.0], [-2, -1, 0, 1, 2], shape=(n, n), format="lil"
    ) / (12.0 * h * h)
    d1, d2 = d1.tolil(), d2.tolil()
    for i in (1, n - 2):
        d1[i, :] = 0.0
        d2[i, :] = 0.0
        d1[i, i - 1], d1[i, i + 1] = -0.5 / h, 0.5 / h
        d2[i, i - 1], d2[i, i], d2[i, i + 1] = 1.0 / h**2, -2.0 / h**2, 1.0 / h**2
    d1 = d1.tocsr()[1:-1]
    d2 = d2.tocsr()[1:-1]
    return d1, d2


def _derivative_full(q: np.ndarray, d1: sp.csr_matrix, h: float) -> np.ndarray:
    out = np.empty_like(q)
    out[1:-1] = d1 @ q
    out[0] = (-3 * q[0] + 4 * q[1] - q[2]) / (2 * h)
    out[-1] = (3 * q[-1] - 4 * q[-2] + q[-3]) / (2 * h)
    return out


def solve_wave(
    b: float = 0.0,
    L: float = 20.0,
    n: int = 4001,
    reaction: ReactionFunction = CUBIC,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> TravelingWave:
    """Solve the truncated traveling-wave boundary value problem.

    Parameters
    ----------
    b : float
        Forcing level, ``|b| < b0``.
    L : float
        Half-length of the truncated line.
    n : int
        Number of grid nodes, odd so that ``xi = 0`` is a node; ``n >= 2000``.

    Raises
    ------
    RootCollisionError
        If ``|b| >= b0``.
    SolverError
        If Newton does not reach a residual of ``tol`` (sup norm).
    """
    if n < 2000:
        raise ParameterError("need n >= 2000 grid nodes")
    if n % 2 == 0:
        raise ParameterError("n must be odd so that xi = 0 is a grid node")
    if L <= 0:
        raise ParameterError("L must be positive")
    eq = equilibria(b, reaction)
    hm, h0, hp = eq
    xi = np.linspace(-L, L, n)
    h = xi[1] - xi[0]
    mid = n // 2
    d1, d2 = _operators(n, h)
    f, fp = reaction.f, reaction.fprime

    k = math.sqrt(float(fp(hp))) / 2.0
    centre, half = 0.5 * (hp + hm), 0.5 * (hp - hm)
    shift = math.atanh((h0 - centre) / half)
    q = centre + half * np.tanh(k * xi + shift)
    q[0], q[-1], q[mid] = hm, hp, h0
    c = 0.0

    def residual(q, c):
        r = np.empty(n - 1)
        r[:-1] = c * (d1 @ q) + d2 @ q - f(q[1:-1]) + b
        r[-1] = q[mid] - h0
        return r

    def jacobian(q, c):
        a = (c * d1 + d2)[:, 1:-1] - sp.diags(fp(q[1:-1]))
        col = sp.csr_matrix((d1 @ q).reshape(-1, 1))
        row = sp.csr_matrix(([1.0], ([0], [mid - 1])), shape=(1, n - 2))
        return sp.bmat([[a, col], [row, None]], format="csc")

    r = residual(q, c)
    history = [float(np.abs(r).max())]
    it = 0
    while history[-1] > tol:
        if it >= max_iter:
            raise SolverError(f"wave Newton did not converge for b={b:g}", history)
        J = jacobian(q, c)
        step = spla.spsolve(J, -r)
        lam = 1.0
        while True:
            qn = q.copy()
            qn[1:-1] += lam * step[:-1]
            cn = c + lam * step[-1]
            rn = residual(qn, cn)
            if np.abs(rn).max() < history[-1] or lam < 1e-4:
                break
            lam *= 0.5
        q, c, r = qn, cn, rn
        history.append(float(np.abs(r).max()))
        it += 1
        if lam < 1e-4 and history[-1] >= history[-2]:
            raise SolverError(f"wave Newton stalled for b={b:g}", history)

    q[mid] = h0  # the phase condition is linear, so this only removes roundoff
    J = jacobian(q, c)
    dhm, dh0, dhp = (1.0 / float(fp(v)) for v in (hm, h0, hp))
    op = c * d1 + d2
    rhs_b = np.ones(n - 2) + np.asarray(op[:, 0].todense()).ravel() * dhm + np.asarray(
        op[:, n - 1].todense()
    ).ravel() * dhp
    rhs = -np.concatenate((rhs_b, [-dh0]))
    sens = spla.spsolve(J, rhs)
    q_b = np.concatenate(([dhm], sens[:-1], [dhp]))
    c_b = float(sens[-1])

    q_xi = _derivative_full(q, d1, h)
    wave = TravelingWave(
        b=float(b), c=float(c), xi=xi, q=q, q_xi=q_xi, q_b=q_b, c_b=c_b,
        h_minus=hm, h_zero=h0, h_plus=hp, lam=np.nan, C_decay=np.nan,
        residual=history[-1], iterations=it, reaction=reaction,
    )
    lam_fit, C = _fit_decay(wave)
    object.__setattr__(wave, "lam", lam_fit)
    object.__setattr__(wave, "C_decay", C)
    for a in (wave.xi, wave.q, wave.q_xi, wave.q_b):
        a.setflags(write=False)
    return wave


def _fit_decay(w: TravelingWave):
    xi, q = w.xi, w.q
    rates = []
    for side in (1, -1):
        sel = (side * xi > 0)
        gap = (w.h_plus - q) if side > 0 else (q - w.h_minus)
        use = sel & (gap > 1e-9) & (gap < 1e-2)
        if use.sum() < 10:
            raise SolverError("tail too short to fit the decay rate; increase L")
        slope, _ = np.polyfit(np.abs(xi[use]), np.log(gap[use]), 1)
        rates.append(-slope)
    lam = float(min(rates))
    ok = w.resolved()
    gap = np.where(xi >= 0, w.h_plus - q, q - w.h_minus)
    env = np.exp(lam * np.abs(xi[ok]))
    C = max(
        float((gap[ok] * env).max()),
        float((np.abs(w.q_xi[ok]) * env).max()),
        float((np.abs(w.q_xixi[ok]) * env).max()),
    )
    return lam, C


@lru_cache(maxsize=8)
def _alpha_zero_cached(reaction, L, n):
    return 2.0 / solve_wave(0.0, L, n, reaction).gradient_energy()


def alpha_zero(reaction: ReactionFunction = CUBIC, L: float = 20.0, n: int = 4001) -> float:
    """``2 / int q_xi(xi; 0)^2 dxi``; equals ``3/sqrt(2)`` for the cubic."""
    return _alpha_zero_cached(reaction, float(L), int(n))


# --------------------------------------------------------------------------
# cached waves on a b-grid


def _hermite(s, y0, m0, y1, m1):
    s2 = s * s
    s3 = s2 * s
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * m1


def _hermite_d(s, y0, m0, y1, m1, h):
    s2 = s * s
    return ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * m1) / h


class WaveSample(NamedTuple):
    q: np.ndarray
    q_xi: np.ndarray
    q_xixi: np.ndarray
    q_b: np.ndarray
    c: float
    c_b: float


class WaveTable:
    """Lazily filled table of waves at ``b = k*db`` with cubic Hermite lookup.

    Interpolation in ``b`` uses the exact sensitivities ``q_b`` and ``c_b``;
    interpolation in ``xi`` uses ``q_xi`` and ``q_xixi`` of each node wave.
    Outside ``[-L, L]`` the profile is continued by its equilibria.
    """

    def __init__(self, reaction=CUBIC, L=20.0, n=4001, db=1e-3):
        self.reaction = reaction
        self.L, self.n, self.db = float(L), int(n), float(db)
        self._nodes: dict[int, tuple] = {}

    def wave(self, k: int) -> TravelingWave:
        return self._node(k)[0]

    def _node(self, k: int):
        if k not in self._nodes:
            w = solve_wave(k * self.db, self.L, self.n, self.reaction)
            d1, _ = _operators(w.xi.size, w.h)
            qbx = _derivative_full(w.q_b, d1, w.h)
            self._nodes[k] = (w, w.q_xixi, qbx)
        return self._nodes[k]

    def _at_xi(self, k, xi):
        w, qxx, qbx = self._node(k)
        h = w.h
        x = (np.clip(xi, -w.L, w.L) + w.L) * ((w.xi.size - 1) / (2 * w.L))
        j = np.clip(np.floor(x).astype(np.int64), 0, w.xi.size - 2)
        s = x - j
        q = _hermite(s, w.q[j], w.q_xi[j] * h, w.q[j + 1], w.q_xi[j + 1] * h)
        qx = _hermite(s, w.q_xi[j], qxx[j] * h, w.q_xi[j + 1], qxx[j + 1] * h)
        qb = _hermite(s, w.q_b[j], qbx[j] * h, w.q_b[j + 1], qbx[j + 1] * h)
        qbx_i = (1 - s) * qbx[j] + s * qbx[j + 1]
        out = np.abs(xi) > w.L
        if np.any(out):
            right = xi > w.L
            left = xi < -w.L
            q = np.where(right, w.h_plus, np.where(left, w.h_minus, q))
            qx = np.where(out, 0.0, qx)
            qb = np.where(right, w.q_b[-1], np.where(left, w.q_b[0], qb))
            qbx_i = np.where(out, 0.0, qbx_i)
        return w, q, qx, qb, qbx_i

    def evaluate(self, xi, b: float) -> WaveSample:
        """Profile, its derivatives and the speed at forcing level ``b``."""
        b = float(b)
        b0 = _forcing_limit(self.reaction)
        if abs(b) >= b0:
            raise RootCollisionError(f"|b|={abs(b):.6g} >= b0={b0:.6g}")
        xi = np.asarray(xi, dtype=float)
        x = b / self.db
        k = int(math.floor(x))
        s = x - k
        w0, q0, qx0, qb0, qbx0 = self._at_xi(k, xi)
        if s == 0.0:
            qxx = self.reaction.f(q0) - b - w0.c * qx0
            return WaveSample(q0, qx0, qxx, qb0, w0.c, w0.c_b)
        w1, q1, qx1, qb1, qbx1 = self._at_xi(k + 1, xi)
        db = self.db
        q = _hermite(s, q0, qb0 * db, q1, qb1 * db)
        qx = _hermite(s, qx0, qbx0 * db, qx1, qbx1 * db)
        qb = _hermite_d(s, q0, qb0 * db, q1, qb1 * db, db)
        c = float(_hermite(s, w0.c, w0.c_b * db, w1.c, w1.c_b * db))
        cb = float(_hermite_d(s, w0.c, w0.c_b * db, w1.c, w1.c_b * db, db))
        qxx = self.reaction.f(q) - b - c * qx
        return WaveSample(q, qx, qxx, qb, c, cb)


@lru_cache(maxsize=4)
def default_table(reaction=CUBIC) -> WaveTable:
    return WaveTable(reaction)


def forcing_level(eps: float, p: MildPath, t: float, a: float = 0.0) -> float:
    """Wave parameter ``b = eps * (B_eps'(t) + a)`` seen by the Allen-Cahn layer.

    With the forcing written as ``f(u) - eps B_eps'`` the quasi-equilibria of
    the layer are the roots of ``f = eps B_eps'``, so this is the level that
    keeps ``q(rho/eps; b)`` on the slow manifold; ``a > 0`` raises it.
    """
    return float(eps * (eval_path(p, t, 1) + a))


def q_eps(xi, t: float, a: float, eps: float, p: MildPath, table: WaveTable | None = None):
    """Evaluate ``(q(xi; b), c(b))`` at ``b = forcing_level(eps, p, t, a)``."""
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if abs(a) >= 1:
        raise ParameterError("need |a| < 1")
    table = table or default_table()
    b = forcing_level(eps, p, t, a)
    b0 = _forcing_limit(table.reaction)
    if abs(b) >= b0:
        raise RootCollisionError(
            f"forcing level b={b:.4g} at t={t:g} exceeds b0={b0:.4g}: "
            "the mild path is not yet in the admissible regime"
        )
    ws = table.evaluate(xi, b)
    return ws.q, ws.c
