"""Fronts as zero sets: extraction, signed distance, Hausdorff distance.

Convention: the inside of a front is ``{w > 0}`` and signed distances are
positive there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .errors import ParameterError
from .grid import ScalarField

__all__ = [
    "EmptyFrontWarning",
    "EtaProfile",
    "FrontSet",
    "distance_to_front",
    "eta_profile",
    "extract_zero_set",
    "hausdorff",
    "mean_radius",
    "signed_distance",
    "supersolution_residual",
]


class EmptyFrontWarning(UserWarning):
    """A distance was requested to a front with no points."""


@dataclass(frozen=True)
class FrontSet:
    """Zero set of a grid function.

    ``points`` holds the crossing abscissae in 1D; ``segments`` holds an
    ``(m, 2, 2)`` array of segment endpoints in 2D. ``box`` is the period of
    each axis for periodic grids, else None.
    """

    dim: int
    points: np.ndarray | None = None
    segments: np.ndarray | None = None
    box: tuple | None = None
    origin: tuple | None = None

    @property
    def empty(self) -> bool:
        data = self.points if self.dim == 1 else self.segments
        return data is None or len(data) == 0

    def __len__(self) -> int:
        data = self.points if self.dim == 1 else self.segments
        return 0 if data is None else len(data)

    def lengths(self) -> np.ndarray:
        if self.dim != 2:
            raise ParameterError("segment lengths are defined for 2D fronts only")
        d = self.segments[:, 1] - self.segments[:, 0]
        return np.hypot(d[:, 0], d[:, 1])

    def length(self) -> float:
        return float(self.lengths().sum()) if not self.empty else 0.0

    def sample(self, spacing: float) -> np.ndarray:
        """Points along the front no farther than ``spacing`` apart."""
        if self.dim == 1:
            return np.asarray(self.points, dtype=float).reshape(-1, 1)
        a, b = self.segments[:, 0], self.segments[:, 1]
        counts = np.maximum(1, np.ceil(self.lengths() / spacing).astype(int))
        out = [a]
        for k in range(1, counts.max() + 1):
            sel = counts >= k
            t = (k / counts[sel])[:, None]
            out.append(a[sel] + t * (b[sel] - a[sel]))
        return np.concatenate(out)


# --------------------------------------------------------------------------
# extraction


def extract_zero_set(w: ScalarField) -> FrontSet:
    """Zero set of ``w`` by linear interpolation along grid edges.

    1D: one crossing per sign change between neighbouring nodes (a node with
    ``w == 0`` lies on the outside side, so a zero node yields one crossing at
    the node itself). 2D: marching squares, saddles split by the cell
    average.
    """
    box = None
    if w.periodic:
        box = tuple(n * h for n, h in zip(w.shape, w.spacing))
    if w.dim == 1:
        v = w.values
        x = w.axis(0)
        if w.periodic:
            v1 = np.roll(v, -1)
            x1 = x + w.spacing[0]
        else:
            v, v1, x, x1 = v[:-1], v[1:], x[:-1], x[1:]
        cross = (v > 0) != (v1 > 0)
        t = v[cross] / (v[cross] - v1[cross])
        pts = x[cross] + t * (x1[cross] - x[cross])
        if box is not None:
            pts = w.origin[0] + np.mod(pts - w.origin[0], box[0])
        return FrontSet(1, points=np.sort(pts), box=box, origin=w.origin)
    segs = _kernels.marching_squares(
        np.ascontiguousarray(w.values), w.origin[0], w.origin[1], w.spacing[0], w.spacing[1], w.periodic
    )
    return FrontSet(2, segments=segs, box=box, origin=w.origin)


def mean_radius(front: FrontSet, center=(0.0, 0.0)) -> float:
    """Length-weighted mean distance of a 2D front from ``center``."""
    if front.empty:
        return 0.0
    mid = 0.5 * (front.segments[:, 0] + front.segments[:, 1]) - np.asarray(center)
    ell = front.lengths()
    return float(np.sum(ell * np.hypot(mid[:, 0], mid[:, 1])) / ell.sum())


# --------------------------------------------------------------------------
# distances


def _point_segment(p, a, b):
    """Row-wise distance from points ``p`` to segments ``[a, b]``."""
    ab = b - a
    ap = p - a
    den = np.einsum("...i,...i->...", ab, ab)
    t = np.clip(np.einsum("...i,...i->...", ap, ab) / np.where(den > 0, den, 1.0), 0.0, 1.0)
    d = ap - t[..., None] * ab
    return np.sqrt(np.einsum("...i,...i->...", d, d))


class _SegmentIndex:
    """Exact nearest-segment distances through a KD-tree of midpoints.

    A segment whose midpoint is at distance ``m`` is at least ``m - h`` away,
    ``h`` being the largest half-length, which certifies the k-nearest
    candidate set or triggers a ball query.
    """

    def __init__(self, segments, box=None, origin=None, k: int = 8):
        self.a = segments[:, 0]
        self.b = segments[:, 1]
        mid = 0.5 * (self.a + self.b)
        self.half = 0.5 * float(np.max(np.hypot(*(self.b - self.a).T)))
        self.box = None if box is None else np.asarray(box, dtype=float)
        self.origin = np.zeros(2) if origin is None else np.asarray(origin, dtype=float)
        if self.box is not None:
            self.mid = np.mod(mid - self.origin, self.box)
            self.tree = cKDTree(self.mid, boxsize=self.box)
        else:
            self.mid = mid
            self.tree = cKDTree(mid)
        self.k = min(k, len(mid))

    def _exact(self, p, idx):
        a, b = self.a[idx], self.b[idx]
        if self.box is not None:
            # move each candidate segment to the periodic image nearest p
            p = p + self.origin
            mid = 0.5 * (a + b)
            shift = self.box * np.round((mid - p) / self.box)
            a = a - shift
            b = b - shift
        return _point_segment(p, a, b)

    def distance(self, pts: np.ndarray, chunk: int = 65536) -> np.ndarray:
        out = np.empty(len(pts))
        n = len(self.mid)
        for s in range(0, len(pts), chunk):
            p = pts[s : s + chunk]
            q = p if self.box is None else np.mod(p - self.origin, self.box)
            best = np.full(len(p), np.inf)
            rows = np.arange(len(p))
            k = self.k
            while len(rows):
                dk, ik = self.tree.query(q[rows], k=k)
                if k == 1:
                    dk, ik = dk[:, None], ik[:, None]
                best[rows] = self._exact(q[rows][:, None, :], ik).min(axis=1)
                if k >= n:
                    break
                # rows whose k-th midpoint could still hide a closer segment
                rows = rows[best[rows] > dk[:, -1] - self.half]
                k = min(4 * k, n)
            out[s : s + chunk] = best
        return out


def distance_to_front(front: FrontSet, pts) -> np.ndarray:
    """Unsigned distance from points (shape ``(n,)`` in 1D, ``(n, 2)`` in 2D)."""
    if front.empty:
        raise ParameterError("distance to an empty front is undefined")
    if front.dim == 1:
        x = np.asarray(pts, dtype=float).reshape(-1)
        d = x[:, None] - front.points[None, :]
        if front.box is not None:
            d = d - front.box[0] * np.round(d / front.box[0])
        return np.min(np.abs(d), axis=1)
    index = _SegmentIndex(front.segments, front.box, front.origin)
    return index.distance(np.asarray(pts, dtype=float).reshape(-1, 2))


def signed_distance(w: ScalarField, front: FrontSet | None = None) -> ScalarField:
    """Signed distance to the zero set of ``w``, positive where ``w > 0``.

    When the zero set is empty the result is ``+inf`` or ``-inf`` with the
    sign of ``w`` and an :class:`EmptyFrontWarning` is issued.
    """
    if front is None:
        front = extract_zero_set(w)
    sign = np.where(w.values > 0, 1.0, -1.0)
    if front.empty:
        warnings.warn("signed distance of a field without zero set", EmptyFrontWarning, stacklevel=2)
        return w.with_values(sign * np.inf)
    if w.dim == 1:
        d = distance_to_front(front, w.axis(0))
    else:
        X, Y = w.coords()
        d = distance_to_front(front, np.column_stack([X.ravel(), Y.ravel()])).reshape(w.shape)
    return w.with_values(sign * d)


def hausdorff(A: FrontSet, B: FrontSet, resolution: float | None = None) -> float:
    """Symmetric Hausdorff distance between two fronts.

    In 2D the directed distances are evaluated exactly against the segments
    of the other set from points sampled along each set at spacing
    ``resolution`` (default a quarter of the shortest mean segment length),
    so the result is exact up to ``resolution / 2``.
    """
    if A.empty:
        raise ParameterError("hausdorff: first front set is empty")
    if B.empty:
        raise ParameterError("hausdorff: second front set is empty")
    if A.dim != B.dim:
        raise ParameterError("hausdorff: fronts of different dimension")
    if A.dim == 1:
        return float(max(distance_to_front(B, A.points).max(), distance_to_front(A, B.points).max()))
    if resolution is None:
        resolution = 0.25 * min(A.lengths().mean(), B.lengths().mean())
    dab = distance_to_front(B, A.sample(resolution)).max()
    dba = distance_to_front(A, B.sample(resolution)).max()
    return float(max(dab, dba))


# --------------------------------------------------------------------------
# the eta profile


def _blend(s):
    return s**3 * (8.0 - 11.5 * s + 4.5 * s * s)


def _blend_d(s):
    return s * s * (24.0 - 46.0 * s + 22.5 * s * s)


def _blend_dd(s):
    return s * (48.0 - 138.0 * s + 90.0 * s * s)


_S = np.linspace(0.0, 1.0, 200001)
_C_PRIME = float(2.0 * _blend_d(_S).max())
_C_SECOND = float(8.0 * np.abs(_blend_dd(_S)).max())


@dataclass(frozen=True)
class EtaProfile:
    """Nondecreasing C² cutoff: ``-delta`` below ``delta/4``, ``z - delta`` above ``delta/2``.

    On the blend interval ``eta = -delta + (delta/2) P(s)`` with
    ``s = (z - delta/4)/(delta/4)`` and ``P(s) = 8s³ - 11.5s⁴ + 4.5s⁵``,
    which matches value, slope and curvature of both branches. Since the
    shape is fixed, ``eta' <= C_prime`` and ``|eta''| <= C_second / delta``
    with constants that do not depend on ``delta``.
    """

    delta: float
    C_prime: float = _C_PRIME
    C_second: float = _C_SECOND

    def __call__(self, z, order: int = 0):
        d = self.delta
        z = np.asarray(z, dtype=float)
        s = np.clip((z - 0.25 * d) / (0.25 * d), 0.0, 1.0)
        lo = z <= 0.25 * d
        hi = z >= 0.5 * d
        if order == 0:
            out = np.where(hi, z - d, -d + 0.5 * d * _blend(s))
            return np.where(lo, -d, out)
        if order == 1:
            out = np.where(hi, 1.0, 2.0 * _blend_d(s))
            return np.where(lo, 0.0, out)
        if order == 2:
            out = np.where(hi | lo, 0.0, 8.0 * _blend_dd(s) / d)
            return out
        raise ParameterError(f"order must be 0, 1 or 2, got {order}")


def eta_profile(delta: float) -> EtaProfile:
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    return EtaProfile(float(delta))


def supersolution_residual(*args, **kwargs):
    """Sampled Allen-Cahn residual of the layered supersolution.

    See :func:`stochac.supersolution.supersolution_residual`.
    """
    from .supersolution import supersolution_residual as impl

    return impl(*args, **kwargs)
