"""Uniform grid functions in one or two dimensions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

BOUNDARY_CONDITIONS = ("periodic", "neumann")


@dataclass(frozen=True)
class ScalarField:
    """Samples of a scalar function on a uniform node grid.

    ``values[i]`` (1D) or ``values[i, j]`` (2D) sits at
    ``origin + (i, j) * spacing``, the first index running along x.

    Parameters
    ----------
    values : ndarray
        Samples, 1D or 2D. NaN is rejected.
    spacing : tuple of float
        Grid step per axis.
    origin : tuple of float
        Coordinates of node ``(0, ...)``.
    bc : {"periodic", "neumann"}
        Periodic grids do not repeat the first node at the far end, so the
        physical extent is ``n * dx``. Neumann grids span ``(n - 1) * dx``.
    """

    values: np.ndarray
    spacing: tuple
    origin: tuple
    bc: str = "neumann"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim not in (1, 2):
            raise ParameterError(f"only 1D and 2D fields are supported, got ndim={v.ndim}")
        spacing = tuple(float(s) for s in np.broadcast_to(self.spacing, (v.ndim,)))
        origin = tuple(float(s) for s in np.broadcast_to(self.origin, (v.ndim,)))
        if any(s <= 0 for s in spacing):
            raise ParameterError("grid spacing must be positive")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ParameterError(f"bc must be one of {BOUNDARY_CONDITIONS}, got {self.bc!r}")
        if min(v.shape) < 2:
            raise ParameterError("each axis needs at least two nodes")
        if np.isnan(v).any():
            # +-inf is allowed only as the empty-front distance sentinel
            raise ParameterError("field values must not be NaN")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def periodic(self) -> bool:
        return self.bc == "periodic"

    def axis(self, k: int) -> np.ndarray:
        n = self.shape[k]
        return self.origin[k] + self.spacing[k] * np.arange(n)

    def coords(self):
        """Node coordinates: the x array in 1D, ``(X, Y)`` with ij indexing in 2D."""
        if self.dim == 1:
            return self.axis(0)
        return np.meshgrid(self.axis(0), self.axis(1), indexing="ij")

    def extent(self) -> tuple:
        """``((lo, hi), ...)`` of the physical domain per axis."""
        out = []
        for k in range(self.dim):
            n = self.shape[k] if self.periodic else self.shape[k] - 1
            out.append((self.origin[k], self.origin[k] + n * self.spacing[k]))
        return tuple(out)

    def with_values(self, values) -> ScalarField:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.shape:
            raise ParameterError(f"shape mismatch: {values.shape} vs {self.shape}")
        return ScalarField(values, self.spacing, self.origin, self.bc)

    def map(self, fn) -> ScalarField:
        return self.with_values(fn(self.values))

    def write(self, path, t: float = 0.0) -> None:
        """Write a text header ``dim shape spacing t`` then little-endian f64 data."""
        shape = "x".join(str(n) for n in self.shape)
        spacing = ",".join(repr(s) for s in self.spacing)
        header = f"{self.dim} {shape} {spacing} {t!r}\n"
        try:
            with open(path, "wb") as fh:
                fh.write(header.encode("ascii"))
                fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        except OSError as exc:
            raise OSError(f"cannot write field dump {path}: {exc}") from exc


def read_field(path, origin=None, bc: str = "neumann") -> tuple[ScalarField, float]:
    """Inverse of :meth:`ScalarField.write`; returns ``(field, t)``."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        data = fh.read()
    dim = int(header[0])
    shape = tuple(int(n) for n in header[1].split("x"))
    spacing = tuple(float(s) for s in header[2].split(","))
    t = float(header[3])
    values = np.frombuffer(data, dtype="<f8").reshape(shape)
    if origin is None:
        origin = (0.0,) * dim
    return ScalarField(values, spacing, origin, bc), t


def uniform_grid(lo, hi, dx: float, bc: str = "neumann", dim: int | None = None) -> ScalarField:
    """Zero field covering ``[lo, hi]`` per axis with step at most ``dx``.

    The step is shrunk so the node count divides the interval exactly.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if dim is not None:
        lo = np.broadcast_to(lo, (dim,))
        hi = np.broadcast_to(hi, (dim,))
    if np.any(hi <= lo) or dx <= 0:
        raise ParameterError("need hi > lo and dx > 0")
    shape, spacing = [], []
    for a, b in zip(lo, hi):
        cells = int(np.ceil((b - a) / dx - 1e-9))
        spacing.append((b - a) / cells)
        shape.append(cells if bc == "periodic" else cells + 1)
    return ScalarField(np.zeros(shape), tuple(spacing), tuple(lo), bc)


def circle_distance(grid: ScalarField, R0: float, center=(0.0, 0.0)) -> ScalarField:
    """``R0 - |x - center|``: positive inside the circle."""
    X, Y = grid.coords()
    return grid.with_values(R0 - np.hypot(X - center[0], Y - center[1]))


def plane_distance(grid: ScalarField, x0: float = 0.0) -> ScalarField:
    """``x - x0`` along the first axis: the inside is ``x > x0``."""
    if grid.dim == 1:
        return grid.with_values(grid.axis(0) - x0)
    X, _ = grid.coords()
    return grid.with_values(X - x0)
