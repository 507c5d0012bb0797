"""Convergence experiments on a shared Brownian path.

A sweep builds one ``BrownianPath`` from the configured seed, derives a mild
approximation for every ``eps`` of the sweep and compares the solvers it
drives against a reference (the exact reduced dynamics or another solver).
The per-``eps`` metric is the supremum over 50 evenly spaced observation
times of the front distance.

Config files are flat ``key = value`` text; ``#`` starts a comment, lists
are comma separated and unknown keys are rejected.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .allen_cahn import ACParams, ac_run, well_prepared_init
from .errors import ParameterError, StochacError
from .front_geometry import extract_zero_set, hausdorff
from .grid import circle_distance, plane_distance, uniform_grid
from .level_set import default_dt, mcf_run, path_stability_gap
from .noise import (
    BrownianPath,
    brownian_from_values,
    mixing_approximation,
    mollified_approximation,
    sample_brownian,
)
from .oracle import FRONT_SIGN, radial_flow
from .reaction_wave import alpha_zero, solve_wave

__all__ = [
    "SCENARIOS",
    "ConfigError",
    "Entry",
    "ExperimentConfig",
    "RunRecord",
    "compare",
    "default_out_dir",
    "emit_report",
    "load_config",
    "measure_front_sign",
    "parse_config",
    "run_entry",
    "run_sweep",
]

SCENARIOS = ("ac_vs_oracle_1d", "ac_vs_mcf_2d", "mcf_vs_oracle_radial", "path_stability", "wave_validation")
NOISE_KINDS = ("mollified", "mixing", "none")
OUT_ENV = "STOCHAC_OUT"
N_OBS = 50


class ConfigError(ParameterError):
    """Malformed or inconsistent experiment configuration."""


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, os.getcwd())


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep.

    Grid rules: the Allen-Cahn grid step is ``dx_factor * eps``; the
    level-set grid step is ``mcf_dx_factor * eps``, or ``mcf_dx`` for
    ``path_stability``. Radial scenarios run on the quadrant ``[0, L]²`` with
    mirror boundaries and compare on ``[0, min(window * T*, t_cap)]``,
    ``T*`` being the extinction time of the reference radius.
    """

    scenario: str
    eps: tuple
    seed: int = 0
    gamma: float = 0.4
    noise: str = "mollified"
    T: float = 1.0
    R0: float = 1.0
    alpha0: float | None = None
    M: float = 1.0
    path_dt: float = 1e-4
    path_horizon: float = 1.0
    dx_factor: float = 0.25
    mcf_dx_factor: float = 0.5
    mcf_dx: float = 0.02
    eps_ref: float = 0.0125
    window: float = 0.8
    t_cap: float = 0.5
    gap_tol: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        eps = tuple(float(e) for e in self.eps)
        object.__setattr__(self, "eps", eps)
        if not eps:
            raise ConfigError("eps list is empty")
        if any(e <= 0 for e in eps):
            raise ConfigError("eps values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"eps list must be strictly decreasing, got {eps}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        upper = 1 / 3 if self.noise == "mixing" else 0.5
        if self.noise != "none" and not 0 < self.gamma < upper:
            raise ConfigError(f"gamma must lie in (0, {upper:.4g}) for {self.noise} noise")
        for name in ("T", "R0", "M", "path_dt", "path_horizon", "dx_factor", "mcf_dx_factor", "mcf_dx", "eps_ref", "t_cap"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.window <= 1:
            raise ConfigError("window must lie in (0, 1]")
        if self.T > self.path_horizon * (1 + 1e-12) and self.scenario != "wave_validation":
            raise ConfigError(f"T={self.T} exceeds path_horizon={self.path_horizon}")
        if self.scenario == "path_stability" and self.eps_ref >= eps[-1]:
            raise ConfigError("eps_ref must be below every eps of the sweep")

    def a0(self) -> float:
        return alpha_zero() if self.alpha0 is None else float(self.alpha0)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["eps"] = list(self.eps)
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if key == "eps":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if key in ("scenario", "noise"):
            return raw
        if key == "seed":
            return int(raw)
        if "None" in str(kind) and raw.lower() in ("auto", "none", ""):
            return None
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines into an :class:`ExperimentConfig`."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    for req in ("scenario", "eps"):
        if req not in values:
            raise ConfigError(f"missing required key {req!r}")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# --------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class Entry:
    eps: float
    gap: float | None
    wall_time_s: float
    status: str
    metrics: dict = field(default_factory=dict)
    error: str = ""


@dataclass
class RunRecord:
    """Config snapshot plus one :class:`Entry` per ``eps``; entries are append-only."""

    config: dict
    version: str = __version__
    front_sign: int = FRONT_SIGN
    _entries: list = field(default_factory=list, repr=False)

    @property
    def entries(self) -> tuple:
        return tuple(self._entries)

    def append(self, entry: Entry) -> None:
        if entry.gap is not None and not entry.gap >= 0:
            raise ParameterError(f"gap must be nonnegative, got {entry.gap}")
        self._entries.append(entry)

    @property
    def gaps(self) -> list:
        return [e.gap for e in self._entries]

    @property
    def failed(self) -> bool:
        return any(e.status != "ok" for e in self._entries)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "version": self.version,
            "front_sign": self.front_sign,
            "entries": [asdict(e) for e in self._entries],
        }


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def emit_report(rec: RunRecord, fmt: str = "csv", out=None) -> str:
    """Write ``rec`` as CSV or JSON and return the file path.

    ``out`` is a directory (the file is named ``<scenario>.<fmt>``) or a file
    path; it defaults to ``$STOCHAC_OUT`` or the working directory.
    """
    if fmt not in ("csv", "json"):
        raise ParameterError(f"format must be csv or json, got {fmt!r}")
    out = default_out_dir() if out is None else os.fspath(out)
    path = os.path.join(out, f"{rec.config['scenario']}.{fmt}") if os.path.isdir(out) else out
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "eps", "gap", "wall_time_s", "status"])
        for e in rec.entries:
            w.writerow([rec.config["scenario"], _fmt(e.eps), _fmt(e.gap), _fmt(e.wall_time_s), e.status])
        text = buf.getvalue()
    else:
        text = json.dumps(rec.to_dict(), indent=2, sort_keys=True, default=float) + "\n"
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror or exc}") from exc
    return path


def compare(path_a, path_b) -> float:
    """Sup gap between two ``(t, metric)`` CSV trajectories on their common times.

    The second trajectory is interpolated linearly onto the times of the
    first that fall inside its range.
    """
    a = _read_trajectory(path_a)
    b = _read_trajectory(path_b)
    lo, hi = max(a[0, 0], b[0, 0]), min(a[-1, 0], b[-1, 0])
    sel = (a[:, 0] >= lo - 1e-12) & (a[:, 0] <= hi + 1e-12)
    if not sel.any():
        raise ParameterError("trajectories do not overlap in time")
    other = np.interp(a[sel, 0], b[:, 0], b[:, 1])
    return float(np.max(np.abs(a[sel, 1] - other)))


def _read_trajectory(path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                continue  # header
    if not rows:
        raise ParameterError(f"no numeric rows in {path}")
    return np.asarray(sorted(rows))


# --------------------------------------------------------------------------
# scenarios


def _mild(cfg: ExperimentConfig, base: BrownianPath, eps: float):
    if cfg.noise == "none":
        return None
    if cfg.noise == "mixing":
        return mixing_approximation(cfg.seed, eps, cfg.gamma, cfg.M, horizon=base.horizon, ds=base.dt)
    return mollified_approximation(base, eps, cfg.gamma)


def _reference_path(cfg: ExperimentConfig, base: BrownianPath, mild) -> BrownianPath:
    """The path the reduced dynamics use: the base path, or the mild path itself for mixing noise."""
    if cfg.noise == "mixing":
        return brownian_from_values(mild.samples[0], mild.dt, seed=cfg.seed)
    if cfg.noise == "none":
        return brownian_from_values(np.zeros_like(base.values), base.dt, seed=cfg.seed)
    return base


def _ac_vs_oracle_1d(cfg, base, eps):
    mild = _mild(cfg, base, eps)
    ref = _reference_path(cfg, base, mild)
    a0 = cfg.a0()
    tt = ref.times <= cfg.T + 1e-12
    excursion = a0 * float(np.max(np.abs(ref.values[tt])))
    if mild is not None:
        excursion = max(excursion, a0 * float(np.max(np.abs(mild.samples[0][tt]))))
    half = excursion + 1.0
    g = uniform_grid(-half, half, cfg.dx_factor * eps)
    u0 = well_prepared_init(plane_distance(g, 0.0), eps, mild)
    run = ac_run(u0, ACParams(eps), mild, cfg.T, n_obs=N_OBS)
    oracle = np.interp(run.times, ref.times, FRONT_SIGN * a0 * ref.values)
    gaps = np.abs(run.metric - oracle)
    return float(np.max(gaps)), {"half_width": half, "max_abs_u": run.max_abs, "dt": run.dt}


def _radial_window(cfg, ref):
    a0 = cfg.a0()
    orc = radial_flow(cfg.R0, 2, a0, ref, T=min(ref.horizon, 4 * cfg.t_cap))
    end = min(cfg.window * orc.T_star, cfg.t_cap, ref.horizon)
    in_win = orc.times <= end + 1e-12
    r_max = float(np.max(orc.R[in_win]))
    L = max(2.0, r_max + 0.6)
    return orc, end, L


def _mcf_radius(cfg, mild, eps, end, L):
    g = uniform_grid(0.0, L, cfg.mcf_dx_factor * eps, dim=2)
    run = mcf_run(circle_distance(g, cfg.R0), mild, end, alpha0=cfg.a0())
    return run, g.spacing[0]


def _mcf_vs_oracle_radial(cfg, base, eps):
    mild = _mild(cfg, base, eps)
    ref = _reference_path(cfg, base, mild)
    orc, end, L = _radial_window(cfg, ref)
    run, dx = _mcf_radius(cfg, mild, eps, end, L)
    gap = float(np.max(np.abs(run.metric - orc.at(run.times))))
    return gap, {"window_end": end, "T_star_oracle": orc.T_star, "domain": L, "mcf_dx": dx}


def _ac_vs_mcf_2d(cfg, base, eps):
    mild = _mild(cfg, base, eps)
    ref = _reference_path(cfg, base, mild)
    orc, end, L = _radial_window(cfg, ref)
    g = uniform_grid(0.0, L, cfg.dx_factor * eps, dim=2)
    u0 = well_prepared_init(circle_distance(g, cfg.R0), eps, mild)
    ac = ac_run(u0, ACParams(eps), mild, end, n_obs=N_OBS)
    mcf, dx = _mcf_radius(cfg, mild, eps, end, L)
    n = min(len(ac.fronts), len(mcf.fronts))
    haus = [
        hausdorff(fa, fb) for fa, fb in zip(ac.fronts[:n], mcf.fronts[:n]) if not (fa.empty or fb.empty)
    ]
    r_orc = orc.at(ac.times)
    metrics = {
        "ac_oracle": float(np.max(np.abs(ac.metric - r_orc))),
        "mcf_oracle": float(np.max(np.abs(mcf.metric - orc.at(mcf.times)))),
        "ac_mcf_radius": float(np.max(np.abs(ac.metric[:n] - mcf.metric[:n]))),
        "window_end": end,
        "T_star_oracle": orc.T_star,
        "domain": L,
        "mcf_dx": dx,
        "max_abs_u": ac.max_abs,
    }
    return float(max(haus)) if haus else float("nan"), metrics


def _path_stability(cfg, base, eps):
    ref_mild = mollified_approximation(base, cfg.eps_ref, cfg.gamma)
    mild = mollified_approximation(base, eps, cfg.gamma)
    a0 = cfg.a0()
    tt = base.times <= cfg.T + 1e-12
    # a driven disk has radius at most R0 + max zeta, so only upward excursions need room
    L = max(cfg.R0 + a0 * max(0.0, float(np.max(base.values[tt]))) + 0.6, 2.0)
    g = uniform_grid(0.0, L, cfg.mcf_dx, dim=2)
    gap = path_stability_gap(circle_distance(g, cfg.R0), mild, ref_mild, cfg.T, alpha0=a0)
    return gap, {"domain": L, "eps_ref": cfg.eps_ref}


def _wave_validation(cfg, base, eps):
    a0 = cfg.a0()
    w = solve_wave(eps)
    return abs(w.c + a0 * eps), {"c": w.c, "residual": w.residual}


_SCENARIO_FN = {
    "ac_vs_oracle_1d": _ac_vs_oracle_1d,
    "ac_vs_mcf_2d": _ac_vs_mcf_2d,
    "mcf_vs_oracle_radial": _mcf_vs_oracle_radial,
    "path_stability": _path_stability,
    "wave_validation": _wave_validation,
}


def run_entry(cfg: ExperimentConfig, base: BrownianPath, eps: float) -> Entry:
    """One sweep member; solver and parameter errors become a failed entry."""
    t0 = time.perf_counter()
    try:
        gap, metrics = _SCENARIO_FN[cfg.scenario](cfg, base, eps)
    except StochacError as exc:
        return Entry(eps, None, time.perf_counter() - t0, "failed", {}, f"{type(exc).__name__}: {exc}")
    ok = math.isfinite(gap) and (cfg.gap_tol is None or gap <= cfg.gap_tol)
    status = "ok" if math.isfinite(gap) else "failed"
    if math.isfinite(gap) and not ok:
        metrics = dict(metrics, above_tolerance=True)
    return Entry(eps, gap if math.isfinite(gap) else None, time.perf_counter() - t0, status, metrics)


def _run_entry_star(args):
    return run_entry(*args)


def run_sweep(cfg: ExperimentConfig, jobs: int = 1) -> RunRecord:
    """Run every ``eps`` of ``cfg`` on one Brownian path built from ``cfg.seed``."""
    base = sample_brownian(cfg.seed, cfg.path_horizon, cfg.path_dt)
    rec = RunRecord(cfg.as_dict())
    tasks = [(cfg, base, eps) for eps in cfg.eps]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_entry_star, tasks))
    else:
        results = [run_entry(*t) for t in tasks]
    for entry in results:
        rec.append(entry)
    return rec


def measure_front_sign(eps: float = 0.04, gamma: float = 0.4, slope: float = 1.0) -> int:
    """Direction of the 1D front for the injected path ``B(t) = slope t``.

    Returns ``+1`` if the front moves with ``alpha0 B`` and ``-1`` if against
    it (inside taken as ``x > 0``).
    """
    dt = 1e-3
    base = brownian_from_values(slope * dt * np.arange(1001), dt)
    mild = mollified_approximation(base, eps, gamma)
    g = uniform_grid(-1.5, 1.5, eps / 4)
    u0 = well_prepared_init(plane_distance(g, 0.0), eps, mild)
    run = ac_run(u0, ACParams(eps), mild, 0.25, n_obs=5)
    moved = run.metric[-1] - run.metric[0]
    return int(np.sign(moved) * np.sign(slope))
