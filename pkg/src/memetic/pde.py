"""
Bounded 1-D logistic reaction-diffusion, ``I_t = d*I_xx + beta*I*(N - I)``.

Cell-centred finite volumes on ``[domain_lo, domain_hi]`` with zero-flux
(Neumann) walls, second-order central differences in space and forward
Euler in time. The reaction term is used exactly as written above, so
``beta`` carries units of 1/(count*time); with ``N = 1`` it is a plain rate.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, MeasurementError


@dataclass(frozen=True)
class PdeConfig:
    domain_lo: float
    domain_hi: float
    n_cells: int
    d_diff: float
    beta: float
    n_total: float = 1.0
    t_span: tuple[float, float] = (0.0, 1.0)
    cfl_safety: float = 0.4

    def __post_init__(self):
        if not self.domain_hi > self.domain_lo:
            raise ConfigurationError("domain_hi must exceed domain_lo")
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise ConfigurationError(f"n_cells must be an integer >= 8, got {self.n_cells}")
        if self.d_diff < 0 or self.beta < 0:
            raise ConfigurationError("d_diff and beta must be non-negative")
        if not self.n_total > 0:
            raise ConfigurationError("n_total must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigurationError("cfl_safety must lie in (0, 1]")
        t0, t1 = map(float, self.t_span)
        if not t1 > t0:
            raise ConfigurationError("t_span must be increasing")
        object.__setattr__(self, "t_span", (t0, t1))

    @property
    def dx(self) -> float:
        return (self.domain_hi - self.domain_lo) / self.n_cells

    @property
    def x(self) -> np.ndarray:
        """Cell-centre coordinates."""
        return self.domain_lo + (np.arange(self.n_cells) + 0.5) * self.dx

    def max_stable_dt(self) -> float:
        """Largest time step allowed by the diffusive and reactive limits."""
        limits = [math.inf]
        if self.d_diff > 0:
            limits.append(self.dx ** 2 / (2 * self.d_diff))
        if self.beta > 0:
            limits.append(1.0 / (self.beta * self.n_total))
        return self.cfl_safety * min(limits)


@dataclass(frozen=True)
class Field:
    values: np.ndarray
    time: float

    @property
    def mass(self) -> float:
        return float(self.values.sum())


# ---------------------------------------------------------------------------
# Initial profiles
# ---------------------------------------------------------------------------

Profile = Union[Callable[[np.ndarray], np.ndarray], Sequence[float], np.ndarray, Mapping]


def uniform(level: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: np.full_like(x, float(level))


def gaussian_bump(center: float, width: float, amplitude: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: amplitude * np.exp(-0.5 * ((x - center) / width) ** 2)


def step(edge: float, level: float, side: str = "left") -> Callable[[np.ndarray], np.ndarray]:
    """``level`` on one side of ``edge``, zero on the other."""
    if side not in ("left", "right"):
        raise ConfigurationError("side must be 'left' or 'right'")
    if side == "left":
        return lambda x: np.where(x < edge, float(level), 0.0)
    return lambda x: np.where(x > edge, float(level), 0.0)


def profile_from_spec(spec: Mapping) -> Callable[[np.ndarray], np.ndarray]:
    """Build a profile from ``{"kind": "uniform"|"gaussian"|"step", ...}``."""
    spec = dict(spec)
    kind = spec.pop("kind")
    builders = {"uniform": uniform, "gaussian": gaussian_bump,
                "gaussian_bump": gaussian_bump, "step": step}
    if kind not in builders:
        raise ConfigurationError(f"unknown profile kind {kind!r}")
    return builders[kind](**spec)


def initial_field(config: PdeConfig, profile: Profile) -> Field:
    if isinstance(profile, Mapping):
        profile = profile_from_spec(profile)
    if callable(profile):
        values = np.asarray(profile(config.x), dtype=float)
    else:
        values = np.asarray(profile, dtype=float)
    if values.shape != (config.n_cells,):
        raise ConfigurationError(f"profile has shape {values.shape}, expected ({config.n_cells},)")
    if np.any(values < 0) or np.any(values > config.n_total * (1 + 1e-12)):
        raise ConfigurationError("initial profile must lie in [0, n_total]")
    return Field(values.copy(), config.t_span[0])


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

def _laplacian(u: np.ndarray, dx: float) -> np.ndarray:
    # ghost cells mirror the wall cells: zero flux through both walls
    padded = np.concatenate(([u[0]], u, [u[-1]]))
    return (padded[:-2] - 2.0 * u + padded[2:]) / dx ** 2


def step_field(config: PdeConfig, field: Field, dt: Optional[float] = None) -> Field:
    """Advance ``field`` by one forward-Euler step of length ``dt``."""
    limit = config.max_stable_dt()
    if dt is None:
        dt = limit
    if not 0 < dt <= limit * (1 + 1e-12):
        raise ConfigurationError(f"dt={dt:g} violates the stability limit {limit:g}")
    u = field.values
    growth = config.d_diff * _laplacian(u, config.dx) + config.beta * u * (config.n_total - u)
    return Field(u + dt * growth, field.time + dt)


def run_pde(config: PdeConfig, initial_profile: Profile,
            snapshot_times: Optional[Sequence[float]] = None,
            n_snapshots: int = 11, dt: Optional[float] = None) -> list[Field]:
    """Step from ``t_span[0]`` to ``t_span[1]`` and return snapshots.

    The step is shrunk so that every snapshot time is hit exactly. The
    first snapshot is the initial field when ``t_span[0]`` is requested.
    """
    t0, t1 = config.t_span
    if snapshot_times is None:
        snapshot_times = np.linspace(t0, t1, n_snapshots)
    targets = np.asarray(snapshot_times, dtype=float)
    if np.any(np.diff(targets) <= 0) or targets[0] < t0 or targets[-1] > t1 * (1 + 1e-12) + 1e-12:
        raise ConfigurationError("snapshot_times must be increasing and inside t_span")
    dt_max = config.max_stable_dt() if dt is None else float(dt)
    if dt is not None and dt > config.max_stable_dt() * (1 + 1e-12):
        raise ConfigurationError(f"dt={dt:g} violates the stability limit {config.max_stable_dt():g}")

    field = initial_field(config, initial_profile)
    snaps: list[Field] = []
    t_prev = t0
    for target in targets:
        gap = target - t_prev
        if gap > 0:
            n = max(1, math.ceil(gap / dt_max - 1e-9))
            h = gap / n
            u, dx = field.values, config.dx
            d, beta, N = config.d_diff, config.beta, config.n_total
            for _ in range(n):
                u = u + h * (d * _laplacian(u, dx) + beta * u * (N - u))
            field = Field(u, float(target))
        snaps.append(Field(field.values.copy(), float(target)))
        t_prev = target
    return snaps


# ---------------------------------------------------------------------------
# Front tracking
# ---------------------------------------------------------------------------

def front_position(x: np.ndarray, values: np.ndarray, threshold: float) -> Optional[float]:
    """Right-most position where ``values`` crosses ``threshold`` downwards.

    Linear interpolation between cell centres; ``None`` if no crossing.
    """
    above = values >= threshold
    idx = np.nonzero(above[:-1] & ~above[1:])[0]
    if idx.size == 0:
        return None
    i = idx[-1]
    v0, v1 = values[i], values[i + 1]
    return float(x[i] + (v0 - threshold) / (v0 - v1) * (x[i + 1] - x[i]))


def front_speed(snapshots: Sequence[Field], config: PdeConfig, level: float = 0.5,
                margin_cells: int = 4) -> float:
    """Least-squares speed of the ``level*N`` level set.

    Uses the central half of the snapshots (first and last quarter dropped).
    Raises MeasurementError when the front is missing or within
    ``margin_cells`` of a wall inside that window.
    """
    if not 0 < level < 1:
        raise MeasurementError("level must lie in (0, 1)")
    n = len(snapshots)
    lo, hi = n // 4, n - n // 4
    window = snapshots[lo:hi]
    if len(window) < 2:
        raise MeasurementError("need at least two snapshots in the measurement window")
    x = config.x
    threshold = level * config.n_total
    edge = margin_cells * config.dx
    times, positions = [], []
    for snap in window:
        pos = front_position(x, snap.values, threshold)
        if pos is None:
            raise MeasurementError(f"no front at t={snap.time}")
        if pos < config.domain_lo + edge or pos > config.domain_hi - edge:
            raise MeasurementError(f"front reached the boundary at t={snap.time}")
        times.append(snap.time)
        positions.append(pos)
    slope, _ = np.polyfit(np.asarray(times), np.asarray(positions), 1)
    return float(slope)


def reference_speeds(d_diff: float, beta: float, n_total: float = 1.0) -> dict[str, float]:
    """Two reference front speeds for comparison with a measured one.

    ``sqrt_2d_beta_n`` is ``sqrt(2*d*beta*N)``; ``fisher_kpp_minimal`` is the
    classical minimal travelling-wave speed ``2*sqrt(d*beta*N)``.
    """
    return {
        "sqrt_2d_beta_n": math.sqrt(2 * d_diff * beta * n_total),
        "fisher_kpp_minimal": 2 * math.sqrt(d_diff * beta * n_total),
    }


def snapshots_to_csv(snapshots: Sequence[Field], config: PdeConfig, fh=None) -> str:
    """First row: cell centres (leading ``x`` label). Then ``t,<values>`` rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x"] + [f"{v:.16e}" for v in config.x])
    for snap in snapshots:
        writer.writerow([f"{snap.time:.16e}"] + [f"{v:.16e}" for v in snap.values])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text
