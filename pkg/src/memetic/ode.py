"""
Adaptive Dormand-Prince 5(4) integration of the compartmental models.

Steps are accepted when every component of the embedded error estimate is
below ``abs_tol + rel_tol*|y|``. Samples are produced from the scheme's
4th-order continuous extension, so requested sample times never shorten a
step. Peaks of the infective compartment (``I`` or ``T``) are located on the
same interpolant while stepping.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigurationError, DomainError, IntegratorFault, StiffnessError, StructuralError
from .models import ModelKind, ModelParams, StateLike, StateVector, derivative_function, state_array

# Dormand & Prince (1980), as tabulated by Hairer, Norsett & Wanner.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# 5th-order weights minus embedded 4th-order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
               -10690763975 / 1880347072, 701980252875 / 199316789632,
               -1453857185 / 822651844, 69997945 / 29380423])

_SAFETY = 0.9
_MAX_GROWTH = 5.0
_MIN_SHRINK = 0.2

PEAK_COMPARTMENT = {
    ModelKind.SIS: "I",
    ModelKind.SIR: "I",
    ModelKind.STR: "T",
    ModelKind.SEIZ: "T",
}


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration window, tolerances and sample schedule.

    ``abs_tol=None`` means ``1e-10 * n_total``; ``sample_times=None`` means
    ``n_samples`` evenly spaced points over ``t_span`` (endpoints included).
    """

    t_span: tuple[float, float]
    sample_times: Optional[Sequence[float]] = None
    rel_tol: float = 1e-8
    abs_tol: Optional[float] = None
    h_init: Optional[float] = None
    h_max: Optional[float] = None
    n_samples: int = 101
    max_steps: int = 1_000_000

    def __post_init__(self):
        t0, t1 = map(float, self.t_span)
        if not t1 > t0:
            raise ConfigurationError(f"t_span must be increasing, got {self.t_span}")
        object.__setattr__(self, "t_span", (t0, t1))
        if not self.rel_tol > 0:
            raise ConfigurationError("rel_tol must be positive")
        if self.abs_tol is not None and not self.abs_tol > 0:
            raise ConfigurationError("abs_tol must be positive")
        if self.sample_times is not None:
            ts = np.asarray(self.sample_times, dtype=float)
            if ts.ndim != 1 or ts.size == 0:
                raise ConfigurationError("sample_times must be a non-empty 1-d sequence")
            if np.any(np.diff(ts) <= 0):
                raise ConfigurationError("sample_times must be strictly increasing")
            slack = 1e-12 * (t1 - t0)
            if ts[0] < t0 - slack or ts[-1] > t1 + slack:
                raise ConfigurationError("sample_times must lie inside t_span")
            object.__setattr__(self, "sample_times", tuple(np.clip(ts, t0, t1)))
        elif self.n_samples < 2:
            raise ConfigurationError("n_samples must be at least 2")

    def times(self) -> np.ndarray:
        if self.sample_times is not None:
            return np.asarray(self.sample_times, dtype=float)
        return np.linspace(self.t_span[0], self.t_span[1], self.n_samples)

    def resolved_abs_tol(self, n_total: float) -> float:
        return self.abs_tol if self.abs_tol is not None else 1e-10 * n_total


class PeakEvent(NamedTuple):
    compartment: str
    time: float
    value: float


class PeakResult(NamedTuple):
    time: float
    value: float
    at_boundary: bool


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of one model run. Immutable once built."""

    model: ModelKind
    params: ModelParams
    labels: tuple[str, ...]
    times: np.ndarray
    values: np.ndarray
    peak_events: tuple[PeakEvent, ...] = ()
    n_steps: int = 0
    n_rejected: int = 0
    n_evals: int = 0

    @property
    def samples(self) -> list[StateVector]:
        return [StateVector(self.labels, v, float(t)) for t, v in zip(self.times, self.values)]

    def column(self, name: str) -> np.ndarray:
        if name not in self.labels:
            raise StructuralError(f"{self.model.value} has no compartment {name!r}")
        return self.values[:, self.labels.index(name)]

    @property
    def final(self) -> StateVector:
        return StateVector(self.labels, self.values[-1], float(self.times[-1]))

    def to_csv(self, fh=None) -> str:
        """Write ``t,<compartments>`` rows with 17 significant digits."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("t",) + self.labels)
        for t, row in zip(self.times, self.values):
            writer.writerow([_fmt(t)] + [_fmt(v) for v in row])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "model": self.model.value,
            "params": self.params.to_dict(),
            "labels": list(self.labels),
            "t": [float(t) for t in self.times],
            "values": {k: [float(v) for v in self.column(k)] for k in self.labels},
            "peak_events": [ev._asdict() for ev in self.peak_events],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(f, t0, y0, f0, rel_tol, abs_tol, span):
    scale = abs_tol + rel_tol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def _dense_coefficients(y0, y1, h, k):
    ydiff = y1 - y0
    bspl = h * k[0] - ydiff
    return (y0, ydiff, bspl, ydiff - h * k[6] - bspl, h * (_D @ k))


def _dense_eval(rc, theta):
    th1 = 1.0 - theta
    return rc[0] + theta * (rc[1] + th1 * (rc[2] + theta * (rc[3] + th1 * rc[4])))


def _dense_peak(rc, idx):
    """Maximum of component ``idx`` of the interpolant on ``theta`` in [0, 1]."""
    th = Polynomial([0.0, 1.0])
    th1 = 1.0 - th
    a, b, c, d, e = (float(r[idx]) for r in rc)
    poly = a + th * (b + th1 * (c + th * (d + th1 * e)))
    candidates = [0.0, 1.0]
    for root in poly.deriv().roots():
        if abs(root.imag) < 1e-12 and 0.0 <= root.real <= 1.0:
            candidates.append(float(root.real))
    values = [poly(c) for c in candidates]
    best = int(np.argmax(values))
    return candidates[best], float(values[best])


def integrate(kind, params: ModelParams, initial: StateLike, config: IntegratorConfig) -> Trajectory:
    """Integrate ``kind`` from ``initial`` over ``config.t_span``.

    Raises StiffnessError when the step falls below ``1e-12`` of the span and
    IntegratorFault when a compartment drops below ``-10*abs_tol`` or (for
    conserved models) the total drifts from ``N`` by more than ``10*abs_tol``.
    """
    kind = ModelKind.parse(kind)
    f = derivative_function(kind, params)
    y = state_array(kind, initial)
    labels = kind.compartments
    N = params.n_total
    t0, t1 = config.t_span
    span = t1 - t0
    rtol = config.rel_tol
    atol = config.resolved_abs_tol(N)
    floor = -10.0 * atol
    h_max = span if config.h_max is None else float(config.h_max)
    if not h_max > 0:
        raise ConfigurationError("h_max must be positive")

    if np.any(y < floor):
        raise DomainError(f"initial state has a negative compartment: {y}")

    def clip(v):
        # zero small undershoots; conserved models take the added mass back
        # from the largest compartment so the total is untouched
        if not np.any(v < 0):
            return v
        clipped = np.maximum(v, 0.0)
        if kind.conserved:
            clipped[np.argmax(clipped)] -= clipped.sum() - v.sum()
        return clipped

    y = clip(y)

    def check_sample(t, v):
        if np.any(v < floor):
            raise IntegratorFault(f"compartment below {floor:g} at t={t}: {v}")
        v = clip(v)
        if kind.conserved and abs(v.sum() - N) > 10.0 * atol:
            raise IntegratorFault(
                f"conservation breach at t={t}: sum={v.sum()!r}, N={N!r}")
        return v

    check_sample(t0, y)

    times = config.times()
    out = np.empty((times.size, y.size))
    next_sample = 0
    while next_sample < times.size and times[next_sample] <= t0:
        out[next_sample] = y
        next_sample += 1

    peak_name = PEAK_COMPARTMENT.get(kind)
    peak_idx = labels.index(peak_name) if peak_name else None
    peaks: list[PeakEvent] = []

    t = t0
    k = np.empty((7, y.size))
    k[0] = f(t, y)
    n_evals = 1
    if config.h_init is not None:
        h = float(config.h_init)
    else:
        h = _initial_step(f, t, y, k[0], rtol, atol, span)
        n_evals += 1
    h_min = 1e-12 * span
    n_steps = n_rejected = 0

    while t < t1:
        if n_steps + n_rejected >= config.max_steps:
            raise StiffnessError(f"step budget of {config.max_steps} exhausted at t={t}")
        h = min(h, h_max)
        last = t + h >= t1
        if last:
            h = t1 - t
        if h < h_min and not last:
            raise StiffnessError(f"step size {h:g} underflowed at t={t}")

        for s in range(1, 7):
            k[s] = f(t + _C[s] * h, y + h * (np.asarray(_A[s]) @ k[:s]))
        n_evals += 6
        y_new = y + h * (_B @ k)
        err_vec = h * (_E @ k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))

        if err > 1.0:
            n_rejected += 1
            h *= max(_MIN_SHRINK, _SAFETY * err ** -0.2)
            if h < h_min:
                raise StiffnessError(f"step size {h:g} underflowed at t={t}")
            continue

        t_new = t1 if last else t + h
        rc = _dense_coefficients(y, y_new, h, k)
        while next_sample < times.size and times[next_sample] <= t_new:
            ts = times[next_sample]
            v = y_new if ts >= t_new else _dense_eval(rc, (ts - t) / h)
            out[next_sample] = check_sample(ts, v)
            next_sample += 1

        if peak_idx is not None and k[0][peak_idx] > 0 >= k[6][peak_idx]:
            theta, value = _dense_peak(rc, peak_idx)
            peaks.append(PeakEvent(peak_name, t + theta * h, value))

        if np.any(y_new < floor):
            raise IntegratorFault(f"compartment below {floor:g} at t={t_new}: {y_new}")
        if np.any(y_new < 0):
            y_new = clip(y_new)
            k[6] = f(t_new, y_new)
            n_evals += 1
        t, y = t_new, y_new
        k[0] = k[6]
        n_steps += 1
        growth = _MAX_GROWTH if err == 0 else min(_MAX_GROWTH, _SAFETY * err ** -0.2)
        h *= max(_MIN_SHRINK, growth)

    return Trajectory(kind, params, labels, times, out, tuple(peaks),
                      n_steps=n_steps, n_rejected=n_rejected, n_evals=n_evals)


def find_peak(traj: Trajectory, compartment: str) -> PeakResult:
    """Global maximum of ``compartment`` over the samples.

    Interior maxima are refined with the parabola through the three
    bracketing samples; a maximum at either end is returned as-is with
    ``at_boundary=True``.
    """
    y = traj.column(compartment)
    t = traj.times
    i = int(np.argmax(y))
    if i == 0 or i == y.size - 1 or y.size < 3:
        return PeakResult(float(t[i]), float(y[i]), True)
    ts = t[i - 1:i + 2] - t[i]
    a, b, c = np.polyfit(ts, y[i - 1:i + 2], 2)
    if a >= 0:
        return PeakResult(float(t[i]), float(y[i]), False)
    tv = min(max(-b / (2 * a), ts[0]), ts[2])
    return PeakResult(float(t[i] + tv), float(c + tv * (b + a * tv)), False)
