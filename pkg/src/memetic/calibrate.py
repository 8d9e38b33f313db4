"""
Fitting model parameters to observed tweet-count series.

Fits minimise the sum of squared residuals on the observed compartments
with a bounded Nelder-Mead simplex (scipy), integrating the model with
:func:`memetic.ode.integrate` at the observation times. Parameters are
searched in coordinates scaled by their starting values, so the stopping
rule "simplex diameter below ``xtol``" is relative.

Fitted rates are reported per day when the series is indexed in days.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, FitFailure, StructuralError
from .models import (PROBABILITY_NAMES, ModelKind, ModelParams, StateLike, StateVector,
                     reproduction_number, robustness_metric, state_array)
from .ode import IntegratorConfig, integrate

FIT_WINDOW_DAYS = 30
OBSERVATION_SPAN_DAYS = 350
RATE_BOUNDS = (0.0, 10.0)
PROBABILITY_BOUNDS = (0.0, 1.0)
DIFFUSIVITY_BOUNDS = (0.0, 1.0)

_PARAM_NAMES = tuple(f.name for f in fields(ModelParams))


@dataclass(frozen=True)
class ObservedSeries:
    """Observed values of some compartments at strictly increasing times."""

    times: np.ndarray
    values: Mapping[str, np.ndarray]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise DomainError("observation times must be strictly increasing (>= 2 points)")
        vals = {}
        for name, v in self.values.items():
            v = np.asarray(v, dtype=float)
            if v.shape != t.shape:
                raise StructuralError(f"series {name!r} has shape {v.shape}, expected {t.shape}")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise DomainError(f"series {name!r} must be finite and non-negative")
            vals[name] = v
        if not vals:
            raise StructuralError("no observed compartments")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", vals)

    @property
    def compartments(self) -> tuple[str, ...]:
        return tuple(self.values)

    def window(self, start: float, length: float = FIT_WINDOW_DAYS) -> "ObservedSeries":
        """Observations with ``start <= t <= start + length``."""
        mask = (self.times >= start) & (self.times <= start + length)
        return ObservedSeries(self.times[mask], {k: v[mask] for k, v in self.values.items()})

    def scaled(self, factor: float) -> "ObservedSeries":
        return ObservedSeries(self.times, {k: v * factor for k, v in self.values.items()})

    @classmethod
    def from_csv(cls, path) -> "ObservedSeries":
        """Read ``t,<compartment>...`` columns."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(x) for x in row] for row in reader if row]
        if not header or header[0] != "t":
            raise StructuralError("observed CSV must start with a 't' column")
        data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
        return cls(data[:, 0], {name: data[:, j] for j, name in enumerate(header) if j > 0})

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("t",) + self.compartments)
        for k, t in enumerate(self.times):
            writer.writerow([repr(float(t))] + [repr(float(self.values[c][k])) for c in self.compartments])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


@dataclass(frozen=True)
class FitResult:
    model: ModelKind
    params: ModelParams
    initial_state: StateVector
    loss: float
    n_evals: int
    n_iter: int
    converged: bool
    free_params: tuple[str, ...]
    metrics: Mapping[str, Optional[float]] = field(default_factory=dict)
    loss_history: tuple[float, ...] = field(default=(), repr=False)
    final_simplex: tuple[Mapping[str, float], ...] = field(default=(), repr=False)

    def value(self, name: str) -> float:
        if name in _PARAM_NAMES:
            return getattr(self.params, name)
        return self.initial_state[_state_name(name)]

    def to_dict(self) -> dict:
        return {
            "model": self.model.value,
            "params": self.params.to_dict(),
            "initial_state": self.initial_state.as_dict(),
            "free_params": list(self.free_params),
            "loss": self.loss,
            "n_evals": self.n_evals,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "metrics": dict(self.metrics),
            "rate_units": "per time unit of the observed series (days)",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _state_name(name: str) -> str:
    """``"T0"`` -> ``"T"``: free initial values are the compartment name plus 0."""
    if not name.endswith("0"):
        raise StructuralError(f"{name!r} is neither a parameter nor an initial value")
    return name[:-1]


def default_bounds(name: str, n_total: float) -> tuple[float, float]:
    if name in PROBABILITY_NAMES:
        return PROBABILITY_BOUNDS
    if name == "d_diff":
        return DIFFUSIVITY_BOUNDS
    if name == "n_total":
        return (1e-12, math.inf)
    if name in _PARAM_NAMES:
        return RATE_BOUNDS
    return (0.0, n_total)


def fit(kind, observed: ObservedSeries, free_params: Sequence[str], *,
        base_params: ModelParams, initial: StateLike,
        init_guess: Optional[Mapping[str, float]] = None,
        bounds: Optional[Mapping[str, tuple[float, float]]] = None,
        budget: int = 4000, loss: str = "absolute", xtol: float = 1e-8,
        initial_step: float = 0.05,
        initial_simplex: Optional[Sequence[Mapping[str, float]]] = None,
        rel_tol: float = 1e-10) -> FitResult:
    """Least-squares fit of ``free_params`` to ``observed``.

    ``free_params`` may name ModelParams fields or initial values written as
    compartment + ``0`` (``"T0"``). When any initial value is free, ``N`` is
    the sum of the initial state at each trial point. Trial points where
    integration fails score ``inf``; the fit fails only if all of them do.
    ``loss="relative"`` divides residuals by the observation (for count data).
    """
    kind = ModelKind.parse(kind)
    labels = kind.compartments
    free = tuple(free_params)
    if not free:
        raise StructuralError("nothing to fit")
    if len(set(free)) != len(free):
        raise StructuralError("duplicate free parameter")
    for name in free:
        if name not in _PARAM_NAMES and _state_name(name) not in labels:
            raise StructuralError(f"{name!r} is not a {kind.value} parameter or initial value")
    for name in observed.compartments:
        if name not in labels:
            raise StructuralError(f"observed compartment {name!r} not in {kind.value}")
    if loss not in ("absolute", "relative"):
        raise DomainError("loss must be 'absolute' or 'relative'")

    base_state = state_array(kind, initial)
    state_free = any(name not in _PARAM_NAMES for name in free)

    def assemble(vector):
        values = {k: float(v) for k, v in zip(free, vector)}
        y0 = base_state.copy()
        for name, v in values.items():
            if name not in _PARAM_NAMES:
                y0[labels.index(_state_name(name))] = v
        changes = {k: v for k, v in values.items() if k in _PARAM_NAMES}
        if state_free and kind.conserved:
            changes["n_total"] = float(y0.sum())
        return base_params.replace(**changes), y0

    guess = dict(init_guess or {})
    x0 = []
    for name in free:
        if name in guess:
            x0.append(float(guess[name]))
        elif name in _PARAM_NAMES:
            x0.append(float(getattr(base_params, name)))
        else:
            x0.append(float(base_state[labels.index(_state_name(name))]))
    x0 = np.asarray(x0)
    scale = np.where(np.abs(x0) > 0, np.abs(x0), 1.0)

    bnds = []
    for name in free:
        lo, hi = (bounds or {}).get(name, default_bounds(name, base_params.n_total))
        if not (math.isfinite(lo) and lo <= hi):
            raise DomainError(f"invalid bounds for {name}: {(lo, hi)}")
        bnds.append((lo, hi))
    lo_arr = np.array([b[0] for b in bnds])
    hi_arr = np.array([b[1] for b in bnds])
    if np.any(x0 < lo_arr) or np.any(x0 > hi_arr):
        raise DomainError("initial guess lies outside the bounds")

    t_obs = observed.times
    obs_idx = [labels.index(c) for c in observed.compartments]
    obs = np.column_stack([observed.values[c] for c in observed.compartments])
    weights = 1.0 / np.maximum(obs, 1e-300) if loss == "relative" else None
    cfg = IntegratorConfig((float(t_obs[0]), float(t_obs[-1])), sample_times=t_obs, rel_tol=rel_tol)

    history: list[float] = []
    best = [math.inf]

    def objective(z):
        x = np.clip(z * scale, lo_arr, hi_arr)
        try:
            params, y0 = assemble(x)
            traj = integrate(kind, params, y0, cfg)
        except DomainError:
            value = math.inf
        else:
            resid = traj.values[:, obs_idx] - obs
            if weights is not None:
                resid = resid * weights
            value = float(np.sum(resid * resid))
            if not math.isfinite(value):
                value = math.inf
        best[0] = min(best[0], value)
        history.append(best[0])
        return value

    if initial_simplex is not None:
        sim = np.array([[float(v[name]) for name in free] for v in initial_simplex]) / scale
        if sim.shape != (len(free) + 1, len(free)):
            raise StructuralError("initial_simplex needs len(free_params)+1 vertices")
    else:
        sim = [x0 / scale]
        for j in range(len(free)):
            vertex = x0 / scale
            step = initial_step
            if x0[j] + step * scale[j] > hi_arr[j]:
                step = -step
            vertex[j] += step
            sim.append(vertex)
        sim = np.array(sim)

    with np.errstate(invalid="ignore"):
        # inf - inf in scipy's fatol test while every vertex is still failing
        res = minimize(objective, sim[0], method="Nelder-Mead",
                       bounds=list(zip(lo_arr / scale, hi_arr / scale)),
                       options={"initial_simplex": sim, "xatol": xtol, "fatol": math.inf,
                                "maxfev": budget, "maxiter": budget})
    if not math.isfinite(best[0]):
        raise FitFailure("every trial point failed to integrate")

    x_best = np.clip(res.x * scale, lo_arr, hi_arr)
    params, y0 = assemble(x_best)
    final_sim = tuple({n: float(v) for n, v in zip(free, np.clip(row * scale, lo_arr, hi_arr))}
                      for row in res.final_simplex[0])
    result = FitResult(
        model=kind,
        params=params,
        initial_state=StateVector(labels, y0, float(t_obs[0])),
        loss=float(res.fun),
        n_evals=int(res.nfev),
        n_iter=int(res.nit),
        converged=bool(res.status == 0),
        free_params=free,
        loss_history=tuple(history),
        final_simplex=final_sim,
    )
    return _with_metrics(result)


def refit(observed: ObservedSeries, previous: FitResult, **kwargs) -> FitResult:
    """Restart a fit from the final simplex of ``previous``."""
    return fit(previous.model, observed, previous.free_params,
               base_params=previous.params, initial=previous.initial_state,
               initial_simplex=previous.final_simplex, **kwargs)


def _with_metrics(result: FitResult) -> FitResult:
    metrics: dict[str, Optional[float]] = {"beta": float(result.params.beta)}
    kind = result.model
    if kind in (ModelKind.SIS, ModelKind.SIR, ModelKind.STR) and result.params.nu > 0:
        metrics["R"] = reproduction_number(kind, result.params, result.initial_state["S"])
    if kind is ModelKind.SEIZ and result.params.rho + result.params.epsilon > 0:
        metrics["R_Rob"] = robustness_metric(result.params)
    return replace(result, metrics=metrics)


# ---------------------------------------------------------------------------
# Metric panel
# ---------------------------------------------------------------------------

def metric_panel(kind, result: FitResult, s0: Optional[float] = None,
                 robustness: Optional[bool] = None, require_converged: bool = True) -> dict:
    """``{"beta", "R", "R_Rob"}`` for one fit.

    ``R`` is ``None`` for SEIZ (no removal rate). Asking for ``R_Rob`` on a
    non-SEIZ fit raises StructuralError.
    """
    kind = ModelKind.parse(kind)
    if kind is not result.model:
        raise StructuralError(f"fit is {result.model.value}, not {kind.value}")
    if require_converged and not result.converged:
        raise DomainError("metric panel requested for a fit that did not converge")
    if robustness is None:
        robustness = kind is ModelKind.SEIZ
    if robustness and kind is not ModelKind.SEIZ:
        raise StructuralError("the robustness metric is defined for SEIZ only")
    s0 = result.initial_state["S"] if s0 is None else s0
    panel = {"beta": result.params.beta, "R": None}
    if kind is not ModelKind.SEIZ:
        panel["R"] = reproduction_number(kind, result.params, s0)
    if robustness:
        panel["R_Rob"] = robustness_metric(result.params)
    return panel


_PANEL_COLUMNS = (("beta", "beta", "{:.3g}"), ("R", "R", "{:.4g}"), ("R_Rob", "R robust", "{:.4g}"))


def _cell(value, fmt):
    return "-" if value is None else fmt.format(value)


def render_panel(rows: Mapping[str, Mapping[str, Optional[float]]], model_label: str = "STRZ") -> str:
    """Aligned text table: one row per label, columns beta / R / R robust."""
    cols = [c for c in _PANEL_COLUMNS if any(c[0] in r for r in rows.values())]
    header1 = [""] + ["" if key == "beta" else model_label for key, _, _ in cols]
    header2 = [""] + [title for _, title, _ in cols]
    body = [[label] + [_cell(r.get(key), fmt) for key, _, fmt in cols] for label, r in rows.items()]
    table = [header1, header2] + body
    widths = [max(len(row[j]) for row in table) for j in range(len(table[0]))]
    lines = []
    for row in table:
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def panel_csv(rows: Mapping[str, Mapping[str, Optional[float]]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "beta", "R", "R_Rob"])
    for label, r in rows.items():
        writer.writerow([label] + ["" if r.get(k) is None else repr(float(r[k]))
                                   for k in ("beta", "R", "R_Rob")])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Rates of change of R
# ---------------------------------------------------------------------------

class RDerivatives(NamedTuple):
    first: float
    second: Optional[float]


def r_derivatives(window_r: Sequence[tuple[float, float]], spacing: Optional[float] = None,
                  nonuniform: bool = False) -> RDerivatives:
    """Window-averaged ``dR/dt`` and ``d2R/dt2`` from successive estimates of R.

    First derivative: central differences inside, one-sided at the ends.
    Second: the three-point stencil at interior points (``None`` with fewer
    than three windows). Spacing may vary by at most 1% unless
    ``nonuniform=True``; ``spacing``, if given, must match the data.
    """
    pts = np.asarray(window_r, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise DomainError("need at least two (time, R) windows")
    t, r = pts[:, 0], pts[:, 1]
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise DomainError("window times must be strictly increasing")
    h = float(dt.mean())
    uneven = float(np.max(np.abs(dt - h))) > 0.01 * h
    if spacing is not None and abs(h - spacing) > 0.01 * spacing:
        raise DomainError(f"window spacing {h:g} does not match the stated {spacing:g}")
    if uneven and not nonuniform:
        raise DomainError("window spacing varies by more than 1%; pass nonuniform=True")

    if nonuniform:
        d1 = np.gradient(r, t) if r.size > 2 else np.full(2, (r[1] - r[0]) / dt[0])
    else:
        d1 = np.gradient(r, h)
    first = float(d1.mean())
    if r.size < 3:
        return RDerivatives(first, None)
    if nonuniform:
        h1, h2 = dt[:-1], dt[1:]
        d2 = 2.0 * ((r[2:] - r[1:-1]) / h2 - (r[1:-1] - r[:-2]) / h1) / (h1 + h2)
    else:
        d2 = (r[:-2] - 2.0 * r[1:-1] + r[2:]) / h ** 2
    return RDerivatives(first, float(d2.mean()))


# ---------------------------------------------------------------------------
# Power-law seeding
# ---------------------------------------------------------------------------

def power_law_prefit(times: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Fit ``values ~ a * t**k`` by least squares in log-log space; returns ``(a, k)``.

    Points with non-positive time or value are dropped.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = (t > 0) & (v > 0)
    if keep.sum() < 2:
        raise DomainError("power-law pre-fit needs two positive points")
    k, log_a = np.polyfit(np.log(t[keep]), np.log(v[keep]), 1)
    return float(math.exp(log_a)), float(k)


def power_law_seed(times: Sequence[float], values: Sequence[float], nu: float,
                   s0_fraction: float = 1.0) -> float:
    """Starting ``beta`` from the early-growth segment.

    Early on ``T' / T = beta*s0/N - nu``; a power law ``a*t**k`` has
    log-derivative ``k/t``, taken at the segment's midpoint.
    """
    t = np.asarray(times, dtype=float)
    _, k = power_law_prefit(t, values)
    t_mid = 0.5 * (t[t > 0].min() + t.max())
    return max((nu + k / t_mid) / s0_fraction, 0.0)
