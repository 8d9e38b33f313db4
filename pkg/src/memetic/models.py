"""
Compartmental information-diffusion models.

Every model is a right-hand side ``f(state) -> d(state)/dt`` plus whatever
closed-form results exist for it. Nothing in this module integrates.

Compartment order is fixed per model and used by every serializer:

=========== =====================
LogisticSI  ``I`` (``S = N - I``)
SIS         ``S, I``
SIR         ``S, I, R``
STR         ``S, T, R``
SEIZ        ``S, T, R, Z``
=========== =====================

In SEIZ the ``R`` compartment is the delayed class: users who received the
message and will (re)tweet later, fed by both adopters and skeptics.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .errors import DomainError, StructuralError


class ModelKind(enum.Enum):
    LOGISTIC_SI = "LogisticSI"
    SIS = "SIS"
    SIR = "SIR"
    STR = "STR"
    SEIZ = "SEIZ"

    @classmethod
    def parse(cls, value: Union[str, "ModelKind"]) -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value.lower() == key or kind.name.lower().replace("_", "") == key:
                return kind
        raise StructuralError(f"unknown model kind {value!r}")

    @property
    def compartments(self) -> tuple[str, ...]:
        return _COMPARTMENTS[self]

    @property
    def conserved(self) -> bool:
        """True when the compartments sum to ``n_total`` at all times."""
        return self is not ModelKind.LOGISTIC_SI


_COMPARTMENTS = {
    ModelKind.LOGISTIC_SI: ("I",),
    ModelKind.SIS: ("S", "I"),
    ModelKind.SIR: ("S", "I", "R"),
    ModelKind.STR: ("S", "T", "R"),
    ModelKind.SEIZ: ("S", "T", "R", "Z"),
}

SEIZ_ONLY = ("b", "rho", "epsilon", "l_prob", "p_prob")
RATE_NAMES = ("beta", "nu", "b", "rho", "epsilon")
PROBABILITY_NAMES = ("l_prob", "p_prob")


@dataclass(frozen=True)
class ModelParams:
    """Rate constants and probabilities for every model.

    Rates are per unit time. ``beta`` is the contact (tweet) rate, ``nu`` the
    cure (retweet) rate. ``b``, ``rho``, ``epsilon``, ``l_prob`` and
    ``p_prob`` belong to SEIZ only; ``d_diff`` to the reaction-diffusion
    equation only.
    """

    beta: float
    nu: float = 0.0
    b: float = 0.0
    rho: float = 0.0
    epsilon: float = 0.0
    l_prob: float = 0.0
    p_prob: float = 0.0
    d_diff: float = 0.0
    n_total: float = 1.0

    def __post_init__(self):
        for name in RATE_NAMES + ("d_diff",):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be a finite non-negative rate, got {value}")
        for name in PROBABILITY_NAMES:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if not (math.isfinite(self.n_total) and self.n_total > 0):
            raise DomainError(f"n_total must be positive, got {self.n_total}")

    def check(self, kind: ModelKind) -> None:
        """Raise if a SEIZ-only parameter is set for another model."""
        if kind is ModelKind.SEIZ:
            return
        used = [name for name in SEIZ_ONLY if getattr(self, name) != 0.0]
        if used:
            raise StructuralError(f"{kind.value} does not use {', '.join(used)}")

    @property
    def mean_contact_interval(self) -> float:
        """Average node-to-node time, approximated as ``1/beta``."""
        if self.beta == 0:
            return math.inf
        return 1.0 / self.beta

    def replace(self, **changes) -> "ModelParams":
        values = asdict(self)
        values.update(changes)
        return ModelParams(**values)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StateVector:
    """Compartment populations at one instant, in the model's fixed order."""

    labels: tuple[str, ...]
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.labels),):
            raise StructuralError(
                f"state has shape {values.shape}, expected ({len(self.labels)},)")
        object.__setattr__(self, "values", values)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.labels.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in zip(self.labels, self.values)}

    @property
    def total(self) -> float:
        return float(self.values.sum())


StateLike = Union[StateVector, Mapping[str, float], Sequence[float], np.ndarray]


def state_array(kind: ModelKind, state: StateLike) -> np.ndarray:
    """Coerce a state given as StateVector, mapping or sequence to an array."""
    labels = kind.compartments
    if isinstance(state, StateVector):
        if state.labels != labels:
            raise StructuralError(f"state labels {state.labels} do not match {kind.value} {labels}")
        return state.values.copy()
    if isinstance(state, Mapping):
        extra = set(state) - set(labels)
        if extra:
            raise StructuralError(f"{kind.value} has no compartment(s) {sorted(extra)}")
        return np.array([float(state.get(k, 0.0)) for k in labels])
    arr = np.asarray(state, dtype=float).reshape(-1)
    if arr.shape != (len(labels),):
        raise StructuralError(
            f"{kind.value} expects {len(labels)} compartments {labels}, got {arr.shape[0]}")
    return arr


def make_state(kind: ModelKind, state: StateLike, time: float = 0.0) -> StateVector:
    return StateVector(kind.compartments, state_array(kind, state), time)


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------

def derivative_function(kind: ModelKind, params: ModelParams) -> Callable[[float, np.ndarray], np.ndarray]:
    """Return an unchecked ``f(t, y)`` for the integrators.

    Conserved models compute every inter-compartment flux once and add it to
    the source and subtract it from the sink, so the entries sum to zero up
    to rounding.
    """
    kind = ModelKind.parse(kind)
    params.check(kind)
    beta, nu, N = params.beta, params.nu, params.n_total

    if kind is ModelKind.LOGISTIC_SI:
        def f(t, y):
            i = y[0]
            return np.array([beta * i * (N - i)])
    elif kind is ModelKind.SIS:
        def f(t, y):
            s, i = y
            net = beta / N * s * i - nu * i
            return np.array([-net, net])
    elif kind in (ModelKind.SIR, ModelKind.STR):
        def f(t, y):
            s, i, _ = y
            infect = beta / N * s * i
            remove = nu * i
            return np.array([-infect, infect - remove, remove])
    else:
        b, rho, eps = params.b, params.rho, params.epsilon
        p, l = params.p_prob, params.l_prob

        def f(t, y):
            s, tw, r, z = y
            adopt = beta / N * s * tw
            skeptic = b / N * s * z
            s_to_t = p * adopt
            s_to_r = (1.0 - p) * adopt + (1.0 - l) * skeptic
            s_to_z = l * skeptic
            r_to_t = rho / N * r * tw + eps * r
            return np.array([
                -(s_to_t + s_to_r + s_to_z),
                s_to_t + r_to_t,
                s_to_r - r_to_t,
                s_to_z,
            ])
    return f


def rhs(kind: ModelKind, params: ModelParams, state: StateLike,
        neg_tol: float | None = None) -> np.ndarray:
    """Time derivative of ``state`` under ``kind``.

    Raises StructuralError on a dimension mismatch and DomainError when a
    compartment is more negative than ``neg_tol`` (default ``1e-9 * N``).
    """
    kind = ModelKind.parse(kind)
    y = state_array(kind, state)
    tol = 1e-9 * params.n_total if neg_tol is None else neg_tol
    if np.any(y < -tol):
        raise DomainError(f"negative compartment in state {y}")
    return derivative_function(kind, params)(0.0, y)


# ---------------------------------------------------------------------------
# Closed forms and scalar metrics
# ---------------------------------------------------------------------------

def logistic_closed_form(params: ModelParams, i0: float, t):
    """Solution of ``dI/dt = beta*I*(N - I)`` with ``I(0) = i0``.

    Accepts scalar or array ``t``.
    """
    N, beta = params.n_total, params.beta
    if not 0 < i0 < N:
        raise DomainError(f"i0 must lie in (0, N={N}), got {i0}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be non-negative")
    out = i0 * N / (i0 + (N - i0) * np.exp(-beta * N * t))
    return float(out) if out.ndim == 0 else out


def critical_time(params: ModelParams, i0: float) -> float:
    """Time at which the logistic solution reaches ``N - 1``."""
    N, beta = params.n_total, params.beta
    if not N > 2:
        raise DomainError(f"critical time needs N > 2, got {N}")
    if not 0 < i0 < N - 1:
        raise DomainError(f"i0 must lie in (0, N-1), got {i0}")
    if not beta > 0:
        raise DomainError("critical time needs beta > 0")
    return math.log((N - 1) * (N - i0) / i0) / (beta * N)


def sis_limits(params: ModelParams) -> tuple[float, float]:
    """Long-time ``(S, I)`` of the SIS model."""
    N, beta, nu = params.n_total, params.beta, params.nu
    if beta > nu:
        return nu * N / beta, (beta - nu) * N / beta
    return N, 0.0


def reproduction_number(kind: ModelKind, params: ModelParams, s0: float | None = None) -> float:
    """``beta/nu`` for SIS, ``beta*s0/(nu*N)`` for SIR and STR.

    ``s0`` defaults to ``N`` (fully susceptible start).
    """
    kind = ModelKind.parse(kind)
    if params.nu <= 0:
        raise DomainError("reproduction number needs nu > 0")
    if kind is ModelKind.SIS:
        return params.beta / params.nu
    if kind in (ModelKind.SIR, ModelKind.STR):
        N = params.n_total
        s0 = N if s0 is None else s0
        if not 0 < s0 <= N:
            raise DomainError(f"s0 must lie in (0, N], got {s0}")
        return params.beta * s0 / (params.nu * N)
    raise StructuralError(f"no reproduction number defined for {kind.value}")


def robustness_metric(params: ModelParams) -> float:
    """Influx/efflux ratio of the SEIZ delayed compartment.

    Values above 1 read as news-like spreading, values well below 1 as
    rumor-like.
    """
    out_rate = params.rho + params.epsilon
    if out_rate <= 0:
        raise DomainError("robustness metric needs rho + epsilon > 0")
    influx = (1.0 - params.p_prob) * params.beta + (1.0 - params.l_prob) * params.b
    return influx / out_rate


def sir_final_size_residual(params: ModelParams, s0: float, s_end: float, r_end: float) -> float:
    """``s_end - s0*exp(-beta*r_end/(nu*N))``; zero on the exact final state."""
    return s_end - s0 * math.exp(-params.beta * r_end / (params.nu * params.n_total))


def sir_final_size(params: ModelParams, s0: float, r0: float = 0.0) -> float:
    """Solve the final-size relation for ``R(inf)`` by bracketed root finding."""
    from scipy.optimize import brentq

    N = params.n_total
    k = params.beta / (params.nu * N)

    def g(r_inf):
        return N - r_inf - s0 * math.exp(-k * (r_inf - r0))

    lo, hi = N - s0, N
    if g(hi) >= 0:
        return hi
    return brentq(g, lo, hi, xtol=1e-14 * N, rtol=4 * np.finfo(float).eps)
