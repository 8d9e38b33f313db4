"""
Exact event-driven simulation of the SIS / SIR / STR Markov chains.

Transition rates are read off the ODE terms: infection (tweet) at
``beta/N * S * I`` and removal (retweet, or cure for SIS) at ``nu * I``.
STR uses the SIR transitions with ``T`` in place of ``I``.

Every replica draws from its own PCG64 stream seeded by hashing
``(seed, replica_index)`` through numpy's SeedSequence, so ensembles are
reproducible and replica order does not matter.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, StructuralError
from .models import ModelKind, ModelParams
from .ode import IntegratorConfig, integrate

RNG_ALGORITHM = "numpy PCG64, per-replica seed = SeedSequence([seed, replica]).generate_state(1, uint64)"

_BATCH = 4096


@dataclass(frozen=True)
class EnsembleConfig:
    n_total: int
    n_replicas: int
    seed: int
    t_span: tuple[float, float]
    sample_times: Optional[Sequence[float]] = None
    n_samples: int = 51

    def __post_init__(self):
        if int(self.n_total) != self.n_total or self.n_total < 2:
            raise DomainError("n_total must be an integer >= 2")
        if self.n_replicas < 1:
            raise DomainError("n_replicas must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        t0, t1 = map(float, self.t_span)
        if not t1 > t0:
            raise DomainError("t_span must be increasing")
        object.__setattr__(self, "t_span", (t0, t1))
        if self.sample_times is not None:
            ts = np.asarray(self.sample_times, dtype=float)
            if np.any(np.diff(ts) <= 0) or ts[0] < t0 or ts[-1] > t1:
                raise DomainError("sample_times must be increasing and inside t_span")
            object.__setattr__(self, "sample_times", tuple(ts))

    def times(self) -> np.ndarray:
        if self.sample_times is not None:
            return np.asarray(self.sample_times, dtype=float)
        return np.linspace(self.t_span[0], self.t_span[1], self.n_samples)

    def with_n(self, n_total: int) -> "EnsembleConfig":
        return EnsembleConfig(n_total, self.n_replicas, self.seed, self.t_span,
                              self.sample_times, self.n_samples)


@dataclass(frozen=True)
class EnsembleResult:
    model: ModelKind
    params: ModelParams
    n_total: int
    times: np.ndarray
    mean_path: np.ndarray          # mean compartment fractions, (n_samples, n_comp)
    ode_path: np.ndarray           # fluid-limit fractions on the same grid
    sup_norm_error: float
    per_replica_seeds: tuple[int, ...] = field(repr=False)


def replica_seed(seed: int, replica: int) -> int:
    ss = np.random.SeedSequence([int(seed), int(replica)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(replica_seed(seed, replica)))


def _check_kind(kind) -> ModelKind:
    kind = ModelKind.parse(kind)
    if kind not in (ModelKind.SIS, ModelKind.SIR, ModelKind.STR):
        raise StructuralError(f"no stochastic transitions defined for {kind.value}")
    return kind


def simulate_ctmc(kind, params: ModelParams, initial: Sequence[int],
                  sample_times: Sequence[float], rng: np.random.Generator,
                  t0: float = 0.0) -> np.ndarray:
    """One exact path, sampled (right-continuously) at ``sample_times``.

    ``initial`` are integer counts in the model's compartment order; the
    population is their sum, and ``params.n_total`` is ignored in favour of
    it. The chain starts at ``t0``. Returns an int array of shape
    ``(len(sample_times), n_compartments)``.
    """
    kind = _check_kind(kind)
    counts = [int(c) for c in initial]
    if len(counts) != len(kind.compartments):
        raise StructuralError(f"{kind.value} needs {len(kind.compartments)} counts")
    if any(c != v or c < 0 for c, v in zip(counts, initial)):
        raise DomainError("initial counts must be non-negative integers")
    n = sum(counts)
    if n < 1:
        raise DomainError("population must be positive")
    ts = np.asarray(sample_times, dtype=float)
    out = np.empty((ts.size, len(counts)), dtype=np.int64)

    infect_coef = params.beta / n
    nu = params.nu
    sis = kind is ModelKind.SIS
    s, i = counts[0], counts[1]
    r = 0 if sis else counts[2]

    t = float(t0)
    k = 0
    exps = rng.standard_exponential(_BATCH)
    unif = rng.random(_BATCH)
    j = 0
    while k < ts.size:
        a_inf = infect_coef * s * i
        a_rem = nu * i
        total = a_inf + a_rem
        if total <= 0.0:
            t_next = math.inf
        else:
            if j == _BATCH:
                exps = rng.standard_exponential(_BATCH)
                unif = rng.random(_BATCH)
                j = 0
            t_next = t + exps[j] / total
        while k < ts.size and ts[k] < t_next:
            out[k, 0], out[k, 1] = s, i
            if not sis:
                out[k, 2] = r
            k += 1
        if t_next == math.inf:
            break
        if unif[j] * total < a_inf:
            s -= 1
            i += 1
        else:
            i -= 1
            if sis:
                s += 1
            else:
                r += 1
        j += 1
        t = t_next
    return out


def integer_initial(kind, fractions: Sequence[float], n_total: int) -> list[int]:
    """Round fractions to counts; the first compartment absorbs the remainder."""
    kind = _check_kind(kind)
    fr = np.asarray(fractions, dtype=float)
    if fr.shape != (len(kind.compartments),):
        raise StructuralError(f"{kind.value} needs {len(kind.compartments)} fractions")
    if np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise DomainError("initial fractions must be non-negative and sum to 1")
    counts = [int(round(f * n_total)) for f in fr[1:]]
    first = n_total - sum(counts)
    if first < 0:
        raise DomainError("rounded initial counts exceed the population")
    return [first] + counts


def run_ensemble(kind, params: ModelParams, fractions: Sequence[float],
                 config: EnsembleConfig) -> EnsembleResult:
    """Average ``n_replicas`` paths and compare with the fluid-limit ODE."""
    kind = _check_kind(kind)
    n = int(config.n_total)
    counts = integer_initial(kind, fractions, n)
    times = config.times()
    acc = np.zeros((times.size, len(counts)))
    seeds = []
    for rep in range(config.n_replicas):
        sd = replica_seed(config.seed, rep)
        seeds.append(sd)
        rng = np.random.Generator(np.random.PCG64(sd))
        acc += simulate_ctmc(kind, params, counts, times, rng, t0=config.t_span[0])
    mean = acc / (config.n_replicas * n)

    ode_params = params.replace(n_total=1.0)
    start = np.asarray(counts, dtype=float) / n
    traj = integrate(kind, ode_params, start,
                     IntegratorConfig(config.t_span, sample_times=times,
                                      rel_tol=1e-10, abs_tol=1e-12))
    err = float(np.max(np.abs(mean - traj.values)))
    return EnsembleResult(kind, params, n, times, mean, traj.values, err, tuple(seeds))


def fluid_limit_check(kind, params: ModelParams, fractions: Sequence[float],
                      n_list: Sequence[int], config: EnsembleConfig) -> list[tuple[int, float]]:
    """Sup-norm distance between ensemble means and the ODE for each ``N``."""
    return [(int(n), run_ensemble(kind, params, fractions, config.with_n(int(n))).sup_norm_error)
            for n in n_list]


def ensemble_report(results: Sequence[EnsembleResult], seed: int) -> dict:
    """JSON-ready summary: model, params, N_list, errors, seeds, rng_algorithm."""
    if not results:
        raise DomainError("no ensemble results to report")
    first = results[0]
    return {
        "model": first.model.value,
        "params": first.params.to_dict(),
        "N_list": [r.n_total for r in results],
        "errors": [r.sup_norm_error for r in results],
        "seed": int(seed),
        "seeds": [list(r.per_replica_seeds) for r in results],
        "rng_algorithm": RNG_ALGORITHM,
    }


def ensemble_report_json(results: Sequence[EnsembleResult], seed: int) -> str:
    return json.dumps(ensemble_report(results, seed), indent=2, sort_keys=True)

