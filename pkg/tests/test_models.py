import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memetic.errors import DomainError, StructuralError
from memetic.models import (ModelKind, ModelParams, StateVector, critical_time, logistic_closed_form,
                            reproduction_number, rhs, robustness_metric, sis_limits)
from memetic.ode import IntegratorConfig, integrate

from oracles import bisect, central_difference, logistic_reference

SEIZ = dict(b=0.2, rho=0.1, epsilon=0.15, l_prob=0.5, p_prob=0.5)


def test_compartment_counts():
    counts = {k: len(k.compartments) for k in ModelKind}
    assert counts == {ModelKind.LOGISTIC_SI: 1, ModelKind.SIS: 2, ModelKind.SIR: 3,
                      ModelKind.STR: 3, ModelKind.SEIZ: 4}
    assert ModelKind.SEIZ.compartments == ("S", "T", "R", "Z")
    assert ModelKind.parse("str") is ModelKind.STR
    assert ModelKind.parse("logistic_si") is ModelKind.LOGISTIC_SI
    with pytest.raises(StructuralError):
        ModelKind.parse("SEIRS")


@pytest.mark.parametrize("bad", [dict(beta=-1), dict(beta=1, nu=-0.1), dict(beta=1, l_prob=1.5),
                                 dict(beta=1, p_prob=-0.1), dict(beta=1, n_total=0),
                                 dict(beta=math.nan)])
def test_params_validation(bad):
    with pytest.raises(DomainError):
        ModelParams(**bad)


def test_seiz_only_params_rejected_elsewhere():
    p = ModelParams(beta=1, nu=1, rho=0.2)
    with pytest.raises(StructuralError):
        rhs("SIR", p, [1, 0, 0])
    rhs("SEIZ", p, [1, 0, 0, 0])


def test_mean_contact_interval():
    assert ModelParams(beta=4.0).mean_contact_interval == 0.25


def test_sis_equilibrium():
    p = ModelParams(beta=2, nu=1, n_total=1000)
    assert np.array_equal(rhs("SIS", p, (500, 500)), [0.0, 0.0])


def test_sir_disease_free_is_stationary():
    p = ModelParams(beta=2.5, nu=0.7, n_total=10)
    assert np.all(rhs("SIR", p, [6, 0, 4]) == 0)


def test_seiz_no_spreaders_is_stationary():
    p = ModelParams(beta=0.5, n_total=100, **SEIZ)
    assert np.all(rhs("SEIZ", p, {"S": 100}) == 0)


def test_rhs_shape_and_sign_errors():
    p = ModelParams(beta=1, nu=1)
    with pytest.raises(StructuralError):
        rhs("SIR", p, [1, 0])
    with pytest.raises(StructuralError):
        rhs("SIR", p, {"S": 1, "T": 0})
    with pytest.raises(DomainError):
        rhs("SIR", p, [1.1, -0.1, 0])


def test_state_vector():
    sv = StateVector(("S", "I"), [3, 1], time=2.0)
    assert sv["I"] == 1 and sv.total == 4 and sv.as_dict() == {"S": 3.0, "I": 1.0}
    with pytest.raises(StructuralError):
        StateVector(("S", "I"), [1, 2, 3])


rates = st.floats(0.0, 5.0)
probs = st.floats(0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(["SIS", "SIR", "STR", "SEIZ"]), beta=rates, nu=rates, b=rates,
       rho=rates, eps=rates, l=probs, p=probs, n=st.floats(0.5, 1e6),
       fr=st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
def test_conserved_derivatives_sum_to_zero(kind, beta, nu, b, rho, eps, l, p, n, fr):
    kind = ModelKind.parse(kind)
    extra = dict(b=b, rho=rho, epsilon=eps, l_prob=l, p_prob=p) if kind is ModelKind.SEIZ else {}
    params = ModelParams(beta=beta, nu=0.0 if kind is ModelKind.SEIZ else nu, n_total=n, **extra)
    w = np.asarray(fr[:len(kind.compartments)]) + 1e-3
    state = n * w / w.sum()
    d = rhs(kind, params, state)
    scale = max(1.0, float(np.abs(d).max()))
    assert abs(d.sum()) <= 16 * np.finfo(float).eps * scale


def test_logistic_closed_form_examples():
    assert logistic_closed_form(ModelParams(beta=3.7, n_total=100), 50, 0.0) == 50
    assert logistic_closed_form(ModelParams(beta=0.1, n_total=100), 1, 1e3) == pytest.approx(100, rel=1e-15)
    with pytest.raises(DomainError):
        logistic_closed_form(ModelParams(beta=1, n_total=10), 10, 1.0)
    with pytest.raises(DomainError):
        logistic_closed_form(ModelParams(beta=1, n_total=10), 0, 1.0)


def test_logistic_closed_form_matches_independent_evaluation():
    p = ModelParams(beta=0.1, n_total=100)
    for t in np.linspace(0, 2, 21):
        assert logistic_closed_form(p, 1.0, t) == pytest.approx(logistic_reference(1.0, 100, 0.1, t), rel=1e-12)


def test_logistic_closed_form_monotone():
    p = ModelParams(beta=0.3, n_total=50)
    values = logistic_closed_form(p, 2.0, np.linspace(0, 2, 500))
    assert np.all(np.diff(values) >= 0)


@settings(max_examples=100, deadline=None)
@given(beta=st.floats(1e-3, 1.0), n=st.floats(3.0, 1e4), frac=st.floats(0.001, 0.999),
       tau=st.floats(0.05, 5.0))
def test_logistic_closed_form_satisfies_ode(beta, n, frac, tau):
    p = ModelParams(beta=beta, n_total=n)
    i0 = frac * n
    t = tau / (beta * n)
    h = 1e-4 * t
    lhs = central_difference(lambda s: logistic_closed_form(p, i0, s), t, h)
    i = logistic_closed_form(p, i0, t)
    rhs_val = beta * i * (n - i)
    assert lhs == pytest.approx(rhs_val, rel=1e-6, abs=1e-9 * beta * n * n)


def test_critical_time_frozen_value():
    # bisection on an independent evaluation of the closed form gives 0.9190239700269185
    p = ModelParams(beta=0.1, n_total=100)
    oracle = bisect(lambda t: logistic_reference(1.0, 100, 0.1, t) - 99, 0.0, 5.0)
    assert oracle == pytest.approx(0.9190239700269185, abs=1e-14)
    assert critical_time(p, 1.0) == pytest.approx(0.9190239700269185, rel=1e-13)
    assert critical_time(p, 1.0) == pytest.approx(math.log(99 * 99) / 10, rel=1e-15)
    assert logistic_closed_form(p, 1.0, critical_time(p, 1.0)) == pytest.approx(99, abs=1e-9)


def test_critical_time_scaling_and_limits():
    p = ModelParams(beta=0.1, n_total=100)
    assert critical_time(p.replace(beta=0.2), 3.0) == pytest.approx(critical_time(p, 3.0) / 2, rel=1e-14)
    assert critical_time(p, 99 - 1e-9) == pytest.approx(1e-9 * (1 / 99 + 1 / 1) / 10, rel=1e-5)
    with pytest.raises(DomainError):
        critical_time(p, 99)
    with pytest.raises(DomainError):
        critical_time(ModelParams(beta=1, n_total=2), 0.5)
    with pytest.raises(DomainError):
        critical_time(ModelParams(beta=0, n_total=100), 1)


@settings(max_examples=100, deadline=None)
@given(beta=st.floats(1e-4, 10), n=st.floats(3, 1e6), frac=st.floats(1e-4, 0.99))
def test_critical_time_inverts_closed_form(beta, n, frac):
    p = ModelParams(beta=beta, n_total=n)
    i0 = frac * (n - 1)
    tc = critical_time(p, i0)
    assert abs(logistic_closed_form(p, i0, tc) - (n - 1)) < 1e-9 * n


def test_sis_limits_examples():
    assert sis_limits(ModelParams(beta=2, nu=1, n_total=1000)) == (500, 500)
    assert sis_limits(ModelParams(beta=1.5, nu=1.5, n_total=70)) == (70, 0)
    assert sis_limits(ModelParams(beta=1, nu=2, n_total=300)) == (300, 0)


@pytest.mark.parametrize("beta,nu", [(2.0, 1.0), (0.9, 0.3), (0.5, 1.0)])
def test_sis_limits_match_long_integration(beta, nu):
    p = ModelParams(beta=beta, nu=nu, n_total=1000)
    t_end = 50 / min(beta, nu)
    traj = integrate("SIS", p, [990, 10], IntegratorConfig((0, t_end), n_samples=5))
    assert np.allclose(traj.values[-1], sis_limits(p), atol=1e-4 * 1000)


def test_reproduction_number():
    assert reproduction_number("SIS", ModelParams(beta=1.3, nu=1.3)) == 1.0
    assert reproduction_number("SIR", ModelParams(beta=3, nu=2, n_total=50), 50) == 1.5
    assert reproduction_number("STR", ModelParams(beta=3, nu=2, n_total=50), 25) == 0.75
    p = ModelParams(beta=0.8, nu=0.3, n_total=7)
    assert reproduction_number("SIR", p, 7) == reproduction_number("SIS", p)
    with pytest.raises(DomainError):
        reproduction_number("SIS", ModelParams(beta=1))
    with pytest.raises(DomainError):
        reproduction_number("SIR", ModelParams(beta=1, nu=1, n_total=5), 6)
    with pytest.raises(StructuralError):
        reproduction_number("SEIZ", ModelParams(beta=1, nu=1))


def test_robustness_metric():
    p = ModelParams(beta=0.5, n_total=1, **SEIZ)
    assert robustness_metric(p) == pytest.approx(1.4, rel=1e-15)
    assert robustness_metric(p.replace(p_prob=1.0, l_prob=1.0)) == 0.0
    with pytest.raises(DomainError):
        robustness_metric(p.replace(rho=0.0, epsilon=0.0))


@settings(max_examples=100, deadline=None)
@given(beta=st.floats(0, 5), b=st.floats(0, 5), rho=st.floats(0.01, 5), eps=st.floats(0.01, 5),
       l=probs, p=probs, c=st.floats(1e-3, 1e3))
def test_robustness_metric_homogeneous_degree_zero(beta, b, rho, eps, l, p, c):
    base = ModelParams(beta=beta, b=b, rho=rho, epsilon=eps, l_prob=l, p_prob=p)
    scaled = base.replace(beta=c * beta, b=c * b, rho=c * rho, epsilon=c * eps)
    assert robustness_metric(scaled) == pytest.approx(robustness_metric(base), rel=1e-12, abs=1e-300)
