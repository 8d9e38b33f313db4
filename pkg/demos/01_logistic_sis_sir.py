"""
Logistic, SIS and SIR dynamics
==============================

Integrate the three classical models, compare the logistic run with its
closed form, and check the SIS endpoints and the SIR final-size relation.
"""
import numpy as np

from memetic import IntegratorConfig, ModelParams, integrate
from memetic.models import critical_time, logistic_closed_form, sis_limits
from memetic.ode import find_peak

###############################################################################
# Logistic growth: one infective among 100, contact rate 0.1.
# The saturation time is when N - 1 accounts have the story.
p = ModelParams(beta=0.1, n_total=100)
tc = critical_time(p, 1.0)
traj = integrate("LogisticSI", p, [1.0], IntegratorConfig((0, tc), n_samples=9, rel_tol=1e-10))
for t, i in zip(traj.times, traj.column("I")):
    print(f"t={t:6.3f}  I={i:9.4f}  closed form={logistic_closed_form(p, 1.0, t):9.4f}")
print(f"saturation time T_c = {tc:.6f}")

###############################################################################
# SIS with beta = 2 nu settles at half the population infected.
p = ModelParams(beta=2.0, nu=1.0, n_total=1000)
traj = integrate("SIS", p, [990, 10], IntegratorConfig((0, 40), n_samples=5))
print("SIS endpoint", np.round(traj.values[-1], 6), "expected", sis_limits(p))

###############################################################################
# SIR: the epidemic peaks, then S_end obeys S0 exp(-beta R_end / (nu N)).
p = ModelParams(beta=3.0, nu=1.0)
traj = integrate("SIR", p, [0.99, 0.01, 0.0], IntegratorConfig((0, 40), n_samples=401))
peak = find_peak(traj, "I")
s_end, _, r_end = traj.values[-1]
print(f"SIR peak I={peak.value:.6f} at t={peak.time:.3f}")
print(f"S_end={s_end:.8f}  S0 exp(-beta R_end/nu)={0.99 * np.exp(-3.0 * r_end):.8f}")
