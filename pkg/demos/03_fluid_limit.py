"""
From random events to the mean-field ODE
========================================

Average many exact SIR event simulations and watch the ensemble mean
approach the ODE solution as the population grows.
"""
from memetic import ModelParams
from memetic.stochastic import EnsembleConfig, fluid_limit_check, replica_rng, simulate_ctmc

p = ModelParams(beta=3.0, nu=1.0)

###############################################################################
# One path for a small population, sampled every two time units.
path = simulate_ctmc("SIR", p, [95, 5, 0], [0, 2, 4, 6, 8, 10], replica_rng(20140808, 0))
print("one path (S, I, R):")
print(path)

###############################################################################
# Sup-norm distance between ensemble mean and ODE, 200 replicas each.
cfg = EnsembleConfig(n_total=100, n_replicas=200, seed=20140808, t_span=(0, 12), n_samples=49)
for n, err in fluid_limit_check("SIR", p, [0.95, 0.05, 0.0], [100, 1000, 10000], cfg):
    print(f"N={n:6d}  sup-norm error {err:.5f}")
