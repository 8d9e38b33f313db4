"""
A travelling front of infection
===============================

A step of saturated density invades an uninfected region under diffusion
plus logistic growth. The measured speed is printed next to two reference
values, sqrt(2 d beta N) and the classical minimal speed 2 sqrt(d beta N).
"""
from memetic.pde import PdeConfig, front_position, front_speed, reference_speeds, run_pde, step

cfg = PdeConfig(domain_lo=0.0, domain_hi=120.0, n_cells=1200, d_diff=0.5, beta=1.0, t_span=(0.0, 40.0))
snaps = run_pde(cfg, step(5.0, 1.0), n_snapshots=41)

###############################################################################
# Position of the half-density level every five time units.
for snap in snaps[::5]:
    print(f"t={snap.time:5.1f}  front at x={front_position(cfg.x, snap.values, 0.5):7.3f}")

###############################################################################
# Speed from a straight-line fit over the middle half of the run. Pulled
# fronts approach the minimal speed from below, slowly.
speed = front_speed(snaps, cfg)
print(f"measured speed {speed:.4f}")
for name, value in reference_speeds(cfg.d_diff, cfg.beta, cfg.n_total).items():
    print(f"  {name:20s} {value:.4f}")
