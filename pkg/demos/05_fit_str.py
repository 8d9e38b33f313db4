"""
Fitting the tweet model to a series
===================================

Generate a noisy tweet series from known rates, fit the rates back, report
the metric panel and the rate of change of R between two windows.
"""
import numpy as np

from memetic import IntegratorConfig, ModelParams, integrate
from memetic.calibrate import ObservedSeries, fit, metric_panel, r_derivatives, render_panel

days = np.arange(0.0, 61.0)
truth = ModelParams(beta=0.4, nu=0.1)
clean = integrate("STR", truth, [0.99, 0.01, 0.0],
                  IntegratorConfig((0, 60), sample_times=days, rel_tol=1e-10)).column("T")
noisy = clean * (1 + 0.02 * np.random.default_rng(7).standard_normal(clean.size))

###############################################################################
# Start from a deliberately poor guess.
res = fit("STR", ObservedSeries(days, {"T": noisy}), ["beta", "nu"],
          base_params=ModelParams(beta=0.3, nu=0.15), initial=[0.99, 0.01, 0.0])
print(f"beta={res.params.beta:.4f}  nu={res.params.nu:.4f}  loss={res.loss:.3e}  "
      f"evaluations={res.n_evals}")
print(render_panel({"synthetic": metric_panel("STR", res)}, "STR"))

###############################################################################
# Two monthly estimates of R give a first derivative per day.
d = r_derivatives([(0, 1.000), (30, 1.036)], spacing=30)
print(f"dR/dt = {d.first * 1e3:.2f} x 1e-3 per day")
