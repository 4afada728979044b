"""Adapted Riemann sums against pseudo-increments.

With Brownian increments and psi = B the limit is the Ito integral 1/2 (B_T^2 - T).
The sums form a Cauchy sequence in L^2 at a measurable rate.

Run with ``python demos/stochastic_young.py``.
"""
from roughdrift.experiments import run_experiment, resolve_config

name, cfg, seed = resolve_config({"experiment": "young", "n_reps": 2000, "reduce_pairs": 200})
outcome, elapsed = run_experiment(name, cfg, seed)
r = outcome.results
print(f"gap to the Ito value: {r['ito_gap']:.2e} +- {r['ito_gap_se']:.1e}")
print(f"fitted rate eta {r['eta_hat']:.3f}, 95% interval {r['eta_ci'][0]:.3f} .. {r['eta_ci'][1]:.3f}")
for c in outcome.criteria:
    print(f"  {'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
print(f"({elapsed:.1f}s)")
