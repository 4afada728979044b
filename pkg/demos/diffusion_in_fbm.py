"""A diffusion pushed around by a rough (fBm) potential.

The displacement splits into a Brownian part and a drift part.  The drift part
is smoother than Brownian motion: its increments over time h scale like h^{(1+beta)/2}
with beta close to 1/2, so the fitted slope should sit near 3/4.

Run with ``python demos/diffusion_in_fbm.py``; under a minute with the sizes below.
"""
import numpy as np

from roughdrift.environment import Environment
from roughdrift.fbm import fbm_path
from roughdrift.holder import holder_exponent_fit
from roughdrift.sde import brownian_part_check, simulate_euler

seed = 3
profile = fbm_path(4.0, 4096, 0.45, seed)
print(f"sampled profile Holder fit: {holder_exponent_fit(profile):.3f} (target 0.45)")

# Mollify the profile so the Euler scheme sees a bounded drift, then simulate.
env = Environment.from_profile(profile, 1.0).mollified(64)
paths = simulate_euler(env, 0.0, 2.0**-14, 2000, seed, T=1.0, record_every=64)
print(f"{paths.X.shape[0]} paths, {int(paths.frozen.sum())} left the window")

hs = [2.0**-k for k in range(4, 9)]
rep = brownian_part_check(paths, hs)
print("\n     h     (E|X - B|^2)^1/2")
for h, m in zip(rep.h, rep.moments[2]):
    print(f"  {h:.5f}   {m:.3e}")
print(f"\nfitted slope {rep.slopes[2]:.3f}; Brownian motion alone would give 0.5")
print(f"log-log slope of the q=4 moment {rep.slopes[4]:.3f}")
