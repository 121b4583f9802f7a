# Axis times of the outward walk: when does (m, 0) join the cluster?
# Run: python3 demos/05_axis_times.py

# %%
import numpy as np

from idla import KernelSpec, RandomStream, grow, lil_envelope, simulate_axis_times
from idla.analytics import axis_time_moments

# %%
# T_m is a sum of independent geometric variables; compare with real growth
# at small m.
m = 6
real = [next(p for p, s in grow(KernelSpec.outward(), 1000, seed).order_log if s == (m, 0)) for seed in range(200)]
model = [s.t for s in simulate_axis_times(m, 20000, RandomStream(1))]
mean, var = axis_time_moments(m)
print(f"m={m}: growth mean {np.mean(real):.1f}, model mean {np.mean(model):.1f}, exact {mean}")

# %%
# At m = 200 the moments are 80400 and 42906800.
m = 200
t = np.array([s.t for s in simulate_axis_times(m, 10000, RandomStream(2))])
mean, var = axis_time_moments(m)
print(f"m={m}: mean {t.mean():.0f} vs {mean}, variance {t.var(ddof=1):.4g} vs {var}")

# %%
# The iterated-logarithm band is wider than a few standard deviations.
lo, hi = lil_envelope(m)
print(f"band [{lo:.0f}, {hi:.0f}], fraction outside {np.mean((t < lo) | (t > hi)):.4f}")
