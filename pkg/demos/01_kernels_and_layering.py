# Layered walks: exact transition rows and the layering axioms.
# Run: python3 demos/01_kernels_and_layering.py

# %%
from fractions import Fraction

from idla import KernelSpec, transitions, validate_uniform_layering, walk_until, HitLayer, RandomStream
from idla.analytics import chi2_critical, chi_square_uniform
from idla.lattice import ORIGIN, layer_position

# %%
# Rows are exact fractions in the order stay, E, N, W, S.
for spec in (KernelSpec.outward(), KernelSpec.mixture(Fraction(3, 4)), KernelSpec.reflected()):
    print(spec.label())
    for site in [(0, 0), (3, 0), (2, 1)]:
        row = ", ".join(f"{t}:{w}" for t, w in transitions(spec, site))
        print(f"  {site}: {row}")

# %%
# The checker works in rational arithmetic, so a pass is a proof up to kmax.
for spec in (KernelSpec.mixture(0), KernelSpec.mixture(Fraction(1, 2)), KernelSpec.reflected()):
    print(validate_uniform_layering(spec, 40).to_text(), end="")

# %%
# The simple random walk is not layered; the first witness is on layer 2.
report = validate_uniform_layering(KernelSpec.srw(), 40)
print(report.to_text().splitlines()[1])

# %%
# A consequence: the first site hit on a layer is uniform over that layer.
spec = KernelSpec.mixture(Fraction(1, 2))
rng = RandomStream(1)
counts = [0] * 20
for _ in range(20000):
    counts[layer_position(walk_until(spec, ORIGIN, HitLayer(5), rng).stop_site)] += 1
stat, df = chi_square_uniform(counts)
print(f"first hits of L_5: chi2={stat:.1f} on {df} df (critical {chi2_critical(df):.2f})")
