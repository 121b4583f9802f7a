# Growing clusters and measuring how far they stray from the diamond.
# Run: python3 demos/02_growth_and_shape.py  (writes PGM images to demos/out/)

# %%
import time
from fractions import Fraction
from pathlib import Path

from idla import KernelSpec, diamond_volume, fluctuation_metrics, grow, render_pgm, theorem_envelopes

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)
n = 80

# %%
# Stronger inward bias gives a rounder cluster.  For p > 1/2 the walks at
# the origin of a full diamond jump straight to the next layer.
for p in (Fraction(0), Fraction(1, 2), Fraction(3, 4)):
    t0 = time.perf_counter()
    c = grow(KernelSpec.mixture(p), diamond_volume(n), 7)
    rep = fluctuation_metrics(c, n)
    env = theorem_envelopes(n, p)
    print(f"p={p}: delta_in={rep.delta_in} delta_out={rep.delta_out} "
          f"envelope=[{env.inner:.1f}, {env.outer:.1f}] ({time.perf_counter() - t0:.2f}s)")
    (out / f"cluster_p{p.numerator}_{p.denominator}.pgm").write_bytes(render_pgm(c, "order"))

# %%
# Layer profile around n for the p = 1/2 cluster: full inside, thin tail outside.
c = grow(KernelSpec.mixture(Fraction(1, 2)), diamond_volume(n), 7)
rep = fluctuation_metrics(c, n)
for j in range(-6, 6):
    print(f"layer n{j:+d}: {rep.Z(j):4d} of {4 * (n + j)}")
