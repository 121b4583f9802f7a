# Gambler's ruin on layers, and why the origin shortcut is needed for p > 1/2.
# Run: python3 demos/03_ruin_and_shortcut.py

# %%
from fractions import Fraction

from idla import Cluster, FirstOf, HitLayer, HitSite, KernelSpec, RandomStream, settle_independent, walk_until
from idla.analytics import chi2_critical, chi_square_two_sample
from idla.lattice import ORIGIN, layer_position, layer_site, norm1
from idla.walk import avoidance_bound, hit_origin_before_layer_prob

# %%
# The layer index of a mixture walk is a birth-death chain, so the chance
# of reaching the origin before layer n has a closed form.
p, l, n = Fraction(3, 4), 2, 5
rng = RandomStream(3)
spec = KernelSpec.mixture(p)
walks = 20000
hits = sum(
    walk_until(spec, layer_site(l, rng.below(4 * l)), FirstOf(HitSite(ORIGIN), HitLayer(n)), rng).stop_site == ORIGIN
    for _ in range(walks)
)
print(f"closed form {hit_origin_before_layer_prob(p, l, n):.6f}, Monte Carlo {hits / walks:.6f}")
print(f"avoidance bound for a site on L_{l}: {avoidance_bound(p, l, n):.4f}")

# %%
# Escaping a full D_10 at p = 3/4 takes about half a million steps; the
# shortcut replaces it with a uniform site of L_11.  Both give the same law.
d10 = Cluster.diamond(10)
naive = settle_independent(spec, d10, {ORIGIN: 1000}, 1, "off")
short = settle_independent(spec, d10, {ORIGIN: 1000}, 2, "on")


def histogram(sites):
    h = [0] * 44
    for s in sites:
        assert norm1(s) == 11
        h[layer_position(s)] += 1
    return h


stat, df = chi_square_two_sample(histogram(naive), histogram(short))
print(f"naive vs shortcut: chi2={stat:.1f} on {df} df (critical {chi2_critical(df):.2f})")
