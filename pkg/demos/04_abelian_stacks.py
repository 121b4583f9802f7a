# Card stacks: the final cluster does not depend on the order of moves.
# Run: python3 demos/04_abelian_stacks.py

# %%
from fractions import Fraction

from idla import CardStacks, KernelSpec, abelian_run, diamond_volume, grow, grow_stopped, monotone_couple
from idla.lattice import ORIGIN, norm1

spec = KernelSpec.mixture(Fraction(1, 2))
stacks = CardStacks(2024, spec)

# %%
# Four schedulers on the same stacks: identical final sets and odometers.
config = {ORIGIN: 40, (2, 1): 9, (-1, -3): 5}
runs = {s: abelian_run(config, stacks, s) for s in ("fifo", "lifo", "random", "lexicographic")}
first = runs["fifo"]
print("schedulers agree:", all(r == first for r in runs.values()))
print("sites:", len(first.final), "cards burned:", sum(first.odometer.values()))

# %%
# Sequential growth driven by the same stacks is one more schedule.
c = grow(spec, 54, stacks=stacks)
print("sequential growth matches:", c.sites() == set(abelian_run({ORIGIN: 54}, stacks).final))

# %%
# More particles never shrink the cluster.
small, big, ok = monotone_couple({ORIGIN: 20}, {ORIGIN: 30, (1, 1): 4}, stacks)
print(f"{len(small)} sites inside {len(big)}: {ok}")

# %%
# Stopped process: walks also freeze on layer n.  Every particle is either
# frozen or settled strictly inside.
n = 12
res = grow_stopped(spec, n, stacks=stacks)
inside = sum(1 for z in res.cluster.sites() if norm1(z) < n)
print(f"frozen {sum(res.frozen_counts.values())} + inside {inside} = {diamond_volume(n)}")
print("S within A:", res.cluster.sites() <= grow(spec, diamond_volume(n), stacks=stacks).sites())
