"""Cluster growth: sequential internal DLA and the card-stack (abelian) engine.

Sequential runs release particles one at a time; particle ``i`` walks until
it first stands on an unoccupied site and settles there.  Randomness comes
either from a per-particle stream keyed by ``(master seed, i)`` or from shared
card stacks, where the ``t``-th card at ``x`` is a pure function of
``(stack seed, x, t)``.  Stack-driven sequential runs are one particular
complete sequence of legal moves, so they reproduce :func:`abelian_run`
exactly, odometer included.
"""
from __future__ import annotations

import heapq
import math
import os
from collections import deque
from collections.abc import Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import _jit
from .kernels import Family, KernelSpec, site_from_draw
from .lattice import ORIGIN, Site, check_radius, diamond_sites, diamond_volume, layer_size
from .rng import RandomStream, as_stream, card_draw
from .walk import DEFAULT_STEP_CAP, StepCapExceeded, jit_table, klimit

__all__ = [
    "Cluster",
    "CardStacks",
    "StoppedResult",
    "AbelianResult",
    "InvariantViolation",
    "BoundingRadiusExceeded",
    "MoveBudgetExceeded",
    "grow",
    "grow_stopped",
    "grow_extended",
    "abelian_run",
    "monotone_couple",
    "normalize_starts",
    "initial_radius",
    "replica_map",
    "settle_independent",
]

ParticleConfig = Mapping  # Site -> particle count


class InvariantViolation(AssertionError):
    pass


class BoundingRadiusExceeded(RuntimeError):
    pass


class MoveBudgetExceeded(RuntimeError):
    pass


class Cluster:
    """Occupied sites of a growing aggregate.

    Occupancy is a uint8 bitmap over the square ``[-R, R]^2``; ``layer_counts``
    and ``inner_full_radius`` are maintained incrementally as sites are added.
    ``order_log`` lists ``(particle index, site)`` in settlement order.
    """

    def __init__(self, radius: int = 8):
        radius = check_radius(max(int(radius), 1))
        self.radius = radius
        self.grid = np.zeros((2 * radius + 1, 2 * radius + 1), dtype=np.uint8)
        self.layer_counts = np.zeros(2 * radius + 1, dtype=np.int64)
        # inner_full_radius, size, scratch, steps, shortcut used
        self.meta = np.array([-1, 0, 0, 0, 0], dtype=np.int64)
        self._chunks: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self.odometer: dict[Site, int] | None = None

    # -- construction -------------------------------------------------
    @classmethod
    def diamond(cls, n: int, radius: int | None = None) -> "Cluster":
        """``D_n`` fully occupied, particle indices following layer order."""
        c = cls(radius if radius is not None else n + 8)
        sites = list(diamond_sites(n))
        c.add_many([s.x for s in sites], [s.y for s in sites])
        return c

    @classmethod
    def from_sites(cls, sites, particles=None) -> "Cluster":
        sites = [Site(int(x), int(y)) for x, y in sites]
        R = max((max(abs(x), abs(y)) for x, y in sites), default=0)
        c = cls(R + 1)
        c.add_many([s.x for s in sites], [s.y for s in sites], particles)
        return c

    def copy(self) -> "Cluster":
        c = Cluster.__new__(Cluster)
        c.radius = self.radius
        c.grid = self.grid.copy()
        c.layer_counts = self.layer_counts.copy()
        c.meta = self.meta.copy()
        c._chunks = list(self._chunks)
        c.odometer = None if self.odometer is None else dict(self.odometer)
        return c

    # -- mutation -----------------------------------------------------
    def ensure_radius(self, r: int) -> None:
        """Enlarge the bitmap (at least doubling) so it covers ``[-r, r]^2``."""
        if r <= self.radius:
            return
        new = check_radius(max(r, 2 * self.radius))
        off = new - self.radius
        grid = np.zeros((2 * new + 1, 2 * new + 1), dtype=np.uint8)
        grid[off:off + self.grid.shape[0], off:off + self.grid.shape[1]] = self.grid
        counts = np.zeros(2 * new + 1, dtype=np.int64)
        counts[: self.layer_counts.shape[0]] = self.layer_counts
        self.grid, self.layer_counts, self.radius = grid, counts, new

    def add(self, site, particle: int | None = None) -> None:
        x, y = int(site[0]), int(site[1])
        if site in self:
            raise InvariantViolation(f"site {(x, y)} is already occupied")
        self.ensure_radius(max(abs(x), abs(y)))
        if particle is None:
            particle = self.size
        _jit._add_site(self.grid, self.radius, self.layer_counts, self.meta, x, y)
        self._chunks.append(
            (np.array([x], dtype=np.int64), np.array([y], dtype=np.int64), np.array([particle], dtype=np.int64))
        )

    def add_many(self, xs, ys, particles=None) -> None:
        """Occupy sites in the given order (vectorised :meth:`add`)."""
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        ps = np.arange(self.size, self.size + len(xs)) if particles is None else particles
        ps = np.asarray(ps, dtype=np.int64)
        if len(xs) == 0:
            return
        self.ensure_radius(int(max(np.abs(xs).max(), np.abs(ys).max())))
        before = self.size
        dup = _jit.add_many(self.grid, self.radius, self.layer_counts, self.meta, xs, ys)
        done = self.size - before
        self._append(xs[:done], ys[:done], ps[:done])
        if dup >= 0:
            raise InvariantViolation(f"site {(int(xs[dup]), int(ys[dup]))} is already occupied")

    def _append(self, xs, ys, ps) -> None:
        if len(xs):
            self._chunks.append((xs.copy(), ys.copy(), ps.copy()))

    # -- queries ------------------------------------------------------
    def __contains__(self, site) -> bool:
        x, y = site
        R = self.radius
        return -R <= x <= R and -R <= y <= R and bool(self.grid[x + R, y + R])

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        xs, ys, _ = self.order_arrays()
        return (Site(int(x), int(y)) for x, y in zip(xs, ys))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cluster):
            return NotImplemented
        return self.sites() == other.sites()

    __hash__ = None

    @property
    def size(self) -> int:
        return int(self.meta[1])

    @property
    def inner_full_radius(self) -> int:
        """Largest ``a`` with ``D_a`` fully occupied; -1 if the origin is empty."""
        return int(self.meta[0])

    @property
    def steps(self) -> int | None:
        """Total walk steps taken while growing; None once the shortcut was used."""
        return None if self.meta[4] else int(self.meta[3])

    def order_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self._chunks:
            e = np.zeros(0, dtype=np.int64)
            return e, e, e
        if len(self._chunks) > 1:
            merged = tuple(np.concatenate([c[i] for c in self._chunks]) for i in range(3))
            self._chunks = [merged]
        return self._chunks[0]

    @property
    def order_log(self) -> list[tuple[int, Site]]:
        xs, ys, ps = self.order_arrays()
        return [(int(p), Site(int(x), int(y))) for x, y, p in zip(xs, ys, ps)]

    def sites(self) -> set[Site]:
        return set(self)

    def layer_count(self, k: int) -> int:
        if k < 0 or k >= self.layer_counts.shape[0]:
            return 0
        return int(self.layer_counts[k])

    @property
    def max_norm(self) -> int:
        nz = np.flatnonzero(self.layer_counts)
        return int(nz[-1]) if nz.size else -1

    def contains_diamond(self, r: float) -> bool:
        """True if ``D_r`` (all sites with norm <= r) is occupied; vacuous for r < 0."""
        return math.floor(r) <= self.inner_full_radius

    def within_diamond(self, r: float) -> bool:
        return self.max_norm <= math.floor(r)

    def check_invariants(self) -> None:
        """Recompute every incrementally maintained quantity and compare."""
        R = self.radius
        xs, ys = np.nonzero(self.grid)
        xs = xs.astype(np.int64) - R
        ys = ys.astype(np.int64) - R
        counts = np.bincount(np.abs(xs) + np.abs(ys), minlength=self.layer_counts.shape[0])
        if not np.array_equal(counts, self.layer_counts):
            raise InvariantViolation("layer counts disagree with the occupied sites")
        ifr = -1
        while ifr + 1 < counts.shape[0] and counts[ifr + 1] == layer_size(ifr + 1):
            ifr += 1
        if ifr != self.inner_full_radius:
            raise InvariantViolation(f"inner_full_radius {self.inner_full_radius} != recomputed {ifr}")
        ox, oy, _ = self.order_arrays()
        if len(ox) != len(xs) or self.size != len(xs):
            raise InvariantViolation("order log length disagrees with the occupied count")
        if len(set(zip(ox.tolist(), oy.tolist()))) != len(ox):
            raise InvariantViolation("order log has repeated sites")

    def __repr__(self) -> str:
        return f"Cluster(size={self.size}, inner_full_radius={self.inner_full_radius}, max_norm={self.max_norm})"


@dataclass(frozen=True)
class CardStacks:
    """Infinite card stacks, one per site, generated lazily from ``seed``.

    The ``t``-th card at ``x`` has law ``transitions(spec, x)`` and depends
    only on ``(seed, x, t)``.  ``overrides`` replaces the top of chosen stacks
    with explicit labels; cards beyond an override fall back to the seed.
    """

    seed: int
    spec: KernelSpec
    overrides: Mapping = field(default_factory=dict)

    def card(self, x, t: int) -> Site:
        x = Site(int(x[0]), int(x[1]))
        forced = self.overrides.get(x)
        if forced is not None and t < len(forced):
            return Site(*forced[t])
        return site_from_draw(self.spec, x, card_draw(self.seed, x.x, x.y, t))


class StoppedResult(NamedTuple):
    cluster: Cluster
    frozen_counts: dict


class AbelianResult(NamedTuple):
    final: dict
    odometer: dict


def normalize_starts(starts) -> list[tuple[Site, int]]:
    """Sorted ``(site, count)`` pairs; an int means that many particles at the origin."""
    if isinstance(starts, (int, np.integer)):
        items = [(ORIGIN, int(starts))]
    else:
        items = [(Site(int(s[0]), int(s[1])), int(c)) for s, c in dict(starts).items()]
    for _, c in items:
        if c < 0:
            raise ValueError("particle counts must be nonnegative")
    return sorted((s, c) for s, c in items if c > 0)


def initial_radius(n_particles: int, offset: int = 0) -> int:
    """Bitmap radius for ``n_particles`` released near the origin.

    The radius ``n`` with ``v_n >= n_particles`` plus the outer envelope
    ``20 sqrt(n log n)`` and a margin of 8.
    """
    n = max(0, math.ceil((math.sqrt(max(2 * n_particles - 1, 1)) - 1) / 2))
    while diamond_volume(n) < n_particles:
        n += 1
    env = math.ceil(20 * math.sqrt(n * math.log(n))) if n >= 2 else 0
    return offset + n + env + 8


def _shortcut_flag(spec: KernelSpec, shortcut: str, stacks) -> bool:
    if shortcut not in ("on", "off", "auto"):
        raise ValueError("shortcut must be 'on', 'off' or 'auto'")
    if shortcut == "off":
        return False
    if shortcut == "auto":
        return stacks is None and spec.family is Family.MIXTURE and spec.p > 0.5
    if not spec.layered:
        raise ValueError(f"shortcut needs a uniformly layered kernel, got {spec.label()}")
    if stacks is not None:
        raise ValueError("shortcut cannot be combined with card stacks")
    return True


class _Engine:
    """Drives :func:`idla._jit.grow_kernel` in chunks, enlarging the bitmap on demand."""

    chunk = 1 << 16

    def __init__(self, spec, cluster, seed, stacks, shortcut, step_cap, stop_layer=-1,
                 debug=False, progress=None):
        self.spec = spec
        self.cluster = cluster
        self.seed = np.uint64(seed & ((1 << 64) - 1))
        self.stacks = stacks
        self.shortcut = shortcut
        self.step_cap = step_cap
        self.stop_layer = stop_layer
        self.debug = debug
        self.progress = progress
        if stacks is not None and stacks.overrides:
            raise ValueError("the sequential engine cannot replay stacks with explicit overrides")
        self.odometer = self._blank(np.int64) if stacks is not None else np.zeros((1, 1), np.int64)
        self.frozen = self._blank(np.int64) if stop_layer >= 0 else np.zeros((1, 1), np.int64)
        self._check_limit()

    def _blank(self, dtype):
        return np.zeros_like(self.cluster.grid, dtype=dtype)

    def _check_limit(self):
        if 2 * self.cluster.radius + 2 >= klimit(self.spec):
            raise BoundingRadiusExceeded(
                f"radius {self.cluster.radius} too large for p denominator {self.spec.p.denominator}"
            )

    def _regrid(self, r):
        old_R = self.cluster.radius
        self.cluster.ensure_radius(r)
        off = self.cluster.radius - old_R
        live = [("odometer", self.stacks is not None), ("frozen", self.stop_layer >= 0)]
        for name, used in live:
            if used:
                arr = getattr(self, name)
                new = self._blank(np.int64)
                new[off:off + arr.shape[0], off:off + arr.shape[1]] = arr
                setattr(self, name, new)
        self._check_limit()

    def run(self, starts_x: np.ndarray, starts_y: np.ndarray, first: int) -> None:
        total = len(starts_x)
        fam, pn, pd = self.spec.jit_code()
        tab, T = jit_table(self.spec)
        chunk = 1000 if (self.debug or self.progress) else self.chunk
        result = np.zeros(4, dtype=np.int64)
        pos = 0
        while pos < total:
            count = min(chunk, total - pos)
            out_x = np.empty(count, dtype=np.int64)
            out_y = np.empty(count, dtype=np.int64)
            out_p = np.empty(count, dtype=np.int64)
            c = self.cluster
            c.meta[2] = 0
            status = _jit.grow_kernel(
                tab, T, fam, pn, pd, c.grid, c.radius, c.layer_counts, c.meta,
                starts_x[pos:pos + count], starts_y[pos:pos + count], first + pos, count,
                self.seed, self.stacks is not None, self.odometer, self.shortcut,
                self.step_cap, self.stop_layer, self.frozen, out_x, out_y, out_p, result,
            )
            n = int(c.meta[2])
            c._append(out_x[:n], out_y[:n], out_p[:n])
            if status == _jit.DONE:
                pos += count
            elif status == _jit.OFF_GRID:
                pidx, x, y = int(result[1]), int(result[2]), int(result[3])
                self._regrid(max(abs(x), abs(y)) + 8)
                c.add(Site(x, y), pidx)
                pos = pidx - first + 1
            elif status == _jit.STEP_CAP:
                raise StepCapExceeded(
                    f"particle {int(result[1])} exceeded {self.step_cap} steps at {(int(result[2]), int(result[3]))}"
                )
            else:
                raise BoundingRadiusExceeded("walk left the supported coordinate range")
            if self.debug:
                c.check_invariants()
            if self.progress is not None:
                self.progress(first + pos, c.size)

    def odometer_dict(self) -> dict[Site, int]:
        R = self.cluster.radius
        xs, ys = np.nonzero(self.odometer)
        return {Site(int(x) - R, int(y) - R): int(self.odometer[x, y]) for x, y in zip(xs, ys)}

    def frozen_dict(self) -> dict[Site, int]:
        R = self.cluster.radius
        xs, ys = np.nonzero(self.frozen)
        return {Site(int(x) - R, int(y) - R): int(self.frozen[x, y]) for x, y in zip(xs, ys)}


def _master_seed(rng, stacks) -> int:
    if stacks is not None:
        return stacks.seed
    if rng is None:
        raise ValueError("either rng or stacks is required")
    return as_stream(rng).next_u64()


def _check_stacks(spec, stacks):
    if stacks is not None and stacks.spec != spec:
        raise ValueError("stacks were generated for a different kernel")


def grow(spec: KernelSpec, starts, rng=None, shortcut: str = "auto", *, stacks: CardStacks | None = None,
         step_cap: int = DEFAULT_STEP_CAP, radius: int | None = None, debug: bool = False,
         progress: Callable | None = None) -> Cluster:
    """Sequential internal DLA from a multiset of start sites.

    Particles are released in order of start site (sorted by ``(x, y)``),
    then by multiplicity.  The first particle occupies its start; every later
    one walks until it first stands outside the cluster and settles there.

    Parameters
    ----------
    spec : KernelSpec
    starts : int or mapping Site -> count
        An int releases that many particles from the origin.
    rng : RandomStream or int
        Source of the master seed (one draw).  Ignored when ``stacks`` is given.
    shortcut : {'auto', 'on', 'off'}
        Skip excursions from the origin through a fully occupied diamond
        (see :func:`idla.walk.escape_occupied_diamond`).  ``auto`` engages it
        for mixtures with ``p > 1/2`` only.
    stacks : CardStacks, optional
        Drive the walks by shared card stacks; ``cluster.odometer`` then
        records the cards burned per site.
    debug : bool
        Revalidate the incremental bookkeeping every 1000 particles.
    """
    _check_stacks(spec, stacks)
    use_shortcut = _shortcut_flag(spec, shortcut, stacks)
    items = normalize_starts(starts)
    total = sum(c for _, c in items)
    if total < 1:
        raise ValueError("at least one particle is required")
    sx = np.concatenate([np.full(c, s.x, dtype=np.int64) for s, c in items])
    sy = np.concatenate([np.full(c, s.y, dtype=np.int64) for s, c in items])
    if radius is None:
        offset = max(max(abs(s.x), abs(s.y)) for s, _ in items)
        radius = initial_radius(total, offset)
    cluster = Cluster(radius)
    engine = _Engine(spec, cluster, _master_seed(rng, stacks), stacks, use_shortcut, step_cap,
                     debug=debug, progress=progress)
    engine.run(sx, sy, 0)
    if stacks is not None:
        cluster.odometer = engine.odometer_dict()
    return cluster


def grow_stopped(spec: KernelSpec, n: int, rng=None, shortcut: str = "auto", *, stacks: CardStacks | None = None,
                 step_cap: int = DEFAULT_STEP_CAP, debug: bool = False) -> StoppedResult:
    """Stopped process ``S(v_n)``: walks also freeze on first reaching layer ``n``.

    Starts from ``S(1) = {o}`` and runs ``v_n - 1`` particles.  A frozen
    particle occupies its site on ``L_n`` if it was empty;
    ``frozen_counts[z]`` counts every particle that froze at ``z``,
    including the one that occupied it.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_stacks(spec, stacks)
    use_shortcut = _shortcut_flag(spec, shortcut, stacks)
    count = diamond_volume(n) - 1
    cluster = Cluster(n + 8)
    cluster.add(ORIGIN, 0)
    engine = _Engine(spec, cluster, _master_seed(rng, stacks), stacks, use_shortcut, step_cap,
                     stop_layer=n, debug=debug)
    zeros = np.zeros(count, dtype=np.int64)
    engine.run(zeros, zeros, 1)
    if stacks is not None:
        cluster.odometer = engine.odometer_dict()
    return StoppedResult(cluster, engine.frozen_dict())


def grow_extended(spec: KernelSpec, n: int, m: int, rng=None, shortcut: str = "auto", *,
                  stacks: CardStacks | None = None, step_cap: int = DEFAULT_STEP_CAP,
                  debug: bool = False) -> Cluster:
    """Extended process ``E(m)``: start from a full ``D_n`` and add ``m`` particles from the origin.

    The initial sites take particle indices ``0 .. v_n - 1``; the extra
    particles continue from ``v_n``.
    """
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    _check_stacks(spec, stacks)
    use_shortcut = _shortcut_flag(spec, shortcut, stacks)
    vn = diamond_volume(n)
    cluster = Cluster.diamond(n, radius=initial_radius(vn + m))
    if m:
        engine = _Engine(spec, cluster, _master_seed(rng, stacks), stacks, use_shortcut, step_cap,
                         debug=debug)
        zeros = np.zeros(m, dtype=np.int64)
        engine.run(zeros, zeros, vn)
        if stacks is not None:
            cluster.odometer = engine.odometer_dict()
    return cluster


def settle_independent(spec: KernelSpec, cluster: Cluster, starts, rng=None, shortcut: str = "off", *,
                       step_cap: int = DEFAULT_STEP_CAP, lanes: int = 8) -> list[Site]:
    """Settle sites of independent single-particle additions to ``cluster``.

    Every particle walks from its start until it first stands outside
    ``cluster``; the cluster is not modified, so the additions are i.i.d.
    for identical starts.  Particle ``i`` (in release order, as in
    :func:`grow`) uses the stream keyed by ``(master seed, i)``, so the
    result does not depend on ``lanes``.
    """
    use_shortcut = _shortcut_flag(spec, shortcut, None)
    if lanes < 1:
        raise ValueError("lanes must be positive")
    items = normalize_starts(starts)
    sx = np.concatenate([np.full(c, s.x, dtype=np.int64) for s, c in items])
    sy = np.concatenate([np.full(c, s.y, dtype=np.int64) for s, c in items])
    if 2 * (cluster.radius + 1) >= klimit(spec):
        raise BoundingRadiusExceeded(f"radius {cluster.radius} too large for this kernel")
    fam, pn, pd = spec.jit_code()
    tab, T = jit_table(spec)
    out_x = np.empty(len(sx), dtype=np.int64)
    out_y = np.empty(len(sx), dtype=np.int64)
    out_t = np.empty(len(sx), dtype=np.int64)
    result = np.zeros(4, dtype=np.int64)
    status = _jit.settle_lanes(
        tab, T, fam, pn, pd, cluster.grid, cluster.radius, cluster.inner_full_radius, use_shortcut,
        np.uint64(_master_seed(rng, None)), sx, sy, step_cap, lanes, out_x, out_y, out_t, result,
    )
    if status != _jit.DONE:
        raise StepCapExceeded(f"particle {int(result[1])} exceeded {step_cap} steps")
    return [Site(int(x), int(y)) for x, y in zip(out_x, out_y)]


class _RandomChoice:
    """Set of unstable sites supporting uniform sampling."""

    def __init__(self, stream: RandomStream):
        self.stream = stream
        self.items: list[Site] = []
        self.index: dict[Site, int] = {}

    def push(self, s):
        if s not in self.index:
            self.index[s] = len(self.items)
            self.items.append(s)

    def pop(self):
        i = self.stream.below(len(self.items))
        s = self.items[i]
        last = self.items.pop()
        if last != s:
            self.items[i] = last
            self.index[last] = i
        del self.index[s]
        return s

    def __len__(self):
        return len(self.items)


def abelian_run(initial, stacks: CardStacks, scheduler: str = "fifo", *, random_seed: int = 0,
                max_moves: int = 10**8) -> AbelianResult:
    """Stabilize a particle configuration by legal moves on card stacks.

    A legal move picks a site holding at least two particles, burns its top
    card and moves one particle to the card's label.  ``scheduler`` decides
    which unstable site moves next: ``fifo`` and ``lifo`` keep a queue or a
    stack of unstable sites, ``lexicographic`` always takes the smallest
    ``(x, y)``, and ``random`` picks uniformly among the unstable sites
    using a stream seeded by ``random_seed``.

    Returns the stable configuration and the number of cards burned per site.
    """
    counts: dict[Site, int] = {}
    for s, c in normalize_starts(initial):
        counts[s] = c
    odometer: dict[Site, int] = {}

    if scheduler == "fifo":
        pending = deque()
        push, pop = pending.append, pending.popleft
    elif scheduler == "lifo":
        pending = []
        push, pop = pending.append, pending.pop
    elif scheduler == "lexicographic":
        pending = []
        push = lambda s: heapq.heappush(pending, s)  # noqa: E731
        pop = lambda: heapq.heappop(pending)  # noqa: E731
    elif scheduler == "random":
        pending = _RandomChoice(RandomStream(random_seed, 0x5EED))
        push, pop = pending.push, pending.pop
    else:
        raise ValueError(f"unknown scheduler {scheduler!r}")

    queued: set[Site] = set()
    for s in sorted(counts):
        if counts[s] >= 2:
            push(s)
            queued.add(s)

    moves = 0
    while pending:
        x = pop()
        queued.discard(x)
        t = odometer.get(x, 0)
        y = stacks.card(x, t)
        odometer[x] = t + 1
        counts[x] -= 1
        counts[y] = counts.get(y, 0) + 1
        moves += 1
        if moves > max_moves:
            raise MoveBudgetExceeded(f"no stable configuration after {max_moves} moves")
        if counts[x] >= 2 and x not in queued:
            push(x)
            queued.add(x)
        if counts[y] >= 2 and y not in queued:
            push(y)
            queued.add(y)

    final = {s: c for s, c in counts.items() if c}
    return AbelianResult(final, odometer)


def monotone_couple(xs, ys, stacks: CardStacks, scheduler: str = "fifo"):
    """Stabilize ``xs`` and ``ys`` on the same stacks.

    Returns ``(small, big, contained)``: the two stable occupied sets and
    whether ``small`` lies inside ``big``.  Requires ``xs <= ys`` site by site.
    """
    xs_items = dict(normalize_starts(xs))
    ys_items = dict(normalize_starts(ys))
    for s, c in xs_items.items():
        if c > ys_items.get(s, 0):
            raise ValueError(f"xs exceeds ys at {s}")
    small = set(abelian_run(xs_items, stacks, scheduler).final)
    big = set(abelian_run(ys_items, stacks, scheduler).final)
    return small, big, small <= big


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    n = os.cpu_count() or 1
    env = os.environ.get("IDLA_THREADS")
    return max(1, min(n, int(env))) if env else n


def replica_map(fn: Callable, items, workers: int | None = None) -> list:
    """Apply ``fn`` to each item, possibly in worker processes.

    Results come back in item order whatever the completion order; each
    result depends only on its item.  ``IDLA_THREADS`` caps the worker count.
    """
    items = list(items)
    n = _worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
