"""Single walks: stopping rules, gambler's-ruin closed forms, the escape shortcut."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

from . import _jit
from .kernels import KernelSpec
from .lattice import Site, layer_site
from .rng import as_stream

DEFAULT_STEP_CAP = 10**9


class StepCapExceeded(RuntimeError):
    """A walk ran out of steps; usually an inward kernel asked to go far."""


@dataclass(frozen=True, eq=False)
class ExitSet:
    """Fires when the walk is outside ``occupied`` (a set of sites or a Cluster)."""

    occupied: object


@dataclass(frozen=True)
class HitLayer:
    k: int


@dataclass(frozen=True)
class HitSite:
    z: tuple


@dataclass(frozen=True)
class FirstOf:
    rules: tuple

    def __init__(self, *rules):
        if len(rules) == 1 and isinstance(rules[0], (list, tuple)) and not isinstance(rules[0], Site):
            rules = tuple(rules[0])
        object.__setattr__(self, "rules", tuple(rules))


StopRule = Union[ExitSet, HitLayer, HitSite, FirstOf]


@dataclass(frozen=True)
class WalkOutcome:
    stop_site: Site
    steps: int
    rule_fired: object


_EMPTY_GRID = np.zeros((1, 1), dtype=np.uint8)


def _grid_of(occupied) -> tuple[np.ndarray, int]:
    grid = getattr(occupied, "grid", None)
    if grid is not None:
        return grid, occupied.radius
    sites = list(occupied)
    if not sites:
        return _EMPTY_GRID, 0
    R = max(max(abs(x), abs(y)) for x, y in sites)
    grid = np.zeros((2 * R + 1, 2 * R + 1), dtype=np.uint8)
    for x, y in sites:
        grid[x + R, y + R] = 1
    return grid, R


def klimit(spec: KernelSpec) -> int:
    """Largest norm at which the jitted row denominator still fits in 63 bits."""
    _, _, pd = spec.jit_code()
    return int(math.isqrt((1 << 62) // pd)) - 2


TABLE_RADIUS = 64


@lru_cache(maxsize=32)
def jit_table(spec: KernelSpec) -> tuple[np.ndarray, int]:
    """Threshold table for sites with ``|x|, |y| <= T`` and its ``T``."""
    fam, pn, pd = spec.jit_code()
    T = max(0, min(TABLE_RADIUS, klimit(spec) // 2))
    return _jit.threshold_table(fam, pn, pd, T), T


def walk_until(spec: KernelSpec, start, rule: StopRule, rng, step_cap: int = DEFAULT_STEP_CAP) -> WalkOutcome:
    """Run ``X(0) = start``, ``X(t+1) ~ transitions(spec, X(t))`` until ``rule`` fires.

    Rules are checked at every time including 0; within a :class:`FirstOf`
    the earliest listed rule wins ties.  Each step consumes one draw of
    ``rng``.  Raises :class:`StepCapExceeded` after ``step_cap`` steps.
    """
    if step_cap <= 0:
        raise ValueError("step_cap must be positive")
    stream = as_stream(rng)
    leaves = list(rule.rules) if isinstance(rule, FirstOf) else [rule]
    codes = np.empty(len(leaves), dtype=np.int64)
    grid, R = _EMPTY_GRID, 0
    hit_layer, hx, hy = -1, 0, 0
    seen = set()
    for i, leaf in enumerate(leaves):
        kind = type(leaf)
        if kind in seen:
            raise ValueError(f"at most one {kind.__name__} per FirstOf")
        seen.add(kind)
        if isinstance(leaf, ExitSet):
            codes[i] = 0
            grid, R = _grid_of(leaf.occupied)
        elif isinstance(leaf, HitLayer):
            codes[i] = 1
            hit_layer = leaf.k
        elif isinstance(leaf, HitSite):
            codes[i] = 2
            hx, hy = leaf.z
        else:
            raise TypeError(f"unsupported stop rule {leaf!r}")
    fam, pn, pd = spec.jit_code()
    tab, T = jit_table(spec)
    x, y, t, fired, st = _jit.walk_kernel(
        tab, T, fam, pn, pd, int(start[0]), int(start[1]), np.uint64(stream.state), codes,
        hit_layer, hx, hy, grid, R, step_cap, klimit(spec),
    )
    stream.state = int(st)
    if fired == -1:
        raise StepCapExceeded(f"walk from {tuple(start)} exceeded {step_cap} steps")
    if fired == -2:
        raise OverflowError("walk left the supported coordinate range")
    return WalkOutcome(Site(int(x), int(y)), int(t), leaves[fired])


def _ratio(p) -> Fraction:
    p = Fraction(repr(p)) if isinstance(p, float) else Fraction(p)
    return p


def hit_origin_before_layer_prob(p, l: int, n: int) -> float:
    """Gambler's ruin: chance a walk started on layer ``l`` reaches the origin before layer ``n``.

    Uses ``(r**n - r**l) / (r**n - 1)`` with ``r = p/q``, or ``(n - l)/n``
    at ``p = 1/2``; evaluated through ``expm1`` so large ``n`` cannot
    overflow.
    """
    p = _ratio(p)
    if not 0 < l < n:
        raise ValueError("need 0 < l < n")
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0,1)")
    if p == 0:
        return 0.0
    if p == Fraction(1, 2):
        return (n - l) / n
    log_r = math.log(p) - math.log(1 - p)
    if log_r > 0:
        return math.expm1((l - n) * log_r) / math.expm1(-n * log_r)
    return math.exp(l * log_r) * math.expm1((n - l) * log_r) / math.expm1(n * log_r)


def avoidance_bound(p, k: int, n: int) -> float:
    """Upper bound ``(4k - 1) r**(k - n)`` on the chance of reaching layer ``n`` before a given site of layer ``k``."""
    p = _ratio(p)
    if not Fraction(1, 2) < p < 1:
        raise ValueError("p must lie in (1/2, 1)")
    if not 0 < k < n:
        raise ValueError("need 0 < k < n")
    r = p / (1 - p)
    return (4 * k - 1) * math.exp((k - n) * math.log(r))


def escape_occupied_diamond(spec: KernelSpec, a: int, rng) -> Site:
    """Site where a walk at the origin first reaches layer ``a + 1``.

    Valid when ``D_a`` is fully occupied so nothing can happen inside it;
    the first hit of a layer is uniform on that layer for any layered
    kernel, so no excursion is simulated.
    """
    if not spec.layered:
        raise ValueError(f"{spec.label()} is not uniformly layered")
    if a < 0:
        raise ValueError("a must be nonnegative")
    stream = as_stream(rng)
    return layer_site(a + 1, stream.below(4 * (a + 1)))
