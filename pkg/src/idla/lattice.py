"""Geometry of the square lattice under the L1 norm.

Layers ``L_k`` are the L1 spheres ``{|x| + |y| = k}`` and diamonds ``D_n`` the
closed L1 balls.  Sites of a layer are indexed counterclockwise starting from
``(k, 0)``, which lets :func:`layer_site` map an integer in ``[0, 4k)`` to a
site without building the layer.
"""
from __future__ import annotations

from typing import Iterator, NamedTuple

#: Largest radius the engines accept; coordinates are kept in int32 range.
MAX_RADIUS = 2**30


class Site(NamedTuple):
    x: int
    y: int

    def __repr__(self) -> str:
        return f"({self.x},{self.y})"


ORIGIN = Site(0, 0)


def norm1(s) -> int:
    """L1 norm ``|x| + |y|``, i.e. the index of the layer containing ``s``."""
    return abs(s[0]) + abs(s[1])


def layer_size(k: int) -> int:
    if k < 0:
        raise ValueError(f"layer index must be nonnegative, got {k}")
    return 1 if k == 0 else 4 * k


def diamond_volume(n: int) -> int:
    """Number of sites in ``D_n``: ``2n(n+1) + 1``."""
    if n < 0:
        raise ValueError(f"diamond radius must be nonnegative, got {n}")
    return 2 * n * (n + 1) + 1


def layer_site(k: int, i: int) -> Site:
    """The ``i``-th site of layer ``k`` in counterclockwise order from ``(k, 0)``."""
    if k == 0:
        if i != 0:
            raise IndexError(i)
        return ORIGIN
    if not 0 <= i < 4 * k:
        raise IndexError(i)
    seg, t = divmod(i, k)
    if seg == 0:
        return Site(k - t, t)
    if seg == 1:
        return Site(-t, k - t)
    if seg == 2:
        return Site(-k + t, -t)
    return Site(t, -k + t)


def layer_position(s) -> int:
    """Inverse of :func:`layer_site`: position of ``s`` within its layer."""
    x, y = s
    k = abs(x) + abs(y)
    if k == 0:
        return 0
    if x > 0 and y >= 0:
        return y
    if x <= 0 and y > 0:
        return k - x
    if x < 0 and y <= 0:
        return 2 * k - y
    return 3 * k + x


def layer_sites(k: int) -> list[Site]:
    """All sites with ``norm1 == k``, counterclockwise from ``(k, 0)``."""
    return [layer_site(k, i) for i in range(layer_size(k))]


def diamond_sites(n: int) -> Iterator[Site]:
    """Sites of ``D_n`` layer by layer, each layer in :func:`layer_sites` order."""
    for k in range(n + 1):
        yield from layer_sites(k)


def uniform_layer_site(k: int, rng) -> Site:
    """Draw a site of ``L_k`` with probability exactly ``1 / layer_size(k)``."""
    if k == 0:
        return ORIGIN
    return layer_site(k, rng.below(4 * k))


def check_radius(r: int) -> int:
    if r > MAX_RADIUS:
        raise ValueError(f"radius {r} exceeds the supported maximum {MAX_RADIUS}")
    return r
