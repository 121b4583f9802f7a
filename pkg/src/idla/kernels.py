"""Transition kernels of layered walks and an exact checker for the layering axioms.

Rows are exact: probabilities are :class:`fractions.Fraction` values, listed in
the canonical direction order *stay, east, north, west, south* with zero
entries dropped.  Sampling turns a row into cumulative 64-bit fixed-point
thresholds once (cached per site) and inverts one 64-bit draw against them.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .lattice import Site, layer_sites

__all__ = [
    "Family",
    "KernelSpec",
    "transitions",
    "integer_row",
    "row_thresholds",
    "site_from_draw",
    "sample_step",
    "Violation",
    "ValidationReport",
    "validate_uniform_layering",
]

KMAX_CAP = 1000

# stay, east, north, west, south
DIRECTIONS = ((0, 0), (1, 0), (0, 1), (-1, 0), (0, -1))
_DIR_INDEX = {d: i for i, d in enumerate(DIRECTIONS)}


class Family(enum.Enum):
    OUTWARD = "outward"
    INWARD = "inward"
    MIXTURE = "mixture"
    REFLECTED = "reflected"
    SRW = "srw"


def _as_fraction(p) -> Fraction:
    if isinstance(p, float):
        # 0.6 means 3/5, not the nearest binary fraction
        return Fraction(repr(p))
    return Fraction(p)


@dataclass(frozen=True)
class KernelSpec:
    """Walk law: a family plus the inward weight ``p`` (used by MIXTURE only).

    ``KernelSpec.mixture(p)`` is ``p * Q_in + (1 - p) * Q_out`` with
    ``p`` in ``[0, 1)``; OUTWARD and INWARD are its two endpoints.
    """

    family: Family
    p: Fraction = field(default=Fraction(0))

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        p = _as_fraction(self.p)
        if family is Family.MIXTURE:
            if not 0 <= p < 1:
                raise ValueError("p must lie in [0,1)")
        elif family is Family.INWARD:
            p = Fraction(1)
        else:
            p = Fraction(0)
        object.__setattr__(self, "p", p)

    @classmethod
    def mixture(cls, p) -> "KernelSpec":
        return cls(Family.MIXTURE, p)

    @classmethod
    def outward(cls) -> "KernelSpec":
        return cls(Family.OUTWARD)

    @classmethod
    def inward(cls) -> "KernelSpec":
        return cls(Family.INWARD)

    @classmethod
    def reflected(cls) -> "KernelSpec":
        return cls(Family.REFLECTED)

    @classmethod
    def srw(cls) -> "KernelSpec":
        return cls(Family.SRW)

    @property
    def q(self) -> Fraction:
        return 1 - self.p

    @property
    def r(self) -> Fraction | None:
        """Layer drift ratio ``p / q``; None for families without one."""
        if self.family in (Family.MIXTURE, Family.OUTWARD):
            return self.p / self.q
        return None

    @property
    def layered(self) -> bool:
        """True if the kernel satisfies all of (U1)-(U3)."""
        return self.family in (Family.OUTWARD, Family.MIXTURE, Family.REFLECTED)

    def jit_code(self) -> tuple[int, int, int]:
        """``(family code, p numerator, p denominator)`` for the jitted engines."""
        if self.family in (Family.OUTWARD, Family.MIXTURE, Family.INWARD):
            return 0, self.p.numerator, self.p.denominator
        if self.family is Family.REFLECTED:
            return 1, 0, 1
        return 2, 0, 1

    def label(self) -> str:
        if self.family is Family.MIXTURE:
            return f"mixture(p={self.p})"
        return self.family.value


def _sign(v: int) -> int:
    return 1 if v > 0 else -1


# Rows are built as (denominator, {target: numerator}) so that a whole row
# shares one integer denominator; Fractions are made once at the end.

def _q_out(x: int, y: int) -> tuple[int, dict[Site, int]]:
    ax, ay = abs(x), abs(y)
    if ax == 0 and ay == 0:
        return 4, {Site(1, 0): 1, Site(0, 1): 1, Site(-1, 0): 1, Site(0, -1): 1}
    if ay == 0:
        # ax/(ax+1) outward, 1/(2(ax+1)) to either side
        return 2 * (ax + 1), {Site(x + _sign(x), 0): 2 * ax, Site(x, 1): 1, Site(x, -1): 1}
    if ax == 0:
        return 2 * (ay + 1), {Site(0, y + _sign(y)): 2 * ay, Site(1, y): 1, Site(-1, y): 1}
    k = ax + ay
    # (ay + 1/2)/(k + 1) vertically, (ax + 1/2)/(k + 1) horizontally
    return 2 * (k + 1), {Site(x, y + _sign(y)): 2 * ay + 1, Site(x + _sign(x), y): 2 * ax + 1}


def _q_in(x: int, y: int) -> tuple[int, dict[Site, int]]:
    ax, ay = abs(x), abs(y)
    if ax == 0 and ay == 0:
        return 1, {Site(0, 0): 1}
    if ay == 0:
        return 1, {Site(x - _sign(x), 0): 1}
    if ax == 0:
        return 1, {Site(0, y - _sign(y)): 1}
    k = ax + ay
    return 2 * (k - 1), {Site(x, y - _sign(y)): 2 * ay - 1, Site(x - _sign(x), y): 2 * ax - 1}


def _reflected(x: int, y: int) -> tuple[int, dict[Site, int]]:
    if x != 0 and y == 0:
        return 4, {Site(x + _sign(x), 0): 2, Site(x, 1): 1, Site(x, -1): 1}
    if x == 0 and y != 0:
        return 4, {Site(0, y + _sign(y)): 2, Site(1, y): 1, Site(-1, y): 1}
    return _srw(x, y)


def _srw(x: int, y: int) -> tuple[int, dict[Site, int]]:
    return 4, {Site(x + dx, y + dy): 1 for dx, dy in DIRECTIONS[1:]}


def integer_row(spec: KernelSpec, s) -> tuple[int, tuple[tuple[Site, int], ...]]:
    """Row of ``spec`` at ``s`` as ``(D, ((target, numerator), ...))``.

    Probabilities are ``numerator / D``; order and zero-dropping as in
    :func:`transitions`.
    """
    x, y = int(s[0]), int(s[1])
    fam = spec.family
    if fam is Family.REFLECTED:
        den, nums = _reflected(x, y)
    elif fam is Family.SRW:
        den, nums = _srw(x, y)
    else:
        a, b = spec.p.numerator, spec.p.denominator
        d_out, out = _q_out(x, y)
        d_in, inn = _q_in(x, y)
        # p * Q_in + q * Q_out over the denominator b * d_in * d_out
        den = b * d_in * d_out
        nums = {}
        if a != b:
            for t, v in out.items():
                nums[t] = (b - a) * v * d_in
        if a:
            for t, v in inn.items():
                nums[t] = nums.get(t, 0) + a * v * d_out
    row = [(t, v) for t, v in nums.items() if v]
    row.sort(key=lambda tv: _DIR_INDEX[(tv[0][0] - x, tv[0][1] - y)])
    return den, tuple(row)


@lru_cache(maxsize=1 << 16)
def transitions(spec: KernelSpec, s) -> tuple[tuple[Site, Fraction], ...]:
    """Exact transition row of ``spec`` at site ``s``.

    Returns ``((target, probability), ...)`` in the order stay, east, north,
    west, south, omitting zero entries.  Mixture rows are the exact convex
    combination ``p * Q_in + q * Q_out``; at the origin this is a self-loop of
    weight ``p`` and ``q/4`` on each neighbour.
    """
    den, row = integer_row(spec, s)
    return tuple((t, Fraction(v, den)) for t, v in row)


@lru_cache(maxsize=1 << 16)
def row_thresholds(spec: KernelSpec, s) -> tuple[tuple[Site, ...], tuple[int, ...]]:
    """Targets and cumulative thresholds ``ceil(c * 2**64)`` for inverse-CDF sampling.

    A draw ``u`` selects the first target with ``u < threshold``; the last
    target takes the remainder, so it carries no threshold.
    """
    row = transitions(spec, s)
    targets = tuple(t for t, _ in row)
    cum = Fraction(0)
    thresholds = []
    for _, w in row[:-1]:
        cum += w
        num = cum.numerator << 64
        thresholds.append(-(-num // cum.denominator))
    return targets, tuple(thresholds)


def site_from_draw(spec: KernelSpec, s, u: int) -> Site:
    targets, thresholds = row_thresholds(spec, s)
    for t, th in zip(targets, thresholds):
        if u < th:
            return t
    return targets[-1]


def sample_step(spec: KernelSpec, s, rng) -> Site:
    """One step from ``s``; consumes exactly one 64-bit draw of ``rng``."""
    return site_from_draw(spec, tuple(s), rng.next_u64())


@dataclass(frozen=True)
class Violation:
    """A failed axiom.  For U3, ``y`` and ``z`` are sites of layer ``l``
    whose column sums from layer ``k`` differ; for U1, ``y`` is the source
    and ``z`` the offending target; for U2, ``y`` is the source with no
    outward transition and ``z`` is None."""

    axiom: str
    k: int
    l: int
    y: Site
    z: Site | None
    detail: str = ""

    def to_line(self) -> str:
        z = "-" if self.z is None else f"{self.z.x},{self.z.y}"
        line = f"{self.axiom} k={self.k} l={self.l} y={self.y.x},{self.y.y} z={z}"
        return f"{line} {self.detail}" if self.detail else line


@dataclass
class ValidationReport:
    spec: KernelSpec
    kmax: int
    violations: list[Violation]
    strictly_outward: bool

    @property
    def passed(self) -> bool:
        return not self.violations

    def axioms_violated(self) -> set[str]:
        return {v.axiom for v in self.violations}

    def to_text(self) -> str:
        """One line per violation; a single ``OK`` line when there are none."""
        head = f"# kernel={self.spec.label()} kmax={self.kmax} strictly_outward={int(self.strictly_outward)}"
        lines = [head] + [v.to_line() for v in self.violations]
        if self.passed:
            lines.append("OK")
        return "\n".join(lines) + "\n"


def validate_uniform_layering(spec: KernelSpec, kmax: int) -> ValidationReport:
    """Check (U1)-(U3) exactly for every source layer ``k <= kmax``.

    (U3) is checked for each pair ``(k, l)`` by comparing the column sums
    ``sum_{x in L_k} Q(x, y)`` over all ``y`` in ``L_l``; layers that receive
    no mass from ``L_k`` trivially pass.
    """
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    if kmax > KMAX_CAP:
        raise ValueError(f"kmax is capped at {KMAX_CAP}")
    violations: list[Violation] = []
    strictly_outward = True
    for k in range(kmax + 1):
        rows = [(x, integer_row(spec, x)) for x in layer_sites(k)]
        # common denominator of the layer, so column sums stay integral
        L = 1
        for _, (den, _) in rows:
            L = L * den // math.gcd(L, den)
        columns: dict[int, dict[Site, int]] = {}
        for x, (den, row) in rows:
            scale = L // den
            outward = False
            for y, v in row:
                l = abs(y[0]) + abs(y[1])
                if l > k + 1:
                    violations.append(Violation("U1", k, l, x, y))
                if l == k + 1:
                    outward = True
                else:
                    strictly_outward = False
                col = columns.setdefault(l, {})
                col[y] = col.get(y, 0) + v * scale
            if not outward:
                violations.append(Violation("U2", k, k + 1, x, None))
        for l in sorted(columns):
            col = columns[l]
            sites = layer_sites(l)
            ref = col.get(sites[0], 0)
            for z in sites[1:]:
                other = col.get(z, 0)
                if other != ref:
                    detail = f"{Fraction(ref, L)}!={Fraction(other, L)}"
                    violations.append(Violation("U3", k, l, sites[0], z, detail))
                    break
    return ValidationReport(spec, kmax, violations, strictly_outward)
