"""Fluctuation statistics, theorem envelopes, axis hitting times and test statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .rng import as_stream

# Upper 10**-3 quantiles of the chi-square distribution for df = 1..120,
# from scipy.stats.chi2.isf(1e-3, df) rounded to 4 decimals.
CHI2_CRITICAL_999 = (
    10.8276, 13.8155, 16.2662, 18.4668, 20.515, 22.4577,
    24.3219, 26.1245, 27.8772, 29.5883, 31.2641, 32.9095,
    34.5282, 36.1233, 37.6973, 39.2524, 40.7902, 42.3124,
    43.8202, 45.3147, 46.797, 48.2679, 49.7282, 51.1786,
    52.6197, 54.052, 55.476, 56.8923, 58.3012, 59.7031,
    61.0983, 62.4872, 63.8701, 65.2472, 66.6188, 67.9852,
    69.3465, 70.7029, 72.0547, 73.402, 74.7449, 76.0838,
    77.4186, 78.7495, 80.0767, 81.4003, 82.7204, 84.0371,
    85.3506, 86.6608, 87.968, 89.2722, 90.5734, 91.8718,
    93.1675, 94.4605, 95.751, 97.0388, 98.3242, 99.6072,
    100.8879, 102.1662, 103.4424, 104.7163, 105.9881, 107.2579,
    108.5256, 109.7913, 111.0551, 112.3169, 113.5769, 114.8351,
    116.0915, 117.3462, 118.5991, 119.8503, 121.1, 122.348,
    123.5944, 124.8392, 126.0826, 127.3244, 128.5648, 129.8037,
    131.0412, 132.2773, 133.5121, 134.7455, 135.9776, 137.2084,
    138.4379, 139.6661, 140.8931, 142.1189, 143.3435, 144.567,
    145.7892, 147.0104, 148.2304, 149.4493, 150.6671, 151.8838,
    153.0995, 154.3141, 155.5277, 156.7403, 157.9518, 159.1624,
    160.3721, 161.5807, 162.7885, 163.9953, 165.2011, 166.4061,
    167.6102, 168.8133, 170.0156, 171.2171, 172.4177, 173.6174,
)


def chi2_critical(df: int) -> float:
    """Critical value of the chi-square test at level 10**-3."""
    if not 1 <= df <= len(CHI2_CRITICAL_999):
        raise ValueError(f"no tabulated critical value for df={df}")
    return CHI2_CRITICAL_999[df - 1]


@dataclass
class FluctuationReport:
    """Deviation of a cluster from the diamond ``D_n``.

    ``delta_in = n - inner_full_radius`` and ``delta_out = max norm - n``;
    ``profile[j]`` is the number of occupied sites on layer ``n + j``
    (``j`` may be negative).
    """

    n: int
    delta_in: int
    delta_out: int
    profile: dict

    def Z(self, k: int) -> int:
        return self.profile.get(k, 0)


def fluctuation_metrics(cluster, n: int) -> FluctuationReport:
    if cluster.size == 0:
        raise ValueError("cluster is empty")
    counts = cluster.layer_counts
    top = cluster.max_norm
    profile = {k - n: int(counts[k]) for k in range(top + 1) if counts[k]}
    return FluctuationReport(n, n - cluster.inner_full_radius, top - n, profile)


class Envelope(NamedTuple):
    inner: float
    outer: float
    clamped: bool


def theorem_envelopes(n: int, p=None, log_base: float = math.e) -> Envelope:
    """Radii the cluster ``A(v_n)`` is proven to sit between, eventually.

    For ``p > 1/2`` the logarithmic window ``n -+ 6 log_r n`` with
    ``r = p/q``; otherwise the general ``n - 4 sqrt(n log n)`` and
    ``n + 20 sqrt(n log n)``.  ``log_base`` sets the base of the ``log``
    inside the square roots.  A negative inner radius is clamped to 0 and
    flagged.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if p is not None:
        p = Fraction(repr(p)) if isinstance(p, float) else Fraction(p)
    if p is not None and Fraction(1, 2) < p < 1:
        half = 6 * math.log(n) / math.log(p / (1 - p))
        inner, outer = n - half, n + half
    else:
        eta = math.sqrt(n * math.log(n) / math.log(log_base))
        inner, outer = n - 4 * eta, n + 20 * eta
    if inner < 0:
        return Envelope(0.0, outer, True)
    return Envelope(inner, outer, False)


class AxisTimeSample(NamedTuple):
    m: int
    t: int


def axis_time_moments(m: int) -> tuple[int, int]:
    """Exact mean ``2m(m+1)`` and variance ``sum(16 i^2 - 4 i)`` of ``T_m`` for the outward walk."""
    mean = 2 * m * (m + 1)
    var = sum(16 * i * i - 4 * i for i in range(1, m + 1))
    return mean, var


def simulate_axis_times(m: int, replicas: int, rng) -> list[AxisTimeSample]:
    """Draw ``T_m``, the particle count before ``(m, 0)`` joins an outward-walk cluster.

    ``T_m`` is the sum over ``i = 1..m`` of independent geometric variables
    on ``{1, 2, ...}`` with success probability ``1/(4i)``; each is sampled by
    inverting its CDF with a single uniform.
    """
    if m < 1 or replicas < 1:
        raise ValueError("m and replicas must be positive")
    stream = as_stream(rng)
    i = np.arange(1, m + 1, dtype=np.float64)
    log_fail = np.log1p(-1.0 / (4.0 * i))
    totals = np.zeros(replicas, dtype=np.int64)
    block = max(1, (1 << 20) // m)
    for start in range(0, replicas, block):
        rows = min(block, replicas - start)
        u = stream.uniforms(rows * m).reshape(rows, m)
        x = np.ceil(np.log(u) / log_fail).astype(np.int64)
        totals[start:start + rows] = x.sum(axis=1)
    return [AxisTimeSample(m, int(t)) for t in totals]


def lil_envelope(m: int, eps=0.0) -> tuple[float, float]:
    """Law-of-the-iterated-logarithm band ``2m(m+1) -+ (1-eps) sqrt(32 m^3 log log m / 3)``."""
    if m < 16:
        raise ValueError("m must be at least 16")
    eps = float(eps)
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0,1)")
    centre = 2 * m * (m + 1)
    half = (1 - eps) * math.sqrt(32 * m**3 * math.log(math.log(m)) / 3)
    return centre - half, centre + half


def chernoff_bounds(mean: float, b: float) -> tuple[float, float]:
    """Tail bounds for a sum ``S`` of independent indicators with ``E S = mean``.

    Returns bounds on ``P(S >= mean + b)`` and ``P(S <= mean - b)``.
    """
    if mean < 0 or b < 0:
        raise ValueError("mean and b must be nonnegative")
    if b == 0:
        return 1.0, 1.0
    upper = math.exp(-0.5 * b * b / (mean + b / 3))
    lower = math.exp(-0.5 * b * b / mean) if mean > 0 else 0.0
    return upper, lower


def chi_square_uniform(counts: Sequence[int]) -> tuple[float, int]:
    counts = np.asarray(counts, dtype=np.float64)
    if counts.size < 2 or counts.sum() <= 0:
        raise ValueError("need at least two cells and a positive total")
    expected = counts.mean()
    return float(((counts - expected) ** 2).sum() / expected), counts.size - 1


def chi_square_two_sample(a: Sequence[int], b: Sequence[int]) -> tuple[float, int]:
    """Homogeneity statistic for two histograms over the same cells.

    Cells empty in both samples are dropped; ``df`` is the number of
    remaining cells minus one.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("histograms must have the same cells")
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    na, nb = a.sum(), b.sum()
    if na == 0 or nb == 0 or a.size < 2:
        raise ValueError("both samples need mass in at least two cells")
    total = a + b
    ea = total * na / (na + nb)
    eb = total * nb / (na + nb)
    stat = ((a - ea) ** 2 / ea).sum() + ((b - eb) ** 2 / eb).sum()
    return float(stat), int(a.size - 1)
