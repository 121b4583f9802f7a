from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from idla import _jit
from idla.kernels import (
    Family,
    KernelSpec,
    row_thresholds,
    sample_step,
    site_from_draw,
    transitions,
    validate_uniform_layering,
)
from idla.lattice import ORIGIN, Site, layer_sites, norm1
from idla.rng import MASK64, RandomStream
from idla.walk import jit_table

F = Fraction
ALL_SPECS = [
    KernelSpec.mixture(0),
    KernelSpec.mixture(F(1, 4)),
    KernelSpec.mixture(F(1, 2)),
    KernelSpec.mixture(F(3, 4)),
    KernelSpec.mixture(F(2, 7)),
    KernelSpec.inward(),
    KernelSpec.reflected(),
    KernelSpec.srw(),
]


def row_dict(spec, s):
    return {t: w for t, w in transitions(spec, s)}


def test_outward_rows():
    out = KernelSpec.outward()
    assert row_dict(out, (0, 0)) == {(1, 0): F(1, 4), (0, 1): F(1, 4), (-1, 0): F(1, 4), (0, -1): F(1, 4)}
    assert row_dict(out, (2, 0)) == {(3, 0): F(2, 3), (2, 1): F(1, 6), (2, -1): F(1, 6)}
    # interior: (y + 1/2)/(x + y + 1) vertically, (x + 1/2)/(x + y + 1) horizontally
    assert row_dict(out, (2, 1)) == {(3, 1): F(5, 8), (2, 2): F(3, 8)}
    assert row_dict(out, (-1, -3)) == {(-2, -3): F(3, 10), (-1, -4): F(7, 10)}


def test_inward_rows():
    inn = KernelSpec.inward()
    assert row_dict(inn, ORIGIN) == {ORIGIN: 1}
    assert row_dict(inn, (0, -4)) == {(0, -3): 1}
    assert row_dict(inn, (2, 1)) == {(1, 1): F(3, 4), (2, 0): F(1, 4)}


def test_mixture_origin_has_self_loop():
    spec = KernelSpec.mixture(F(3, 4))
    assert transitions(spec, ORIGIN)[0] == (ORIGIN, F(3, 4))
    assert row_dict(spec, (1, 0)) == {(2, 0): F(1, 8), (1, 1): F(1, 16), (0, 0): F(3, 4), (1, -1): F(1, 16)}


def test_reflected_and_srw_rows():
    ref = KernelSpec.reflected()
    assert row_dict(ref, (0, 3)) == {(1, 3): F(1, 4), (0, 4): F(1, 2), (-1, 3): F(1, 4)}
    assert len(row_dict(ref, (2, 2))) == 4
    assert all(w == F(1, 4) for _, w in transitions(KernelSpec.srw(), (5, -2)))


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label())
def test_rows_are_distributions_in_canonical_order(spec):
    order = [(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)]
    for x in range(-6, 7):
        for y in range(-6, 7):
            row = transitions(spec, (x, y))
            assert sum(w for _, w in row) == 1
            assert all(w > 0 for _, w in row)
            moves = [order.index((t[0] - x, t[1] - y)) for t, _ in row]
            assert moves == sorted(moves)


def test_parameter_validation():
    with pytest.raises(ValueError, match=r"p must lie in \[0,1\)"):
        KernelSpec.mixture(1)
    with pytest.raises(ValueError):
        KernelSpec.mixture(F(-1, 3))
    assert KernelSpec.mixture(0.75).p == F(3, 4)
    assert KernelSpec.mixture(0.1).p == F(1, 10)
    assert KernelSpec.mixture(F(3, 4)).r == 3
    assert KernelSpec.mixture(F(1, 2)).r == 1


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label())
def test_jit_rows_match_exact_rows_at_threshold_boundaries(spec):
    fam, pn, pd = spec.jit_code()
    tab, T = jit_table(spec)
    for x in range(-T - 3, T + 4, 5):
        for y in range(-9, 10):
            targets, thresholds = row_thresholds(spec, (x, y))
            draws = {0, MASK64, MASK64 - 1}
            for th in thresholds:
                draws.update(u for u in (th - 1, th, th + 1) if 0 <= u <= MASK64)
            for u in draws:
                expect = site_from_draw(spec, (x, y), u)
                assert _jit.step(fam, pn, pd, x, y, np.uint64(u)) == expect
                assert _jit.fast_step(tab, T, fam, pn, pd, x, y, np.uint64(u)) == expect


def test_sample_step_consumes_one_draw():
    spec = KernelSpec.mixture(F(1, 2))
    a = RandomStream(3)
    b = RandomStream(3)
    s = Site(2, 1)
    nxt = sample_step(spec, s, a)
    assert nxt == site_from_draw(spec, s, b.next_u64())
    assert a.state == b.state


@pytest.mark.parametrize("spec", ALL_SPECS[:4] + [KernelSpec.reflected()], ids=lambda s: s.label())
def test_layered_kernels_pass(spec):
    report = validate_uniform_layering(spec, 25)
    assert report.passed, report.to_text()
    assert report.to_text().endswith("OK\n")


def test_strictly_outward_flag():
    assert validate_uniform_layering(KernelSpec.outward(), 5).strictly_outward
    assert not validate_uniform_layering(KernelSpec.mixture(F(1, 2)), 5).strictly_outward


def test_srw_fails_u3_with_witness():
    report = validate_uniform_layering(KernelSpec.srw(), 6)
    assert not report.passed
    assert "U3" in report.axioms_violated()
    first = next(v for v in report.violations if v.axiom == "U3")
    assert (first.k, first.l) == (1, 2)
    assert norm1(first.y) == norm1(first.z) == 2
    line = first.to_line()
    assert line.startswith("U3 k=1 l=2 ")


def test_validator_bounds():
    with pytest.raises(ValueError):
        validate_uniform_layering(KernelSpec.outward(), 0)
    with pytest.raises(ValueError):
        validate_uniform_layering(KernelSpec.outward(), 1001)


def _evolve(spec, dist):
    nxt = {}
    for s, w in dist.items():
        for t, q in transitions(spec, s):
            nxt[t] = nxt.get(t, 0) + w * q
    return nxt


@pytest.mark.parametrize("p", [F(0), F(1, 2), F(3, 4)])
def test_layer_conditional_law_is_uniform(p):
    # independent check of the layering property: the exact law of X_t from
    # the origin is uniform on each layer at every time
    spec = KernelSpec.mixture(p)
    dist = {ORIGIN: F(1)}
    for _ in range(7):
        dist = _evolve(spec, dist)
        by_layer = {}
        for s, w in dist.items():
            by_layer.setdefault(norm1(s), set()).add(w)
        for k, weights in by_layer.items():
            assert len(weights) == 1
            assert sum(1 for s in dist if norm1(s) == k) == len(layer_sites(k))


def test_srw_law_is_not_uniform_on_layers():
    dist = {ORIGIN: F(1)}
    for _ in range(2):
        dist = _evolve(KernelSpec.srw(), dist)
    assert dist[(2, 0)] != dist[(1, 1)]


@given(st.fractions(min_value=0, max_value=F(99, 100), max_denominator=1000), st.integers(-40, 40), st.integers(-40, 40))
def test_mixture_is_convex_combination(p, x, y):
    mix = row_dict(KernelSpec.mixture(p), (x, y))
    out = row_dict(KernelSpec.outward(), (x, y))
    inn = row_dict(KernelSpec.inward(), (x, y))
    for t in set(out) | set(inn):
        assert mix.get(t, 0) == p * inn.get(t, 0) + (1 - p) * out.get(t, 0)


def test_family_codes():
    assert KernelSpec.mixture(F(3, 4)).jit_code() == (0, 3, 4)
    assert KernelSpec.reflected().family is Family.REFLECTED
    assert not KernelSpec.srw().layered
