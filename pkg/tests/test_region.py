import itertools
import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from avmac.channel import ChannelSpec, add_state, builtin_channel, random_channel
from avmac.errors import HypothesisViolation, InputError
from avmac.infotheory import InputPolicy, MiEvaluator, mi_terms_for
from avmac.region import (QOptions, RatePolytope, RegionOptions, capacity_region, convex_hull,
                          cooperation_thresholds, default_nu, deterministic_capacity, is_convex_polygon,
                          maxmin_single_user, minimize_terms, nonconferencing_verdict, pentagon_vertices,
                          polygon_contains, rate_region, region_contains, region_from_policies, robust_bounds)
from avmac.simplex import simplex_grid
from avmac.symmetrizability import check_symmetrizable

FAST = RegionOptions(p_restarts=48, fan=9, sweeps=3)


def constant_channel(ns=2):
    row = np.array([0.2, 0.3, 0.5])
    return ChannelSpec(np.broadcast_to(row, (ns, 2, 2, 3)).copy())


# ---------------------------------------------------------------- pentagons

def test_pentagon_shapes():
    assert np.allclose(pentagon_vertices(1, 1, 1.5), [[0, 0], [1, 0], [1, 0.5], [0.5, 1], [0, 1]])
    assert np.allclose(pentagon_vertices(1, 1, 3), [[0, 0], [1, 0], [1, 1], [0, 1]])
    assert np.allclose(pentagon_vertices(0, 0, 0), [[0, 0]])
    assert np.allclose(pentagon_vertices(1, 0, 0.5), [[0, 0], [0.5, 0]])


def test_polytope_contains_and_support():
    p = RatePolytope.from_bounds(1, 1, 1.5)
    assert p.contains((0.5, 1.0)) and not p.contains((1.0, 0.6))
    assert p.support((1, 1)) == pytest.approx(1.5)
    assert p.bounds == (1, 1, 1.5)


def test_rate_region_constant_channel():
    ch = constant_channel()
    r = rate_region(InputPolicy.uniform(2, 2), ch, [0.5, 0.5], 0, 0)
    assert np.allclose(r.bounds, 0, atol=1e-12)
    assert np.allclose(r.vertices(), [[0, 0]])


def test_rate_region_adder(adder):
    r = rate_region(InputPolicy.uniform(2, 2), adder, [1.0], 0, 0)
    assert np.allclose(r.bounds, (1, 1, 1.5), atol=1e-12)


def test_rate_region_large_conferencing(rng, gubner):
    p = InputPolicy.random(3, 2, 2, rng)
    q = [0.3, 0.7]
    t = mi_terms_for(p, gubner, q)
    assert rate_region(p, gubner, q, 100, 100).bounds[2] == pytest.approx(t.i_xy)


def test_rate_region_rejects_negative_caps(gubner):
    with pytest.raises(InputError):
        rate_region(InputPolicy.uniform(2, 2), gubner, [1, 0], -1, 0)


# ---------------------------------------------------------------- robust bounds

def test_robust_bounds_single_state(adder):
    p = InputPolicy.uniform(2, 2)
    rb = robust_bounds(p, adder, 0.2, 0.3)
    t = mi_terms_for(p, adder, [1.0])
    assert rb.b1 == pytest.approx(t.i_x_given_yu + 0.2)
    assert rb.b2 == pytest.approx(t.i_y_given_xu + 0.3)
    assert rb.b3a == pytest.approx(t.i_xy_given_u + 0.5)
    assert rb.b3b == pytest.approx(t.i_xy)


def test_gubner_robust_sum_matches_fine_grid(gubner):
    p = InputPolicy.uniform(2, 2)
    rb = robust_bounds(p, gubner, 0, 0)
    ev = MiEvaluator.for_policy(p, gubner)
    grid = ev.values(simplex_grid(2, 512))[:, 3].min()
    assert rb.b3b == pytest.approx(grid, abs=1e-4)
    assert rb.b3b <= grid + 1e-12


def test_robust_bounds_below_uniform_prior(rng):
    for _ in range(5):
        ch = random_channel(2, 2, 3, 3, rng, 0.6)
        p = InputPolicy.random(2, 2, 2, rng)
        rb = robust_bounds(p, ch, 0, 0)
        t = mi_terms_for(p, ch, np.full(3, 1 / 3)).as_array()
        assert np.all(rb.mins <= t + 1e-12)


def test_pgd_beats_or_matches_grid(rng):
    ch = random_channel(2, 2, 3, 3, rng, 0.5)
    ev = MiEvaluator.for_policy(InputPolicy.random(2, 2, 2, rng), ch)
    full, _ = minimize_terms(ev, QOptions())
    grid, _ = minimize_terms(ev, QOptions(), use_pgd=False)
    assert np.all(full <= grid + 1e-15)


def test_intersection_decomposition(rng):
    for _ in range(10):
        ch = random_channel(2, 2, 3, 2, rng, 0.7)
        p = InputPolicy.random(2, 2, 2, rng)
        vals = MiEvaluator.for_policy(p, ch).values(simplex_grid(2, 128))
        f = vals[:, 2] + 0.3
        g = vals[:, 3]
        assert np.min(np.minimum(f, g)) == pytest.approx(min(f.min(), g.min()), abs=1e-9)


# ---------------------------------------------------------------- geometry

def test_hull_against_scipy(rng):
    for _ in range(20):
        pts = rng.random((30, 2))
        pts = np.vstack([pts, [[0, 0]]])
        ours = convex_hull(pts)
        ref = pts[ConvexHull(pts).vertices]
        assert len(ours) == len(ref)
        assert {tuple(np.round(p, 12)) for p in ours} == {tuple(np.round(p, 12)) for p in ref}
        assert tuple(ours[0]) == (0.0, 0.0)
        assert is_convex_polygon(ours)


def test_polygon_contains_edge_cases():
    assert polygon_contains([[0, 0]], (0, 0)) and not polygon_contains([[0, 0]], (1e-3, 0))
    assert polygon_contains([[0, 0], [1, 0]], (0.5, 0)) and not polygon_contains([[0, 0], [1, 0]], (0.5, 0.1))
    sq = [[0, 0], [1, 0], [1, 1], [0, 1]]
    assert polygon_contains(sq, (0.5, 0.5)) and polygon_contains(sq, (1, 1))
    assert not polygon_contains(sq, (1.01, 0.5))
    assert not is_convex_polygon([[0, 0], [1, 0], [0.2, 0.2], [0, 1]])


# ---------------------------------------------------------------- regions

def test_adder_region(adder):
    reg = capacity_region(adder, 0, 0, FAST)
    assert reg.max_sum_rate() == pytest.approx(1.5, abs=0.02)
    assert reg.max_rate(0) == pytest.approx(1.0, abs=0.02)
    assert reg.max_rate(1) == pytest.approx(1.0, abs=0.02)
    assert is_convex_polygon(reg.inner_vertices)
    assert tuple(reg.inner_vertices[0]) == (0.0, 0.0)


def test_monotone_in_conferencing_same_seed(gubner):
    a = capacity_region(gubner, 0, 0, FAST)
    b = capacity_region(gubner, 1, 0, FAST)
    assert region_contains(b.inner_vertices, a.inner_vertices, 1e-9)


def test_gubner_conferencing_reaches_axis(gubner):
    reg = capacity_region(gubner, 1, 0, FAST)
    assert reg.axis_point() > 0.1


def test_region_from_policies_monotone_and_anti_monotone(rng):
    ch = random_channel(2, 2, 3, 2, rng, 0.7)
    pols = [InputPolicy.random(2, 2, 2, np.random.default_rng(i)) for i in range(12)]
    base = region_from_policies(ch, pols, 0, 0)
    more = region_from_policies(ch, pols, 0.3, 0.1)
    assert region_contains(more.inner_vertices, base.inner_vertices, 1e-9)
    bigger = add_state(ch, rng.dirichlet(np.ones(3), size=(2, 2)))
    shrunk = region_from_policies(bigger, pols, 0, 0)
    assert region_contains(base.inner_vertices, shrunk.inner_vertices, 1e-7)


def test_nu_above_cardinality_bound(gubner):
    with pytest.raises(InputError):
        capacity_region(gubner, 0, 0, RegionOptions(nu=default_nu(gubner) + 1))


def test_budget_flag(gubner):
    reg = capacity_region(gubner, 1, 0, RegionOptions(p_restarts=8, fan=5, max_evals=20))
    assert reg.budget_exhausted
    assert is_convex_polygon(reg.inner_vertices)


def test_bound_records_and_csv_fields(adder):
    reg = capacity_region(adder, 0, 0, RegionOptions(p_restarts=8, fan=3, sweeps=1))
    assert len(reg.bound_records) == len(reg.policies)
    assert reg.resolution["nu"] == default_nu(adder)
    assert all(r.bounds.exact for r in reg.bound_records)  # ns = 1 needs no search


# ---------------------------------------------------------------- dichotomy and verdicts

def test_dichotomy_xor_zero(xor):
    res = deterministic_capacity(xor, 1, 0, FAST)
    assert res.zero and res.region is None and res.certificate.feasible


def test_dichotomy_gubner_region(gubner):
    res = deterministic_capacity(gubner, 1, 0, FAST)
    assert not res.zero
    direct = capacity_region(gubner, 1, 0, FAST)
    assert np.allclose(res.region.inner_vertices, direct.inner_vertices)


def test_dichotomy_needs_conferencing(gubner):
    with pytest.raises(HypothesisViolation):
        deterministic_capacity(gubner, 0, 0)


@pytest.mark.parametrize("seed", range(6))
def test_dichotomy_exclusive(seed):
    r = np.random.default_rng([21, seed])
    ch = random_channel(2, 2, 2, 2, r, 0.5) if seed % 2 else builtin_channel("xor")
    res = deterministic_capacity(ch, 0.5, 0, RegionOptions(p_restarts=8, fan=3, sweeps=1))
    assert res.zero == check_symmetrizable(ch, "XY").feasible
    assert (res.region is None) == res.zero


def y_only_channel():
    # z = 2x + (y xor s): sender 1 is seen cleanly, sender 2 can be mimicked
    w = np.zeros((2, 2, 2, 4))
    for s, x, y in itertools.product(range(2), repeat=3):
        w[s, x, y, 2 * x + (y ^ s)] = 1
    return ChannelSpec(w)


def test_nonconf_cases(gubner, xor, adder):
    assert nonconferencing_verdict(gubner).case == "x-and-y"
    assert nonconferencing_verdict(gubner).zero_region
    assert nonconferencing_verdict(xor).case == "case4"
    v = nonconferencing_verdict(adder)
    assert v.case == "case1" and not v.zero_region
    v2 = nonconferencing_verdict(y_only_channel())
    assert v2.case == "case2" and v2.upper_bound_only and v2.axis == "R1"
    assert v2.axis_bound == pytest.approx(1.0, abs=1e-6)
    swapped = ChannelSpec(np.swapaxes(y_only_channel().w, 1, 2))
    v3 = nonconferencing_verdict(swapped)
    assert v3.case == "case3" and v3.axis == "R2"


# ---------------------------------------------------------------- max-min and thresholds

def blahut_arimoto(v, iters=2000):
    r = np.full(v.shape[0], 1 / v.shape[0])
    for _ in range(iters):
        pb = r @ v
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(v > 0, v * np.log(v / pb), 0).sum(1)
        r = r * np.exp(d)
        r /= r.sum()
    pb = r @ v
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.where(v > 0, r[:, None] * v * np.log2(v / pb), 0).sum())


@pytest.mark.parametrize("seed", range(3))
def test_maxmin_matches_dual_oracle(seed):
    r = np.random.default_rng([31, seed])
    fam = r.dirichlet(np.full(3, 0.6), size=(2, 3))
    val, rstar, _ = maxmin_single_user(fam)
    dual = min(blahut_arimoto(np.tensordot(q, fam, axes=(0, 0))) for q in simplex_grid(2, 128))
    assert val <= dual + 1e-6
    assert val == pytest.approx(dual, abs=2e-3)


def test_thresholds_single_state_adder(adder):
    th = cooperation_thresholds(adder, RegionOptions(p_restarts=32))
    # full cooperation makes Z uniform on three values
    assert th.c_infinity == pytest.approx(math.log2(3), abs=0.02)
    assert th.sum_threshold >= 0 and th.c1_threshold >= 0 and th.c2_threshold >= 0


def test_thresholds_constant_channel():
    th = cooperation_thresholds(constant_channel(), RegionOptions(p_restarts=8))
    assert th.c_infinity == pytest.approx(0, abs=1e-9)
    assert th.sum_threshold == pytest.approx(0, abs=1e-9)
    assert th.c1_threshold == pytest.approx(0, abs=1e-9)
    assert th.c2_threshold == pytest.approx(0, abs=1e-9)


def test_thresholds_gubner(gubner):
    th = cooperation_thresholds(gubner, RegionOptions(p_restarts=16))
    assert th.c_infinity == pytest.approx(1.0, abs=1e-3)
