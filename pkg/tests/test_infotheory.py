import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avmac.channel import ChannelSpec, builtin_channel, random_channel
from avmac.errors import DimensionMismatch, InvalidDistribution
from avmac.infotheory import (InputPolicy, MiEvaluator, entropy, joint_distribution, mi_terms, mi_terms_for,
                              single_user_mi, validate_joint)


def brute_terms(j):
    """From-scratch conditional MIs by explicit conditional distributions."""
    nu, nx, ny, nz = j.shape
    P = {k: v for k, v in np.ndenumerate(j)}

    def marg(keep):
        out = {}
        for (u, x, y, z), v in P.items():
            key = tuple(val for val, k in zip((u, x, y, z), "uxyz") if k in keep)
            out[key] = out.get(key, 0.0) + v
        return out

    def cond_mi(a, cond):
        # I(Z; a | cond) = sum p log p(z|a,cond) / p(z|cond)
        full = marg(a + cond + "z")
        ac = marg(a + cond)
        cz = marg(cond + "z")
        c = marg(cond)
        order_full = [k for k in "uxyz" if k in a + cond + "z"]
        total = 0.0
        for key, v in full.items():
            if v <= 0:
                continue
            d = dict(zip(order_full, key))
            k_ac = tuple(d[k] for k in "uxyz" if k in a + cond)
            k_cz = tuple(d[k] for k in "uxyz" if k in cond + "z")
            k_c = tuple(d[k] for k in "uxyz" if k in cond)
            pc = c[k_c] if cond else 1.0
            total += v * math.log2((v / ac[k_ac]) / (cz[k_cz] / pc))
        return total

    return (cond_mi("x", "uy"), cond_mi("y", "ux"), cond_mi("xy", "u"), cond_mi("xy", ""))


def random_instance(r, nu=None):
    nu = nu or int(r.integers(1, 4))
    nx, ny, nz = (int(r.integers(1, 4)) for _ in range(3))
    nz = max(nz, 2)
    ns = int(r.integers(1, 3))
    ch = random_channel(nx, ny, nz, ns, r, 0.8)
    p = InputPolicy.random(nu, nx, ny, r, 0.8)
    return ch, p


def test_joint_gubner_uniform_dirac0(gubner):
    j = joint_distribution(InputPolicy.uniform(2, 2), gubner, [1, 0])
    for x, y in itertools.product(range(2), repeat=2):
        assert j[0, x, y, x + y] == pytest.approx(0.25)
    assert j.sum() == pytest.approx(1.0)
    assert np.count_nonzero(j) == 4


def test_joint_total_mass_and_degenerate_u(rng):
    ch = random_channel(2, 3, 3, 2, rng)
    p = InputPolicy(np.array([1.0, 0.0]), rng.dirichlet(np.ones(2), 2), rng.dirichlet(np.ones(3), 2))
    q = rng.dirichlet(np.ones(2))
    j = joint_distribution(p, ch, q)
    assert abs(j.sum() - 1) < 1e-12
    j1 = joint_distribution(InputPolicy(np.ones(1), p.p1[:1], p.p2[:1]), ch, q)
    assert np.allclose(j.sum(0), j1[0], atol=1e-15)
    validate_joint(j)


def test_joint_dimension_mismatch(gubner):
    with pytest.raises(DimensionMismatch):
        joint_distribution(InputPolicy.uniform(3, 2), gubner, [0.5, 0.5])


def test_validate_joint_rejects_dependence():
    j = np.zeros((1, 2, 2, 1))
    j[0, 0, 0, 0] = j[0, 1, 1, 0] = 0.5
    with pytest.raises(InvalidDistribution):
        validate_joint(j)


def test_entropy_examples():
    assert entropy([0.25, 0.5, 0.25]) == pytest.approx(1.5)
    assert entropy([0.25] * 4) == pytest.approx(2.0)
    assert entropy([1.0, 0.0]) == 0.0
    with pytest.raises(InvalidDistribution):
        entropy([0.5, 0.6])


def test_constant_channel_all_zero(rng):
    row = rng.dirichlet(np.ones(3))
    ch = ChannelSpec(np.broadcast_to(row, (2, 2, 2, 3)).copy())
    t = mi_terms_for(InputPolicy.random(3, 2, 2, rng), ch, [0.3, 0.7])
    assert np.allclose(t.as_array(), 0, atol=1e-12)


def test_adder_uniform_sum_rate(adder):
    t = mi_terms_for(InputPolicy.uniform(2, 2), adder, [1.0])
    assert t.i_xy == pytest.approx(1.5, abs=1e-12)
    assert t.i_x_given_yu == pytest.approx(1.0, abs=1e-12)
    assert t.i_y_given_xu == pytest.approx(1.0, abs=1e-12)


def test_identity_channel_gives_entropy_of_x(rng):
    w = np.eye(3).reshape(1, 3, 1, 3)
    p = InputPolicy(np.ones(1), rng.dirichlet(np.ones(3))[None], np.ones((1, 1)))
    t = mi_terms_for(p, ChannelSpec(w), [1.0])
    assert t.i_x_given_yu == pytest.approx(entropy(p.p1[0]), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_brute_force_oracle(seed):
    r = np.random.default_rng(seed)
    ch, p = random_instance(r)
    q = r.dirichlet(np.ones(ch.ns))
    j = joint_distribution(p, ch, q)
    got = mi_terms(j).as_array()
    want = np.maximum(np.array(brute_terms(j)), 0)
    assert np.allclose(got, want, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_chain_rule_through_u(seed):
    # U - (X,Y) - Z is Markov, so I(Z;X,Y) = I(Z;U) + I(Z;X,Y|U)
    r = np.random.default_rng(seed)
    ch, p = random_instance(r)
    j = joint_distribution(p, ch, r.dirichlet(np.ones(ch.ns)))
    t = mi_terms(j)
    puz = j.sum(axis=(1, 2))
    i_uz = entropy(puz.sum(1)) + entropy(puz.sum(0)) - entropy(puz)
    assert t.i_xy == pytest.approx(i_uz + t.i_xy_given_u, abs=1e-9)
    assert t.i_xy <= math.log2(ch.nz) + 1e-9
    assert min(t.as_array()) >= 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_convex_in_q(seed):
    r = np.random.default_rng(seed)
    ch, p = random_instance(r)
    q1, q2 = r.dirichlet(np.ones(ch.ns)), r.dirichlet(np.ones(ch.ns))
    a = mi_terms_for(p, ch, q1).as_array()
    b = mi_terms_for(p, ch, q2).as_array()
    mid = mi_terms_for(p, ch, (q1 + q2) / 2).as_array()
    assert np.all(mid <= (a + b) / 2 + 1e-9)


def test_evaluator_matches_reference(rng):
    for _ in range(10):
        ch, p = random_instance(rng)
        qs = rng.dirichlet(np.ones(ch.ns), size=5)
        ev = MiEvaluator.for_policy(p, ch)
        got = ev.values(qs)
        want = np.array([mi_terms_for(p, ch, q).as_array() for q in qs])
        assert np.allclose(got, want, atol=1e-10)


def test_evaluator_gradient_matches_finite_differences(rng):
    ch = random_channel(2, 2, 3, 3, rng, 1.0)
    p = InputPolicy.random(2, 2, 2, rng)
    ev = MiEvaluator.for_policy(p, ch)
    q = np.array([0.3, 0.5, 0.2])
    _, g = ev.values_and_grad(q)
    h = 1e-6
    # only directions inside the simplex are meaningful
    for s, t in [(0, 1), (1, 2), (0, 2)]:
        e = np.zeros(3)
        e[s], e[t] = h, -h
        fd = (ev.values(q + e) - ev.values(q - e))[0] / (2 * h)
        assert np.allclose(g[0, :, s] - g[0, :, t], fd, atol=1e-5)


def test_single_user_mi():
    v = np.eye(2)
    assert single_user_mi(np.array([0.5, 0.5]), v) == pytest.approx(1.0)
    assert single_user_mi(np.array([1.0, 0.0]), v) == pytest.approx(0.0)


def test_from_joint_policy(rng):
    r = rng.dirichlet(np.ones(4)).reshape(2, 2)
    p = InputPolicy.from_joint(r)
    assert np.allclose(p.joint_uxy().sum(0), r)


def test_policy_validation():
    with pytest.raises(InvalidDistribution):
        InputPolicy(np.array([0.5, 0.6]), np.ones((2, 1)), np.ones((2, 1)))
    with pytest.raises(DimensionMismatch):
        InputPolicy(np.ones(1), np.ones((2, 1)), np.ones((1, 1)))
