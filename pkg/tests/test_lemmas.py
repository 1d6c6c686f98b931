import numpy as np
import pytest

from avmac.coding import error_at_product, random_code
from avmac.lemmas import (chernoff_bound, chernoff_check, compound_lambda, inner_product_check,
                          robustification_check, vertex_check)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_robustification_bound(gubner, n):
    for seed in range(3):
        code = random_code(gubner, n, 2, 1, seed=seed)
        chk = robustification_check(code, gubner, resolution=32)
        assert chk.holds, chk


def test_compound_lambda_vs_dirac(gubner):
    code = random_code(gubner, 3, 2, 2, seed=2)
    dirac = max(error_at_product(code, gubner, np.tile(q, (3, 1))) for q in np.eye(2))
    assert compound_lambda(code, gubner, 16) >= dirac - 1e-12


@pytest.mark.parametrize("n_vars", [16, 64])
@pytest.mark.parametrize("mean", [0.01, 0.05])
def test_chernoff(n_vars, mean):
    rng = np.random.default_rng(n_vars)
    sampler = lambda r, shape: (r.random(shape) < mean).astype(float)  # noqa: E731
    chk = chernoff_check(sampler, n_vars, 0.3, mean, 20_000, rng)
    assert chk.holds, chk
    assert chernoff_bound(n_vars, 0.3, mean) < 1


def test_chernoff_rejects_out_of_range():
    with pytest.raises(ValueError):
        chernoff_check(lambda r, s: r.random(s) * 2, 4, 0.5, 0.5, 10, np.random.default_rng(0))


def test_inner_product_bound():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        g = int(rng.integers(1, 40))
        a = 1 - rng.random(g) ** rng.uniform(0.2, 5)
        b = 1 - rng.random(g) ** rng.uniform(0.2, 5)
        assert inner_product_check(a, b).holds


def test_inner_product_tight():
    # all deficits concentrated on disjoint entries meet the bound exactly
    chk = inner_product_check([0, 1, 1, 1], [1, 0, 1, 1])
    assert chk.measured == pytest.approx(chk.bound)


def test_vertex_check(gubner, xor):
    for n in (1, 2, 3):
        for ch in (gubner, xor):
            chk = vertex_check(random_code(ch, n, 2, 2, seed=n), ch, draws=1000, seed=n)
            assert chk.holds, chk
