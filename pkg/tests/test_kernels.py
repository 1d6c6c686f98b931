import os
import subprocess
import sys

import numpy as np
import pytest

from avmac import _kernels
from avmac.channel import random_channel
from avmac.infotheory import InputPolicy

IMPLS = _kernels.backends()
needs_numba = pytest.mark.skipif("numba" not in IMPLS, reason="numba not importable")


def test_default_backend_is_numba_when_available():
    assert _kernels.BACKEND == ("numba" if _kernels.HAVE_NUMBA else "numpy")


@pytest.mark.parametrize("flag", ["numpy", "numba"])
def test_env_flag_selects_backend(flag):
    env = dict(os.environ, AVMAC_BACKEND=flag)
    out = subprocess.run([sys.executable, "-c", "from avmac import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    expect = flag if (flag == "numpy" or _kernels.HAVE_NUMBA) else "numpy"
    assert out.stdout.strip() == expect


def test_bad_env_flag_fails():
    env = dict(os.environ, AVMAC_BACKEND="fortran")
    out = subprocess.run([sys.executable, "-c", "import avmac._kernels"], env=env, capture_output=True)
    assert out.returncode != 0


def brute_success(dec, A):
    M, n, S, nz = A.shape
    out = np.zeros((M, S ** n))
    for i in range(M):
        for t in range(S ** n):
            s = np.unravel_index(t, (S,) * n)
            for z in range(nz ** n):
                zz = np.unravel_index(z, (nz,) * n)
                if dec[z] == i:
                    out[i, t] += np.prod([A[i, m, s[m], zz[m]] for m in range(n)])
    return out


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_success_by_state_brute(name, rng):
    A = rng.dirichlet(np.ones(3), size=(4, 3, 2))
    dec = rng.integers(0, 4, size=27)
    got = IMPLS[name]["success_by_state"](dec, A)
    assert np.allclose(got, brute_success(dec, A), atol=1e-12)


@needs_numba
def test_backends_agree_success(rng):
    A = rng.dirichlet(np.ones(4), size=(6, 5, 2))
    dec = rng.integers(0, 6, size=4 ** 5)
    a = IMPLS["numpy"]["success_by_state"](dec, A)
    b = IMPLS["numba"]["success_by_state"](dec, A)
    assert np.allclose(a, b, atol=1e-13)


@needs_numba
def test_backends_agree_ml_table_bitwise(rng):
    for trial in range(5):
        v = rng.dirichlet(np.ones(3), size=(2, 2))
        if trial % 2:
            v = np.round(v * 4) / 4 + 1e-3  # force ties
            v /= v.sum(-1, keepdims=True)
        with np.errstate(divide="ignore"):
            logv = np.log(v)
        xw = rng.integers(0, 2, size=(7, 5))
        yw = rng.integers(0, 2, size=(7, 5))
        a = IMPLS["numpy"]["ml_decode_table"](logv, xw, yw, 3)
        b = IMPLS["numba"]["ml_decode_table"](logv, xw, yw, 3)
        assert np.array_equal(a, b)


def test_ml_table_ties_go_to_lowest_index():
    logv = np.log(np.full((2, 1, 2), 0.5))
    xw = np.array([[0, 1], [1, 0]])
    yw = np.zeros((2, 2), dtype=np.int64)
    for impl in IMPLS.values():
        assert np.array_equal(impl["ml_decode_table"](logv, xw, yw, 2), np.zeros(4))


def test_ml_table_block_split_matches(rng):
    v = rng.dirichlet(np.ones(3), size=(2, 2))
    logv = np.log(v)
    xw = rng.integers(0, 2, size=(5, 6))
    yw = rng.integers(0, 2, size=(5, 6))
    a = _kernels.ml_decode_table_np(logv, xw, yw, 3)
    b = _kernels.ml_decode_table_np(logv, xw, yw, 3, block=50)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_mi_batch_gradient_shapes(name, rng):
    ch = random_channel(2, 3, 3, 1, rng)
    p = InputPolicy.random(2, 2, 3, rng).joint_uxy()
    V = rng.dirichlet(np.ones(3), size=(4, 2, 3))
    vals, grad = IMPLS[name]["mi_terms_batch"](p, V, True)
    assert vals.shape == (4, 4) and grad.shape == (4, 4, 2, 3, 3)


@needs_numba
def test_backends_agree_mi(rng):
    p = InputPolicy.random(3, 2, 2, rng).joint_uxy()
    V = rng.dirichlet(np.ones(4), size=(8, 2, 2))
    V[0, 0, 0] = [1, 0, 0, 0]
    a = IMPLS["numpy"]["mi_terms_batch"](p, V, True)
    b = IMPLS["numba"]["mi_terms_batch"](p, V, True)
    assert np.allclose(a[0], b[0], atol=1e-12)
    assert np.allclose(a[1], b[1], atol=1e-10)
