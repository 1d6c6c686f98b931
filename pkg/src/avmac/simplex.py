"""Probability-simplex helpers: Euclidean projection, lattice grids, and a
batched projected-gradient minimizer for convex functions of a state prior."""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean projection onto the probability simplex (sort-based)."""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    n = v.shape[1]
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)


@lru_cache(maxsize=16)
def simplex_grid(ns: int, resolution: int) -> np.ndarray:
    """All priors on ``ns`` states whose entries are multiples of 1/resolution."""
    if ns == 1:
        return np.ones((1, 1))
    pts = []
    # stars and bars: choose ns-1 bar positions among resolution+ns-1 slots
    for bars in combinations(range(resolution + ns - 1), ns - 1):
        prev = -1
        counts = []
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(resolution + ns - 2 - prev)
        pts.append(counts)
    g = np.array(pts, dtype=np.float64) / resolution
    g.setflags(write=False)
    return g


def grid_size(ns: int, resolution: int) -> int:
    from math import comb
    return comb(resolution + ns - 1, ns - 1)


def pgd_minimize(fun, starts: np.ndarray, iters: int = 64, armijo: float = 1e-4):
    """Minimize a batch of convex functions over the simplex.

    ``fun(Q) -> (values (B,), grads (B, ns))`` evaluates row ``b`` of the batch
    at ``Q[b]``; rows are independent problems. Each row keeps its own step
    size, grown after accepted steps and halved after rejected ones. Every
    iteration costs one batched evaluation.

    Returns the best points and values seen per row.
    """
    q = project_simplex(starts)
    val, grad = fun(q)
    step = np.ones(q.shape[0])
    for _ in range(iters):
        trial = project_simplex(q - step[:, None] * grad)
        tval, tgrad = fun(trial)
        decrease = np.einsum("bs,bs->b", grad, q - trial)
        ok = tval <= val - armijo * np.maximum(decrease, 0.0)
        ok &= np.any(trial != q, axis=1)
        q = np.where(ok[:, None], trial, q)
        val = np.where(ok, tval, val)
        grad = np.where(ok[:, None], tgrad, grad)
        step = np.where(ok, np.minimum(step * 2.0, 1e6), step * 0.5)
        if np.all(step < 1e-14):
            break
    return q, val
