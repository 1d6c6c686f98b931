"""Numeric instances of the bounds the derandomization chain relies on.

Each function returns the measured quantity next to the bound it should
respect, so callers (tests, experiments) decide how to report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .channel import ChannelSpec
from .coding import error_at_product, error_profile, sequence_digits, sequence_index
from .simplex import simplex_grid


@dataclass(frozen=True)
class BoundCheck:
    measured: float
    bound: float
    holds: bool
    detail: dict


def compound_lambda(code, ch: ChannelSpec, resolution=64) -> float:
    """1 - min over a prior grid of the success under i.i.d. states."""
    worst = 0.0
    for q in simplex_grid(ch.ns, resolution):
        worst = max(worst, error_at_product(code, ch, np.tile(q, (code.n, 1))))
    return worst


def robustification_check(code, ch: ChannelSpec, resolution=64) -> BoundCheck:
    """Permutation average of the success h(s) against 1 - (n+1)^ns * lambda."""
    n = code.n
    lam = compound_lambda(code, ch, resolution)
    h = 1.0 - error_profile(code, ch)
    digits = sequence_digits(h.size, ch.ns, n)
    avg = np.zeros_like(h)
    count = 0
    for p in permutations(range(n)):
        avg += h[sequence_index(digits[:, list(p)], ch.ns)]
        count += 1
    avg /= count
    bound = 1.0 - (n + 1) ** ch.ns * lam
    worst = float(avg.min())
    return BoundCheck(worst, bound, worst >= bound - 1e-12, {"lambda": lam, "permutations": count})


def chernoff_bound(n_vars: int, threshold: float, mean: float) -> float:
    return math.exp(-(threshold - math.e * mean) * n_vars)


def chernoff_check(sampler, n_vars: int, threshold: float, mean: float, trials: int, rng) -> BoundCheck:
    """Monte Carlo frequency of {average of n_vars draws > threshold}.

    ``sampler(rng, shape)`` must return i.i.d. values in [0, 1] with the
    given ``mean``. Holds when the frequency minus three standard errors is
    below the bound.
    """
    t = sampler(rng, (trials, n_vars))
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("sampler must return values in [0, 1]")
    hits = (t.mean(axis=1) > threshold).astype(np.float64)
    freq = float(hits.mean())
    se = math.sqrt(max(freq * (1 - freq), 1.0 / trials) / trials)
    bound = chernoff_bound(n_vars, threshold, mean)
    return BoundCheck(freq, bound, freq - 3 * se <= bound, {"stderr": se, "exponent": threshold - math.e * mean})


def inner_product_check(alpha, beta) -> BoundCheck:
    """Mean of alpha*beta against 1 - 2*lambda, lambda the larger mean deficit."""
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    lam = max(1 - alpha.mean(), 1 - beta.mean())
    measured = float(np.mean(alpha * beta))
    bound = 1 - 2 * lam
    return BoundCheck(measured, bound, measured >= bound - 1e-12, {"lambda": lam})


def vertex_check(code, ch: ChannelSpec, draws=1000, seed=0) -> BoundCheck:
    """Product-prior attacks never beat the worst state sequence, and the
    worst one is a vertex (Dirac prior on every letter)."""
    prof = error_profile(code, ch)
    exhaustive = float(prof.max())
    eye = np.eye(ch.ns)
    digits = sequence_digits(prof.size, ch.ns, code.n)
    vertex = max(error_at_product(code, ch, eye[d]) for d in digits)
    rng = np.random.default_rng([seed, 909])
    sampled = max(error_at_product(code, ch, rng.dirichlet(np.full(ch.ns, 0.5), size=code.n))
                  for _ in range(draws))
    holds = sampled <= exhaustive + 1e-9 and abs(vertex - exhaustive) <= 1e-12
    return BoundCheck(sampled, exhaustive, holds, {"vertex_max": vertex})
