"""State-sequence attacks on conferencing codes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSpec
from .coding import STATE_CAP, error_at_product, error_profile, greedy_states, sequence_digits, sequence_index
from .errors import CapExceeded, InfeasibleCertificate, InputError
from .symmetrizability import SymmetrizerCertificate

ATTACK_DRAWS = 10_000
Z99 = 2.576


@dataclass(frozen=True, eq=False)
class AttackOutcome:
    strategy: str
    error: float
    witness: object
    evaluations: int
    half_width: float = 0.0
    expected_error: float | None = None

    def __post_init__(self):
        if not -1e-12 <= self.error <= 1 + 1e-12:
            raise ValueError(f"attack error {self.error} outside [0, 1]")

    def csv_row(self, code, seed) -> str:
        return (f"{code.n},{code.m1},{code.m2},{code.caps[0]:.6g},{code.caps[1]:.6g},"
                f"{self.error:.10f},{self.strategy},{seed}")


def _check_cap(code, ch):
    if ch.ns ** code.n > STATE_CAP:
        raise CapExceeded(f"{ch.ns}^{code.n} state sequences exceed the cap {STATE_CAP}")


def exhaustive_attack(code, ch: ChannelSpec) -> AttackOutcome:
    _check_cap(code, ch)
    prof = error_profile(code, ch)
    t = int(np.argmax(prof))
    return AttackOutcome("exhaustive", float(prof[t]), sequence_digits(prof.size, ch.ns, code.n)[t], prof.size)


def greedy_attack(code, ch: ChannelSpec) -> AttackOutcome:
    s, err = greedy_states(code, ch)
    return AttackOutcome("greedy", err, s, code.n * ch.ns)


def _spoof_kernels(code, ch, cert):
    """Per-letter state laws (messages, n, ns) induced by spoofing each message pair."""
    xw, yw = code.flat_words()
    sig = cert.sigma
    if cert.kind in ("XY", "SINGLE"):
        return sig[xw * ch.ny + yw]
    if cert.kind == "X":
        return sig[xw]
    if cert.kind == "Y":
        return sig[yw]
    raise InputError(f"unknown certificate kind {cert.kind!r}")


def symmetrizer_attack(code, ch: ChannelSpec, cert: SymmetrizerCertificate, seed=0,
                       draws=ATTACK_DRAWS) -> AttackOutcome:
    """Jam with states drawn from the symmetrizer applied to a random spoof pair.

    Each draw picks a spoof message pair uniformly, then ``s_m`` from
    ``sigma(.|x'_m, y'_m)`` (or the one-sided kernels for X and Y
    certificates) and scores the exact average error at that ``s``. The
    outcome carries the Monte Carlo mean with its 99% half-width, the exact
    expectation over the induced state law, and that law as witness.
    """
    if not cert.feasible:
        raise InfeasibleCertificate(f"{cert.kind} certificate is not feasible (residual {cert.residual:.3e})")
    if cert.sigma.shape[1] != ch.ns:
        raise InputError("certificate does not match the channel's state alphabet")
    laws = _spoof_kernels(code, ch, cert)  # (M, n, ns)
    M = laws.shape[0]
    rng = np.random.default_rng([seed, 808])
    spoof = rng.integers(0, M, size=draws)
    cdf = np.cumsum(laws[spoof], axis=2)
    s = np.minimum((rng.random((draws, code.n, 1)) > cdf).sum(axis=2), ch.ns - 1)

    # expectation: the induced law is a uniform mixture of product laws, so
    # the average error is the mean of the product-prior errors
    expected = float(np.mean([error_at_product(code, ch, laws[i]) for i in range(M)]))

    if ch.ns ** code.n <= STATE_CAP:
        prof = error_profile(code, ch)
        errs = prof[sequence_index(s, ch.ns)]
        digits = sequence_digits(prof.size, ch.ns, code.n)
        # induced distribution over S^n
        law = np.zeros(prof.size)
        for i in range(M):
            law += np.prod(laws[i][np.arange(code.n), digits], axis=1)
        witness = law / M
    else:
        uniq, inv = np.unique(s, axis=0, return_inverse=True)
        vals = np.array([error_at_product(code, ch, np.eye(ch.ns)[u]) for u in uniq])
        errs = vals[inv.reshape(-1)]
        witness = laws
    mean = float(errs.mean())
    hw = Z99 * float(errs.std(ddof=1)) / math.sqrt(draws) if draws > 1 else 1.0
    return AttackOutcome(f"symmetrizer-{cert.kind}", mean, witness, draws, hw, expected)
