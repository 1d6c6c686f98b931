"""Desk-scale conferencing codes for the AV-MAC and the derandomization chain:
compound code -> permutation-robustified random code -> n^2 components ->
positive-rate prefix -> concatenated deterministic code.

Message pairs are flattened as ``i = j * m2 + k``. State and output sequences
are enumerated in mixed radix with the first letter most significant.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path

import numpy as np

from . import _kernels
from .channel import ChannelSpec, check_prior, mixture_tensor
from .errors import (BudgetExceeded, BudgetViolation, CapExceeded, ComponentMismatch, DimensionMismatch,
                     InputError, LengthMismatch, RateInfeasible, RetriesExhausted, SymmetrizableChannel)
from .infotheory import InputPolicy
from .region import QOptions, maxmin_single_user, robust_bounds
from .symmetrizability import check_symmetrizable

log = logging.getLogger(__name__)

STATE_CAP = 1 << 16
OUTPUT_CAP = 1 << 20
TABLE_SERIALIZE_CAP = 4096
MC_SAMPLES = 100_000
PERM_FULL_MAX_N = 6
PERM_SAMPLES = 4096
RATE_GAP = 0.01
BUDGET_TOL = 1e-12

EXPERIMENT_HEADER = "n,m1,m2,c1,c2,worst_err,mode,seed"


def _log2_or_zero(v):
    return math.log2(v) if v > 1 else 0.0


def _count(rate, n):
    return int(math.floor(2.0 ** (n * rate) + 1e-9))


def sequence_digits(count: int, base: int, n: int) -> np.ndarray:
    """Digits of 0..count-1 in base ``base``, first letter most significant."""
    idx = np.arange(count, dtype=np.int64)
    out = np.empty((count, n), dtype=np.int64)
    for m in range(n - 1, -1, -1):
        out[:, m] = idx % base
        idx //= base
    return out


def sequence_index(digits, base: int) -> np.ndarray:
    digits = np.asarray(digits, dtype=np.int64)
    idx = np.zeros(digits.shape[:-1], dtype=np.int64)
    for m in range(digits.shape[-1]):
        idx = idx * base + digits[..., m]
    return idx


# ---------------------------------------------------------------- protocol and code

@dataclass(frozen=True, eq=False)
class ConferencingProtocol:
    """Non-iterative conference: sender 1 tells sender 2 the bin ``c1[j]`` and vice versa."""

    v1: int
    v2: int
    c1: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        for name, v, c in (("c1", self.v1, self.c1), ("c2", self.v2, self.c2)):
            c = np.asarray(c, dtype=np.int64)
            if c.ndim != 1 or c.size < 1:
                raise DimensionMismatch(f"{name} must be a non-empty map")
            if v < 1 or c.min() < 0 or c.max() >= v:
                raise InputError(f"{name} values must lie in [0, {v})")
            c.setflags(write=False)
            object.__setattr__(self, name, c)

    @classmethod
    def silent(cls, m1, m2):
        return cls(1, 1, np.zeros(m1, dtype=np.int64), np.zeros(m2, dtype=np.int64))

    @classmethod
    def binning(cls, m1, m2, v1, v2):
        return cls(v1, v2, np.arange(m1) % v1, np.arange(m2) % v2)

    def to_dict(self):
        return {"v1": self.v1, "v2": self.v2, "c1": self.c1.tolist(), "c2": self.c2.tolist()}


def check_budget(n: int, v: int, cap: float, who: str) -> None:
    if _log2_or_zero(v) / n > cap + BUDGET_TOL:
        raise BudgetViolation(f"{who}: log2({v})/{n} = {_log2_or_zero(v) / n:.6f} exceeds C = {cap}")


class ConferencingCode:
    """Deterministic conferencing code with an explicit decoder table over Z^n.

    ``decoder[z]`` is the flat message index decided for output word number
    ``z``; the table makes the decoding sets a partition of Z^n.
    """

    kind = "deterministic"

    def __init__(self, n, protocol: ConferencingProtocol, xwords, ywords, decoder, caps=(0.0, 0.0), meta=None,
                 nz=None):
        self.n = int(n)
        self.protocol = protocol
        self.xwords = np.asarray(xwords, dtype=np.int64)
        self.ywords = np.asarray(ywords, dtype=np.int64)
        m1, m2 = protocol.c1.size, protocol.c2.size
        if self.xwords.shape != (m1, m2, self.n) or self.ywords.shape != (m1, m2, self.n):
            raise DimensionMismatch(f"codewords must have shape ({m1},{m2},{self.n})")
        self.m1, self.m2 = m1, m2
        self.caps = (float(caps[0]), float(caps[1]))
        self.meta = dict(meta or {})
        if decoder is not None:
            decoder = np.asarray(decoder, dtype=np.int64)
            if nz is not None and decoder.size != nz ** self.n:
                raise DimensionMismatch(f"decoder needs {nz}^{self.n} entries, got {decoder.size}")
            if decoder.min() < 0 or decoder.max() >= m1 * m2:
                raise InputError("decoder maps outside the message set")
            decoder.setflags(write=False)
        self.decoder = decoder
        self.nz = nz if nz is not None else (round(decoder.size ** (1 / self.n)) if decoder is not None else None)
        for a in (self.xwords, self.ywords):
            a.setflags(write=False)
        self._check_conference()
        check_budget(self.n, protocol.v1, self.caps[0], "sender 1")
        check_budget(self.n, protocol.v2, self.caps[1], "sender 2")

    # -- structure

    def _check_conference(self):
        c1, c2 = self.protocol.c1, self.protocol.c2
        for k in range(self.m2):
            for kp in range(k + 1, self.m2):
                if c2[k] == c2[kp] and not np.array_equal(self.xwords[:, k], self.xwords[:, kp]):
                    raise InputError(f"sender-1 words differ for messages {k},{kp} with the same bin of c2")
        for j in range(self.m1):
            for jp in range(j + 1, self.m1):
                if c1[j] == c1[jp] and not np.array_equal(self.ywords[j], self.ywords[jp]):
                    raise InputError(f"sender-2 words differ for messages {j},{jp} with the same bin of c1")

    @property
    def messages(self):
        return self.m1 * self.m2

    @property
    def rates(self):
        return math.log2(self.m1) / self.n, math.log2(self.m2) / self.n

    def flat_words(self):
        return self.xwords.reshape(-1, self.n), self.ywords.reshape(-1, self.n)

    def decode_words(self, zwords) -> np.ndarray:
        return self.decoder[sequence_index(zwords, self.nz)]

    def _need_table(self):
        if self.decoder is None:
            raise CapExceeded("code has no explicit decoder table")

    # -- exact success probabilities

    def success_at(self, ch: ChannelSpec, qs) -> np.ndarray:
        """Per-message success probability under the product prior ``qs[m]`` (n, ns)."""
        self._need_table()
        qs = np.asarray(qs, dtype=np.float64)
        xw, yw = self.flat_words()
        v = np.einsum("ms,sxyz->mxyz", qs, ch.w)
        A = v[np.arange(self.n)[None, :], xw, yw][:, :, None, :]
        return _kernels.success_by_state(self.decoder, np.ascontiguousarray(A))[:, 0]

    def success_profile(self, ch: ChannelSpec) -> np.ndarray:
        """succ[i, t] for every message i and state sequence t."""
        self._need_table()
        if ch.ns ** self.n > STATE_CAP:
            raise CapExceeded(f"{ch.ns}^{self.n} state sequences exceed the cap {STATE_CAP}")
        xw, yw = self.flat_words()
        A = np.ascontiguousarray(ch.w.transpose(1, 2, 0, 3)[xw, yw])
        return _kernels.success_by_state(self.decoder, A)

    def to_dict(self, include_table=None):
        d = {"kind": self.kind, "n": self.n, "m1": self.m1, "m2": self.m2, "nz": self.nz,
             "caps": list(self.caps), "protocol": self.protocol.to_dict(),
             "xwords": self.xwords.tolist(), "ywords": self.ywords.tolist(), "meta": self.meta}
        small = self.decoder is not None and self.decoder.size <= TABLE_SERIALIZE_CAP
        if include_table if include_table is not None else small:
            d["decoder"] = {"table": self.decoder.tolist()}
        else:
            d["decoder"] = {"ml": self.meta.get("decoder", "ml-uniform-mixture")}
        return d


def ml_decoder(ch: ChannelSpec, xw, yw, q=None) -> np.ndarray:
    """ML table over Z^n for flat codewords (M, n) under the mixture channel at ``q``."""
    n = xw.shape[1]
    if ch.nz ** n > OUTPUT_CAP:
        raise CapExceeded(f"{ch.nz}^{n} output words exceed the cap {OUTPUT_CAP}")
    q = np.full(ch.ns, 1 / ch.ns) if q is None else check_prior(q, ch.ns)
    v = mixture_tensor(ch.w, q)
    with np.errstate(divide="ignore"):
        logv = np.log(v)
    return _kernels.ml_decode_table(np.ascontiguousarray(logv), np.ascontiguousarray(xw),
                                    np.ascontiguousarray(yw), ch.nz)


def code_from_words(ch: ChannelSpec, protocol, xwords, ywords, caps=(0.0, 0.0), meta=None, decoder_prior=None):
    xwords = np.asarray(xwords, dtype=np.int64)
    ywords = np.asarray(ywords, dtype=np.int64)
    n = xwords.shape[-1]
    dec = ml_decoder(ch, xwords.reshape(-1, n), ywords.reshape(-1, n), decoder_prior)
    tag = "ml-uniform-mixture" if decoder_prior is None else "ml-mixture"
    meta = {"decoder": tag, **(meta or {})}
    if decoder_prior is not None:
        meta["decoder_prior"] = np.asarray(decoder_prior, dtype=np.float64).tolist()
    return ConferencingCode(n, protocol, xwords, ywords, dec, caps, meta, nz=ch.nz)


# ---------------------------------------------------------------- error evaluation

@dataclass(frozen=True)
class ErrorEstimate:
    value: float
    half_width: float = 0.0
    exact: bool = True
    samples: int = 0


def _as_states(code, ch, s):
    s = np.asarray(s, dtype=np.int64).reshape(-1)
    if s.size != code.n:
        raise LengthMismatch(f"state sequence has length {s.size}, code has n={code.n}")
    if s.min() < 0 or s.max() >= ch.ns:
        raise InputError("state index out of range")
    return s


def evaluate_error(code, ch: ChannelSpec, s, mode="auto", samples=MC_SAMPLES, seed=0) -> ErrorEstimate:
    """Average error over message pairs at the state sequence ``s``."""
    s = _as_states(code, ch, s)
    exact_ok = code.output_words_ok(ch) if hasattr(code, "output_words_ok") else ch.nz ** code.n <= OUTPUT_CAP
    if mode == "exact" and not exact_ok:
        raise CapExceeded(f"{ch.nz}^{code.n} output words exceed the cap {OUTPUT_CAP}")
    if mode in ("exact", "auto") and exact_ok:
        qs = np.eye(ch.ns)[s]
        return ErrorEstimate(float(1.0 - code.success_at(ch, qs).mean()))
    return _monte_carlo_error(code, ch, s, samples, seed)


def _monte_carlo_error(code, ch, s, samples, seed):
    rng = np.random.default_rng([seed, 101])
    samples = max(int(samples), MC_SAMPLES)
    xw, yw = code.flat_words()
    msg = rng.integers(0, code.messages, size=samples)
    rows = ch.w[s[None, :], xw[msg], yw[msg]]  # (N, n, nz)
    cdf = np.cumsum(rows, axis=2)
    u = rng.random((samples, code.n, 1))
    z = np.minimum((u > cdf).sum(axis=2), ch.nz - 1)
    err = (code.decode_words(z) != msg).astype(np.float64)
    hw = 2.576 * err.std(ddof=1) / math.sqrt(samples) if samples > 1 else 1.0
    return ErrorEstimate(float(err.mean()), float(hw), False, samples)


def error_at_product(code, ch: ChannelSpec, qs) -> float:
    """Average error when the states are independent with ``s_m ~ qs[m]``."""
    qs = np.asarray(qs, dtype=np.float64)
    if qs.shape != (code.n, ch.ns):
        raise DimensionMismatch(f"need one prior per letter, shape ({code.n},{ch.ns})")
    return float(1.0 - code.success_at(ch, qs).mean())


def error_profile(code, ch: ChannelSpec) -> np.ndarray:
    """Average error for every state sequence (length ns^n)."""
    return 1.0 - code.success_profile(ch).mean(axis=0)


def greedy_states(code, ch: ChannelSpec):
    """Fix letters left to right, each to the state maximizing the error with
    the remaining letters drawn from the uniform prior."""
    qs = np.full((code.n, ch.ns), 1 / ch.ns)
    s = np.zeros(code.n, dtype=np.int64)
    for m in range(code.n):
        best, arg = -1.0, 0
        for st in range(ch.ns):
            qs[m] = 0.0
            qs[m, st] = 1.0
            e = error_at_product(code, ch, qs)
            if e > best + 1e-15:
                best, arg = e, st
        s[m] = arg
        qs[m] = 0.0
        qs[m, arg] = 1.0
    return s, float(1.0 - code.success_at(ch, qs).mean())


def worst_case_error(code, ch: ChannelSpec, mode="exhaustive", draws=1000, seed=0):
    """Largest average error over state sequences: ``(error, witness)``.

    exhaustive: exact max over S^n, witness is the maximizing sequence.
    greedy: letter-by-letter heuristic, witness is the sequence found.
    sampled: best of random product priors, witness is the (n, ns) prior.
    """
    if mode == "exhaustive":
        prof = error_profile(code, ch)
        t = int(np.argmax(prof))
        return float(prof[t]), sequence_digits(ch.ns ** code.n, ch.ns, code.n)[t]
    if mode == "greedy":
        s, e = greedy_states(code, ch)
        return e, s
    if mode == "sampled":
        rng = np.random.default_rng([seed, 202])
        best, arg = -1.0, None
        for _ in range(draws):
            qs = rng.dirichlet(np.full(ch.ns, 0.5), size=code.n)
            e = error_at_product(code, ch, qs)
            if e > best:
                best, arg = e, qs
        return best, arg
    raise InputError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------- random codes

class RandomConferencingCode:
    """Components sharing blocklength, message sets and conference; one is
    picked at random with probability ``weights[g]``."""

    kind = "random"

    def __init__(self, components, weights=None):
        if not components:
            raise InputError("a random code needs at least one component")
        c0 = components[0]
        for c in components[1:]:
            if (c.n, c.m1, c.m2) != (c0.n, c0.m1, c0.m2) or c.protocol is not c0.protocol and not (
                    np.array_equal(c.protocol.c1, c0.protocol.c1) and np.array_equal(c.protocol.c2, c0.protocol.c2)):
                raise ComponentMismatch("components must share n, message sets and conference")
        w = np.full(len(components), 1 / len(components)) if weights is None else np.asarray(weights, float)
        if w.shape != (len(components),) or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
            raise InputError("weights must be a distribution over the components")
        self.components = list(components)
        self.weights = w / w.sum()
        self.n, self.m1, self.m2 = c0.n, c0.m1, c0.m2
        self.protocol = c0.protocol
        self._profiles = {}

    def __len__(self):
        return len(self.components)

    def component_profiles(self, ch: ChannelSpec) -> np.ndarray:
        """(components, ns^n) average error per component and state sequence."""
        key = id(ch)
        if key not in self._profiles:
            self._profiles[key] = (ch, np.stack([error_profile(c, ch) for c in self.components]))
        return self._profiles[key][1]

    def error_profile(self, ch: ChannelSpec) -> np.ndarray:
        return self.weights @ self.component_profiles(ch)

    def worst_case_error(self, ch: ChannelSpec):
        prof = self.error_profile(ch)
        t = int(np.argmax(prof))
        return float(prof[t]), sequence_digits(ch.ns ** self.n, ch.ns, self.n)[t]

    def to_dict(self):
        return {"kind": self.kind, "weights": self.weights.tolist(),
                "components": [c.to_dict() for c in self.components]}


def permute_code(code: ConferencingCode, perm) -> ConferencingCode:
    """Component for the permutation ``perm``: words become x[perm^-1] and the
    decoder reads its input through ``perm``, so its error at s equals the
    original error at s[perm]."""
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.argsort(perm)
    xw = code.xwords[..., inv]
    yw = code.ywords[..., inv]
    digits = sequence_digits(code.nz ** code.n, code.nz, code.n)
    dec = code.decoder[sequence_index(digits[:, perm], code.nz)]
    meta = {**code.meta, "permutation": perm.tolist()}
    return ConferencingCode(code.n, code.protocol, xw, yw, dec, code.caps, meta, nz=code.nz)


def robustify(code: ConferencingCode, seed=0, samples=PERM_SAMPLES) -> RandomConferencingCode:
    """Uniform mixture of the code over coordinate permutations (all of S_n for
    n <= 6, otherwise ``samples`` random ones)."""
    code._need_table()
    if code.n <= PERM_FULL_MAX_N:
        perms = [np.array(p) for p in permutations(range(code.n))]
    else:
        rng = np.random.default_rng([seed, 303])
        perms = [rng.permutation(code.n) for _ in range(samples)]
    return RandomConferencingCode([permute_code(code, p) for p in perms])


def reduce_randomness(rc: RandomConferencingCode, ch: ChannelSpec, n: int, lam=None, seed=0,
                      retries=64) -> RandomConferencingCode:
    """Keep n^2 components drawn i.i.d. from the weights so that the uniform
    mixture has worst-case error at most 3*lam.

    ``lam`` defaults to the measured worst-case error of ``rc``.
    """
    if n < 1:
        raise InputError("n must be positive")
    profiles = rc.component_profiles(ch)
    if lam is None:
        lam = float(np.max(rc.weights @ profiles))
    target = 3.0 * lam
    k = n * n
    best = math.inf
    for attempt in range(retries):
        rng = np.random.default_rng([seed, attempt, 404])
        idx = rng.choice(len(rc), size=k, p=rc.weights)
        worst = float(np.max(profiles[idx].mean(axis=0)))
        best = min(best, worst)
        if worst <= target + 1e-12:
            out = RandomConferencingCode([rc.components[i] for i in idx])
            out._profiles[id(ch)] = (ch, profiles[idx])
            out.lam = lam
            out.draw_seed = (seed, attempt)
            return out
    raise RetriesExhausted(f"no draw of {k} components reached error {target:.4g}", best_error=best)


# ---------------------------------------------------------------- compound code

def build_compound_code(ch: ChannelSpec, p: InputPolicy, n: int, rates, c1: float, c2: float, seed=0,
                        gap=RATE_GAP, qopts: QOptions | None = None) -> ConferencingCode:
    """Random conferencing codebook with ML decoding under the uniform-prior mixture.

    The conference bins the messages (``c(j) = j mod V``); for each pair of
    bins a U-sequence is drawn from p0, sender 1's word for (j, bin2) is drawn
    letterwise from p1(.|u) and sender 2's word for (k, bin1) from p2(.|u).
    """
    if c1 < 0 or c2 < 0:
        raise InputError("conferencing capacities must be nonnegative")
    if n < 1:
        raise InputError("blocklength must be positive")
    r1, r2 = rates
    if r1 < 0 or r2 < 0:
        raise InputError("rates must be nonnegative")
    m1, m2 = _count(r1, n), _count(r2, n)
    if m1 * m2 > 1:
        rb = robust_bounds(p, ch, c1, c2, qopts)
        # a sender with a single message imposes no constraint of its own
        bad1 = m1 > 1 and r1 > rb.b1 - gap
        bad2 = m2 > 1 and r2 > rb.b2 - gap
        if bad1 or bad2 or r1 + r2 > rb.sum_bound - gap:
            raise RateInfeasible(
                f"rates ({r1}, {r2}) not inside the pentagon ({rb.b1:.4f}, {rb.b2:.4f}, {rb.sum_bound:.4f}) "
                f"minus gap {gap}")
    v1 = min(m1, max(1, _count(c1, n)))
    v2 = min(m2, max(1, _count(c2, n)))
    protocol = ConferencingProtocol.binning(m1, m2, v1, v2)

    rng = np.random.default_rng([seed, 505])
    u = np.array([[rng.choice(p.nu, size=n, p=p.p0) for _ in range(v2)] for _ in range(v1)])  # (v1, v2, n)
    cdf1, cdf2 = np.cumsum(p.p1, axis=1), np.cumsum(p.p2, axis=1)

    def draw(cdf, uu):
        return np.minimum((rng.random(uu.shape)[..., None] > cdf[uu]).sum(-1), cdf.shape[1] - 1)

    xj = np.stack([draw(cdf1, u[protocol.c1[j]]) for j in range(m1)])  # (m1, v2, n): x for (j, bin2)
    yk = np.stack([draw(cdf2, u[:, protocol.c2[k]]) for k in range(m2)])  # (m2, v1, n): y for (k, bin1)
    xwords = xj[:, protocol.c2, :]
    ywords = np.transpose(yk[:, protocol.c1, :], (1, 0, 2))
    meta = {"construction": "compound", "seed": seed, "rates": [r1, r2], "policy": p.to_dict(), "zeta": None}
    return code_from_words(ch, protocol, xwords, ywords, (c1, c2), meta)


def random_code(ch: ChannelSpec, n: int, m1: int, m2: int, seed=0, decoder_prior=None) -> ConferencingCode:
    """Conference-free code with uniform i.i.d. codewords and ML decoding
    (under the uniform-prior mixture unless ``decoder_prior`` is given)."""
    rng = np.random.default_rng([seed, 606])
    xj = rng.integers(0, ch.nx, size=(m1, n))
    yk = rng.integers(0, ch.ny, size=(m2, n))
    xwords = np.repeat(xj[:, None, :], m2, axis=1)
    ywords = np.repeat(yk[None, :, :], m1, axis=0)
    return code_from_words(ch, ConferencingProtocol.silent(m1, m2), xwords, ywords,
                           meta={"construction": "random", "seed": seed}, decoder_prior=decoder_prior)


# ---------------------------------------------------------------- prefix code

def prefix_input(ch: ChannelSpec, qopts: QOptions | None = None) -> np.ndarray:
    """Max-min input law over the pairs (x, y), flattened."""
    fam = ch.w.reshape(ch.ns, ch.nx * ch.ny, ch.nz)
    return maxmin_single_user(fam, qopts)[1]


def positive_rate_prefix(ch: ChannelSpec, count: int, c1: float, seed=0, target=0.25, max_m=None,
                         seeds=16, joint=None) -> ConferencingCode:
    """Code with ``count`` sender-1 messages, one sender-2 message and c1 the
    identity, so that both senders know the message and transmit a word over
    X x Y jointly.

    Blocklengths are scanned upward from the smallest one allowed by ``c1``;
    for each, ``seeds`` codebooks are tried in order. The first with
    exhaustive worst-case error at most ``target`` is returned.
    """
    if count < 1:
        raise InputError("count must be positive")
    if c1 <= 0:
        raise InputError("the prefix needs c1 > 0")
    cert = check_symmetrizable(ch, "XY")
    if cert.feasible:
        raise SymmetrizableChannel("channel is (X,Y)-symmetrizable; no positive-rate deterministic prefix exists")
    protocol = ConferencingProtocol(count, 1, np.arange(count), np.zeros(1, dtype=np.int64))
    m0 = max(1, math.ceil(_log2_or_zero(count) / c1 - 1e-12))
    if count == 1:
        z = np.zeros((1, 1, m0), dtype=np.int64)
        return ConferencingCode(m0, protocol, z, z, np.zeros(ch.nz ** m0, dtype=np.int64), (c1, 0.0),
                                {"construction": "prefix", "decoder": "constant"}, nz=ch.nz)
    if max_m is None:
        max_m = max(m0, min(int(math.log(OUTPUT_CAP, ch.nz) + 1e-9), int(math.log(STATE_CAP, ch.ns) + 1e-9)
                            if ch.ns > 1 else 64))
    r = prefix_input(ch) if joint is None else np.asarray(joint, dtype=np.float64).reshape(-1)
    best = (math.inf, None)
    for m in range(m0, max_m + 1):
        for sd in range(seeds):
            rng = np.random.default_rng([seed, m, sd, 707])
            pairs = rng.choice(r.size, size=(count, m), p=r / r.sum())
            xw, yw = (pairs // ch.ny)[:, None, :], (pairs % ch.ny)[:, None, :]
            code = code_from_words(ch, protocol, xw, yw, (c1, 0.0),
                                   {"construction": "prefix", "seed": seed, "trial": sd})
            err, _ = worst_case_error(code, ch)
            if err < best[0]:
                best = (err, code)
            if err <= target:
                code.meta["worst_error"] = err
                return code
    raise BudgetExceeded(f"no prefix with error <= {target} up to m={max_m}; best {best[0]:.4f}")


# ---------------------------------------------------------------- elimination

@dataclass(frozen=True)
class EliminationPlan:
    """Prefix length m for inner length n at prefix rate R, with slack epsilon."""

    prefix_length: int
    inner_length: int
    rate: float
    epsilon: float

    def __post_init__(self):
        lo = 2 / self.rate * math.log2(self.inner_length)
        hi = 2 / (self.rate - self.epsilon) * math.log2(self.inner_length) if self.rate > self.epsilon else math.inf
        if not (lo - 1e-9 <= self.prefix_length <= hi + 1e-9):
            raise InputError(f"prefix length {self.prefix_length} outside [{lo:.3f}, {hi:.3f}]")

    @classmethod
    def design(cls, n: int, rate: float, epsilon: float):
        return cls(max(1, math.ceil(2 / rate * math.log2(n) - 1e-12)), n, rate, epsilon)

    @property
    def total_length(self):
        return self.prefix_length + self.inner_length

    def prefix_conferencing_rate(self) -> float:
        """Bits per letter the conference spends on the component index."""
        return 2 * math.log2(self.inner_length) / self.total_length

    def check_budget(self, v1: int, c1: float) -> None:
        need = math.log2(self.inner_length ** 2 * v1) / self.total_length
        if need > c1 + BUDGET_TOL:
            raise BudgetViolation(f"conference needs {need:.4f} bits/letter, C1 = {c1}")


class ConcatenatedCode(ConferencingCode):
    """Prefix word announcing the component, followed by that component's word.

    Decoding sets are products: the prefix decoder picks the component on
    the first m letters, the component decoder handles the rest. Errors are
    evaluated through that factorization, so no table over Z^(m+n) is built.
    """

    kind = "concatenated"

    def __init__(self, prefix: ConferencingCode, components, caps, meta=None):
        self.prefix = prefix
        self.components = list(components)
        g = len(self.components)
        inner = self.components[0]
        cp = inner.protocol
        protocol = ConferencingProtocol(
            g * cp.v1, cp.v2,
            (np.arange(g)[:, None] * cp.v1 + cp.c1[None, :]).reshape(-1), cp.c2)
        px, py = prefix.xwords[:, 0, :], prefix.ywords[:, 0, :]
        xw = np.concatenate([np.broadcast_to(px[:, None, None, :], (g, inner.m1, inner.m2, prefix.n)),
                             np.stack([c.xwords for c in self.components])], axis=3)
        yw = np.concatenate([np.broadcast_to(py[:, None, None, :], (g, inner.m1, inner.m2, prefix.n)),
                             np.stack([c.ywords for c in self.components])], axis=3)
        n = prefix.n + inner.n
        self.inner_n = inner.n
        super().__init__(n, protocol, xw.reshape(g * inner.m1, inner.m2, n),
                         yw.reshape(g * inner.m1, inner.m2, n), None, caps, meta, nz=inner.nz)

    def output_words_ok(self, ch):
        return ch.nz ** max(self.prefix.n, self.inner_n) <= OUTPUT_CAP

    def decode_words(self, zwords):
        zwords = np.asarray(zwords)
        g = self.prefix.decode_words(zwords[:, :self.prefix.n])
        rest = zwords[:, self.prefix.n:]
        inner = np.empty(len(zwords), dtype=np.int64)
        for gi in np.unique(g):
            sel = g == gi
            inner[sel] = self.components[gi].decode_words(rest[sel])
        m_inner = self.components[0].messages
        return g * m_inner + inner

    def _factors(self, alpha, betas):
        # success of message (g, i) = alpha[g] * beta[g, i]
        return (alpha[:, None] * betas).reshape(-1)

    def success_at(self, ch, qs):
        qs = np.asarray(qs, dtype=np.float64)
        alpha = self.prefix.success_at(ch, qs[:self.prefix.n])
        betas = np.stack([c.success_at(ch, qs[self.prefix.n:]) for c in self.components])
        return self._factors(alpha, betas)

    def success_profile(self, ch):
        if ch.ns ** self.n > STATE_CAP:
            raise CapExceeded(f"{ch.ns}^{self.n} state sequences exceed the cap {STATE_CAP}")
        alpha = self.prefix.success_profile(ch)  # (g, Sp)
        betas = np.stack([c.success_profile(ch) for c in self.components])  # (g, Mi, Si)
        out = alpha[:, None, :, None] * betas[:, :, None, :]
        return out.reshape(alpha.shape[0] * betas.shape[1], -1)

    def average_error_profile(self, ch):
        """Average error over S^(m+n) as 1 - (1/G) alpha^T beta_bar."""
        if ch.ns ** self.n > STATE_CAP:
            raise CapExceeded(f"{ch.ns}^{self.n} state sequences exceed the cap {STATE_CAP}")
        alpha = self.prefix.success_profile(ch)
        bbar = np.stack([c.success_profile(ch).mean(axis=0) for c in self.components])
        return 1.0 - (alpha.T @ bbar).reshape(-1) / alpha.shape[0]

    def to_dict(self, include_table=None):
        d = super().to_dict(include_table=False)
        d["decoder"] = {"concatenated": {"prefix": self.prefix.to_dict(),
                                         "components": [c.to_dict() for c in self.components]}}
        return d


def eliminate_correlation(prefix: ConferencingCode, rc: RandomConferencingCode, c1: float, c2: float,
                          plan: EliminationPlan | None = None) -> ConcatenatedCode:
    """Deterministic code from a prefix with one message per component of ``rc``."""
    if prefix.m2 != 1:
        raise ComponentMismatch("prefix must have a single sender-2 message")
    if len(rc) != prefix.m1:
        raise ComponentMismatch(f"prefix distinguishes {prefix.m1} components, random code has {len(rc)}")
    inner = rc.components[0]
    total = prefix.n + inner.n
    v1 = prefix.m1 * inner.protocol.v1
    if plan is not None:
        if (plan.prefix_length, plan.inner_length) != (prefix.n, inner.n):
            raise ComponentMismatch("plan lengths do not match the codes")
        plan.check_budget(inner.protocol.v1, c1)
    check_budget(total, v1, c1, "sender 1")
    check_budget(total, inner.protocol.v2, c2, "sender 2")
    meta = {"construction": "elimination", "prefix_length": prefix.n, "inner_length": inner.n,
            "components": len(rc)}
    return ConcatenatedCode(prefix, rc.components, (c1, c2), meta)


# ---------------------------------------------------------------- serialization and reports

def code_to_dict(code) -> dict:
    return code.to_dict()


def code_from_dict(d: dict, ch: ChannelSpec | None = None):
    kind = d.get("kind")
    if kind == "random":
        return RandomConferencingCode([code_from_dict(c, ch) for c in d["components"]], d["weights"])
    dec = d.get("decoder", {})
    if kind == "concatenated":
        inner = dec["concatenated"]
        comps = [code_from_dict(c, ch) for c in inner["components"]]
        return ConcatenatedCode(code_from_dict(inner["prefix"], ch), comps, tuple(d["caps"]), d.get("meta"))
    if kind != "deterministic":
        raise InputError(f"unknown code kind {kind!r}")
    pr = d["protocol"]
    protocol = ConferencingProtocol(pr["v1"], pr["v2"], np.array(pr["c1"]), np.array(pr["c2"]))
    if "table" in dec:
        return ConferencingCode(d["n"], protocol, d["xwords"], d["ywords"], dec["table"], tuple(d["caps"]),
                                d.get("meta"), nz=d.get("nz"))
    if ch is None:
        raise InputError("code file stores an ML decoder; a channel is needed to rebuild it")
    xw = np.asarray(d["xwords"])
    meta = d.get("meta") or {}
    return code_from_words(ch, protocol, xw, d["ywords"], tuple(d["caps"]), meta, meta.get("decoder_prior"))


def save_code(code, path) -> None:
    Path(path).write_text(json.dumps(code.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def load_code(path, ch: ChannelSpec | None = None):
    try:
        return code_from_dict(json.loads(Path(path).read_text(encoding="utf-8")), ch)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"malformed code file {path}: {exc}") from exc


def experiment_row(code, worst: float, mode: str, seed) -> str:
    return f"{code.n},{code.m1},{code.m2},{code.caps[0]:.6g},{code.caps[1]:.6g},{worst:.10f},{mode},{seed}"


@dataclass
class PipelineReport:
    """Everything produced by one run of the elimination chain."""

    compound: ConferencingCode
    compound_error: float
    robust: RandomConferencingCode
    lam: float
    reduced: RandomConferencingCode
    reduced_error: float
    prefix: ConferencingCode
    prefix_error: float
    final: ConcatenatedCode
    final_error: float
    final_witness: np.ndarray
    rows: list = field(default_factory=list)

    @property
    def bound(self):
        return self.prefix_error + 3 * self.lam

    @property
    def sender1_rate(self):
        return math.log2(self.final.m1) / self.final.n


def run_pipeline(ch: ChannelSpec, p: InputPolicy, n: int, rates, c1: float, c2: float, seed=0,
                 prefix_target=0.05, qopts=None, compound_tries=8) -> PipelineReport:
    """compound code -> robustify -> n^2 components -> prefix -> concatenation.

    The compound codebook is the best (lowest worst-case error) of
    ``compound_tries`` consecutive seeds.
    """
    comp, comp_err = None, math.inf
    for sd in range(seed, seed + compound_tries):
        c = build_compound_code(ch, p, n, rates, c1, c2, sd, qopts=qopts)
        e, _ = worst_case_error(c, ch)
        if e < comp_err:
            comp, comp_err = c, e
    rc = robustify(comp, seed)
    lam, _ = rc.worst_case_error(ch)
    red = reduce_randomness(rc, ch, n, lam, seed)
    red_err, _ = red.worst_case_error(ch)
    # the prefix may use whatever conference budget the inner code leaves
    pre = positive_rate_prefix(ch, n * n, c1, seed, target=prefix_target)
    pre_err, _ = worst_case_error(pre, ch)
    final = eliminate_correlation(pre, red, c1, c2)
    prof = final.average_error_profile(ch)
    t = int(np.argmax(prof))
    witness = sequence_digits(ch.ns ** final.n, ch.ns, final.n)[t]
    rows = [experiment_row(comp, comp_err, "compound", seed),
            f"{n},{red.m1},{red.m2},{c1:.6g},{c2:.6g},{red_err:.10f},reduced,{seed}",
            experiment_row(pre, pre_err, "prefix", seed),
            experiment_row(final, float(prof[t]), "final", seed)]
    return PipelineReport(comp, comp_err, rc, lam, red, red_err, pre, pre_err, final, float(prof[t]), witness, rows)
