"""Entropies and the conditional mutual informations of the rate region.

Everything is in bits. ``p log p`` terms with ``p < 1e-15`` count as zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channel import ChannelSpec, check_prior, mixture_tensor
from .errors import DimensionMismatch, InvalidDistribution

log = logging.getLogger(__name__)

DIST_TOL = 1e-12
CLAMP_WARN = 1e-8

TERM_NAMES = ("i_x_given_yu", "i_y_given_xu", "i_xy_given_u", "i_xy")


def _check_stochastic(a, axis, what):
    if np.any(a < -DIST_TOL):
        raise InvalidDistribution(f"{what} has negative entries")
    if np.any(np.abs(a.sum(axis=axis) - 1.0) > 1e-9):
        raise InvalidDistribution(f"{what} rows do not sum to 1")
    a = np.clip(a, 0.0, None)
    return a / a.sum(axis=axis, keepdims=True)


@dataclass(frozen=True, eq=False)
class InputPolicy:
    """p(u, x, y) = p0(u) p1(x|u) p2(y|u)."""

    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        p0 = np.asarray(self.p0, dtype=np.float64)
        p1 = np.atleast_2d(np.asarray(self.p1, dtype=np.float64))
        p2 = np.atleast_2d(np.asarray(self.p2, dtype=np.float64))
        if p0.ndim != 1 or p0.size < 1:
            raise DimensionMismatch("p0 must be a non-empty vector")
        if p1.shape[0] != p0.size or p2.shape[0] != p0.size:
            raise DimensionMismatch("p1 and p2 need one row per value of U")
        object.__setattr__(self, "p0", _check_stochastic(p0, 0, "p0"))
        object.__setattr__(self, "p1", _check_stochastic(p1, 1, "p1"))
        object.__setattr__(self, "p2", _check_stochastic(p2, 1, "p2"))

    @property
    def nu(self):
        return self.p0.size

    @property
    def nx(self):
        return self.p1.shape[1]

    @property
    def ny(self):
        return self.p2.shape[1]

    def joint_uxy(self) -> np.ndarray:
        return self.p0[:, None, None] * self.p1[:, :, None] * self.p2[:, None, :]

    @classmethod
    def uniform(cls, nx, ny, nu=1):
        return cls(np.full(nu, 1 / nu), np.full((nu, nx), 1 / nx), np.full((nu, ny), 1 / ny))

    @classmethod
    def random(cls, nu, nx, ny, rng, concentration=1.0):
        a = np.full
        return cls(rng.dirichlet(a(nu, concentration)),
                   rng.dirichlet(a(nx, concentration), size=nu),
                   rng.dirichlet(a(ny, concentration), size=nu))

    @classmethod
    def from_joint(cls, r):
        """Full-cooperation policy: U indexes the pairs (x, y), inputs are Diracs."""
        r = np.asarray(r, dtype=np.float64)
        nx, ny = r.shape
        p1 = np.repeat(np.eye(nx), ny, axis=0)
        p2 = np.tile(np.eye(ny), (nx, 1))
        return cls(r.reshape(-1), p1, p2)

    def to_dict(self):
        return {"p0": self.p0.tolist(), "p1": self.p1.tolist(), "p2": self.p2.tolist()}


@dataclass(frozen=True)
class MiTerms:
    i_x_given_yu: float
    i_y_given_xu: float
    i_xy_given_u: float
    i_xy: float

    def as_array(self):
        return np.array([self.i_x_given_yu, self.i_y_given_xu, self.i_xy_given_u, self.i_xy])


def _check_dims(p: InputPolicy, ch: ChannelSpec):
    if p.nx != ch.nx or p.ny != ch.ny:
        raise DimensionMismatch(f"policy alphabets ({p.nx},{p.ny}) vs channel ({ch.nx},{ch.ny})")


def joint_distribution(p: InputPolicy, ch: ChannelSpec, q) -> np.ndarray:
    """p_q(u, x, y, z) = p(u, x, y) W(z | x, y | q) as a dense (u,x,y,z) tensor."""
    _check_dims(p, ch)
    q = check_prior(q, ch.ns)
    v = mixture_tensor(ch.w, q)
    return p.joint_uxy()[..., None] * v[None]


def validate_joint(j: np.ndarray, tol=1e-9) -> None:
    """Raise unless ``j`` is a normalized (u,x,y,z) tensor with X, Y independent given U."""
    if j.ndim != 4:
        raise DimensionMismatch("joint must be indexed (u,x,y,z)")
    if np.any(j < -DIST_TOL) or abs(j.sum() - 1.0) > 1e-10:
        raise InvalidDistribution("joint is not a probability tensor")
    puxy = j.sum(axis=3)
    pu = puxy.sum(axis=(1, 2))
    for u in np.flatnonzero(pu > 0):
        cond = puxy[u] / pu[u]
        if np.max(np.abs(cond - np.outer(cond.sum(1), cond.sum(0)))) > tol:
            raise InvalidDistribution(f"X and Y are dependent given U={u}")


def entropy(dist) -> float:
    d = np.asarray(dist, dtype=np.float64).reshape(-1)
    if d.size == 0 or np.any(d < -DIST_TOL) or abs(d.sum() - 1.0) > 1e-9:
        raise InvalidDistribution(f"not a probability vector: {d}")
    return float(-_kernels._plogp(d).sum())


def _h(a):
    return float(-_kernels._plogp(a).sum())


def _clamp(value, name):
    if value < -CLAMP_WARN:
        log.warning("mutual information %s = %.3e < 0 beyond round-off; clamped", name, value)
    return max(value, 0.0)


def mi_terms(j: np.ndarray) -> MiTerms:
    """I(Z;X|Y,U), I(Z;Y|X,U), I(Z;X,Y|U), I(Z;X,Y) from a joint (u,x,y,z) tensor."""
    j = np.asarray(j, dtype=np.float64)
    if j.ndim != 4:
        raise DimensionMismatch("joint must be indexed (u,x,y,z)")
    if np.any(j < -DIST_TOL) or abs(j.sum() - 1.0) > 1e-10:
        raise InvalidDistribution("joint is not a probability tensor")
    h_uxyz = _h(j)
    h_uxy = _h(j.sum(3))
    h_uyz = _h(j.sum(1))
    h_uy = _h(j.sum((1, 3)))
    h_uxz = _h(j.sum(2))
    h_ux = _h(j.sum((2, 3)))
    h_uz = _h(j.sum((1, 2)))
    h_u = _h(j.sum((1, 2, 3)))
    h_xyz = _h(j.sum(0))
    h_xy = _h(j.sum((0, 3)))
    h_z = _h(j.sum((0, 1, 2)))
    h_z_xyu = h_uxyz - h_uxy
    vals = (
        (h_uyz - h_uy) - h_z_xyu,
        (h_uxz - h_ux) - h_z_xyu,
        (h_uz - h_u) - h_z_xyu,
        h_z - (h_xyz - h_xy),
    )
    return MiTerms(*(_clamp(v, n) for v, n in zip(vals, TERM_NAMES)))


def mi_terms_for(p: InputPolicy, ch: ChannelSpec, q) -> MiTerms:
    return mi_terms(joint_distribution(p, ch, q))


class MiEvaluator:
    """Batched MI terms (and gradients in q) for a fixed policy and channel.

    This is the inner loop of every q-minimization, so it goes through the
    compiled kernels.
    """

    def __init__(self, p_uxy: np.ndarray, w: np.ndarray):
        self.p = np.ascontiguousarray(p_uxy, dtype=np.float64)
        self.w = np.ascontiguousarray(w, dtype=np.float64)
        if self.p.shape[1:] != self.w.shape[1:3]:
            raise DimensionMismatch(f"policy alphabets {self.p.shape[1:]} vs channel {self.w.shape[1:3]}")

    @classmethod
    def for_policy(cls, p: InputPolicy, ch: ChannelSpec):
        _check_dims(p, ch)
        return cls(p.joint_uxy(), ch.w)

    @property
    def ns(self):
        return self.w.shape[0]

    def values(self, qs: np.ndarray) -> np.ndarray:
        qs = np.atleast_2d(qs)
        v = mixture_tensor(self.w, qs)
        vals, _ = _kernels.mi_terms_batch(self.p, v, False)
        return np.maximum(vals, 0.0)

    def values_and_grad(self, qs: np.ndarray):
        """Values (B, 4) and gradients d/dq (B, 4, ns)."""
        qs = np.atleast_2d(qs)
        v = mixture_tensor(self.w, qs)
        vals, gv = _kernels.mi_terms_batch(self.p, v, True)
        gq = np.einsum("btxyz,sxyz->bts", gv, self.w)
        return np.maximum(vals, 0.0), gq


def single_user_mi(r: np.ndarray, v: np.ndarray) -> float:
    """I(A;B) in bits for input distribution r and channel v[a, b]."""
    pb = r @ v
    return float(-_kernels._plogp(pb).sum() + (r[:, None] * _kernels._plogp(v)).sum())
