"""Symmetrizability of an AV-MAC decided by linear programming.

For each kind we look for a stochastic matrix ``sigma`` (rows indexed by the
conditioning alphabet, columns by states) minimizing the largest violation of
the symmetrizing equalities::

    minimize t   s.t.  -t <= E(sigma) <= t,  sigma >= 0,  rows of sigma sum to 1

The optimum ``t`` is zero exactly when the channel is symmetrizable of that
kind. The returned residual is always recomputed from scratch by
:func:`verify_certificate`, never taken from the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSpec
from .errors import DimensionMismatch, InputError
from .lp import linprog

KINDS = ("XY", "X", "Y", "SINGLE")
DEFAULT_TOL = 1e-7
MARGINAL_BAND = 1e-4


@dataclass(frozen=True, eq=False)
class SymmetrizerCertificate:
    kind: str
    sigma: np.ndarray
    residual: float
    feasible: bool
    tol: float = DEFAULT_TOL
    lp_value: float = float("nan")

    @property
    def marginal(self) -> bool:
        """Residual lies in the band where the float verdict is not trustworthy."""
        return self.tol < self.residual < MARGINAL_BAND

    def to_dict(self):
        return {"kind": self.kind, "feasible": self.feasible, "residual": self.residual,
                "tol": self.tol, "marginal": self.marginal, "sigma": self.sigma.tolist()}


def conditioning_size(ch: ChannelSpec, kind: str) -> int:
    return {"XY": ch.nx * ch.ny, "SINGLE": ch.nx * ch.ny, "X": ch.nx, "Y": ch.ny}[kind]


# ---------------------------------------------------------------- equality systems
# Each builder returns E of shape (n_expr, K * ns) with sigma flattened row-major.

def _system_xy(w):
    ns, nx, ny, nz = w.shape
    K = nx * ny
    rows = []
    pairs = [(x, y) for x in range(nx) for y in range(ny)]
    for a, (x, y) in enumerate(pairs):
        for b in range(a + 1, K):
            xp, yp = pairs[b]
            for z in range(nz):
                row = np.zeros((K, ns))
                # sum_s W(z|x,y|s) sigma(s|x',y') - sum_s W(z|x',y'|s) sigma(s|x,y)
                row[b] += w[:, x, y, z]
                row[a] -= w[:, xp, yp, z]
                rows.append(row.reshape(-1))
    return np.array(rows).reshape(-1, K * ns)


def _system_x(w):
    ns, nx, ny, nz = w.shape
    rows = []
    for y in range(ny):
        for x in range(nx):
            for xp in range(x + 1, nx):
                for z in range(nz):
                    row = np.zeros((nx, ns))
                    row[xp] += w[:, x, y, z]
                    row[x] -= w[:, xp, y, z]
                    rows.append(row.reshape(-1))
    return np.array(rows).reshape(-1, nx * ns)


def _system_y(w):
    return _system_x(np.swapaxes(w, 1, 2))


def _system_single(h):
    """Single-user AVC family h[s, a, b]."""
    ns, na, nb = h.shape
    a_idx, ap_idx = np.triu_indices(na, k=1)
    n_expr = a_idx.size * nb
    E = np.zeros((a_idx.size, nb, na, ns))
    for k, (a, ap) in enumerate(zip(a_idx, ap_idx)):
        E[k, :, ap, :] += h[:, a, :].T
        E[k, :, a, :] -= h[:, ap, :].T
    return E.reshape(n_expr, na * ns)


def equality_system(ch: ChannelSpec, kind: str) -> np.ndarray:
    if kind == "XY":
        return _system_xy(ch.w)
    if kind == "X":
        return _system_x(ch.w)
    if kind == "Y":
        return _system_y(ch.w)
    if kind == "SINGLE":
        return _system_single(ch.w.reshape(ch.ns, ch.nx * ch.ny, ch.nz))
    raise InputError(f"unknown symmetrizability kind {kind!r}")


# ---------------------------------------------------------------- direct check

def verify_certificate(ch: ChannelSpec, cert_or_kind, sigma=None) -> float:
    """Largest violation of the symmetrizing equalities, by direct enumeration."""
    if isinstance(cert_or_kind, SymmetrizerCertificate):
        kind, sigma = cert_or_kind.kind, cert_or_kind.sigma
    else:
        kind = cert_or_kind
    sigma = np.asarray(sigma, dtype=np.float64)
    K = conditioning_size(ch, kind)
    if sigma.shape != (K, ch.ns):
        raise DimensionMismatch(f"{kind} certificate needs shape ({K},{ch.ns}), got {sigma.shape}")
    w = ch.w
    if kind in ("XY", "SINGLE"):
        sig = sigma.reshape(ch.nx, ch.ny, ch.ns)
        lhs = np.einsum("sxyz,abs->xyabz", w, sig)
        rhs = lhs.transpose(2, 3, 0, 1, 4)
    elif kind == "X":
        lhs = np.einsum("sxyz,as->xyaz", w, sigma)
        rhs = np.einsum("sayz,xs->xyaz", w, sigma)
    elif kind == "Y":
        lhs = np.einsum("sxyz,bs->xybz", w, sigma)
        rhs = np.einsum("sxbz,ys->xybz", w, sigma)
    else:
        raise InputError(f"unknown symmetrizability kind {kind!r}")
    return float(np.max(np.abs(lhs - rhs), initial=0.0))


# ---------------------------------------------------------------- decision

def check_symmetrizable(ch: ChannelSpec, kind: str, tol: float = DEFAULT_TOL) -> SymmetrizerCertificate:
    if kind not in KINDS:
        raise InputError(f"unknown symmetrizability kind {kind!r}")
    if not 0 < tol <= 1e-3:
        raise InputError(f"tol must lie in (0, 1e-3], got {tol}")
    K = conditioning_size(ch, kind)
    ns = ch.ns
    E = equality_system(ch, kind)
    E = E[np.any(E != 0, axis=1)]
    nvar = K * ns + 1
    if E.shape[0] == 0:
        sigma = np.full((K, ns), 1.0 / ns)
        lp_value = 0.0
    else:
        c = np.zeros(nvar)
        c[-1] = 1.0
        ones = -np.ones((E.shape[0], 1))
        A_ub = np.vstack([np.hstack([E, ones]), np.hstack([-E, ones])])
        b_ub = np.zeros(A_ub.shape[0])
        A_eq = np.zeros((K, nvar))
        for k in range(K):
            A_eq[k, k * ns:(k + 1) * ns] = 1.0
        res = linprog(c, A_ub, b_ub, A_eq, np.ones(K))
        sigma = res.x[:-1].reshape(K, ns)
        lp_value = res.fun
    sigma = np.clip(sigma, 0.0, None)
    sigma /= sigma.sum(axis=1, keepdims=True)
    residual = verify_certificate(ch, kind, sigma)
    return SymmetrizerCertificate(kind, sigma, residual, residual <= tol, tol, lp_value)


def all_verdicts(ch: ChannelSpec, tol: float = DEFAULT_TOL) -> dict[str, SymmetrizerCertificate]:
    return {k: check_symmetrizable(ch, k, tol) for k in KINDS}
