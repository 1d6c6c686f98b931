"""Hot numeric kernels with a numba path and a pure-numpy path.

The backend is picked once at import from the ``AVMAC_BACKEND`` environment
variable (``numba`` or ``numpy``); numba is the default when it imports.
Both paths implement the same algorithms with the same summation order, so
decoder tie-breaks agree bit for bit.

Kernels
-------
success_by_state(dec, A)
    ``A[i, m, s, z]`` is the letter-``m`` transition matrix of message ``i``.
    Returns ``succ[i, t]``: probability that message ``i`` decodes correctly
    under state sequence number ``t`` (mixed radix, first letter most
    significant).
ml_decode_table(logv, xw, yw, nz)
    Maximum-likelihood decision for every output word; lowest index on ties.
mi_terms_batch(p, V, want_grad)
    The four mutual informations for a batch of single-state channels.
"""

from __future__ import annotations

import math
import os

import numpy as np

PLOGP_FLOOR = 1e-15
_LOG2E = 1.0 / math.log(2.0)

_requested = os.environ.get("AVMAC_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"AVMAC_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested != "numba":
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------- numpy path

def success_by_state_np(dec, A):
    M, n, S, nz = A.shape
    out = np.empty((M, S ** n))
    for i in range(M):
        t = (dec == i).astype(np.float64).reshape(1, nz, -1)
        for m in range(n):
            # t: (P, nz, R) -> (P, S, R)
            t = np.einsum("sz,pzr->psr", A[i, m], t)
            p, s, r = t.shape
            t = t.reshape(p * s, nz, r // nz) if m + 1 < n else t.reshape(p * s)
        out[i] = t
    return out


def ml_decode_table_np(logv, xw, yw, nz, block=1 << 21):
    M, n = xw.shape
    letters = logv[xw, yw, :]  # (M, n, nz)
    # split into head letters looped in python and tail letters vectorized,
    # keeping the strictly sequential summation order
    tail = n
    while tail > 0 and M * nz ** tail > block:
        tail -= 1
    head = n - tail
    out = np.empty(nz ** n, dtype=np.int64)
    width = nz ** tail
    for h in range(nz ** head):
        acc = np.zeros((M, 1))
        digits = _digits(h, nz, head)
        for m in range(head):
            acc = acc + letters[:, m, digits[m]][:, None]
        for m in range(head, n):
            acc = (acc[:, :, None] + letters[:, m, None, :]).reshape(M, -1)
        out[h * width:(h + 1) * width] = np.argmax(acc, axis=0)
    return out


def _digits(index, base, length):
    d = [0] * length
    for k in range(length - 1, -1, -1):
        index, d[k] = divmod(index, base)
    return d


def _plogp(a):
    safe = np.where(a > PLOGP_FLOOR, a, 1.0)
    return np.where(a > PLOGP_FLOOR, a * np.log2(safe), 0.0)


def _cond_entropy(joint_gz):
    # H(Z|G) from P(g..., z) with z last, batch first
    axes = tuple(range(1, joint_gz.ndim))
    pg = joint_gz.sum(axis=-1)
    return -_plogp(joint_gz).sum(axis=axes) + _plogp(pg).sum(axis=axes[:-1])


def _log_cond(joint_gz):
    pg = joint_gz.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(pg > 0, joint_gz / np.where(pg > 0, pg, 1.0), 0.0)
    return np.log2(np.maximum(c, PLOGP_FLOOR))


def mi_terms_batch_np(p, V, want_grad=False):
    """Rows: I(Z;X|Y,U), I(Z;Y|X,U), I(Z;X,Y|U), I(Z;X,Y)."""
    pxy = p.sum(axis=0)
    j = p[None, :, :, :, None] * V[:, None]  # (B,u,x,y,z)
    h_xyu = -np.einsum("xy,bxyz->b", pxy, _plogp(V))
    j_uyz = j.sum(axis=2)
    j_uxz = j.sum(axis=3)
    j_uz = j_uyz.sum(axis=2)
    j_z = j_uz.sum(axis=1)
    h_yu = _cond_entropy(j_uyz)
    h_xu = _cond_entropy(j_uxz)
    h_u = _cond_entropy(j_uz)
    h_z = -_plogp(j_z).sum(axis=1)
    vals = np.stack([h_yu - h_xyu, h_xu - h_xyu, h_u - h_xyu, h_z - h_xyu], axis=1)
    if not want_grad:
        return vals, None
    # dH(Z|G)/dV[x,y,z] = -sum_u p(u,x,y) log2 P(z | g(u,x,y))
    g_xyu = -pxy[None, :, :, None] * np.log2(np.maximum(V, PLOGP_FLOOR))
    g_yu = -np.einsum("uxy,buyz->bxyz", p, _log_cond(j_uyz))
    g_xu = -np.einsum("uxy,buxz->bxyz", p, _log_cond(j_uxz))
    g_u = -np.einsum("uxy,buz->bxyz", p, _log_cond(j_uz))
    lz = np.log2(np.maximum(j_z, PLOGP_FLOOR))
    g_z = -pxy[None, :, :, None] * lz[:, None, None, :]
    grad = np.stack([g_yu - g_xyu, g_xu - g_xyu, g_u - g_xyu, g_z - g_xyu], axis=1)
    return vals, grad


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _success_by_state_nb(dec, A):
        M, n, S, nz = A.shape
        nout = S ** n
        out = np.empty((M, nout))
        total = nz ** n
        for i in range(M):
            t = np.zeros(total)
            for k in range(total):
                if dec[k] == i:
                    t[k] = 1.0
            P = 1
            R = total // nz
            for m in range(n):
                nt = np.zeros(P * S * R)
                for pp in range(P):
                    for s in range(S):
                        base_out = (pp * S + s) * R
                        for z in range(nz):
                            a = A[i, m, s, z]
                            if a == 0.0:
                                continue
                            base_in = (pp * nz + z) * R
                            for r in range(R):
                                nt[base_out + r] += a * t[base_in + r]
                t = nt
                P = P * S
                if m + 1 < n:
                    R = R // nz
            for k in range(nout):
                out[i, k] = t[k]
        return out

    @njit(cache=True)
    def _ml_decode_table_nb(logv, xw, yw, nz):
        M, n = xw.shape
        total = nz ** n
        out = np.empty(total, dtype=np.int64)
        digits = np.empty(n, dtype=np.int64)
        for k in range(total):
            rem = k
            for m in range(n - 1, -1, -1):
                digits[m] = rem % nz
                rem //= nz
            best = -np.inf
            arg = 0
            for i in range(M):
                acc = 0.0
                for m in range(n):
                    acc = acc + logv[xw[i, m], yw[i, m], digits[m]]
                if acc > best:
                    best = acc
                    arg = i
            out[k] = arg
        return out

    @njit(cache=True)
    def _plogp_nb(a):
        if a > PLOGP_FLOOR:
            return a * math.log(a) * _LOG2E
        return 0.0

    @njit(cache=True)
    def _log2_floor(a):
        if a > PLOGP_FLOOR:
            return math.log(a) * _LOG2E
        return math.log(PLOGP_FLOOR) * _LOG2E

    @njit(cache=True)
    def _mi_terms_batch_nb(p, V, want_grad):
        nu, nx, ny = p.shape
        B = V.shape[0]
        nz = V.shape[3]
        vals = np.zeros((B, 4))
        if want_grad:
            grad = np.zeros((B, 4, nx, ny, nz))
        else:
            grad = np.zeros((0, 4, nx, ny, nz))
        pxy = np.zeros((nx, ny))
        for u in range(nu):
            for x in range(nx):
                for y in range(ny):
                    pxy[x, y] += p[u, x, y]
        j_uyz = np.zeros((nu, ny, nz))
        j_uxz = np.zeros((nu, nx, nz))
        j_uz = np.zeros((nu, nz))
        j_z = np.zeros(nz)
        for b in range(B):
            j_uyz[:] = 0.0
            j_uxz[:] = 0.0
            j_uz[:] = 0.0
            j_z[:] = 0.0
            h_xyu = 0.0
            for x in range(nx):
                for y in range(ny):
                    for z in range(nz):
                        h_xyu -= pxy[x, y] * _plogp_nb(V[b, x, y, z])
            for u in range(nu):
                for x in range(nx):
                    for y in range(ny):
                        w = p[u, x, y]
                        for z in range(nz):
                            a = w * V[b, x, y, z]
                            j_uyz[u, y, z] += a
                            j_uxz[u, x, z] += a
                            j_uz[u, z] += a
                            j_z[z] += a
            h_yu = 0.0
            h_xu = 0.0
            h_u = 0.0
            h_z = 0.0
            for u in range(nu):
                for y in range(ny):
                    tot = 0.0
                    for z in range(nz):
                        h_yu -= _plogp_nb(j_uyz[u, y, z])
                        tot += j_uyz[u, y, z]
                    h_yu += _plogp_nb(tot)
                for x in range(nx):
                    tot = 0.0
                    for z in range(nz):
                        h_xu -= _plogp_nb(j_uxz[u, x, z])
                        tot += j_uxz[u, x, z]
                    h_xu += _plogp_nb(tot)
                tot = 0.0
                for z in range(nz):
                    h_u -= _plogp_nb(j_uz[u, z])
                    tot += j_uz[u, z]
                h_u += _plogp_nb(tot)
            for z in range(nz):
                h_z -= _plogp_nb(j_z[z])
            vals[b, 0] = h_yu - h_xyu
            vals[b, 1] = h_xu - h_xyu
            vals[b, 2] = h_u - h_xyu
            vals[b, 3] = h_z - h_xyu
            if want_grad:
                for x in range(nx):
                    for y in range(ny):
                        for z in range(nz):
                            g_xyu = -pxy[x, y] * _log2_floor(V[b, x, y, z])
                            g_yu = 0.0
                            g_xu = 0.0
                            g_u = 0.0
                            for u in range(nu):
                                w = p[u, x, y]
                                if w == 0.0:
                                    continue
                                s_uy = 0.0
                                s_ux = 0.0
                                s_u = 0.0
                                for zz in range(nz):
                                    s_uy += j_uyz[u, y, zz]
                                    s_ux += j_uxz[u, x, zz]
                                    s_u += j_uz[u, zz]
                                c_uy = j_uyz[u, y, z] / s_uy if s_uy > 0 else 0.0
                                c_ux = j_uxz[u, x, z] / s_ux if s_ux > 0 else 0.0
                                c_u = j_uz[u, z] / s_u if s_u > 0 else 0.0
                                g_yu -= w * _log2_floor(c_uy)
                                g_xu -= w * _log2_floor(c_ux)
                                g_u -= w * _log2_floor(c_u)
                            g_z = -pxy[x, y] * _log2_floor(j_z[z])
                            grad[b, 0, x, y, z] = g_yu - g_xyu
                            grad[b, 1, x, y, z] = g_xu - g_xyu
                            grad[b, 2, x, y, z] = g_u - g_xyu
                            grad[b, 3, x, y, z] = g_z - g_xyu
        return vals, grad

    def success_by_state_nb(dec, A):
        return _success_by_state_nb(np.ascontiguousarray(dec, dtype=np.int64),
                                    np.ascontiguousarray(A, dtype=np.float64))

    def ml_decode_table_nb(logv, xw, yw, nz):
        return _ml_decode_table_nb(np.ascontiguousarray(logv, dtype=np.float64),
                                   np.ascontiguousarray(xw, dtype=np.int64),
                                   np.ascontiguousarray(yw, dtype=np.int64), int(nz))

    def mi_terms_batch_nb(p, V, want_grad=False):
        vals, grad = _mi_terms_batch_nb(np.ascontiguousarray(p, dtype=np.float64),
                                        np.ascontiguousarray(V, dtype=np.float64), bool(want_grad))
        return vals, (grad if want_grad else None)

    success_by_state = success_by_state_nb
    ml_decode_table = ml_decode_table_nb
    mi_terms_batch = mi_terms_batch_nb
else:
    success_by_state = success_by_state_np
    ml_decode_table = ml_decode_table_np
    mi_terms_batch = mi_terms_batch_np


def backends():
    """Mapping backend name -> dict of kernels, for tests and benchmarks."""
    out = {"numpy": {"success_by_state": success_by_state_np,
                     "ml_decode_table": ml_decode_table_np,
                     "mi_terms_batch": mi_terms_batch_np}}
    if HAVE_NUMBA:
        out["numba"] = {"success_by_state": success_by_state_nb,
                        "ml_decode_table": ml_decode_table_nb,
                        "mi_terms_batch": mi_terms_batch_nb}
    return out
