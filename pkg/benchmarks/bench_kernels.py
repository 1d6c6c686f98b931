"""Time the numpy and numba kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are compiled into the module whenever numba imports, so the
comparison runs in one process. Results are checked for agreement before
timing; the first numba call (compilation) is excluded.
"""

import argparse
import time

import numpy as np

from avmac import _kernels
from avmac.channel import builtin_channel, random_channel


def _cases(rng):
    g = builtin_channel("gubner")
    n, m = 8, 16
    xw = rng.integers(0, 2, size=(m, n))
    yw = rng.integers(0, 2, size=(m, n))
    logv = np.log(np.maximum(g.w.mean(axis=0), 1e-300))
    dec = rng.integers(0, m, size=4 ** n)
    A = np.ascontiguousarray(g.w[:, xw, yw].transpose(1, 2, 0, 3))  # (m, n, ns, nz)
    ch = random_channel(3, 3, 4, 3, rng)
    p = rng.dirichlet(np.ones(5 * 9)).reshape(5, 3, 3)
    V = np.ascontiguousarray(np.einsum("bs,sxyz->bxyz", rng.dirichlet(np.ones(3), size=512), ch.w))
    return {
        "success_by_state": (dec, A),
        "ml_decode_table": (logv, xw, yw, 4),
        "mi_terms_batch": (p, V, True),
    }


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if a is None:
        return b is None
    return np.allclose(a, b, rtol=1e-10, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    impls = _kernels.backends()
    cases = _cases(np.random.default_rng(args.seed))
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, inputs in cases.items():
        ref = impls["numpy"][name](*inputs)
        t_np = _time(impls["numpy"][name], inputs, args.repeat)
        if "numba" not in impls:
            print(f"{name:<18}{t_np * 1e3:>12.2f}{'n/a':>12}{'':>10}")
            continue
        got = impls["numba"][name](*inputs)  # compiles
        if not _same(ref, got):
            raise SystemExit(f"{name}: backends disagree")
        t_nb = _time(impls["numba"][name], inputs, args.repeat)
        print(f"{name:<18}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
