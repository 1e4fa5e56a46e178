"""Timing table for the compiled kernels against their numpy twins.

Run as a script. The numba path is warmed before timing so compilation cost
is excluded; set QUADNET_NO_NUMBA=1 to confirm the fallback wires up the same
entry points (the table then degenerates to numpy vs numpy).
"""

import time

import numpy as np

from quadnet import backend


def _time(fn, *args, reps=5):
    fn(*args)  # warm (jit compile on the numba path)
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    n, d, m = 512, 20, 8192
    X = np.ascontiguousarray(rng.standard_normal((n, d)))
    W0 = np.ascontiguousarray(rng.standard_normal((d, m)))
    W = np.ascontiguousarray(0.01 * rng.standard_normal((d, m)))
    a = np.ascontiguousarray(rng.choice([-1.0, 1.0], size=m))
    s = np.ascontiguousarray(rng.choice([-1.0, 1.0], size=m))
    H0 = np.ascontiguousarray(X @ W0)
    G = np.ascontiguousarray(X @ W)
    GS = np.ascontiguousarray(G * s)
    lp = np.ascontiguousarray(rng.standard_normal(n))
    code, kp = 0, 3

    cases = [
        ("forward", (np.ascontiguousarray(H0 + G), a, code, kp)),
        ("flin", (H0, G, a, code, kp)),
        ("fquad", (H0, G, a, code, kp)),
        ("backprop_cols", (np.ascontiguousarray(H0 + G), lp, a, code, kp)),
        ("gradq_cols", (H0, G, lp, a, code, kp)),
        ("sgd_forward", (H0, G, s, a, code, kp)),
        ("sigma_sq", (H0, G, GS, code, kp)),
    ]

    names = sorted(backend.BACKENDS)
    print(f"n={n} d={d} m={m}  active={backend.ACTIVE}")
    print(f"{'kernel':16s}" + "".join(f"{nm:>12s}" for nm in names) + f"{'speedup':>10s}")
    for fname, args in cases:
        times = {}
        for nm in names:
            fn = backend.BACKENDS[nm][fname]
            times[nm] = _time(fn, *args)
        row = f"{fname:16s}" + "".join(f"{times[nm] * 1e3:10.2f}ms" for nm in names)
        if "numba" in times and "numpy" in times:
            row += f"{times['numpy'] / times['numba']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
