"""Hot numeric kernels: numba-jitted loops with pure-numpy twins.

Every kernel exists twice, as a fused numba loop and as a vectorized numpy
expression. The numba path is used when numba imports cleanly; setting
QUADNET_NO_NUMBA=1 forces the numpy fallback. Both paths compute identical
quantities; only summation order differs, so cross-path agreement is ~1e-13
relative rather than bitwise. `BACKENDS` keeps both tables importable for the
equivalence tests and for benchmarks/bench_backends.py.

Activations are passed to kernels as a (code, kp) pair:

  code 0: sigma(t) = relu(t)^3 / 6, so sigma'' = relu. kp ignored.
  code 1: sigma(t) = relu(t)^(kp+1) / (kp+1), so sigma^(kp)(t)/kp! = relu(t).

Kernels take preactivation matrices (H0 = X @ W0, G = X @ W and friends) and
reduce over the neuron axis, which is where the time goes at widths ~2^14.
"""

import math
import os

import numpy as np

ACT_RC6 = 0
ACT_POW = 1


def _numba_disabled():
    v = os.environ.get("QUADNET_NO_NUMBA", "").strip()
    return v not in ("", "0")


# ---------------------------------------------------------------------------
# numpy twins

def _act_np(H, j, code, kp):
    """Elementwise j-th derivative of the activation."""
    if code == ACT_RC6:
        if j == 0:
            return np.maximum(H, 0.0) ** 3 / 6.0
        if j == 1:
            return np.maximum(H, 0.0) ** 2 / 2.0
        if j == 2:
            return np.maximum(H, 0.0)
        if j == 3:
            return (H > 0.0).astype(np.float64)
        return np.zeros_like(H)
    top = kp + 1
    if j > top:
        return np.zeros_like(H)
    c = 1.0
    for i in range(j):
        c *= top - i
    c /= top
    if j == top:
        return c * (H > 0.0).astype(np.float64)
    return c * np.maximum(H, 0.0) ** (top - j)


def _forward_np(H, a, code, kp):
    return _act_np(H, 0, code, kp) @ a / math.sqrt(H.shape[1])


def _flin_np(H0, G, a, code, kp):
    return (_act_np(H0, 1, code, kp) * G) @ a / math.sqrt(H0.shape[1])


def _fquad_np(H0, G, a, code, kp):
    return (_act_np(H0, 2, code, kp) * G * G) @ a / (2.0 * math.sqrt(H0.shape[1]))


def _backprop_cols_np(H, lp, a, code, kp):
    # B[i,r] = lp[i] * sigma'(H[i,r]) * a[r] / sqrt(m); caller maps X^T @ B / n.
    return _act_np(H, 1, code, kp) * lp[:, None] * (a / math.sqrt(H.shape[1]))[None, :]


def _gradq_cols_np(H0, G, lp, a, code, kp):
    return _act_np(H0, 2, code, kp) * G * lp[:, None] * (a / math.sqrt(H0.shape[1]))[None, :]


def _sgd_forward_np(H0, G, s, a, code, kp):
    return _forward_np(H0 + G * s[None, :], a, code, kp)


def _sgd_backcols_np(H0, G, s, lp, a, code, kp):
    H = H0 + G * s[None, :]
    return _act_np(H, 1, code, kp) * lp[:, None] * ((a * s) / math.sqrt(H0.shape[1]))[None, :]


def _hessq_pair_np(H0, G, GU, a, code, kp):
    S2 = _act_np(H0, 2, code, kp)
    inv = 1.0 / math.sqrt(H0.shape[1])
    t1 = (S2 * GU * GU) @ a * inv
    cross = (S2 * G * GU) @ a * inv
    return t1, cross


def _sigma_sq_np(H0, G, GS, code, kp):
    S2 = _act_np(H0, 2, code, kp)
    return ((S2 * G * GS) ** 2).sum(axis=1) / H0.shape[1]


def _gap_np(Hh, GP, GM, ah, j, code, kp):
    jf = float(math.factorial(j))
    feat = _act_np(Hh, j, code, kp) / jf
    return (feat * (GP ** j - GM ** j)) @ ah / math.sqrt(Hh.shape[1])


_NP = {
    "act": _act_np,
    "forward": _forward_np,
    "flin": _flin_np,
    "fquad": _fquad_np,
    "backprop_cols": _backprop_cols_np,
    "gradq_cols": _gradq_cols_np,
    "sgd_forward": _sgd_forward_np,
    "sgd_backcols": _sgd_backcols_np,
    "hessq_pair": _hessq_pair_np,
    "sigma_sq": _sigma_sq_np,
    "gap": _gap_np,
}

BACKENDS = {"numpy": _NP}
HAS_NUMBA = False

# ---------------------------------------------------------------------------
# numba path

if not _numba_disabled():
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False

if HAS_NUMBA:

    @njit(inline="always")
    def _sg(code, kp, j, t):
        # Branchless select so the surrounding loops vectorize.
        tp = t if t > 0.0 else 0.0
        ind = 1.0 if t > 0.0 else 0.0
        if code == 0:
            if j == 0:
                return tp * tp * tp * (1.0 / 6.0)
            if j == 1:
                return tp * tp * 0.5
            if j == 2:
                return tp
            if j == 3:
                return ind
            return 0.0
        top = kp + 1
        if j > top:
            return 0.0
        c = 1.0
        for i in range(j):
            c *= top - i
        c /= top
        if j == top:
            return c * ind
        v = 1.0
        for _ in range(top - j):
            v *= tp
        return c * v

    @njit(cache=True, fastmath=True)
    def _forward_nb(H, a, code, kp):
        n, m = H.shape
        out = np.empty(n)
        inv = 1.0 / math.sqrt(m)
        for i in range(n):
            acc = 0.0
            for r in range(m):
                acc += a[r] * _sg(code, kp, 0, H[i, r])
            out[i] = acc * inv
        return out

    @njit(cache=True, fastmath=True)
    def _flin_nb(H0, G, a, code, kp):
        n, m = H0.shape
        out = np.empty(n)
        inv = 1.0 / math.sqrt(m)
        for i in range(n):
            acc = 0.0
            for r in range(m):
                acc += a[r] * _sg(code, kp, 1, H0[i, r]) * G[i, r]
            out[i] = acc * inv
        return out

    @njit(cache=True, fastmath=True)
    def _fquad_nb(H0, G, a, code, kp):
        n, m = H0.shape
        out = np.empty(n)
        inv = 0.5 / math.sqrt(m)
        for i in range(n):
            acc = 0.0
            for r in range(m):
                g = G[i, r]
                acc += a[r] * _sg(code, kp, 2, H0[i, r]) * g * g
            out[i] = acc * inv
        return out

    @njit(cache=True, fastmath=True)
    def _backprop_cols_nb(H, lp, a, code, kp):
        n, m = H.shape
        B = np.empty((n, m))
        inv = 1.0 / math.sqrt(m)
        for i in range(n):
            c = lp[i] * inv
            for r in range(m):
                B[i, r] = c * a[r] * _sg(code, kp, 1, H[i, r])
        return B

    @njit(cache=True, fastmath=True)
    def _gradq_cols_nb(H0, G, lp, a, code, kp):
        n, m = H0.shape
        B = np.empty((n, m))
        inv = 1.0 / math.sqrt(m)
        for i in range(n):
            c = lp[i] * inv
            for r in range(m):
                B[i, r] = c * a[r] * _sg(code, kp, 2, H0[i, r]) * G[i, r]
        return B

    @njit(cache=True, fastmath=True)
    def _sgd_forward_nb(H0, G, s, a, code, kp):
        n, m = H0.shape
        out = np.empty(n)
        inv = 1.0 / math.sqrt(m)
        for i in range(n):
            acc = 0.0
            for r in range(m):
                acc += a[r] * _sg(code, kp, 0, H0[i, r] + G[i, r] * s[r])
            out[i] = acc * inv
        return out

    @njit(cache=True, fastmath=True)
    def _sgd_backcols_nb(H0, G, s, lp, a, code, kp):
        n, m = H0.shape
        B = np.empty((n, m))
        inv = 1.0 / math.sqrt(m)
        for i in range(n):
            c = lp[i] * inv
            for r in range(m):
                B[i, r] = c * a[r] * s[r] * _sg(code, kp, 1, H0[i, r] + G[i, r] * s[r])
        return B

    @njit(cache=True, fastmath=True)
    def _hessq_pair_nb(H0, G, GU, a, code, kp):
        n, m = H0.shape
        t1 = np.empty(n)
        cross = np.empty(n)
        inv = 1.0 / math.sqrt(m)
        for i in range(n):
            acc1 = 0.0
            acc2 = 0.0
            for r in range(m):
                s2 = a[r] * _sg(code, kp, 2, H0[i, r])
                gu = GU[i, r]
                acc1 += s2 * gu * gu
                acc2 += s2 * G[i, r] * gu
            t1[i] = acc1 * inv
            cross[i] = acc2 * inv
        return t1, cross

    @njit(cache=True, fastmath=True)
    def _sigma_sq_nb(H0, G, GS, code, kp):
        n, m = H0.shape
        out = np.empty(n)
        for i in range(n):
            acc = 0.0
            for r in range(m):
                t = _sg(code, kp, 2, H0[i, r]) * G[i, r] * GS[i, r]
                acc += t * t
            out[i] = acc / m
        return out

    @njit(cache=True, fastmath=True)
    def _gap_nb(Hh, GP, GM, ah, j, code, kp):
        n, h = Hh.shape
        out = np.empty(n)
        jf = 1.0
        for i in range(j):
            jf *= i + 1
        inv = 1.0 / math.sqrt(h)
        for i in range(n):
            acc = 0.0
            for r in range(h):
                vp = 1.0
                vm = 1.0
                for _ in range(j):
                    vp *= GP[i, r]
                    vm *= GM[i, r]
                acc += ah[r] * (_sg(code, kp, j, Hh[i, r]) / jf) * (vp - vm)
            out[i] = acc * inv
        return out

    _NB = {
        "act": _act_np,  # cold path, numpy is fine
        "forward": _forward_nb,
        "flin": _flin_nb,
        "fquad": _fquad_nb,
        "backprop_cols": _backprop_cols_nb,
        "gradq_cols": _gradq_cols_nb,
        "sgd_forward": _sgd_forward_nb,
        "sgd_backcols": _sgd_backcols_nb,
        "hessq_pair": _hessq_pair_nb,
        "sigma_sq": _sigma_sq_nb,
        "gap": _gap_nb,
    }
    BACKENDS["numba"] = _NB

ACTIVE = "numba" if HAS_NUMBA else "numpy"
_K = BACKENDS[ACTIVE]

act_eval = _K["act"]
forward_vals = _K["forward"]
flin_vals = _K["flin"]
fquad_vals = _K["fquad"]
backprop_cols = _K["backprop_cols"]
gradq_cols = _K["gradq_cols"]
sgd_forward = _K["sgd_forward"]
sgd_backcols = _K["sgd_backcols"]
hessq_pair = _K["hessq_pair"]
sigma_sq = _K["sigma_sq"]
gap_vals = _K["gap"]


def ascontig(A):
    """Kernels want C-contiguous float64; normalize once at the boundary."""
    return np.ascontiguousarray(A, dtype=np.float64)
