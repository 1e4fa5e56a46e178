"""Symmetric two-layer networks and their Taylor pieces.

A network holds a frozen random first layer W0 (d x m) and frozen signs a
(length m). Symmetric initialization mirrors the first m/2 neurons into the
second half with negated output signs, so the function at W0 is identically
zero and every Taylor term of the increment starts from a clean slate.

All evaluation routines take the weight movement W (d x m, column r moves
neuron r) separately from the network; nothing here mutates state.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .backend import ACT_POW, ACT_RC6, ascontig

RC6 = "relu_cubed_sixth"
POW = "relu_power"


class Activation:
    """Scalar activation with derivatives, in kernel-friendly coded form.

    kind "relu_cubed_sixth": sigma(t) = relu(t)^3/6. Second derivative is
    relu itself, which is what makes the quadratic feature a relu random
    feature. kind "relu_power" with degree k: sigma(t) = relu(t)^(k+1)/(k+1),
    whose k-th derivative over k! is again relu.
    """

    def __init__(self, kind, k=None):
        if kind == RC6:
            if k is not None:
                raise ValueError("relu_cubed_sixth takes no degree")
            self.code, self.kp = ACT_RC6, 0
        elif kind == POW:
            if k is None or int(k) != k or k < 1:
                raise ValueError("relu_power needs an integer degree k >= 1")
            self.code, self.kp = ACT_POW, int(k)
        else:
            raise ValueError(f"unknown activation kind {kind!r}")
        self.kind = kind
        self.k = None if kind == RC6 else int(k)

    def deriv(self, j, t):
        """j-th derivative, elementwise; j=0 is the activation itself."""
        t = np.asarray(t, dtype=np.float64)
        return backend._act_np(t, j, self.code, self.kp)

    def __call__(self, t):
        return self.deriv(0, t)

    def d1(self, t):
        return self.deriv(1, t)

    def d2(self, t):
        return self.deriv(2, t)

    def to_meta(self):
        return {"kind": self.kind, "k": self.k}

    @staticmethod
    def from_meta(meta):
        return Activation(meta["kind"], meta.get("k"))

    def __repr__(self):
        if self.kind == RC6:
            return "Activation(relu_cubed_sixth)"
        return f"Activation(relu_power, k={self.k})"

    def __eq__(self, other):
        return isinstance(other, Activation) and self.kind == other.kind and self.k == other.k


def relu_cubed_sixth():
    return Activation(RC6)


def relu_power(k):
    return Activation(POW, k)


@dataclass
class Network:
    d: int
    m: int
    B_x: float
    a: np.ndarray          # (m,) entries +-1, second half the negation of the first
    W0: np.ndarray         # (d, m), second half duplicates the first
    activation: Activation
    seed: int | None = None

    @property
    def half(self):
        return self.m // 2

    def h0(self, X):
        """Preactivations X @ W0 for a batch of rows X (n x d)."""
        return ascontig(np.asarray(X, dtype=np.float64) @ self.W0)


@dataclass
class PairedDelta:
    """Weight movement stored as mirrored pairs: column r of Wplus moves
    neuron r, column r of Wminus moves its mirror neuron r + m/2."""

    Wplus: np.ndarray
    Wminus: np.ndarray

    def __post_init__(self):
        if self.Wplus.shape != self.Wminus.shape:
            raise ValueError("paired halves must have equal shape")

    @property
    def half(self):
        return self.Wplus.shape[1]

    def to_flat(self):
        return np.concatenate([self.Wplus, self.Wminus], axis=1)

    @staticmethod
    def from_flat(W):
        m = W.shape[1]
        if m % 2:
            raise ValueError("flat movement needs an even number of columns")
        return PairedDelta(W[:, : m // 2].copy(), W[:, m // 2 :].copy())


def init_symmetric(d, m, B_x, seed, activation=None):
    """Symmetric random network: N(0, I_d) columns and +-1 signs, mirrored.

    m must be even. The mirrored second half makes the initial function
    identically zero on every input.
    """
    if m % 2:
        raise ValueError("width m must be even for symmetric initialization")
    if d < 1 or m < 2:
        raise ValueError("need d >= 1 and m >= 2")
    if not (B_x > 0):
        raise ValueError("B_x must be positive")
    if activation is None:
        activation = relu_cubed_sixth()
    rng = np.random.default_rng(seed)
    half = m // 2
    W0h = rng.standard_normal((d, half))
    ah = np.where(rng.random(half) < 0.5, -1.0, 1.0)
    W0 = ascontig(np.concatenate([W0h, W0h], axis=1))
    a = np.concatenate([ah, -ah])
    return Network(d=d, m=m, B_x=float(B_x), a=a, W0=W0, activation=activation, seed=seed)


def check_w0_bound(net, delta):
    """High-probability envelope on the largest initial column norm.

    Columns are standard gaussians in d dimensions, so with probability at
    least 1 - delta every column norm stays below
    sqrt(8 (d log 5 + log(m / delta))).
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0, 1)")
    norms = np.linalg.norm(net.W0, axis=0)
    threshold = math.sqrt(8.0 * (net.d * math.log(5.0) + math.log(net.m / delta)))
    mx = float(norms.max())
    return {"max_col_norm": mx, "threshold": threshold, "ok": mx <= threshold, "delta": delta}


def _check_rows(X, B_x, unchecked):
    if unchecked:
        return
    nrm = np.linalg.norm(X, axis=1)
    tol = 1e-9 * max(1.0, B_x)
    bad = np.abs(nrm - B_x) > tol
    if np.any(bad):
        worst = float(np.abs(nrm - B_x).max())
        raise ValueError(
            f"input rows must lie on the radius-{B_x} sphere (worst deviation {worst:.3e}); "
            "pass unchecked=True for deliberate off-sphere probes"
        )


def _as_batch(x, d):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != d:
            raise ValueError(f"input has dimension {x.shape[0]}, network expects {d}")
        return x[None, :], True
    if x.ndim == 2 and x.shape[1] == d:
        return x, False
    raise ValueError("input must be a d-vector or an (n, d) batch")


def _check_W(net, W):
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (net.d, net.m):
        raise ValueError(f"movement must have shape ({net.d}, {net.m}), got {W.shape}")
    return W


# ---------------------------------------------------------------------------
# batch evaluators (shared by the scalar API below and by the risk module)

def forward_batch(net, W, X, unchecked=False):
    X, _ = _as_batch(X, net.d)
    _check_rows(X, net.B_x, unchecked)
    W = _check_W(net, W)
    H = ascontig(X @ (net.W0 + W))
    return backend.forward_vals(H, net.a, net.activation.code, net.activation.kp)


def flin_batch(net, W, X, unchecked=False):
    X, _ = _as_batch(X, net.d)
    _check_rows(X, net.B_x, unchecked)
    W = _check_W(net, W)
    H0 = net.h0(X)
    G = ascontig(X @ W)
    return backend.flin_vals(H0, G, net.a, net.activation.code, net.activation.kp)


def fquad_batch(net, W, X, unchecked=False):
    X, _ = _as_batch(X, net.d)
    _check_rows(X, net.B_x, unchecked)
    W = _check_W(net, W)
    H0 = net.h0(X)
    G = ascontig(X @ W)
    return backend.fquad_vals(H0, G, net.a, net.activation.code, net.activation.kp)


def quad_remainder_batch(net, W, X, unchecked=False):
    """forward minus (value + linear + quadratic term) at W0, batched.

    The value at W0 is zero by symmetry; it is still subtracted explicitly so
    the remainder measures the increment even at roundoff scale.
    """
    X, _ = _as_batch(X, net.d)
    _check_rows(X, net.B_x, unchecked)
    W = _check_W(net, W)
    code, kp = net.activation.code, net.activation.kp
    H0 = net.h0(X)
    G = ascontig(X @ W)
    f = backend.forward_vals(ascontig(H0 + G), net.a, code, kp)
    f0 = backend.forward_vals(H0, net.a, code, kp)
    fl = backend.flin_vals(H0, G, net.a, code, kp)
    fq = backend.fquad_vals(H0, G, net.a, code, kp)
    return f - f0 - fl - fq


def korder_batch(net, paired, X, k, unchecked=False):
    X, _ = _as_batch(X, net.d)
    _check_rows(X, net.B_x, unchecked)
    if int(k) != k or k < 1:
        raise ValueError("order k must be an integer >= 1")
    if paired.half != net.half or paired.Wplus.shape[0] != net.d:
        raise ValueError("paired movement does not match the network shape")
    H0h = ascontig(X @ net.W0[:, : net.half])
    GP = ascontig(X @ paired.Wplus)
    GM = ascontig(X @ paired.Wminus)
    ah = ascontig(net.a[: net.half])
    return backend.gap_vals(H0h, GP, GM, ah, int(k), net.activation.code, net.activation.kp)


# ---------------------------------------------------------------------------
# scalar API

def forward(net, W, x, unchecked=False):
    """Network value at weights W0 + W on a single input."""
    return float(forward_batch(net, W, x, unchecked)[0])


def f_lin(net, W, x, unchecked=False):
    """Linear Taylor term of the increment W (the NTK feature map value)."""
    return float(flin_batch(net, W, x, unchecked)[0])


def f_quad(net, W, x, unchecked=False):
    """Quadratic Taylor term of the increment W."""
    return float(fquad_batch(net, W, x, unchecked)[0])


def quad_remainder(net, W, x, unchecked=False):
    """What is left after removing value, linear, and quadratic terms."""
    return float(quad_remainder_batch(net, W, x, unchecked)[0])


def f_korder(net, paired, x, k, unchecked=False):
    """k-th order term of a paired movement: mirrored powers with shared w0.

    Equals (1/sqrt(m/2)) sum over pairs of
    a_r (sigma^(k)(h0_r)/k!) ((wplus_r^T x)^k - (wminus_r^T x)^k).
    """
    return float(korder_batch(net, paired, x, k, unchecked)[0])


def norm_2p(W, p):
    """Column-norm p-norm ||W||_{2,p}: the l_p norm of the column l_2 norms."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError("norm_2p expects a matrix")
    cols = np.linalg.norm(W, axis=0)
    if p == math.inf:
        return float(cols.max(initial=0.0))
    if int(p) != p or p < 2 or p % 2:
        raise ValueError("p must be an even integer >= 2, or inf")
    return float((cols ** p).sum() ** (1.0 / p))


def norm24(W):
    return norm_2p(W, 4)


# ---------------------------------------------------------------------------
# serialization: .npz with a JSON sidecar carrying the scalar metadata

_FORMAT_VERSION = 1


def save_network(net, path):
    path = str(path)
    if not path.endswith(".npz"):
        path = path + ".npz"
    np.savez(path, W0=net.W0, a=net.a)
    meta = {
        "format_version": _FORMAT_VERSION,
        "d": net.d,
        "m": net.m,
        "B_x": net.B_x,
        "activation": net.activation.to_meta(),
        "seed": net.seed,
    }
    with open(path + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_network(path):
    path = str(path)
    if not path.endswith(".npz"):
        path = path + ".npz"
    with open(path + ".json") as fh:
        meta = json.load(fh)
    if meta.get("format_version") != _FORMAT_VERSION:
        raise ValueError(f"unsupported network format version {meta.get('format_version')!r}")
    arrs = np.load(path)
    W0 = ascontig(arrs["W0"])
    a = np.asarray(arrs["a"], dtype=np.float64)
    d, m = int(meta["d"]), int(meta["m"])
    if W0.shape != (d, m) or a.shape != (m,):
        raise ValueError("network file arrays do not match their metadata")
    half = m // 2
    if not (np.array_equal(W0[:, :half], W0[:, half:]) and np.array_equal(a[:half], -a[half:])):
        raise ValueError("network file is not symmetric")
    return Network(
        d=d, m=m, B_x=float(meta["B_x"]), a=a, W0=W0,
        activation=Activation.from_meta(meta["activation"]), seed=meta.get("seed"),
    )
