"""Losses, datasets, and the empirical / randomized / clean risks.

Three objectives appear throughout:

  empirical_risk   mean loss of the full network at W0 + W (no regularizer)
  randomized_risk  E over sign diagonals of the empirical risk at W Sigma,
                   plus the column-norm regularizer (invariant under Sigma)
  clean_risk       mean loss of the quadratic term alone

Gradients and the two Hessian quadratic forms of the clean risk follow the
same caching discipline: the initial preactivations H0 = X @ W0 are computed
once per spec, everything else is recomputed per call so results depend only
on the arguments.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .backend import ascontig
from .model import norm24
from .numerics import sigmoid, softplus
from .randomize import SignDiagonal, sample_signs

_SP1 = float(softplus(1.0))


class LossKind:
    """Pointwise loss ell(y, z) with z-derivatives d1, d2. Vectorized."""

    def __init__(self, tag, ell, d1, d2):
        self.tag = tag
        self._ell, self._d1, self._d2 = ell, d1, d2

    def ell(self, y, z):
        return self._ell(np.asarray(y, dtype=np.float64), np.asarray(z, dtype=np.float64))

    def d1(self, y, z):
        return self._d1(np.asarray(y, dtype=np.float64), np.asarray(z, dtype=np.float64))

    def d2(self, y, z):
        return self._d2(np.asarray(y, dtype=np.float64), np.asarray(z, dtype=np.float64))

    def __repr__(self):
        return f"LossKind({self.tag})"


def logistic():
    return LossKind(
        "logistic",
        lambda y, z: softplus(-y * z),
        lambda y, z: -y * sigmoid(-y * z),
        lambda y, z: y * y * sigmoid(y * z) * sigmoid(-y * z),
    )


def soft_hinge():
    """softplus(1 - yz) normalized so the loss at z=0 is exactly 1."""
    return LossKind(
        "soft_hinge",
        lambda y, z: softplus(1.0 - y * z) / _SP1,
        lambda y, z: -y * sigmoid(1.0 - y * z) / _SP1,
        lambda y, z: y * y * sigmoid(1.0 - y * z) * sigmoid(y * z - 1.0) / _SP1,
    )


def huber_abs(delta=0.01):
    """Absolute loss |z - y| with a quadratic knee of half-width delta.

    The knee buys two derivatives at the price of curvature 1/delta there;
    with the default knee that curvature is 100, far above the unit curvature
    the classification losses keep.
    """
    if not (delta > 0):
        raise ValueError("knee width must be positive")

    def ell(y, z):
        t = z - y
        at = np.abs(t)
        return np.where(at <= delta, t * t / (2.0 * delta), at - delta / 2.0)

    def d1(y, z):
        return np.clip((z - y) / delta, -1.0, 1.0)

    def d2(y, z):
        return np.where(np.abs(z - y) <= delta, 1.0 / delta, 0.0)

    return LossKind("huber_abs", ell, d1, d2)


_LOSSES = {"logistic": logistic, "soft_hinge": soft_hinge, "huber_abs": huber_abs}


def loss_by_tag(tag, **kw):
    if tag not in _LOSSES:
        raise ValueError(f"unknown loss {tag!r}; know {sorted(_LOSSES)}")
    return _LOSSES[tag](**kw)


# ---------------------------------------------------------------------------
# datasets

_DATA_FORMAT_VERSION = 1


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    B_x: float

    def __post_init__(self):
        self.X = ascontig(self.X)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError("X must be (n, d) with matching label vector")
        if not np.all(np.isfinite(self.X)) or not np.all(np.isfinite(self.y)):
            raise ValueError("dataset contains non-finite entries")
        nrm = np.linalg.norm(self.X, axis=1)
        if np.abs(nrm - self.B_x).max() > 1e-9 * max(1.0, self.B_x):
            raise ValueError("dataset rows must lie on the radius-B_x sphere")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def save_csv(self, path):
        path = str(path)
        header = ",".join([f"x{j}" for j in range(self.d)] + ["y"])
        body = np.concatenate([self.X, self.y[:, None]], axis=1)
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in body:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        meta = {"format_version": _DATA_FORMAT_VERSION, "n": self.n, "d": self.d, "B_x": self.B_x}
        with open(path + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    @staticmethod
    def load_csv(path):
        path = str(path)
        with open(path + ".json") as fh:
            meta = json.load(fh)
        if meta.get("format_version") != _DATA_FORMAT_VERSION:
            raise ValueError(f"unsupported dataset format version {meta.get('format_version')!r}")
        body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        d, B_x = int(meta["d"]), float(meta["B_x"])
        if body.shape != (int(meta["n"]), d + 1):
            raise ValueError("dataset file shape does not match its metadata")
        X, y = body[:, :d], body[:, d]
        nrm = np.linalg.norm(X, axis=1)
        dev = np.abs(nrm - B_x).max()
        if dev > 1e-6 * max(1.0, B_x):
            raise ValueError(f"rows drifted off the sphere by {dev:.3e}; refusing to load")
        # Serialization may shave trailing bits; put rows back exactly on the sphere.
        X = X * (B_x / nrm)[:, None]
        return Dataset(X=X, y=y, B_x=B_x)


# ---------------------------------------------------------------------------
# risk specification

@dataclass
class RiskSpec:
    net: object
    data: Dataset
    loss: LossKind
    lam: float = 0.0
    opt_reference: float | None = None
    _H0: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.data.d != self.net.d:
            raise ValueError("dataset dimension does not match the network")
        if abs(self.data.B_x - self.net.B_x) > 1e-9 * max(1.0, self.net.B_x):
            raise ValueError("dataset radius does not match the network")
        if self.lam < 0:
            raise ValueError("regularization weight must be nonnegative")

    @property
    def H0(self):
        if self._H0 is None:
            self._H0 = ascontig(self.data.X @ self.net.W0)
        return self._H0

    def dcache(self):
        """a_r sigma''(h0_{i,r}); recomputed bit-exactly on demand."""
        act = self.net.activation
        return backend._act_np(self.H0, 2, act.code, act.kp) * self.net.a[None, :]

    def _G(self, W):
        W = np.asarray(W, dtype=np.float64)
        if W.shape != (self.net.d, self.net.m):
            raise ValueError(f"movement must have shape ({self.net.d}, {self.net.m})")
        return ascontig(self.data.X @ W)


def reg_value(W, lam):
    """lam * ||W||_{2,4}^8."""
    if lam == 0.0:
        return 0.0
    return lam * norm24(W) ** 8


def reg_grad(W, lam):
    """Gradient of the regularizer: column r maps to
    8 lam ||W||_{2,4}^4 ||w_r||^2 w_r."""
    W = np.asarray(W, dtype=np.float64)
    if lam == 0.0:
        return np.zeros_like(W)
    csq = (W * W).sum(axis=0)
    s4 = float((csq * csq).sum())  # ||W||_{2,4}^4
    return (8.0 * lam * s4) * W * csq[None, :]


def empirical_risk(spec, W):
    """Mean loss of the full network at W0 + W. No regularizer."""
    act = spec.net.activation
    H = ascontig(spec.H0 + spec._G(W))
    z = backend.forward_vals(H, spec.net.a, act.code, act.kp)
    return float(spec.loss.ell(spec.data.y, z).mean())


def clean_risk(spec, W):
    """Mean loss of the quadratic term alone. No regularizer."""
    act = spec.net.activation
    z = backend.fquad_vals(spec.H0, spec._G(W), spec.net.a, act.code, act.kp)
    return float(spec.loss.ell(spec.data.y, z).mean())


def randomized_risk_mc(spec, W, n_draws, rng):
    """Monte Carlo estimate of the sign-randomized risk at W.

    Returns {"mean", "stderr", "n_draws"}; mean includes the regularizer
    (deterministic under sign flips), stderr covers only the MC part.
    """
    if n_draws < 2:
        raise ValueError("need at least 2 draws for a standard error")
    act = spec.net.activation
    G = spec._G(W)
    vals = np.empty(n_draws)
    for j in range(n_draws):
        sig = sample_signs(spec.net.m, rng)
        z = backend.sgd_forward(spec.H0, G, sig.s, spec.net.a, act.code, act.kp)
        vals[j] = spec.loss.ell(spec.data.y, z).mean()
    mean = float(vals.mean()) + reg_value(W, spec.lam)
    stderr = float(vals.std(ddof=1) / math.sqrt(n_draws))
    return {"mean": mean, "stderr": stderr, "n_draws": n_draws}


def grad_empirical(spec, V):
    """Gradient of the unregularized empirical risk at movement V."""
    act = spec.net.activation
    G = spec._G(V)
    H = ascontig(spec.H0 + G)
    z = backend.forward_vals(H, spec.net.a, act.code, act.kp)
    lp = ascontig(spec.loss.d1(spec.data.y, z))
    B = backend.backprop_cols(H, lp, spec.net.a, act.code, act.kp)
    return ascontig(spec.data.X.T @ B) / spec.data.n


def grad_randomized_sample(spec, W, sigma, rows=None):
    """One-sigma stochastic gradient of the randomized objective.

    Chain rule through V = W Sigma puts the signs back on the columns; the
    regularizer gradient is added deterministically. `rows` restricts the
    loss term to a minibatch of sample indices (full batch when None).
    """
    s = sigma.s if isinstance(sigma, SignDiagonal) else np.asarray(sigma, dtype=np.float64)
    act = spec.net.activation
    if rows is None:
        X, y, H0, G = spec.data.X, spec.data.y, spec.H0, spec._G(W)
    else:
        X = ascontig(spec.data.X[rows])
        y = spec.data.y[rows]
        H0 = ascontig(spec.H0[rows])
        if W.shape != (spec.net.d, spec.net.m):
            raise ValueError(f"movement must have shape ({spec.net.d}, {spec.net.m})")
        G = ascontig(X @ W)
    z = backend.sgd_forward(H0, G, s, spec.net.a, act.code, act.kp)
    lp = ascontig(spec.loss.d1(y, z))
    B = backend.sgd_backcols(H0, G, s, lp, spec.net.a, act.code, act.kp)
    return ascontig(X.T @ B) / y.shape[0] + reg_grad(W, spec.lam)


def grad_clean(spec, W):
    """Gradient of the unregularized clean risk."""
    act = spec.net.activation
    G = spec._G(W)
    z = backend.fquad_vals(spec.H0, G, spec.net.a, act.code, act.kp)
    lp = ascontig(spec.loss.d1(spec.data.y, z))
    B = backend.gradq_cols(spec.H0, G, lp, spec.net.a, act.code, act.kp)
    return ascontig(spec.data.X.T @ B) / spec.data.n


def hessq_clean(spec, W, U):
    """Hessian quadratic form of the clean risk at W in direction U."""
    act = spec.net.activation
    G = spec._G(W)
    GU = spec._G(U)
    z = backend.fquad_vals(spec.H0, G, spec.net.a, act.code, act.kp)
    lp = spec.loss.d1(spec.data.y, z)
    lpp = spec.loss.d2(spec.data.y, z)
    t1, cross = backend.hessq_pair(spec.H0, G, GU, spec.net.a, act.code, act.kp)
    return float((lp * t1 + lpp * cross * cross).mean())


def hessq_clean_sigma_expect(spec, W, Wstar):
    """Expected Hessian form over a fresh sign diagonal on Wstar, in closed
    form: squaring kills the cross terms, so the first piece is exactly twice
    the quadratic term at Wstar and the second collapses to a diagonal sum."""
    act = spec.net.activation
    G = spec._G(W)
    GS = spec._G(Wstar)
    z = backend.fquad_vals(spec.H0, G, spec.net.a, act.code, act.kp)
    lp = spec.loss.d1(spec.data.y, z)
    lpp = spec.loss.d2(spec.data.y, z)
    fq_star = backend.fquad_vals(spec.H0, GS, spec.net.a, act.code, act.kp)
    diag = backend.sigma_sq(spec.H0, G, GS, act.code, act.kp)
    return float((2.0 * lp * fq_star + lpp * diag).mean())
