"""Constructive expressivity for one-directional polynomial targets.

The quadratic term of a relu-cubed network is a relu random-feature model in
disguise: its features are relu(w0_r^T x) times a squared projection. The
arc-cosine kernel behind those features expands in powers u^p with p in
{0, 1} or even, so targets alpha (beta^T x)^p are reachable whenever p minus
the Taylor order lands in that set. This module carries the kernel series,
the min-norm coefficient fit over the realized features, and the assembly of
explicit weight movements for the quadratic and k-th order models.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .model import POW, RC6, PairedDelta, norm_2p


# ---------------------------------------------------------------------------
# arc-cosine kernel of relu features on the unit sphere

def kernel_value(u):
    """E_w[relu(w.x) relu(w.x')] for unit vectors at cosine u, w standard normal."""
    u = float(u)
    if abs(u) > 1.0 + 1e-12:
        raise ValueError(f"cosine out of range: {u}")
    u = min(1.0, max(-1.0, u))
    return (u * (math.pi - math.acos(u)) + math.sqrt(max(0.0, 1.0 - u * u))) / (2.0 * math.pi)


def kernel_coeff(p):
    """Power-series coefficient c_p of the kernel in the cosine.

    c_0 = 1/(2pi), c_1 = 1/4, even c_{2l} = (2l-3)!!/((2l-2)!! (2l-1)(2l) 2pi),
    and 0 for odd p >= 3. The double-factorial ratio is accumulated as a
    product of ratios; the raw factorials overflow near l ~ 150.
    """
    if int(p) != p or p < 0:
        raise ValueError("power must be a nonnegative integer")
    p = int(p)
    if p == 0:
        return 1.0 / (2.0 * math.pi)
    if p == 1:
        return 0.25
    if p % 2:
        return 0.0
    ell = p // 2
    r = 1.0
    for i in range(1, ell):
        r *= (2.0 * i - 1.0) / (2.0 * i)
    return r / ((2.0 * ell - 1.0) * (2.0 * ell) * 2.0 * math.pi)


def kernel_series(u, n_terms=200):
    """Truncated kernel series keeping the first n_terms nonzero coefficients.

    Those are c_0, c_1, then the even powers 2, 4, ..., 2(n_terms - 2); the
    identically-zero odd coefficients do not count against the budget.
    """
    if n_terms < 1:
        raise ValueError("need at least one term")
    u = float(u)
    if abs(u) > 1.0 + 1e-12:
        raise ValueError(f"cosine out of range: {u}")
    total = kernel_coeff(0)
    if n_terms >= 2:
        total += kernel_coeff(1) * u
    u2 = u * u
    upow = 1.0
    r = 1.0
    for ell in range(1, n_terms - 1):
        upow *= u2
        if ell > 1:
            r *= (2.0 * ell - 3.0) / (2.0 * ell - 2.0)
        total += r / ((2.0 * ell - 1.0) * (2.0 * ell) * 2.0 * math.pi) * upow
    return total


@dataclass(frozen=True)
class KernelSeries:
    """Coefficient accessor plus a fixed truncation order."""

    n_terms: int = 200

    def coeff(self, p):
        return kernel_coeff(p)

    def __call__(self, u):
        return kernel_series(u, self.n_terms)


# ---------------------------------------------------------------------------
# targets

def _admissible(q):
    return q == 1 or (q >= 0 and q % 2 == 0)


@dataclass(frozen=True)
class TargetTerm:
    alpha: float
    beta: np.ndarray
    p: int

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=np.float64).ravel())
        object.__setattr__(self, "alpha", float(self.alpha))
        if int(self.p) != self.p or self.p < 2:
            raise ValueError("term degree p must be an integer >= 2")
        object.__setattr__(self, "p", int(self.p))

    def value(self, X):
        return self.alpha * (np.asarray(X, dtype=np.float64) @ self.beta) ** self.p


@dataclass(frozen=True)
class TargetPoly:
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("target needs at least one term")
        d = terms[0].beta.shape[0]
        if any(t.beta.shape[0] != d for t in terms):
            raise ValueError("all terms must share the input dimension")
        object.__setattr__(self, "terms", terms)

    @property
    def d(self):
        return self.terms[0].beta.shape[0]

    def check_admissible(self, order):
        """Degrees must sit at order + 1 or order + even; order is the Taylor order."""
        for t in self.terms:
            if t.p < order or not _admissible(t.p - order):
                raise ValueError(
                    f"degree {t.p} not reachable at order {order}: "
                    f"p - {order} must be 1 or even and nonnegative"
                )

    def value(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(X.shape[0])
        for t in self.terms:
            out += t.value(X)
        return out

    def to_json(self, path=None):
        payload = [{"alpha": t.alpha, "beta": t.beta.tolist(), "p": t.p} for t in self.terms]
        if path is None:
            return json.dumps(payload)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        return path

    @staticmethod
    def from_json(src):
        if isinstance(src, str) and src.lstrip().startswith("["):
            payload = json.loads(src)
        else:
            with open(src) as fh:
                payload = json.load(fh)
        return TargetPoly(tuple(TargetTerm(t["alpha"], t["beta"], t["p"]) for t in payload))


@dataclass(frozen=True)
class FitConfig:
    n_probes: int | None = None   # default 4 * (m/2) sphere points
    ridge: float | None = None    # default 1e-8 * mean feature-gram diagonal
    seed: int = 0
    chunk: int = 2048

    def __post_init__(self):
        if self.n_probes is not None and self.n_probes < 1:
            raise ValueError("n_probes must be positive")
        if self.ridge is not None and self.ridge <= 0:
            raise ValueError("ridge must be positive")
        if self.chunk < 1:
            raise ValueError("chunk must be positive")


def sphere_probes(n, d, B_x, rng):
    Z = rng.standard_normal((n, d))
    return Z * (B_x / np.linalg.norm(Z, axis=1))[:, None]


def _solve_spd(G, rhs, ridge):
    """Solve (G + ridge I) a = rhs, escalating ridge tenfold on breakdown."""
    nfeat = G.shape[0]
    escalations = 0
    lam = ridge
    eye = np.eye(nfeat)
    while True:
        try:
            np.linalg.cholesky(G + lam * eye)
            a = np.linalg.solve(G + lam * eye, rhs)
        except np.linalg.LinAlgError:
            a = None
        if a is not None and np.all(np.isfinite(a)):
            return a, lam, escalations
        escalations += 1
        if escalations > 6:
            raise np.linalg.LinAlgError(
                f"feature gram stayed indefinite up to ridge {lam:g}; "
                "the block is too degenerate to fit"
            )
        lam *= 10.0


def _fit_block(W0block, probes, target, scale, ridge, chunk):
    """Min-norm ridge fit of scale * sum_r relu(w0_r.x) a_r to the target.

    The probe count usually exceeds the block size several-fold and the full
    feature matrix does not fit comfortably, so the normal equations are
    accumulated over probe chunks and the relu features recomputed for the
    residual pass.
    """
    nfeat = W0block.shape[1]
    G = np.zeros((nfeat, nfeat))
    rhs = np.zeros(nfeat)
    for lo in range(0, probes.shape[0], chunk):
        F = np.maximum(probes[lo:lo + chunk] @ W0block, 0.0) * scale
        G += F.T @ F
        rhs += F.T @ target[lo:lo + chunk]
    if ridge is None:
        ridge = 1e-8 * max(np.trace(G) / nfeat, np.finfo(float).tiny)
    a, ridge_used, escalations = _solve_spd(G, rhs, ridge)
    worst = 0.0
    for lo in range(0, probes.shape[0], chunk):
        F = np.maximum(probes[lo:lo + chunk] @ W0block, 0.0) * scale
        worst = max(worst, float(np.abs(F @ a - target[lo:lo + chunk]).max()))
    return {
        "a": a,
        "residual": worst,
        "msq": float((a * a).mean()),
        "ridge": float(ridge_used),
        "ridge_escalations": escalations,
        "n_probes": int(probes.shape[0]),
    }


def fit_feature_coefficients(net, alpha, beta, q, probe_x, ridge=None, chunk=2048):
    """Fit (2/m) sum_{r <= m/2} relu(w0_r.x) a_r to alpha (beta.x)^q over probes.

    Returns the coefficient vector with the max probe error and the empirical
    mean square msq = (2/m) sum a_r^2, which converges (in width) to at most
    2 pi (q v 1)^3 alpha^2 B_x^(2q) |beta|^(2q); see msq_bound.
    """
    if not _admissible(q):
        raise ValueError("degree q must be 1 or a nonnegative even integer")
    probes = np.asarray(probe_x, dtype=np.float64)
    if probes.ndim != 2 or probes.shape[1] != net.d:
        raise ValueError("probes must be (n, d) points")
    beta = np.asarray(beta, dtype=np.float64).ravel()
    target = float(alpha) * (probes @ beta) ** int(q)
    return _fit_block(net.W0[:, : net.half], probes, target,
                      1.0 / net.half, ridge, chunk)


def msq_bound(alpha, beta_norm, q, B_x):
    """Wide-limit ceiling on the fit's mean-square coefficient for one degree."""
    return 2.0 * math.pi * max(q, 1) ** 3 * alpha ** 2 * (B_x * beta_norm) ** (2 * q)


# ---------------------------------------------------------------------------
# weight assembly

def _blocks(half, n_terms):
    if n_terms > half:
        raise ValueError(f"{n_terms} target terms but only {half} neuron pairs")
    size = half // n_terms
    bounds = [size * j for j in range(n_terms)] + [half]
    return [np.arange(bounds[j], bounds[j + 1]) for j in range(n_terms)]


def _fit_terms(net, target, order, cfg):
    """One fit per term on its own neuron block, sharing a single probe set.

    Sharing the probes (and the ridge rule) keeps the whole construction
    linear in the target coefficients.
    """
    target.check_admissible(order)
    if target.d != net.d:
        raise ValueError("target dimension does not match the network")
    half = net.half
    blocks = _blocks(half, len(target.terms))
    n_probes = cfg.n_probes if cfg.n_probes is not None else 4 * half
    rng = np.random.default_rng(cfg.seed)
    probes = sphere_probes(n_probes, net.d, net.B_x, rng)
    reports = []
    for term, rs in zip(target.terms, blocks):
        q = term.p - order
        tvals = term.alpha * (probes @ term.beta) ** q
        rep = _fit_block(net.W0[:, rs], probes, tvals, 1.0 / rs.shape[0],
                         cfg.ridge, cfg.chunk)
        rep["block_start"] = int(rs[0])
        rep["block_size"] = int(rs.shape[0])
        rep["degree_fit"] = int(q)
        rep["msq_bound"] = msq_bound(term.alpha, float(np.linalg.norm(term.beta)), q, net.B_x)
        reports.append(rep)
    return blocks, reports


def construct_quadratic_wstar(net, target, cfg=FitConfig()):
    """Movement whose quadratic term approximates the target polynomial.

    Per term: fit coefficients c_r for the residual degree p - 2, then place
    the mirrored column pair (sqrt([a_r c_r]_+) beta, sqrt([a_r c_r]_-) beta)
    scaled by sqrt(2 sqrt(m) / block) so the pair telescopes to
    c_r relu(h0_r) (beta.x)^2 inside the quadratic sum. Blocks partition the
    neuron pairs equally across terms, remainder to the last.
    """
    if net.activation.kind != RC6:
        raise ValueError("quadratic construction needs the relu-cubed activation")
    if isinstance(target, TargetTerm):
        target = TargetPoly((target,))
    blocks, reports = _fit_terms(net, target, 2, cfg)
    half = net.half
    W = np.zeros((net.d, net.m))
    for term, rs, rep in zip(target.terms, blocks, reports):
        scale = math.sqrt(2.0 * math.sqrt(net.m) / rs.shape[0])
        signed = net.a[rs] * rep["a"]
        W[:, rs] = scale * np.sqrt(np.maximum(signed, 0.0))[None, :] * term.beta[:, None]
        W[:, rs + half] = scale * np.sqrt(np.maximum(-signed, 0.0))[None, :] * term.beta[:, None]
    norm24_4 = norm_2p(W, 4) ** 4
    bound = 16.0 * math.pi * len(target.terms) * sum(
        max(t.p - 2, 1) ** 3 * t.alpha ** 2
        * (net.B_x * float(np.linalg.norm(t.beta))) ** (2 * (t.p - 2))
        * float(np.linalg.norm(t.beta)) ** 4
        for t in target.terms
    )
    return {"Wstar": W, "norm24_4": float(norm24_4), "norm24_4_bound": float(bound),
            "fit_report": reports}


def construct_korder_wstar(net, k, target, cfg=FitConfig()):
    """Paired movement whose k-th order term approximates the target.

    Same recipe one order up: fit degree p - k, columns carry the k-th root
    of the signed coefficients, scale (sqrt(m/2)/block)^(1/k), and the pair
    gap telescopes to c_r relu(h0_r) (beta.x)^k.
    """
    if int(k) != k or k < 1:
        raise ValueError("order k must be an integer >= 1")
    k = int(k)
    if net.activation.kind != POW or net.activation.k != k:
        raise ValueError(f"k-order construction needs the relu_power({k}) activation")
    if isinstance(target, TargetTerm):
        target = TargetPoly((target,))
    blocks, reports = _fit_terms(net, target, k, cfg)
    half = net.half
    Wplus = np.zeros((net.d, half))
    Wminus = np.zeros((net.d, half))
    for term, rs, rep in zip(target.terms, blocks, reports):
        scale = (math.sqrt(half) / rs.shape[0]) ** (1.0 / k)
        signed = net.a[rs] * rep["a"]
        Wplus[:, rs] = scale * np.maximum(signed, 0.0)[None, :] ** (1.0 / k) * term.beta[:, None]
        Wminus[:, rs] = scale * np.maximum(-signed, 0.0)[None, :] ** (1.0 / k) * term.beta[:, None]
    paired = PairedDelta(Wplus, Wminus)
    norm = norm_2p(paired.to_flat(), 2 * k) ** (2 * k)
    bound = 2.0 * math.pi * len(target.terms) * sum(
        max(t.p - k, 1) ** 3 * t.alpha ** 2
        * (net.B_x * float(np.linalg.norm(t.beta))) ** (2 * (t.p - k))
        * float(np.linalg.norm(t.beta)) ** (2 * k)
        for t in target.terms
    )
    return {"paired": paired, "norm22k_2k": float(norm), "norm22k_2k_bound": float(bound),
            "fit_report": reports}
