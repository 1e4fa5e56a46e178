"""Small shared numerics: stable scalar maps, slope fits, power iteration."""

import math

import numpy as np


def softplus(t):
    """log(1 + e^t), stable for large |t|."""
    t = np.asarray(t, dtype=np.float64)
    return np.where(t > 0.0, t + np.log1p(np.exp(-np.abs(t))), np.log1p(np.exp(-np.abs(t))))


def sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def fit_loglog_slope(xs, ys):
    """Least-squares slope of log(y) on log(x).

    Returns (slope, intercept, band95) where band95 is 1.96 times the standard
    error of the slope. Points with y <= 0 are rejected outright; a magnitude
    statistic hitting exact zero means the scan design is broken, not small.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValueError("need two same-length 1-d arrays of at least 2 points")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise ValueError("log-log fit needs strictly positive data")
    lx = np.log(xs)
    ly = np.log(ys)
    n = lx.size
    A = np.stack([lx, np.ones(n)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = ly - A @ coef
    if n > 2:
        s2 = float(resid @ resid) / (n - 2)
        sxx = float(((lx - lx.mean()) ** 2).sum())
        band95 = 1.96 * math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    else:
        band95 = 0.0
    return slope, intercept, band95


def power_iter(matvec, dim, rng, iters=300, tol=1e-10, restarts=3):
    """Largest eigenvalue magnitude of a symmetric operator given as a matvec.

    Runs `restarts` independent starts and keeps the best Rayleigh quotient;
    returns (value, converged). Convergence is relative change of the estimate
    between sweeps below tol.
    """
    best = 0.0
    conv = False
    for _ in range(restarts):
        v = rng.standard_normal(dim)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        v /= nv
        lam = 0.0
        ok = False
        for _ in range(iters):
            w = matvec(v)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                lam, ok = 0.0, True
                break
            v_new = w / nw
            lam_new = float(v_new @ matvec(v_new))
            if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
                lam, ok = lam_new, True
                v = v_new
                break
            lam, v = lam_new, v_new
        best = max(best, abs(lam))
        conv = conv or ok
    return best, conv


def uniform_ball(shape, radius, rng):
    """Uniform draw from the Frobenius-norm ball of the given radius."""
    g = rng.standard_normal(shape)
    nrm = np.linalg.norm(g)
    if nrm == 0.0:
        return np.zeros(shape)
    dim = int(np.prod(shape))
    u = rng.random() ** (1.0 / dim)
    return g * (radius * u / nrm)


def project_to_sphere(X, B_x):
    """Rescale rows of X onto the radius-B_x sphere."""
    X = np.asarray(X, dtype=np.float64)
    nrm = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(nrm == 0.0):
        raise ValueError("cannot project a zero row onto the sphere")
    return X * (B_x / nrm)
