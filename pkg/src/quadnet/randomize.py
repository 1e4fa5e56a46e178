"""Sign randomization and moment-matched column-scale pairs.

The sign diagonal resamples the direction of every moved column; in
expectation it erases the linear Taylor term while leaving all even terms
alone. Moment pairs extend the trick to order k: two finite scale
distributions whose first k-1 moments agree and whose k-th moments differ by
exactly one, so only the k-th order term survives the pairing in expectation.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 6


@dataclass
class SignDiagonal:
    s: np.ndarray  # (m,) entries exactly +-1

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.float64)
        if self.s.ndim != 1 or not np.all(np.abs(self.s) == 1.0):
            raise ValueError("sign diagonal entries must be exactly +-1")

    def __len__(self):
        return self.s.shape[0]


def sample_signs(m, rng):
    """Uniform +-1 diagonal of length m."""
    return SignDiagonal(np.where(rng.random(m) < 0.5, -1.0, 1.0))


def apply_signs(W, sigma):
    """Column r of the result is s_r * w_r. Returns a new array."""
    s = sigma.s if isinstance(sigma, SignDiagonal) else np.asarray(sigma, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if W.shape[1] != s.shape[0]:
        raise ValueError("sign diagonal length must match the column count")
    return W * s[None, :]


@dataclass
class MomentPair:
    """Two finite scale distributions (z_plus, z_minus) with matched low
    moments and a unit k-th moment gap."""

    k: int
    values_plus: np.ndarray
    probs_plus: np.ndarray
    values_minus: np.ndarray
    probs_minus: np.ndarray

    def __post_init__(self):
        for name in ("values_plus", "probs_plus", "values_minus", "probs_minus"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        for v, p in ((self.values_plus, self.probs_plus), (self.values_minus, self.probs_minus)):
            if v.shape != p.shape or v.ndim != 1:
                raise ValueError("values and probs must be matching 1-d arrays")
            if np.any(p < -1e-15) or abs(p.sum() - 1.0) > 1e-12:
                raise ValueError("probs must be nonnegative and sum to 1")

    def moment(self, side, j):
        if side == "+":
            v, p = self.values_plus, self.probs_plus
        elif side == "-":
            v, p = self.values_minus, self.probs_minus
        else:
            raise ValueError(f"side must be '+' or '-', got {side!r}")
        return float((p * v ** j).sum())

    def to_json(self):
        return json.dumps(
            {
                "k": self.k,
                "values_plus": self.values_plus.tolist(),
                "probs_plus": self.probs_plus.tolist(),
                "values_minus": self.values_minus.tolist(),
                "probs_minus": self.probs_minus.tolist(),
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text):
        d = json.loads(text)
        return MomentPair(
            k=int(d["k"]),
            values_plus=d["values_plus"],
            probs_plus=d["probs_plus"],
            values_minus=d["values_minus"],
            probs_minus=d["probs_minus"],
        )


def _solve_difference(k, span):
    """Signed measure q on {-span..span} with sum q v^j = 0 for j < k and = 1
    at j = k, via the minimum-l2 exact solution of the underdetermined system."""
    vals = np.arange(-span, span + 1, dtype=np.float64)
    A = np.stack([vals ** j for j in range(k + 1)])
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    q, residuals, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < k + 1:
        return None, None
    if np.linalg.norm(A @ q - rhs) > 1e-9:
        return None, None
    return vals, q


def moment_pair(k):
    """Canonical pair for order k (2 <= k <= 6).

    k=2 and k=3 are closed forms; higher orders split a minimum-norm signed
    measure around the uniform distribution on a small integer support,
    widening the support until both halves are genuine distributions.
    """
    if int(k) != k or not (2 <= k <= MAX_ORDER):
        raise ValueError(f"order k must be an integer in [2, {MAX_ORDER}]")
    k = int(k)
    if k == 2:
        # z_plus is a fair +-1 coin, z_minus is the point mass at zero.
        return MomentPair(
            k=2,
            values_plus=[-1.0, 1.0],
            probs_plus=[0.5, 0.5],
            values_minus=[0.0],
            probs_minus=[1.0],
        )
    if k == 3:
        # Mirrored two-point law: support {alpha, -1} with mean zero and
        # third moment 1/2, so the mirrored pair gaps the cube by exactly 1.
        alpha = (1.0 + math.sqrt(3.0)) / 2.0
        p = 1.0 / (1.0 + alpha)
        return MomentPair(
            k=3,
            values_plus=[alpha, -1.0],
            probs_plus=[p, 1.0 - p],
            values_minus=[-alpha, 1.0],
            probs_minus=[p, 1.0 - p],
        )
    for span in range(2, 7):
        vals, q = _solve_difference(k, span)
        if q is None:
            continue
        u = 1.0 / vals.size
        pp = u + q / 2.0
        pm = u - q / 2.0
        if pp.min() < -1e-15 or pm.min() < -1e-15:
            continue
        pair = MomentPair(
            k=k,
            values_plus=vals,
            probs_plus=np.clip(pp, 0.0, None),
            values_minus=vals,
            probs_minus=np.clip(pm, 0.0, None),
        )
        rep = verify_moments(pair)
        if rep["ok"]:
            return pair
    raise RuntimeError(f"no feasible moment pair found for k={k} on supports up to +-6")


def verify_moments(pair, tol=1e-10):
    """Exact check of the defining moment conditions from the stored tables."""
    gaps = []
    for j in range(pair.k + 1):
        gaps.append(pair.moment("+", j) - pair.moment("-", j))
    viols = [abs(g) for g in gaps[:-1]] + [abs(gaps[-1] - 1.0)]
    mx = max(viols)
    return {"k": pair.k, "gaps": gaps, "max_violation": mx, "ok": mx <= tol}


def sample_pair_scales(pair, half_m, rng):
    """Per-pair iid draws: (z_plus, z_minus), each of length half_m."""
    zp = rng.choice(pair.values_plus, p=pair.probs_plus, size=half_m)
    zm = rng.choice(pair.values_minus, p=pair.probs_minus, size=half_m)
    return zp, zm
