"""Training loops: noisy SGD on the randomized risk, GD on the clean risk,
and the convex linear (NTK) baseline.

All three start from W = 0 and share the recording schema: rows of
(step, randomized-risk estimate, clean risk, column-norm, gradient norm).
Randomness is split into independent streams (sign draws, minibatch draws,
perturbation kicks, risk-recording draws) so that changing the recording
cadence never changes the training path, and a fixed seed replays bitwise.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .backend import ascontig
from .model import norm24
from .numerics import uniform_ball
from .randomize import sample_signs
from .risk import (
    clean_risk,
    grad_clean,
    grad_randomized_sample,
    randomized_risk_mc,
    reg_grad,
)

TRAJECTORY_HEADER = "step,randomized_risk,clean_risk,norm24,gradnorm"


class TrainingDiverged(RuntimeError):
    """Raised when an iterate or gradient stops being finite."""

    def __init__(self, method, step, eta, frob, norm24_val):
        self.method, self.step, self.eta = method, step, eta
        self.frob, self.norm24 = frob, norm24_val
        super().__init__(
            f"{method} diverged at step {step} (eta={eta:g}, "
            f"|W|_F={frob:g}, |W|_24={norm24_val:g})"
        )


@dataclass
class OptConfig:
    eta: float
    T: int
    lam: float = 0.0
    perturb_radius: float = 1e-3
    perturb_trigger: float = 1e-4
    perturb_cooldown: int = 100
    batch: int | None = None
    seed: int = 0
    record_every: int = 10
    risk_draws: int = 8
    grad_window: int = 20

    def __post_init__(self):
        # eta = 0 is allowed: it is the documented do-nothing configuration.
        if self.eta < 0 or self.T < 1 or self.perturb_radius < 0:
            raise ValueError("need eta >= 0, T >= 1, perturb_radius >= 0")
        if self.perturb_cooldown < 1 or self.record_every < 1 or self.grad_window < 1:
            raise ValueError("cooldown, record_every, grad_window must be >= 1")
        if self.risk_draws < 2:
            raise ValueError("risk_draws must be >= 2")
        if self.batch is not None and self.batch < 1:
            raise ValueError("batch must be positive or None")


@dataclass
class Trajectory:
    method: str
    steps: list = field(default_factory=list)
    randomized_risk: list = field(default_factory=list)
    clean: list = field(default_factory=list)
    norms24: list = field(default_factory=list)
    gradnorms: list = field(default_factory=list)
    kicks: list = field(default_factory=list)
    final_W: np.ndarray | None = None

    def append(self, step, rr, cr, nrm, gn):
        if self.steps and step <= self.steps[-1]:
            raise ValueError("recorded steps must be strictly increasing")
        self.steps.append(step)
        self.randomized_risk.append(rr)
        self.clean.append(cr)
        self.norms24.append(nrm)
        self.gradnorms.append(gn)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(TRAJECTORY_HEADER + "\n")
            for row in zip(self.steps, self.randomized_risk, self.clean,
                           self.norms24, self.gradnorms):
                fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                                  for v in row) + "\n")
        return path


def _record(traj, spec, cfg, step, W, gn, rng_record):
    rr = randomized_risk_mc(spec, W, cfg.risk_draws, rng_record)["mean"]
    cr = clean_risk(spec, W)
    nrm = norm24(W)
    if not (math.isfinite(rr) and math.isfinite(cr) and math.isfinite(nrm)):
        raise TrainingDiverged(traj.method, step, cfg.eta,
                               float(np.linalg.norm(W)), nrm)
    traj.append(step, rr, cr, nrm, gn)


def _batch_rows(spec, cfg, rng_batch):
    if cfg.batch is None or cfg.batch >= spec.data.n:
        return None
    return rng_batch.choice(spec.data.n, size=cfg.batch, replace=False)


def sgd_step(spec, W, sigma, eta, rows=None):
    """One update of noisy SGD; returns (new W, the sampled gradient)."""
    g = grad_randomized_sample(spec, W, sigma, rows=rows)
    return W - eta * g, g


def noisy_sgd(spec, cfg):
    """Perturbed SGD on the sign-randomized regularized risk.

    Each step samples a fresh sign diagonal (and a minibatch if configured)
    and descends the sampled gradient. When the recent gradient-norm average
    drops below the trigger and the cooldown has elapsed, a uniform-ball kick
    of the configured radius nudges the iterate off flat spots.
    """
    rng = np.random.default_rng(cfg.seed)
    rng_sigma, rng_batch, rng_kick, rng_record = rng.spawn(4)
    W = np.zeros((spec.net.d, spec.net.m))
    traj = Trajectory(method="noisy_sgd")
    _record(traj, spec, cfg, 0, W, 0.0, rng_record)
    window = deque(maxlen=cfg.grad_window)
    last_kick = -cfg.perturb_cooldown
    for t in range(cfg.T):
        sigma = sample_signs(spec.net.m, rng_sigma)
        rows = _batch_rows(spec, cfg, rng_batch)
        g = grad_randomized_sample(spec, W, sigma, rows=rows)
        gn = float(np.linalg.norm(g))
        if not math.isfinite(gn):
            raise TrainingDiverged("noisy_sgd", t, cfg.eta,
                                   float(np.linalg.norm(W)), norm24(W))
        W = W - cfg.eta * g
        window.append(gn)
        if (cfg.perturb_radius > 0 and sum(window) / len(window) < cfg.perturb_trigger
                and t - last_kick >= cfg.perturb_cooldown):
            W = W + uniform_ball(W.shape, cfg.perturb_radius, rng_kick)
            traj.kicks.append(t + 1)
            last_kick = t
        step = t + 1
        if step % cfg.record_every == 0 or step == cfg.T:
            _record(traj, spec, cfg, step, W, gn, rng_record)
    traj.final_W = W
    return traj


def train_clean(spec, cfg, W_init=None):
    """Full-batch gradient descent on the clean risk plus regularizer.

    The zero movement is an exact critical point of the clean risk, so a
    useful run needs a warm start; W_init = None keeps the zero start for
    callers that only want the recording machinery.
    """
    rng = np.random.default_rng(cfg.seed)
    _, _, _, rng_record = rng.spawn(4)
    W = np.zeros((spec.net.d, spec.net.m)) if W_init is None else W_init.copy()
    traj = Trajectory(method="train_clean")
    _record(traj, spec, cfg, 0, W, 0.0, rng_record)
    for t in range(cfg.T):
        g = grad_clean(spec, W) + reg_grad(W, cfg.lam)
        gn = float(np.linalg.norm(g))
        if not math.isfinite(gn):
            raise TrainingDiverged("train_clean", t, cfg.eta,
                                   float(np.linalg.norm(W)), norm24(W))
        W = W - cfg.eta * g
        step = t + 1
        if step % cfg.record_every == 0 or step == cfg.T:
            _record(traj, spec, cfg, step, W, gn, rng_record)
    traj.final_W = W
    return traj


_CURV_CAP = {"logistic": 0.25, "soft_hinge": 0.25, "huber_abs": 1.0}


def _ntk_objective(spec, W, ridge):
    act = spec.net.activation
    z = backend.flin_vals(spec.H0, spec._G(W), spec.net.a, act.code, act.kp)
    val = float(spec.loss.ell(spec.data.y, z).mean())
    if ridge > 0:
        val += 0.5 * ridge * float((W * W).sum())
    return val, z


def _ntk_auto_eta(spec, ridge):
    # Lipschitz bound through the fixed linear features: the loss-curvature cap
    # times the top eigenvalue of the feature gram over n. For the kinked
    # absolute loss the cap is a pragmatic unit, not a true bound.
    act = spec.net.activation
    S1 = backend._act_np(spec.H0, 1, act.code, act.kp)
    K = (spec.data.X @ spec.data.X.T) * (S1 @ S1.T) / spec.net.m
    from .numerics import power_iter
    lam_max, _ = power_iter(lambda v: K @ v, K.shape[0], np.random.default_rng(0))
    cap = _CURV_CAP.get(spec.loss.tag, 1.0)
    L = cap * lam_max / spec.data.n + ridge
    if L <= 0:
        return 1.0
    return 1.0 / L


def train_linear_ntk(spec, cfg, ridge=0.0):
    """Gradient descent on the linear (NTK) model with fixed features.

    The problem is convex, and the returned final W is the best iterate seen
    (objective tracked every step), which keeps the final objective within
    any constant-step oscillation of the minimum. cfg.eta <= 0 requests an
    automatic step size from the feature-gram curvature bound. The
    randomized_risk column of the trajectory carries this convex objective.
    """
    eta = cfg.eta if cfg.eta > 0 else _ntk_auto_eta(spec, ridge)
    rng = np.random.default_rng(cfg.seed)
    _, _, _, rng_record = rng.spawn(4)
    act = spec.net.activation
    W = np.zeros((spec.net.d, spec.net.m))
    traj = Trajectory(method="linear_ntk")
    obj, _ = _ntk_objective(spec, W, ridge)
    best_obj, best_W = obj, W.copy()
    traj.append(0, obj, clean_risk(spec, W), 0.0, 0.0)
    for t in range(cfg.T):
        z = backend.flin_vals(spec.H0, spec._G(W), spec.net.a, act.code, act.kp)
        lp = ascontig(spec.loss.d1(spec.data.y, z))
        g = ascontig(spec.data.X.T @ backend.backprop_cols(
            spec.H0, lp, spec.net.a, act.code, act.kp)) / spec.data.n
        if ridge > 0:
            g = g + ridge * W
        gn = float(np.linalg.norm(g))
        if not math.isfinite(gn):
            raise TrainingDiverged("linear_ntk", t, eta,
                                   float(np.linalg.norm(W)), norm24(W))
        W = W - eta * g
        obj, _ = _ntk_objective(spec, W, ridge)
        if not math.isfinite(obj):
            raise TrainingDiverged("linear_ntk", t, eta,
                                   float(np.linalg.norm(W)), norm24(W))
        if obj < best_obj:
            best_obj, best_W = obj, W.copy()
        step = t + 1
        if step % cfg.record_every == 0 or step == cfg.T:
            traj.append(step, obj, clean_risk(spec, W), norm24(W), gn)
    traj.final_W = best_W
    traj.best_objective = best_obj
    return traj
