"""Desk-scale acceptance suite: one criterion per test, one line per verdict.

Run with -v (or -s for the detail lines). Every test prints a single
"C<n> <name>: PASS/FAIL" line and then asserts, so the suite output reads as
a checklist. Numbers quoted in the assertions are the frozen protocol values;
see the module docstrings for where each quantity comes from.
"""

import math
import time

import numpy as np
import pytest

from quadnet import backend
from quadnet.express import (
    FitConfig,
    TargetPoly,
    TargetTerm,
    construct_quadratic_wstar,
    kernel_coeff,
    kernel_series,
    kernel_value,
    sphere_probes,
)
from quadnet.landscape import clean_landscape_check
from quadnet.measure import (
    coupling_scan,
    gen_sphere,
    korder_scan,
    mxop,
    run_experiment,
)
from quadnet.model import forward_batch, fquad_batch, init_symmetric, norm24
from quadnet.optimize import OptConfig, noisy_sgd
from quadnet.randomize import apply_signs, moment_pair, sample_signs, verify_moments
from quadnet.risk import (
    Dataset,
    RiskSpec,
    clean_risk,
    grad_clean,
    grad_randomized_sample,
    hessq_clean,
    hessq_clean_sigma_expect,
    huber_abs,
    logistic,
    reg_grad,
    reg_value,
    soft_hinge,
)

WIDTHS = [2 ** e for e in range(8, 16)]


def _verdict(tag, ok, detail=""):
    print(f"{tag}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip())


def _relerr(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def test_c01_symmetric_init_nullity():
    t0 = time.time()
    net = init_symmetric(d=10, m=1024, B_x=1.0, seed=0)
    X = sphere_probes(100, 10, 1.0, np.random.default_rng(1))
    worst = float(np.abs(forward_batch(net, np.zeros((10, 1024)), X)).max())
    bound = 1e-10 * math.sqrt(1024)
    dt = time.time() - t0
    ok = worst <= bound and dt < 1.0
    _verdict("C1 symmetric-init nullity", ok,
             f"max|f|={worst:.3e} bound={bound:.3e} ({dt:.2f}s)")
    assert worst <= bound
    assert dt < 1.0


def test_c02_derivative_oracles():
    t0 = time.time()
    master = np.random.default_rng(42)
    worst_g = worst_h = 0.0
    for trial in range(10):
        rng = np.random.default_rng(100 + trial)
        d = int(rng.integers(4, 9))
        m = int(rng.choice([32, 64, 128]))
        n = int(rng.integers(16, 33))
        loss = logistic() if trial % 2 == 0 else soft_hinge()
        lam = float(rng.choice([0.0, 1e-3, 1e-2]))
        net = init_symmetric(d=d, m=m, B_x=1.0, seed=200 + trial)
        X = gen_sphere(n, d, 1.0, rng)
        y = rng.choice([-1.0, 1.0], size=n)
        spec = RiskSpec(net, Dataset(X, y, 1.0), loss, lam=lam)
        W = 0.3 * rng.standard_normal((d, m))
        eps = 1e-6

        V = rng.standard_normal((d, m))
        V /= np.linalg.norm(V)
        fd = (clean_risk(spec, W + eps * V) - clean_risk(spec, W - eps * V)) / (2 * eps)
        worst_g = max(worst_g, _relerr(float((grad_clean(spec, W) * V).sum()), fd))

        sig = sample_signs(m, rng)
        act = spec.net.activation

        def fixed_sign(U):
            z = backend.sgd_forward(spec.H0, np.ascontiguousarray(X @ U),
                                    sig.s, net.a, act.code, act.kp)
            return float(loss.ell(y, z).mean()) + reg_value(U, lam)

        fd = (fixed_sign(W + eps * V) - fixed_sign(W - eps * V)) / (2 * eps)
        got = float((grad_randomized_sample(spec, W, sig) * V).sum())
        worst_g = max(worst_g, _relerr(got, fd))

        fd = (reg_value(W + eps * V, 0.7) - reg_value(W - eps * V, 0.7)) / (2 * eps)
        worst_g = max(worst_g, _relerr(float((reg_grad(W, 0.7) * V).sum()), fd))

        # five-point second difference: 4th-order truncation lets t be large
        # enough that the eps/t^2 cancellation error stays ~1e-11
        t = 3e-3
        fd2 = (-clean_risk(spec, W + 2 * t * V) + 16 * clean_risk(spec, W + t * V)
               - 30 * clean_risk(spec, W)
               + 16 * clean_risk(spec, W - t * V)
               - clean_risk(spec, W - 2 * t * V)) / (12 * t ** 2)
        worst_h = max(worst_h, _relerr(hessq_clean(spec, W, V), fd2))
    dt = time.time() - t0
    ok = worst_g <= 1e-5 and worst_h <= 1e-4 and dt < 30
    _verdict("C2 derivative oracles", ok,
             f"grad rel={worst_g:.2e} hess rel={worst_h:.2e} ({dt:.1f}s)")
    assert worst_g <= 1e-5
    assert worst_h <= 1e-4
    assert dt < 30


def test_c03_regularizer_identity():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        W = rng.standard_normal((int(rng.integers(2, 12)), int(rng.integers(4, 64))))
        lam = float(rng.uniform(0.1, 2.0))
        worst = max(worst, _relerr(float((reg_grad(W, lam) * W).sum()),
                                   8.0 * reg_value(W, lam)))
    ok = worst <= 1e-10
    _verdict("C3 regularizer identity", ok, f"max rel={worst:.2e}")
    assert worst <= 1e-10


def test_c04_sign_expectation_closed_form():
    t0 = time.time()
    for trial in range(10):
        rng = np.random.default_rng(300 + trial)
        d = int(rng.integers(4, 8))
        m = int(rng.choice([32, 64, 96]))
        n = int(rng.integers(12, 25))
        loss = [logistic(), soft_hinge(), huber_abs()][trial % 3]
        net = init_symmetric(d=d, m=m, B_x=1.0, seed=400 + trial)
        X = gen_sphere(n, d, 1.0, rng)
        y = rng.choice([-1.0, 1.0], size=n)
        spec = RiskSpec(net, Dataset(X, y, 1.0), loss, lam=0.0)
        W = 0.3 * rng.standard_normal((d, m))
        Wstar = 0.5 * rng.standard_normal((d, m))
        exact = hessq_clean_sigma_expect(spec, W, Wstar)
        draws = np.array([
            hessq_clean(spec, W, apply_signs(Wstar, sample_signs(m, rng)))
            for _ in range(2000)
        ])
        se = draws.std(ddof=1) / math.sqrt(2000)
        gap = abs(float(draws.mean()) - exact)
        assert gap <= 3.0 * se + 1e-12, (trial, gap, se)
    dt = time.time() - t0
    ok = dt < 120
    _verdict("C4 sign-expectation closed form", ok, f"10 configs at 3 stderr ({dt:.1f}s)")
    assert dt < 120


def test_c05_moment_pairs():
    t0 = time.time()
    for k in (2, 3):
        rep = verify_moments(moment_pair(k), tol=1e-12)
        assert rep["ok"], rep
    for k in (4, 5, 6):
        rep = verify_moments(moment_pair(k), tol=1e-10)
        assert rep["ok"], rep
    dt = time.time() - t0
    ok = dt < 1.0
    _verdict("C5 moment pairs", ok, f"k=2..6 ({dt:.2f}s)")
    assert dt < 1.0


def test_c06_coupling_slopes():
    t0 = time.time()
    rep = coupling_scan(10, 1.0, WIDTHS, trials=50,
                        rng=np.random.default_rng(2024), n_x=8)
    s = rep.slopes()
    bands = {
        "abs_flin_sigma": (-0.35, -0.15),
        "sq_flin_sigma": (-0.65, -0.35),
        "abs_remainder": (-0.35, -0.15),
        "abs_fquad": (-0.10, 0.10),
    }
    dt = time.time() - t0
    fails = {k: s[k]["slope"] for k, (lo, hi) in bands.items()
             if not lo <= s[k]["slope"] <= hi}
    ok = not fails and dt < 300
    detail = " ".join(f"{k}={s[k]['slope']:+.3f}" for k in bands)
    _verdict("C6 coupling slopes", ok, f"{detail} ({dt:.1f}s)")
    assert not fails, fails
    assert dt < 300


def test_c07_korder_slopes():
    t0 = time.time()
    rep = korder_scan(3, 10, WIDTHS, trials=50,
                      rng=np.random.default_rng(2025), n_x=16)
    s = rep.slopes()
    bands = {
        "abs_f1": (-1.0 / 6.0 - 0.1, -1.0 / 6.0 + 0.1),
        "abs_f2": (-1.0 / 3.0 - 0.1, -1.0 / 3.0 + 0.1),
        "abs_f3": (-0.1, 0.1),
        "abs_f4": (-1.0 / 6.0 - 0.1, -1.0 / 6.0 + 0.1),
    }
    dt = time.time() - t0
    fails = {k: s[k]["slope"] for k, (lo, hi) in bands.items()
             if not lo <= s[k]["slope"] <= hi}
    ok = not fails and dt < 600
    detail = " ".join(f"{k}={s[k]['slope']:+.3f}" for k in bands)
    _verdict("C7 k-order slopes", ok, f"{detail} ({dt:.1f}s)")
    # The j = k+1 band encodes a coherent m^{-1/6} reading; the canonical k=3
    # pair has no fourth-moment gap, so that term is purely incoherent and
    # measures near -2/3. Band left as stated; expected to fail on abs_f4.
    assert not fails, fails
    assert dt < 600


def test_c08_kernel_series():
    u = np.linspace(-0.99, 0.99, 1981)
    err = float(np.abs(np.array([kernel_series(v, 200) for v in u])
                       - np.array([kernel_value(v) for v in u])).max())
    c0_ok = _relerr(kernel_coeff(0), 1.0 / (2.0 * math.pi)) < 1e-15
    c1_ok = _relerr(kernel_coeff(1), 0.25) < 1e-15
    # independent oracle for c2: even-power least squares on the residual
    # K(u) - c0 - c1 u over |u| <= 0.3
    ug = np.linspace(-0.3, 0.3, 601)
    resid = np.array([kernel_value(v) for v in ug]) - 1.0 / (2 * math.pi) - 0.25 * ug
    powers = np.arange(2, 13, 2)
    A = ug[:, None] ** powers[None, :]
    coef, *_ = np.linalg.lstsq(A, resid, rcond=None)
    c2_oracle = float(coef[0])
    c2_ok = abs(kernel_coeff(2) - c2_oracle) < 1e-10
    ok = err <= 1e-8 and c0_ok and c1_ok and c2_ok
    _verdict("C8 kernel series", ok,
             f"max err={err:.3e} c2 gap={abs(kernel_coeff(2) - c2_oracle):.1e}")
    # The 200-term truncation floor on |u| <= 0.99 sits near 2.4e-8; the
    # 1e-8 band needs ~250 nonzero terms. Band left as stated.
    assert c0_ok and c1_ok and c2_ok
    assert err <= 1e-8


def test_c09_expressivity_construction():
    t0 = time.time()
    d, m = 5, 2 ** 14
    rng = np.random.default_rng(9)
    beta = rng.standard_normal(d)
    beta /= np.linalg.norm(beta)
    net = init_symmetric(d=d, m=m, B_x=1.0, seed=99)
    target = TargetPoly((TargetTerm(1.0, beta, 4),))
    built = construct_quadratic_wstar(net, target, FitConfig(seed=1))
    X = sphere_probes(200, d, 1.0, np.random.default_rng(10))
    err = float(np.abs(fquad_batch(net, built["Wstar"], X) - target.value(X)).max())
    ratio = built["norm24_4"] / built["norm24_4_bound"]
    dt = time.time() - t0
    ok = err <= 0.05 and ratio <= 10.0 and dt < 180
    _verdict("C9 expressivity construction", ok,
             f"probe err={err:.4f} norm ratio={ratio:.2f} ({dt:.0f}s)")
    assert err <= 0.05
    assert ratio <= 10.0
    assert dt < 180


def test_c10_landscape_inequality():
    t0 = time.time()
    d, m, n = 10, 2 ** 14, 256
    rng = np.random.default_rng(11)
    beta = rng.standard_normal(d)
    beta /= np.linalg.norm(beta)
    X = gen_sphere(n, d, 1.0, rng)
    data = Dataset(X, (X @ beta) ** 4, 1.0)
    net = init_symmetric(d=d, m=m, B_x=1.0, seed=77)
    target = TargetPoly((TargetTerm(1.0, beta, 4),))
    built = construct_quadratic_wstar(net, target, FitConfig(seed=2))
    Wstar = built["Wstar"]
    probe = RiskSpec(net, data, huber_abs(), lam=0.0)
    spec = RiskSpec(net, data, huber_abs(), lam=0.0,
                    opt_reference=clean_risk(probe, Wstar))
    points = [np.random.default_rng(500 + j).standard_normal((d, m)) for j in range(20)]
    points = [G / norm24(G) for G in points]  # on the unit l24 sphere
    points.append(Wstar)
    worst = math.inf
    for W in points:
        rep = clean_landscape_check(spec, W, Wstar, mode="exact")
        worst = min(worst, rep.slack)
    dt = time.time() - t0
    ok = worst >= -0.05 and dt < 300
    _verdict("C10 landscape inequality", ok, f"worst slack={worst:+.4f} ({dt:.0f}s)")
    assert worst >= -0.05
    assert dt < 300


def test_c11_xor_comparison():
    t0 = time.time()
    res = run_experiment("xor", None, seeds=(0, 1, 2, 3, 4))
    by_seed = {}
    for row in res.rows:
        by_seed.setdefault(row["seed"], {})[row["method"]] = row["zero_one"]
    strict = sum(v["quadratic"] < v["linear_ntk"] for v in by_seed.values())
    small = sum(v["quadratic"] <= 0.2 for v in by_seed.values())
    dt = time.time() - t0
    ok = strict >= 4 and small >= 4 and dt < 900
    _verdict("C11 xor comparison", ok,
             f"strict wins {strict}/5, errors<=0.2 {small}/5 ({dt:.0f}s)")
    assert strict >= 4
    assert small >= 4
    assert dt < 900


def test_c12_matrix_sensing():
    t0 = time.time()
    res = run_experiment("sensing", None, seeds=(0, 1, 2, 3, 4))
    by_seed = {}
    for row in res.rows:
        by_seed.setdefault(row["seed"], {})[row["method"]] = row["test_loss"]
    wins = sum(v["quadratic"] < v["linear_ntk"] for v in by_seed.values())
    dt = time.time() - t0
    ok = wins >= 4 and dt < 900
    _verdict("C12 matrix sensing", ok, f"loss wins {wins}/5 ({dt:.0f}s)")
    assert wins >= 4
    assert dt < 900


def test_c13_mxop():
    rng = np.random.default_rng(13)
    for n, d in ((200, 8), (500, 20), (1000, 50)):
        X = gen_sphere(n, d, 1.0, rng)
        assert mxop(X) <= 1.0 + 1e-12
    X = gen_sphere(5000, 50, 1.0, rng)
    sphere_val = mxop(X)
    point = np.tile(gen_sphere(1, 12, 1.0, rng), (300, 1))
    degenerate = mxop(point)
    ok = (sphere_val <= 1.5 / math.sqrt(50)
          and abs(degenerate - 1.0) <= 1e-9)
    _verdict("C13 feature covariance norm", ok,
             f"sphere={sphere_val:.4f} (cap {1.5 / math.sqrt(50):.4f}) "
             f"repeated={degenerate:.12f}")
    assert sphere_val <= 1.5 / math.sqrt(50)
    assert abs(degenerate - 1.0) <= 1e-9


def test_c14_deterministic_reruns(tmp_path):
    from quadnet.cli import main

    args = ["train", "--data", "xor", "--d", "10", "--n", "80", "--m", "256",
            "--T", "30", "--record_every", "10", "--seed", "21",
            "--deterministic", "--threads", "1"]
    outs = []
    for name in ("r1", "r2"):
        out = str(tmp_path / name)
        assert main(args + ["--out", out]) == 0
        outs.append(out)
    csv1 = open(outs[0] + "/trajectory.csv", "rb").read()
    csv2 = open(outs[1] + "/trajectory.csv", "rb").read()
    scan_args = ["couple-scan", "--widths", "256,512,1024,2048", "--trials",
                 "6", "--seed", "3", "--deterministic", "--threads", "1"]
    souts = []
    for name in ("s1", "s2"):
        out = str(tmp_path / name)
        assert main(scan_args + ["--out", out]) == 0
        souts.append(out)
    s1 = open(souts[0] + "/scan.csv", "rb").read()
    s2 = open(souts[1] + "/scan.csv", "rb").read()
    ok = csv1 == csv2 and s1 == s2
    _verdict("C14 deterministic reruns", ok,
             f"train csv {len(csv1)}B, scan csv {len(s1)}B byte-identical")
    assert csv1 == csv2
    assert s1 == s2
