"""The two kernel paths must agree to rounding on every entry point."""

import math

import numpy as np
import pytest

from quadnet import backend

NP = backend.BACKENDS["numpy"]
HAS_NB = "numba" in backend.BACKENDS
NB = backend.BACKENDS.get("numba", NP)


def _inputs(code, kp, seed=0, n=17, m=24):
    rng = np.random.default_rng(seed)
    H0 = np.ascontiguousarray(rng.standard_normal((n, m)))
    G = np.ascontiguousarray(0.3 * rng.standard_normal((n, m)))
    GU = np.ascontiguousarray(0.3 * rng.standard_normal((n, m)))
    a = np.ascontiguousarray(rng.choice([-1.0, 1.0], size=m))
    s = np.ascontiguousarray(rng.choice([-1.0, 1.0], size=m))
    lp = np.ascontiguousarray(rng.standard_normal(n))
    return H0, G, GU, a, s, lp


@pytest.mark.skipif(not HAS_NB, reason="numba not importable")
@pytest.mark.parametrize("code,kp", [(0, 3), (1, 2), (1, 4)])
def test_paths_agree(code, kp):
    H0, G, GU, a, s, lp = _inputs(code, kp)
    GS = np.ascontiguousarray(G * s)
    pairs = [
        ("forward", (np.ascontiguousarray(H0 + G), a, code, kp)),
        ("flin", (H0, G, a, code, kp)),
        ("fquad", (H0, G, a, code, kp)),
        ("backprop_cols", (np.ascontiguousarray(H0 + G), lp, a, code, kp)),
        ("gradq_cols", (H0, G, lp, a, code, kp)),
        ("sgd_forward", (H0, G, s, a, code, kp)),
        ("sgd_backcols", (H0, G, s, lp, a, code, kp)),
        ("sigma_sq", (H0, GS, G, code, kp)),
    ]
    for name, args in pairs:
        got_np = NP[name](*args)
        got_nb = NB[name](*args)
        np.testing.assert_allclose(got_nb, got_np, rtol=1e-12, atol=1e-13,
                                   err_msg=name)
    t_np = NP["hessq_pair"](H0, G, GU, a, code, kp)
    t_nb = NB["hessq_pair"](H0, G, GU, a, code, kp)
    for x, y in zip(t_np, t_nb):
        np.testing.assert_allclose(y, x, rtol=1e-12, atol=1e-13)
    for j in range(kp + 3):
        np.testing.assert_allclose(
            NB["act"](H0, j, code, kp), NP["act"](H0, j, code, kp),
            rtol=1e-12, atol=0, err_msg=f"act j={j}")


@pytest.mark.parametrize("code,kp,smooth_top", [(0, 3, 2), (1, 2, 2), (1, 4, 4)])
def test_activation_derivative_chain(code, kp, smooth_top):
    # act(., j+1) is the derivative of act(., j) wherever the function is
    # smooth; check by central differences away from the kink at zero.
    rng = np.random.default_rng(3)
    H = rng.standard_normal((8, 8))
    H[np.abs(H) < 0.1] += 0.2 * np.sign(H[np.abs(H) < 0.1] + 0.5)
    eps = 1e-6
    for j in range(smooth_top):
        fd = (NP["act"](H + eps, j, code, kp) - NP["act"](H - eps, j, code, kp)) / (2 * eps)
        np.testing.assert_allclose(fd, NP["act"](H, j + 1, code, kp),
                                   rtol=1e-6, atol=1e-8)


def test_activation_top_orders():
    # relu-cubed-over-six: third derivative is the step function, fourth is zero
    H = np.array([[-1.5, -0.2, 0.4, 2.0]])
    np.testing.assert_array_equal(NP["act"](H, 3, 0, 3),
                                  (H > 0).astype(float))
    assert not NP["act"](H, 4, 0, 3).any()
    # relu-power k=2: sigma = relu^3/3, so sigma'' = 2 relu (sigma''/2! = relu),
    # sigma''' = 2 * step, and everything above vanishes
    np.testing.assert_array_equal(NP["act"](H, 2, 1, 2), 2.0 * np.maximum(H, 0.0))
    np.testing.assert_array_equal(NP["act"](H, 3, 1, 2), 2.0 * (H > 0))
    assert not NP["act"](H, 4, 1, 2).any()


def test_forward_matches_naive_sum():
    H0, G, _, a, _, _ = _inputs(0, 3, seed=5)
    H = H0 + G
    m = H.shape[1]
    want = np.array([
        sum(a[r] * max(H[i, r], 0.0) ** 3 / 6.0 for r in range(m)) / math.sqrt(m)
        for i in range(H.shape[0])
    ])
    np.testing.assert_allclose(NP["forward"](np.ascontiguousarray(H), a, 0, 3),
                               want, rtol=1e-12)


def test_gap_matches_direct_formula():
    rng = np.random.default_rng(9)
    half = 12
    Hh = np.ascontiguousarray(rng.standard_normal((5, half)))
    GP = np.ascontiguousarray(0.2 * rng.standard_normal((5, half)))
    GM = np.ascontiguousarray(0.2 * rng.standard_normal((5, half)))
    ah = np.ascontiguousarray(rng.choice([-1.0, 1.0], size=half))
    j = 2
    feat = np.maximum(Hh, 0.0) / math.factorial(j)  # sigma'' of relu-cubed-sixth
    want = (feat * (GP ** j - GM ** j)) @ ah / math.sqrt(half)
    np.testing.assert_allclose(NP["gap"](Hh, GP, GM, ah, j, 0, 3), want, rtol=1e-12)
    if HAS_NB:
        np.testing.assert_allclose(NB["gap"](Hh, GP, GM, ah, j, 0, 3), want, rtol=1e-12)


def test_env_flag_selects_numpy(monkeypatch):
    import importlib
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c",
         "from quadnet import backend; print(backend.ACTIVE)"],
        env={"QUADNET_NO_NUMBA": "1", "PATH": "/usr/bin:/bin"},
        capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
