"""Sign diagonals and the matched-moment scale pairs."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadnet.model import flin_batch, fquad_batch, init_symmetric
from quadnet.randomize import (
    MomentPair,
    apply_signs,
    moment_pair,
    sample_pair_scales,
    sample_signs,
    verify_moments,
)


def test_sample_signs_shape_and_values(rng):
    sig = sample_signs(256, rng)
    assert sig.s.shape == (256,)
    assert set(np.unique(sig.s)) <= {-1.0, 1.0}


def test_apply_signs_is_an_involution(rng):
    W = rng.standard_normal((4, 32))
    sig = sample_signs(32, rng)
    np.testing.assert_array_equal(apply_signs(apply_signs(W, sig), sig), W)


def test_quadratic_term_is_sign_invariant(small_net, rng):
    W = 0.2 * rng.standard_normal((small_net.d, small_net.m))
    X = rng.standard_normal((9, small_net.d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    base = fquad_batch(small_net, W, X)
    for _ in range(5):
        sig = sample_signs(small_net.m, rng)
        np.testing.assert_allclose(
            fquad_batch(small_net, apply_signs(W, sig), X), base, rtol=1e-12)


def test_linear_term_is_killed_in_expectation(small_net, rng):
    # exact expectation: sum over sigma_r = +-1 factorizes, E sigma_r = 0,
    # and flin is linear in each column, so averaging one flip per column
    # suffices
    W = 0.3 * rng.standard_normal((small_net.d, small_net.m))
    X = rng.standard_normal((6, small_net.d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    plus = flin_batch(small_net, W, X)
    minus = flin_batch(small_net, -W, X)
    np.testing.assert_allclose(plus + minus, 0.0, atol=1e-14)


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_moment_pairs_match_below_and_gap_at_k(k):
    pair = moment_pair(k)
    rep = verify_moments(pair, tol=1e-12 if k <= 3 else 1e-10)
    assert rep["ok"], rep
    for j in range(1, k):
        gap = pair.moment("+", j) - pair.moment("-", j)
        assert abs(gap) <= (1e-12 if k <= 3 else 1e-10)
    assert pair.moment("+", k) - pair.moment("-", k) == pytest.approx(
        1.0, abs=1e-10)


def test_canonical_k2_pair_is_coin_vs_point_mass():
    pair = moment_pair(2)
    assert sorted(pair.values_plus) == [-1.0, 1.0]
    np.testing.assert_allclose(pair.probs_plus, [0.5, 0.5])
    assert list(pair.values_minus) == [0.0]


def test_k3_mirror_pair_support():
    # plus side supported on {alpha, -1} with alpha = (1 + sqrt 3)/2; the
    # minus side mirrors it
    pair = moment_pair(3)
    alpha = (1.0 + np.sqrt(3.0)) / 2.0
    assert max(pair.values_plus) == pytest.approx(alpha, rel=1e-12)
    assert min(pair.values_plus) == pytest.approx(-1.0, rel=1e-12)
    np.testing.assert_allclose(sorted(pair.values_minus),
                               sorted(-np.asarray(pair.values_plus)), rtol=1e-12)


def test_moment_pair_json_roundtrip():
    pair = moment_pair(4)
    back = MomentPair.from_json(pair.to_json())
    assert back.k == 4
    np.testing.assert_allclose(back.values_plus, pair.values_plus)
    np.testing.assert_allclose(back.probs_minus, pair.probs_minus)
    assert verify_moments(back)["ok"]


def test_moment_pair_rejects_k1():
    with pytest.raises(ValueError):
        moment_pair(1)


@given(k=st.integers(2, 6), seed=st.integers(0, 2 ** 16))
@settings(max_examples=20, deadline=None)
def test_sampled_scales_draw_from_the_pair_supports(k, seed):
    pair = moment_pair(k)
    rng = np.random.default_rng(seed)
    n = 100_000
    zp, zm = sample_pair_scales(pair, n, rng)
    assert zp.shape == zm.shape == (n,)
    for z, values, probs in ((zp, pair.values_plus, pair.probs_plus),
                             (zm, pair.values_minus, pair.probs_minus)):
        for v, p in zip(values, probs):
            freq = np.isclose(z, v, rtol=1e-12, atol=1e-12).mean()
            assert freq == pytest.approx(p, abs=0.01)
        assert np.isin(np.round(z, 10), np.round(values, 10)).all()
