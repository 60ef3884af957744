"""Smoke tests for the Python bindings against numpy references."""

import numpy as np
import pytest

import rana


def rng(seed=0):
    return np.random.default_rng(seed)


def test_matmul_matches_numpy():
    r = rng(1)
    a = r.standard_normal((5, 4))
    b = r.standard_normal((4, 3))
    got = np.asarray(rana.matmul(a, b))
    np.testing.assert_allclose(got, a @ b, rtol=1e-12, atol=1e-12)


def test_matmul_shape_mismatch_raises():
    with pytest.raises(ValueError):
        rana.matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_thin_svd_reconstructs():
    r = rng(2)
    m = r.standard_normal((6, 4))
    u, s, vt = rana.thin_svd(m)
    u, s, vt = np.asarray(u), np.asarray(s), np.asarray(vt)
    np.testing.assert_allclose(u @ np.diag(s) @ vt, m, atol=1e-10)
    np.testing.assert_allclose(u.T @ u, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(s, np.linalg.svd(m, compute_uv=False), atol=1e-10)


def test_quantile_is_lower_order_statistic():
    data = [4.0, 3.0, 2.0, 1.0]
    assert rana.quantile(data, 0.5) == 2.0
    assert rana.quantile(data, 1.0) == 4.0
    with pytest.raises(ValueError):
        rana.quantile([], 0.5)


def test_decompose_minimizes_calibrated_error():
    r = rng(3)
    w = r.standard_normal((8, 6))
    x = r.standard_normal((6, 40)) * (0.6 ** np.arange(6))[:, None]
    a, b, s = rana.decompose(w, x, 3)
    a, b = np.asarray(a), np.asarray(b)
    assert a.shape == (8, 3) and b.shape == (3, 6)
    # residual equals the discarded spectrum of W X
    resid = np.linalg.norm(w @ x - a @ b @ x) ** 2
    full_s = np.linalg.svd(w @ x, compute_uv=False)
    np.testing.assert_allclose(resid, np.sum(full_s[3:] ** 2), rtol=1e-8)


def test_contributions_and_masker_threshold():
    r = rng(4)
    w = r.standard_normal((8, 6))
    x = r.standard_normal((6, 50))
    a, b, s = rana.decompose(w, x, 0)
    c = np.asarray(rana.rank_contributions(b, x))
    np.testing.assert_allclose(c, (np.asarray(b) @ x) ** 2, rtol=1e-10)
    t, mean_active = rana.calibrate_b_masker_threshold(c, 3.0)
    assert abs(mean_active - 3.0) <= 0.06  # within the 2% calibration band
    assert np.mean(np.sum(c >= t, axis=0)) == pytest.approx(mean_active)


def test_oracle_topk():
    mask = rana.oracle_topk([0.1, -5.0, 2.0, 0.0], 2)
    assert list(mask) == [False, True, True, False]


def test_masked_gemv_matches_numpy():
    r = rng(5)
    m = r.standard_normal((16, 12))
    v = r.standard_normal(12)
    mask = r.random(12) < 0.4
    got = np.asarray(rana.masked_gemv(m, mask, v))
    np.testing.assert_allclose(got, m @ (v * mask), atol=1e-12)


def test_forward_rank_adapted():
    r = rng(6)
    w = r.standard_normal((8, 6))
    x = r.standard_normal((6, 40))
    a, b, s = rana.decompose(w, x, 0)
    v = r.standard_normal(6)
    # threshold zero keeps every rank: the adapter is exact at full rank
    y = np.asarray(rana.forward_rank_adapted(a, b, 0.0, v))
    np.testing.assert_allclose(y, w @ v, atol=1e-10)


def test_line_search_layer_budget():
    r = rng(7)
    w = r.standard_normal((16, 8))
    x = r.standard_normal((8, 200)) * (0.7 ** np.arange(8))[:, None]
    dense = rana.dense_linear_flops(16, 8)
    alloc = rana.line_search_layer(w, x, 0.5 * dense)
    assert 0.99 * 0.5 * dense <= alloc["flops"] <= 1.01 * 0.5 * dense
    assert alloc["kept_ranks"] >= 1
    assert alloc["calib_error"] >= 0.0


def test_flop_model_values():
    assert rana.dense_linear_flops(4, 3) == 24.0
    # D=10, o=10, i=10, E=5: 2*10*10 + 2*10 + 2*10*5 = 320
    assert rana.rank_adapted_flops(10, 10, 10, 5.0) == 320.0
