"""Hot kernels: counter-based resampling and chop-period normalization.

Both kernels exist twice (compiled and pure numpy); the tests pin the
counter-mix against the published reference vector, check the two backends
against each other, and check the normalization algebra against hand-built
records with known per-period statistics.
"""

import numpy as np
import pytest

from cvbell import kernels
from cvbell.errors import EmptyCalibration
from cvbell.kernels import (
    HAS_NUMBA,
    _bootstrap_means_numpy,
    _mix64_array,
    _mix64_int,
    _normalize_numpy,
    backend_name,
    bootstrap_means,
    normalize_by_period,
    stream_key,
)

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15

# First three outputs of the standard splitmix64 stream from seed 0;
# published reference values.
SPLITMIX_SEED0 = (0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F)


def splitmix64_reference(seed: int, count: int) -> list[int]:
    """Literal transcription of the published splitmix64 algorithm."""
    out, state = [], seed & MASK
    for _ in range(count):
        state = (state + GAMMA) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_backend_name_reports_a_known_backend():
    assert backend_name() in ("numba", "numpy")


def test_mix64_matches_published_splitmix_vector():
    assert tuple(splitmix64_reference(0, 3)) == SPLITMIX_SEED0
    for i, expected in enumerate(SPLITMIX_SEED0):
        counter = ((i + 1) * GAMMA) & MASK
        assert _mix64_int(counter) == expected


def test_mix64_array_agrees_with_scalar_mix():
    counters = np.array(
        [1, 2**31, 2**63, MASK, 0x123456789ABCDEF0], dtype=np.uint64
    )
    mixed = _mix64_array(counters.copy())
    for c, m in zip(counters, mixed):
        assert int(m) == _mix64_int(int(c))


def test_stream_key_is_deterministic_and_collision_free_across_streams():
    keys = {stream_key(12345, s) for s in range(64)}
    assert len(keys) == 64
    assert stream_key(12345, 7) == stream_key(12345, 7)
    assert stream_key(12345, 7) != stream_key(12346, 7)


def test_bootstrap_means_reproduces_pure_python_resampling():
    rng = np.random.default_rng(3)
    products = rng.normal(size=(50, 3))
    key = stream_key(99, 0)
    out = bootstrap_means(products, key, n_boot=4)

    n = products.shape[0]
    for rep in range(4):
        counters = [(key + ((rep * n + i) * GAMMA)) & MASK for i in range(n)]
        idx = [splitmix64_reference(c - GAMMA, 1)[0] % n for c in counters]
        expected = products[idx].mean(axis=0)
        np.testing.assert_allclose(out[rep], expected, rtol=1e-13)


def test_bootstrap_means_deterministic_and_key_sensitive():
    rng = np.random.default_rng(5)
    products = rng.normal(size=(200, 2))
    a = bootstrap_means(products, stream_key(1, 0), 8)
    b = bootstrap_means(products, stream_key(1, 0), 8)
    c = bootstrap_means(products, stream_key(1, 1), 8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_bootstrap_means_center_on_the_sample_mean():
    rng = np.random.default_rng(11)
    products = rng.normal(loc=2.0, size=(5000, 1))
    out = bootstrap_means(products, stream_key(2, 0), 400)
    # Replicate means scatter ~ sigma/sqrt(n) = 0.014; averaging 400 of
    # them pins the center well inside 3 combined standard errors.
    assert out.mean() == pytest.approx(products.mean(), abs=0.005)


def test_bootstrap_means_input_validation():
    with pytest.raises(ValueError):
        bootstrap_means(np.empty((0, 2)), 1, 4)
    with pytest.raises(ValueError):
        bootstrap_means(np.ones((4, 2)), 1, 0)


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
def test_bootstrap_backends_agree_exactly_on_resamples():
    if not kernels.USE_NUMBA:
        pytest.skip("compiled backend disabled via CVBELL_NUMBA=0")
    rng = np.random.default_rng(17)
    products = rng.normal(size=(1000, 12))
    key = stream_key(7, 3)
    compiled = kernels._bootstrap_means_numba(
        products, np.uint64(key), np.int64(16)
    )
    plain = _bootstrap_means_numpy(products, key, 16)
    np.testing.assert_allclose(compiled, plain, rtol=1e-12)


def two_point_block(center: np.ndarray, half_spread: np.ndarray) -> np.ndarray:
    """Rows alternating center-h, center+h: exact mean and variance 2h^2... /(n-1)."""
    return np.vstack([center - half_spread, center + half_spread])


def test_normalize_by_period_divides_by_exact_period_sigma():
    # Two chop periods of two shot rows each; var(ddof=1) of {c-d, c+d} is
    # 2 d^2, so sigma per period is d * sqrt(2) with no dark, and
    # sqrt(2 d^2 - 2 f^2) with a dark block of half-spread f.
    d1, d2, f = 0.5, 0.25, 0.1
    shot = np.vstack(
        [
            two_point_block(np.zeros(4), np.full(4, d1)),
            two_point_block(np.zeros(4), np.full(4, d2)),
        ]
    )
    dark = np.vstack(
        [
            two_point_block(np.zeros(4), np.full(4, f)),
            two_point_block(np.zeros(4), np.full(4, f)),
        ]
    )
    signal = np.ones((4, 4))

    out, sigma = normalize_by_period(signal, shot, np.empty((0, 4)), 2)
    assert sigma.shape == (2, 4)
    np.testing.assert_allclose(sigma[0], d1 * np.sqrt(2.0), rtol=1e-12)
    np.testing.assert_allclose(sigma[1], d2 * np.sqrt(2.0), rtol=1e-12)
    np.testing.assert_allclose(out[:2], 1.0 / (d1 * np.sqrt(2.0)), rtol=1e-12)
    np.testing.assert_allclose(out[2:], 1.0 / (d2 * np.sqrt(2.0)), rtol=1e-12)

    out, sigma = normalize_by_period(signal, shot, dark, 2)
    np.testing.assert_allclose(
        sigma[0], np.sqrt(2.0 * d1**2 - 2.0 * f**2), rtol=1e-12
    )
    np.testing.assert_allclose(
        sigma[1], np.sqrt(2.0 * d2**2 - 2.0 * f**2), rtol=1e-12
    )


def test_normalize_by_period_folds_trailing_rows_into_last_period():
    rng = np.random.default_rng(23)
    shot = rng.normal(size=(10, 4))
    signal = rng.normal(size=(10, 4))
    out, sigma = normalize_by_period(signal, shot, np.empty((0, 4)), 4)
    assert sigma.shape == (2, 4)  # 10 // 4 = 2 periods, 2 rows folded
    np.testing.assert_allclose(
        sigma[1], shot[4:].std(axis=0, ddof=1), rtol=1e-12
    )
    np.testing.assert_allclose(out[4:], signal[4:] / sigma[1], rtol=1e-12)


def test_normalize_common_gain_cancels_exactly():
    rng = np.random.default_rng(29)
    shot = rng.normal(size=(8, 4))
    dark = 0.1 * rng.normal(size=(8, 4))
    signal = rng.normal(size=(8, 4))
    base, _ = normalize_by_period(signal, shot, dark, 4)
    gain = np.repeat([1.3, 0.7], 4)[:, None]
    scaled, _ = normalize_by_period(signal * gain, shot * gain, dark * gain, 4)
    np.testing.assert_allclose(scaled, base, rtol=1e-12)


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
def test_normalize_backends_agree_exactly():
    if not kernels.USE_NUMBA:
        pytest.skip("compiled backend disabled via CVBELL_NUMBA=0")
    rng = np.random.default_rng(31)
    shot = rng.normal(size=(10000, 4))
    dark = 0.13 * rng.normal(size=(10000, 4))
    signal = rng.normal(size=(10000, 4))
    out_c, sig_c = kernels._normalize_numba(signal, shot, dark, np.int64(1024))
    out_p, sig_p = _normalize_numpy(signal, shot, dark, 1024)
    assert sig_c.shape == sig_p.shape == (9, 4)
    np.testing.assert_allclose(sig_c, sig_p, rtol=1e-12)
    np.testing.assert_allclose(out_c, out_p, rtol=1e-12)


def test_normalize_rejects_empty_or_degenerate_calibration():
    signal = np.ones((4, 4))
    with pytest.raises(EmptyCalibration):
        normalize_by_period(signal, np.empty((0, 4)), np.empty((0, 4)), 2)
    with pytest.raises(EmptyCalibration):
        normalize_by_period(signal, np.ones((1, 4)), np.empty((0, 4)), 2)
    with pytest.raises(ValueError):
        normalize_by_period(signal, np.ones((4, 4)), np.ones((2, 4)), 2)
    with pytest.raises(ValueError):
        normalize_by_period(signal, np.random.default_rng(1).normal(size=(4, 4)),
                            np.empty((0, 4)), 1)
    # Constant shot rows have zero variance: degenerate sigma.
    with pytest.raises(ValueError):
        normalize_by_period(signal, np.ones((4, 4)), np.empty((0, 4)), 2)
    # Dark variance at the shot level leaves nothing to normalize by.
    rng = np.random.default_rng(37)
    noise = rng.normal(size=(6, 4))
    with pytest.raises(ValueError):
        normalize_by_period(signal, noise, noise, 3)
