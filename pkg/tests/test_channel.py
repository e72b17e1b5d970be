import numpy as np
import pytest

from fdrelay.channel import (
    FirMimoChannel,
    SignalHistory,
    apply_fir,
    awgn,
    complex_normal,
    draw_rayleigh_channel,
    filter_sequence,
    perturb_channel,
    zero_channel,
)
from fdrelay.errors import ConfigurationError

from conftest import crandn


def direct_convolution(taps, x):
    # y_r = sum_c conv(h_rc, x_c), truncated to the input length
    n = x.shape[0]
    rows, cols = taps.shape[1:]
    y = np.zeros((n, rows), dtype=complex)
    for r in range(rows):
        for c in range(cols):
            y[:, r] += np.convolve(taps[:, r, c], x[:, c])[:n]
    return y


@pytest.mark.parametrize("order", [0, 1, 3])
def test_filter_sequence_matches_scalar_convolution(rng, order):
    h = FirMimoChannel(crandn(rng, order + 1, 3, 2))
    x = crandn(rng, 50, 2)
    np.testing.assert_allclose(filter_sequence(h, x), direct_convolution(h.taps, x), atol=1e-12)


def test_filter_sequence_history_continues_the_stream(rng):
    h = FirMimoChannel(crandn(rng, 3, 2, 2))
    x = crandn(rng, 40, 2)
    whole = filter_sequence(h, x)
    tail = filter_sequence(h, x[25:], history=x[:25])
    np.testing.assert_allclose(tail, whole[25:], atol=1e-12)


def test_apply_fir_agrees_with_vectorised_filter(rng):
    h = FirMimoChannel(crandn(rng, 2, 3, 3))
    x = crandn(rng, 20, 3)
    hist = SignalHistory(3, 2)
    out = []
    for row in x:
        hist.push(row)
        out.append(apply_fir(h, hist))
    np.testing.assert_allclose(np.array(out), filter_sequence(h, x), atol=1e-12)


def test_signal_history_order_and_cold_start():
    hist = SignalHistory(2, 3)
    np.testing.assert_array_equal(hist[0], [0, 0])
    for k in range(1, 5):
        hist.push([k, -k])
    assert len(hist) == 3
    np.testing.assert_array_equal(hist.window(3)[:, 0], [4, 3, 2])
    np.testing.assert_array_equal(hist[5], [0, 0])
    np.testing.assert_array_equal(hist.stacked(2), [4, -4, 3, -3])
    with pytest.raises(ConfigurationError):
        hist.push([1, 2, 3])


def test_frequency_response_is_dft_of_taps(rng):
    h = FirMimoChannel(crandn(rng, 2, 3, 2))
    n_sub = 16
    padded = np.zeros((n_sub, 3, 2), dtype=complex)
    padded[:2] = h.taps
    np.testing.assert_allclose(h.frequency_response(n_sub), np.fft.fft(padded, axis=0), atol=1e-12)


def test_channel_is_read_only_and_compares_by_value(rng):
    taps = crandn(rng, 2, 2, 2)
    h = FirMimoChannel(taps)
    with pytest.raises(ValueError):
        h.taps[0, 0, 0] = 1
    assert h == FirMimoChannel(taps.copy())
    assert h != zero_channel(2, 2, 1)
    assert (h.order, h.rows, h.cols) == (1, 2, 2)
    with pytest.raises(ConfigurationError):
        FirMimoChannel(np.zeros((2, 0, 3)))
    with pytest.raises(ConfigurationError):
        filter_sequence(h, np.zeros((4, 3)))


def test_complex_normal_moments(rng):
    z = complex_normal(rng, (200_000,), 2.5)
    assert abs(np.mean(np.abs(z) ** 2) - 2.5) < 0.03
    # circular symmetry: E[z^2] ~ 0, equal real/imag power
    assert abs(np.mean(z ** 2)) < 0.03
    assert abs(np.var(z.real) - np.var(z.imag)) < 0.03


def test_rayleigh_channel_tap_variance(rng):
    h = draw_rayleigh_channel(3, 3, 1, 0.1, rng)
    assert h.shape == (2, 3, 3)
    many = np.concatenate([draw_rayleigh_channel(3, 3, 1, 0.1, rng).taps.ravel() for _ in range(4000)])
    assert abs(np.mean(np.abs(many) ** 2) - 0.1) < 0.003


def test_perturbed_estimate_error_variance(rng):
    h = draw_rayleigh_channel(3, 3, 1, 1.0, rng)
    errs = np.concatenate([(h.taps - perturb_channel(h, 0.01, rng).taps).ravel() for _ in range(4000)])
    assert abs(np.mean(np.abs(errs) ** 2) - 0.01) < 3e-4
    assert perturb_channel(h, 0.0, rng) == h


def test_awgn_shapes_and_validation(rng):
    assert awgn(3, 1.0, rng).shape == (3,)
    assert awgn(3, 1.0, rng, n_samples=7).shape == (7, 3)
    with pytest.raises(ConfigurationError):
        awgn(3, -1.0, rng)
