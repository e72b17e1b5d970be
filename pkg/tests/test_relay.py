import numpy as np
import pytest

from fdrelay.canceller import RLSCanceller, make_tdc, rls_init, stacked_regressors
from fdrelay.channel import FirMimoChannel, filter_sequence, zero_channel
from fdrelay.errors import ConfigurationError
from fdrelay.ofdm import ImpairmentModel
from fdrelay.relay import (
    LoopHistories,
    RelayScenario,
    detect_at_relay,
    generate_ofdm_stream,
    generate_relay_transmit,
    loop_tick,
    simulate_relay_input,
)

from conftest import crandn


def scenario(rng, delta=0.0, noise=0.0, li_var=1.0):
    return RelayScenario(
        h_sr=FirMimoChannel(crandn(rng, 2, 3, 2)),
        h_li=FirMimoChannel(crandn(rng, 2, 3, 3, variance=li_var)),
        impairment=ImpairmentModel(delta),
        noise_variance=noise,
    )


def test_stream_power_and_layout(rng):
    frame = generate_ofdm_stream(rng, 2, 64, 4, 10, total_power=1.0)
    assert frame.bits.shape == (10, 2, 256)
    assert frame.time_samples.shape == (680, 2)
    assert frame.stream_power == 0.5
    assert np.mean(np.abs(frame.time_samples) ** 2) == pytest.approx(0.5, rel=0.05)
    relay = generate_relay_transmit(rng, 3, 64, 4, 10)
    # unit total transmit power across the relay antennas
    assert np.sum(np.mean(np.abs(relay.time_samples) ** 2, axis=0)) == pytest.approx(1.0, rel=0.05)
    # first symbol's cyclic prefix repeats the body tail
    sym = frame.time_samples[:68]
    np.testing.assert_array_equal(sym[:4], sym[-4:])


def test_scenario_validation(rng):
    with pytest.raises(ConfigurationError):
        RelayScenario(h_sr=zero_channel(3, 2, 1), h_li=zero_channel(2, 3, 1))
    with pytest.raises(ConfigurationError):
        RelayScenario(h_sr=zero_channel(3, 2, 1), h_li=zero_channel(3, 3, 1),
                      h_li_estimate=zero_channel(3, 3, 2))
    with pytest.raises(ConfigurationError):
        RelayScenario(h_sr=zero_channel(3, 2, 1), h_li=zero_channel(3, 3, 1), noise_variance=-1)
    s = scenario(rng)
    assert (s.m_r, s.n_s, s.m_t) == (3, 2, 3)


def test_sample_loop_matches_block_simulation_without_randomness(rng):
    sc = scenario(rng)
    x = crandn(rng, 40, 2)
    t = crandn(rng, 40, 3)
    hist = LoopHistories(sc)
    samples = [loop_tick(sc, x[n], t[n], hist, None, rng) for n in range(40)]
    block = simulate_relay_input(sc, x, t, rng, rng)
    np.testing.assert_allclose(np.array([s.q for s in samples]), block.q, atol=1e-12)
    np.testing.assert_allclose(np.array([s.e for s in samples]), block.q, atol=1e-12)
    np.testing.assert_allclose(block.source, filter_sequence(sc.h_sr, x))


def test_sample_loop_with_static_canceller(rng):
    sc = scenario(rng)
    t = crandn(rng, 30, 3)
    x = np.zeros((30, 2))
    hist = LoopHistories(sc)
    tdc = make_tdc(sc.h_li)
    out = [loop_tick(sc, x[n], t[n], hist, tdc, rng) for n in range(30)]
    # a perfect estimate and no impairment cancel the loop exactly
    np.testing.assert_allclose(np.array([s.residual_interference for s in out]), 0, atol=1e-12)
    np.testing.assert_allclose(np.array([s.f for s in out]), filter_sequence(sc.h_li, t), atol=1e-12)


def test_sample_loop_rls_matches_estimator(rng):
    sc = scenario(rng)
    x = crandn(rng, 200, 2)
    t = crandn(rng, 200, 3)
    state = rls_init(3, 3, 1)
    hist = LoopHistories(sc, canceller_order=1)
    e_loop = np.array([loop_tick(sc, x[n], t[n], hist, state, rng).e for n in range(200)])
    q = simulate_relay_input(sc, x, t, rng, rng).q
    est = RLSCanceller(order=1)
    e_block = est.filter(t, q)
    np.testing.assert_allclose(e_loop, e_block, atol=1e-10)
    np.testing.assert_allclose(state.a_star, est.coef_, atol=1e-10)


def test_impairment_and_noise_powers(rng):
    sc = scenario(rng, delta=1e-2, noise=0.05)
    t = generate_relay_transmit(rng, 3, 256, 1, 40).time_samples
    x = np.zeros((t.shape[0], 2))
    sig = simulate_relay_input(sc, x, t, rng, rng)
    assert np.mean(np.abs(sig.radiated - t) ** 2) == pytest.approx(1e-2 / 1, rel=0.05)
    assert np.mean(np.abs(sig.noise) ** 2) == pytest.approx(0.05, rel=0.05)
    with pytest.raises(ConfigurationError):
        simulate_relay_input(sc, x[:-1], t, rng, rng)


def test_noiseless_detection_is_error_free(rng):
    sc = scenario(rng)
    frame = generate_ofdm_stream(rng, 2, 128, 1, 3)
    received = filter_sequence(sc.h_sr, frame.time_samples)
    bits, failed = detect_at_relay(received, sc.h_sr, 128, 1, frame.stream_power)
    assert failed == 0
    np.testing.assert_array_equal(bits, frame.bits)


def test_detection_input_checks(rng):
    sc = scenario(rng)
    with pytest.raises(ConfigurationError):
        detect_at_relay(np.zeros((100, 3)), sc.h_sr, 64, 1)
    with pytest.raises(ConfigurationError):
        detect_at_relay(np.zeros((65, 3)), sc.h_sr, 64, 0)


def test_rls_cancels_interference_below_noise(rng):
    # with a moderate loop the a-priori residual settles near the impairment level
    sc = scenario(rng, delta=1e-5, noise=10 ** -1.5)
    n = 6000
    x = generate_ofdm_stream(rng, 2, 256, 1, n // 257 + 1).time_samples[:n]
    t = generate_relay_transmit(rng, 3, 256, 1, n // 257 + 1).time_samples[:n]
    sig = simulate_relay_input(sc, x, t, rng, rng)
    e = RLSCanceller().filter(t, sig.q)
    residual = e - sig.source - sig.noise
    assert np.mean(np.abs(residual[-1000:]) ** 2) < 0.1 * sc.noise_variance
    # the regressors of the loop use only the known signal
    assert stacked_regressors(t, 1).shape == (n, 6)
