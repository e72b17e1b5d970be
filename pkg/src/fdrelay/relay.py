"""Full-duplex relay input loop and detection of the source data at the relay.

The relay input is ``q(n) = H_SR(z) x(n) + H_LI(z) t(n) + n_R(n)`` with the
impaired transmit signal ``t = t~ + E_t``. The canceller only ever sees the
known baseband signal ``t~`` and ``q``.

The relay transmit stream is an independent OFDM process. Its content does
not influence anything measured at the relay, and independence realises the
assumption that a long enough processing delay decorrelates ``t~`` from
``x``.
"""
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_nonnegative, check_positive_int, check_rng
from .canceller import CancellerFilter, RlsState, rls_step
from .channel import FirMimoChannel, SignalHistory, apply_fir, complex_normal, filter_sequence
from .errors import ConfigurationError
from .ofdm import ImpairmentModel, ofdm_demodulate, ofdm_modulate, qam16_demap, qam16_map, zf_detect


@dataclass(frozen=True)
class OfdmFrame:
    """A run of OFDM symbols on several parallel streams.

    ``bits`` is ``(n_symbols, n_streams, 4 * n_sub)``, ``freq_grid`` the
    power-scaled symbols ``(n_symbols, n_streams, n_sub)`` and
    ``time_samples`` the serialised stream ``(n_symbols * (n_cp + n_sub), n_streams)``.
    """

    bits: np.ndarray
    freq_grid: np.ndarray
    time_samples: np.ndarray
    n_sub: int
    n_cp: int
    stream_power: float

    @property
    def n_symbols(self):
        return self.freq_grid.shape[0]

    @property
    def n_streams(self):
        return self.freq_grid.shape[1]

    @property
    def symbol_length(self):
        return self.n_cp + self.n_sub


def generate_ofdm_stream(rng, n_streams, n_sub, n_cp, n_symbols, total_power=1.0):
    """Random 16-QAM OFDM on ``n_streams`` streams sharing ``total_power`` equally."""
    n_streams = check_positive_int(n_streams, "n_streams")
    n_sub = check_positive_int(n_sub, "n_sub")
    n_symbols = check_positive_int(n_symbols, "n_symbols")
    total_power = check_nonnegative(total_power, "total_power")
    rng = check_rng(rng)
    bits = rng.integers(0, 2, size=(n_symbols, n_streams, 4 * n_sub), dtype=np.uint8)
    stream_power = total_power / n_streams
    grid = qam16_map(bits).reshape(n_symbols, n_streams, n_sub) * np.sqrt(stream_power)
    body = ofdm_modulate(grid, n_cp)
    samples = body.transpose(0, 2, 1).reshape(-1, n_streams)
    return OfdmFrame(bits, grid, np.ascontiguousarray(samples), n_sub, n_cp, stream_power)


def generate_relay_transmit(rng, m_t, n_sub, n_cp, n_symbols, total_power=1.0):
    """Known baseband relay signal ``t~``: unit total power over ``m_t`` antennas."""
    return generate_ofdm_stream(rng, m_t, n_sub, n_cp, n_symbols, total_power)


@dataclass(frozen=True)
class RelayScenario:
    """Channels and noise levels seen by one relay realisation."""

    h_sr: FirMimoChannel
    h_li: FirMimoChannel
    h_li_estimate: FirMimoChannel = None
    impairment: ImpairmentModel = field(default_factory=ImpairmentModel)
    noise_variance: float = 0.0
    tx_power: float = 1.0
    processing_delay: int = 1

    def __post_init__(self):
        if self.h_sr.rows != self.h_li.rows:
            raise ConfigurationError(
                f"H_SR has {self.h_sr.rows} outputs but H_LI has {self.h_li.rows}"
            )
        est = self.h_li_estimate
        if est is not None and est.shape != self.h_li.shape:
            raise ConfigurationError(
                f"H_LI estimate has shape {est.shape}, channel has {self.h_li.shape}"
            )
        check_nonnegative(self.noise_variance, "noise_variance")
        check_nonnegative(self.tx_power, "tx_power")
        check_positive_int(self.processing_delay, "processing_delay")

    @property
    def m_r(self):
        return self.h_sr.rows

    @property
    def n_s(self):
        return self.h_sr.cols

    @property
    def m_t(self):
        return self.h_li.cols


@dataclass
class LoopSample:
    """Relay input decomposed into its addends, plus the cancelled output."""

    source: np.ndarray
    interference: np.ndarray
    noise: np.ndarray
    q: np.ndarray
    z: np.ndarray
    e: np.ndarray

    @property
    def f(self):
        return self.interference

    @property
    def residual_interference(self):
        return self.interference + self.z


class LoopHistories:
    """Delay lines for ``x``, the known ``t~`` and the radiated ``t``."""

    def __init__(self, scenario, canceller_order=None):
        order = scenario.h_li.order if canceller_order is None else canceller_order
        self.canceller_order = order
        cap_t = max(scenario.h_li.order, order) + 1
        self.source = SignalHistory(scenario.n_s, scenario.h_sr.order + 1)
        self.known = SignalHistory(scenario.m_t, cap_t)
        self.radiated = SignalHistory(scenario.m_t, cap_t)


def loop_tick(scenario, x_n, t_n, histories, canceller, rng):
    """Advance the relay by one sample.

    Parameters
    ----------
    scenario : RelayScenario
    x_n, t_n : array
        New source sample and new known relay transmit sample ``t~(n)``.
    histories : LoopHistories
    canceller : CancellerFilter, RlsState or None
        A static filter, an adapting RLS state (updated in place from
        ``t~`` and ``q`` only) or ``None`` for no cancellation.
    rng : numpy.random.Generator
        Draws the impairment first, then the receiver noise.
    """
    histories.source.push(x_n)
    histories.known.push(t_n)
    t_radiated = np.asarray(t_n, dtype=np.complex128) + complex_normal(
        rng, (scenario.m_t,), scenario.impairment.delta * scenario.tx_power
    )
    histories.radiated.push(t_radiated)
    source = apply_fir(scenario.h_sr, histories.source)
    interference = apply_fir(scenario.h_li, histories.radiated)
    noise = complex_normal(rng, (scenario.m_r,), scenario.noise_variance)
    q = source + interference + noise
    if canceller is None:
        z = np.zeros(scenario.m_r, dtype=np.complex128)
    elif isinstance(canceller, CancellerFilter):
        z = apply_fir(canceller.channel, histories.known)
    elif isinstance(canceller, RlsState):
        t_bar = histories.known.stacked(histories.canceller_order + 1)
        z = -(canceller.a_star.conj().T @ t_bar)
        rls_step(canceller, t_bar, q)
    else:
        raise ConfigurationError(f"unsupported canceller {type(canceller).__name__}")
    return LoopSample(source, interference, noise, q, z, q + z)


@dataclass
class LinkSignals:
    """Relay input components over a block, each ``(n_samples, M_R)``.

    ``radiated`` is the impaired transmit signal ``t`` that fed the loop-back
    channel; only the simulator sees it.
    """

    source: np.ndarray
    interference: np.ndarray
    noise: np.ndarray
    radiated: np.ndarray

    @property
    def q(self):
        return self.source + self.interference + self.noise


def simulate_relay_input(scenario, x_samples, t_samples, rng_impairment, rng_noise,
                         x_history=None, radiated_history=None):
    """Vectorised relay input over a block of samples.

    ``x_history`` and ``radiated_history`` carry the samples preceding the
    block (oldest first); zeros when omitted.
    """
    x_samples = np.asarray(x_samples, dtype=np.complex128)
    t_samples = np.asarray(t_samples, dtype=np.complex128)
    if x_samples.shape[0] != t_samples.shape[0]:
        raise ConfigurationError("source and relay streams must be sample aligned")
    n = x_samples.shape[0]
    t_radiated = t_samples + complex_normal(
        rng_impairment, t_samples.shape, scenario.impairment.delta * scenario.tx_power
    )
    return LinkSignals(
        source=filter_sequence(scenario.h_sr, x_samples, x_history),
        interference=filter_sequence(scenario.h_li, t_radiated, radiated_history),
        noise=complex_normal(rng_noise, (n, scenario.m_r), scenario.noise_variance),
        radiated=t_radiated,
    )


def detect_at_relay(e_samples, h_sr, n_sub, n_cp, stream_power=1.0):
    """OFDM demodulation, genie-channel zero forcing and hard demapping.

    Returns
    -------
    bits : ndarray of shape (n_symbols, N_S, 4 * n_sub)
    n_failed : int
        Rank-deficient subcarriers (per OFDM symbol, summed).
    """
    e = np.asarray(e_samples, dtype=np.complex128)
    sym_len = n_cp + n_sub
    if e.ndim != 2 or e.shape[0] % sym_len or e.shape[1] != h_sr.rows:
        raise ConfigurationError(
            f"expected a whole number of {sym_len}-sample symbols on {h_sr.rows} antennas, got {e.shape}"
        )
    if h_sr.order > n_cp:
        raise ConfigurationError(f"channel order {h_sr.order} exceeds cyclic prefix {n_cp}")
    n_symbols = e.shape[0] // sym_len
    frames = e.reshape(n_symbols, sym_len, h_sr.rows).transpose(0, 2, 1)
    received = ofdm_demodulate(frames, n_cp).transpose(0, 2, 1)
    estimates, failed = zf_detect(received, h_sr.frequency_response(n_sub))
    estimates = estimates.transpose(0, 2, 1) / np.sqrt(stream_power)
    bits = qam16_demap(estimates).reshape(n_symbols, h_sr.cols, 4 * n_sub)
    return bits, int(failed.sum()) * n_symbols
