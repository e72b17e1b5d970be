"""SINR, BER, convergence time and convergence-time summaries."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, SummaryError


def db(x):
    return 10.0 * np.log10(x)


def from_db(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def sinr(signal_power, residual_interference_power, noise_power):
    """``10 log10(P_x / (P_i + P_n))``."""
    if noise_power <= 0:
        raise ConfigurationError("noise power must be positive")
    if residual_interference_power < 0 or signal_power < 0:
        raise ConfigurationError("powers must be non-negative")
    return float(db(signal_power / (residual_interference_power + noise_power)))


def ber(tx_bits, rx_bits):
    """Fraction of differing bits."""
    tx = np.asarray(tx_bits).reshape(-1)
    rx = np.asarray(rx_bits).reshape(-1)
    if tx.shape != rx.shape:
        raise ConfigurationError(f"bit streams differ in length: {tx.size} vs {rx.size}")
    if tx.size == 0:
        raise ConfigurationError("empty bit streams")
    return float(np.count_nonzero(tx != rx) / tx.size)


def bit_errors(tx_bits, rx_bits):
    return int(np.count_nonzero(np.asarray(tx_bits) != np.asarray(rx_bits)))


def convergence_time(trace_db, threshold_db=-30.0):
    """1-based index of the first sample with ``trace <= threshold``, else None."""
    hits = np.flatnonzero(np.asarray(trace_db) <= threshold_db)
    return int(hits[0]) + 1 if hits.size else None


@dataclass(frozen=True)
class ConvergenceSummary:
    count: int
    mean: float
    median: float
    std: float
    lognormal_mu: float
    lognormal_sigma: float
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def lognormal_mean(self):
        """Mean of the moment-matched log-normal."""
        return float(np.exp(self.lognormal_mu + 0.5 * self.lognormal_sigma ** 2))


def summarize_convergence(samples, bin_width=100):
    """Moments, log-normal fit (moments of the natural log) and a fixed-width histogram."""
    x = np.asarray([s for s in samples if s is not None], dtype=float)
    if x.size == 0:
        raise SummaryError("no converged realizations to summarize")
    if np.any(x <= 0):
        raise SummaryError("convergence times must be positive")
    logs = np.log(x)
    lo = bin_width * np.floor(x.min() / bin_width)
    hi = bin_width * (np.floor(x.max() / bin_width) + 1)
    edges = np.arange(lo, hi + bin_width / 2, bin_width)
    counts, _ = np.histogram(x, bins=edges)
    return ConvergenceSummary(
        count=int(x.size),
        mean=float(x.mean()),
        median=float(np.median(x)),
        std=float(x.std()),
        lognormal_mu=float(logs.mean()),
        lognormal_sigma=float(logs.std()),
        bin_edges=edges,
        counts=counts,
    )


@dataclass
class MetricsRecord:
    """One realization's results at one (scheme, interference level) point.

    ``tallies`` keeps per-OFDM-symbol ``(P_x, P_i, P_n, bit errors, bits)``
    so sweeps can re-evaluate every realization over a common window;
    ``window_start`` is the first symbol this realization would measure.
    """

    scheme: str
    sigma2_li_db: float
    realization: int
    seed: int
    sinr_db: Optional[float] = None
    ber: Optional[float] = None
    convergence_sample: Optional[int] = None
    em_final_db: Optional[float] = None
    bits: int = 0
    bit_errors: int = 0
    samples: int = 0
    signal_power: float = 0.0
    interference_power: float = 0.0
    noise_power: float = 0.0
    failed_subcarriers: int = 0
    window_start: int = 0
    tallies: Optional[np.ndarray] = field(default=None, repr=False)
