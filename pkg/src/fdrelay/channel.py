"""Frequency-selective MIMO channels as tapped matrix filters.

A channel ``H(z) = sum_k H[k] z^-k`` is stored as a ``(L+1, rows, cols)``
complex array. Variances always refer to ``E|h|^2`` of one complex entry.
Samples before the start of a stream are zero (cold start).
"""
from dataclasses import dataclass

import numpy as np

from ._validation import check_nonnegative, check_positive_int, check_rng
from .errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class FirMimoChannel:
    """Tapped MIMO filter with taps ``H[0..order]``, each ``rows x cols``."""

    taps: np.ndarray

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.complex128)
        if taps.ndim == 2:
            taps = taps[None]
        if taps.ndim != 3 or taps.shape[0] == 0:
            raise ConfigurationError(
                f"taps must be a non-empty stack of matrices, got shape {taps.shape}"
            )
        if taps.shape[1] == 0 or taps.shape[2] == 0:
            raise ConfigurationError(f"tap matrices must be non-empty, got shape {taps.shape}")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def order(self):
        return self.taps.shape[0] - 1

    @property
    def rows(self):
        return self.taps.shape[1]

    @property
    def cols(self):
        return self.taps.shape[2]

    @property
    def shape(self):
        return self.taps.shape

    def frequency_response(self, n_sub):
        """Per-subcarrier response ``sum_k H[k] exp(-j 2 pi m k / n_sub)``.

        Returns an array of shape ``(n_sub, rows, cols)``.
        """
        m = np.arange(n_sub)[:, None]
        k = np.arange(self.order + 1)[None, :]
        phases = np.exp(-2j * np.pi * m * k / n_sub)
        return np.einsum("mk,krc->mrc", phases, self.taps)

    def __eq__(self, other):
        if not isinstance(other, FirMimoChannel):
            return NotImplemented
        return self.taps.shape == other.taps.shape and np.array_equal(self.taps, other.taps)

    __hash__ = None


def zero_channel(rows, cols, order):
    return FirMimoChannel(np.zeros((order + 1, rows, cols), dtype=np.complex128))


class SignalHistory:
    """Fixed-capacity buffer of vector samples, most recent first.

    ``history[k]`` is ``x(n-k)``; reads past the filled part are zero.
    """

    def __init__(self, dim, capacity):
        self.dim = check_positive_int(dim, "dim")
        self.capacity = check_positive_int(capacity, "capacity")
        self._buf = np.zeros((self.capacity, self.dim), dtype=np.complex128)
        self._head = -1
        self._count = 0

    def push(self, sample):
        sample = np.asarray(sample, dtype=np.complex128).reshape(-1)
        if sample.shape[0] != self.dim:
            raise ConfigurationError(
                f"sample has length {sample.shape[0]}, history expects {self.dim}"
            )
        self._head = (self._head + 1) % self.capacity
        self._buf[self._head] = sample
        self._count = min(self._count + 1, self.capacity)

    def __len__(self):
        return self._count

    def __getitem__(self, k):
        if k < 0:
            raise IndexError("delay must be non-negative")
        if k >= self._count:
            return np.zeros(self.dim, dtype=np.complex128)
        return self._buf[(self._head - k) % self.capacity].copy()

    def window(self, length):
        """Stack ``[x(n), x(n-1), ..., x(n-length+1)]`` into ``(length, dim)``."""
        return np.stack([self[k] for k in range(length)])

    def stacked(self, length):
        """Tap-major vectorisation of :meth:`window`."""
        return self.window(length).reshape(-1)


def apply_fir(channel, history):
    """Output of ``channel`` at the newest sample held in ``history``."""
    if history.dim != channel.cols:
        raise ConfigurationError(
            f"channel expects input dimension {channel.cols}, history has {history.dim}"
        )
    out = np.zeros(channel.rows, dtype=np.complex128)
    for k in range(min(channel.order + 1, len(history))):
        out += channel.taps[k] @ history[k]
    return out


def filter_sequence(channel, x, history=None):
    """Filter a whole ``(n, cols)`` sequence; returns ``(n, rows)``.

    Vectorised counterpart of repeated :func:`apply_fir` calls. ``history``
    holds the samples preceding ``x`` (oldest first, at least ``order`` rows);
    it defaults to zeros.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2 or x.shape[1] != channel.cols:
        raise ConfigurationError(
            f"input must have shape (n, {channel.cols}), got {x.shape}"
        )
    n, order = x.shape[0], channel.order
    if history is None:
        padded = np.concatenate([np.zeros((order, channel.cols), dtype=np.complex128), x])
    else:
        history = np.asarray(history, dtype=np.complex128)
        if history.shape[0] < order or history.shape[1:] != (channel.cols,):
            raise ConfigurationError(f"history must hold {order} samples of size {channel.cols}")
        padded = np.concatenate([history[history.shape[0] - order:], x])
    y = x @ channel.taps[0].T
    for k in range(1, order + 1):
        y += padded[order - k:order - k + n] @ channel.taps[k].T
    return y


def complex_normal(rng, shape, variance):
    """Circularly symmetric complex Gaussian draws with ``E|z|^2 = variance``."""
    scale = np.sqrt(variance / 2.0)
    real = rng.standard_normal(shape)
    imag = rng.standard_normal(shape)
    return scale * (real + 1j * imag)


def draw_rayleigh_channel(rows, cols, order, tap_variance, rng):
    """Random channel with i.i.d. ``CN(0, tap_variance)`` tap entries."""
    rows = check_positive_int(rows, "rows")
    cols = check_positive_int(cols, "cols")
    order = check_positive_int(order, "order", minimum=0)
    tap_variance = check_nonnegative(tap_variance, "tap_variance")
    rng = check_rng(rng)
    return FirMimoChannel(complex_normal(rng, (order + 1, rows, cols), tap_variance))


def perturb_channel(true_channel, error_variance, rng):
    """Imperfect estimate ``H~ = H - E`` with ``E`` entries ``CN(0, error_variance)``.

    The error is drawn once and held fixed for the realization.
    """
    error_variance = check_nonnegative(error_variance, "error_variance")
    rng = check_rng(rng)
    error = complex_normal(rng, true_channel.shape, error_variance)
    return FirMimoChannel(true_channel.taps - error)


def awgn(dim, variance, rng, n_samples=None):
    """White ``CN(0, variance)`` noise; one vector or ``(n_samples, dim)``."""
    dim = check_positive_int(dim, "dim")
    variance = check_nonnegative(variance, "variance")
    rng = check_rng(rng)
    shape = (dim,) if n_samples is None else (n_samples, dim)
    return complex_normal(rng, shape, variance)
