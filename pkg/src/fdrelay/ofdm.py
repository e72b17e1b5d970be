"""16-QAM, cyclic-prefix OFDM, zero-forcing detection and transmit impairments."""
from dataclasses import dataclass

import numpy as np

from ._validation import check_nonnegative, check_rng
from .channel import complex_normal
from .errors import ConfigurationError, InputError

QAM16_SCALE = 1.0 / np.sqrt(10.0)
# Gray-coded amplitude per bit pair; the index is 2*b0 + b1.
_PAIR_TO_LEVEL = np.array([-3.0, -1.0, 3.0, 1.0])
# Levels in ascending order and the bit pair each one carries.
LEVELS = np.array([-3.0, -1.0, 1.0, 3.0])
_LEVEL_BITS = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.uint8)

CONSTELLATION = (
    (LEVELS[:, None] + 1j * LEVELS[None, :]).reshape(-1) * QAM16_SCALE
)


def qam16_map(bits):
    """Map bits to unit-energy Gray 16-QAM symbols.

    Each group of four bits ``b0 b1 b2 b3`` selects the in-phase level from
    ``b0 b1`` and the quadrature level from ``b2 b3`` (00 -> -3, 01 -> -1,
    11 -> +1, 10 -> +3), scaled by ``1/sqrt(10)``.

    >>> qam16_map([0, 0, 0, 0]) * np.sqrt(10)
    array([-3.-3.j])
    """
    bits = np.asarray(bits).reshape(-1)
    if bits.size % 4:
        raise InputError(f"bit count must be a multiple of 4, got {bits.size}")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise InputError("bits must be 0 or 1")
    b = bits.astype(np.intp).reshape(-1, 4)
    i_level = _PAIR_TO_LEVEL[2 * b[:, 0] + b[:, 1]]
    q_level = _PAIR_TO_LEVEL[2 * b[:, 2] + b[:, 3]]
    return (i_level + 1j * q_level) * QAM16_SCALE


def _slice_levels(values):
    # Nearest level; exact ties go to the lower level index.
    u = (np.asarray(values, dtype=float) / QAM16_SCALE + 3.0) / 2.0
    return np.clip(np.ceil(u - 0.5), 0, 3).astype(np.intp)


def qam16_demap(symbols):
    """Hard minimum-distance demapping, inverse of :func:`qam16_map`."""
    symbols = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    i_bits = _LEVEL_BITS[_slice_levels(symbols.real)]
    q_bits = _LEVEL_BITS[_slice_levels(symbols.imag)]
    return np.concatenate([i_bits, q_bits], axis=1).reshape(-1)


def ofdm_modulate(freq_grid, n_cp):
    """Unitary IDFT over the last axis and prepend the cyclic prefix.

    ``freq_grid`` has shape ``(..., n_sub)``; the result ``(..., n_cp + n_sub)``.
    """
    grid = np.asarray(freq_grid, dtype=np.complex128)
    if grid.ndim < 1 or grid.shape[-1] < 1:
        raise InputError("frequency grid needs at least one subcarrier")
    if n_cp < 0 or n_cp > grid.shape[-1]:
        raise InputError(f"cyclic prefix length must be in [0, n_sub], got {n_cp}")
    body = np.fft.ifft(grid, axis=-1, norm="ortho")
    if n_cp == 0:
        return body
    return np.concatenate([body[..., -n_cp:], body], axis=-1)


def ofdm_demodulate(time_samples, n_cp, n_sub=None):
    """Drop the cyclic prefix and apply the unitary DFT over the last axis."""
    samples = np.asarray(time_samples, dtype=np.complex128)
    length = samples.shape[-1]
    if n_sub is None:
        n_sub = length - n_cp
    if n_cp < 0 or n_sub < 1 or length != n_cp + n_sub:
        raise InputError(
            f"expected {n_cp} + {n_sub} samples per stream, got {length}"
        )
    return np.fft.fft(samples[..., n_cp:], axis=-1, norm="ortho")


def zf_detect(received, channel_response, rcond=1e-10):
    """Per-subcarrier zero-forcing (left pseudo-inverse) detection.

    Parameters
    ----------
    received : array, shape (..., n_sub, M_R)
        Received frequency-domain vectors; leading axes (e.g. OFDM symbols)
        are broadcast against the channel.
    channel_response : array, shape (n_sub, M_R, N_S)
    rcond : float
        Subcarriers whose smallest/largest singular value ratio falls below
        this are treated as rank deficient.

    Returns
    -------
    estimates : array, shape (..., n_sub, N_S)
        Zero on failed subcarriers.
    failed : bool array, shape (n_sub,)
    """
    r = np.asarray(received, dtype=np.complex128)
    h = np.asarray(channel_response, dtype=np.complex128)
    if h.ndim != 3 or r.shape[-2:] != h.shape[:2]:
        raise ConfigurationError(
            f"received shape {r.shape} does not match channel response {h.shape}"
        )
    n_sub, m_r, n_s = h.shape
    if n_s > m_r:
        raise ConfigurationError(f"zero forcing needs M_R >= N_S, got {m_r} < {n_s}")
    u, s, vh = np.linalg.svd(h, full_matrices=False)
    failed = s[:, -1] <= rcond * s[:, 0]
    s_inv = np.where(failed[:, None], 0.0, 1.0 / np.where(s > 0, s, 1.0))
    pinv = np.einsum("mji,mj,mkj->mik", vh.conj(), s_inv, u.conj())
    estimates = np.einsum("mik,...mk->...mi", pinv, r)
    return estimates, failed


@dataclass(frozen=True)
class ImpairmentModel:
    """Transmit-chain impairment noise with power ``delta`` times the mean transmit power."""

    delta: float = 0.0

    def __post_init__(self):
        check_nonnegative(self.delta, "delta")


def impair(transmit_sample, model, mean_power, rng):
    """Add ``CN(0, delta * mean_power)`` noise to every entry of ``transmit_sample``."""
    mean_power = check_nonnegative(mean_power, "mean_power")
    rng = check_rng(rng)
    t = np.asarray(transmit_sample, dtype=np.complex128)
    return t + complex_normal(rng, t.shape, model.delta * mean_power)
