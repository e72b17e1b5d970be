"""Self-interference cancellation filters.

The canceller adds ``z(n) = A(z) t~(n)`` to the relay input ``q(n)``, where
``t~`` is the relay's known baseband transmit signal. Three schemes are
provided: natural isolation (``A = 0``), time-domain cancellation with an
explicit channel estimate (``A = -H~_LI``) and an adaptive recursive least
squares (RLS) estimate of the loop-back channel.

Stacked coefficients
--------------------
The RLS works on a stacked coefficient matrix ``A_star`` of shape
``((L+1) * M_T, M_R)`` holding the conjugate transpose of every tap, tap
0 first, so that ``A_star^H t_bar(n) = sum_l A[l] t~(n-l)`` with the
tap-major regressor ``t_bar(n) = [t~(n); t~(n-1); ...; t~(n-L)]``.
``A_star`` estimates the loop-back channel itself; the cancellation filter
is its negative.
"""
from dataclasses import dataclass

import numba
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    check_complex_array,
    check_consistent_length,
    check_positive_int,
)
from .channel import FirMimoChannel, apply_fir, filter_sequence
from .errors import (
    ConfigurationError,
    DivergenceError,
    RankDeficiencyError,
    UndefinedMetricError,
)

EM_FLOOR_DB = -300.0
MAX_COEF_MAGNITUDE = 1e6
MAX_P_TRACE = 1e12


# ---------------------------------------------------------------------------
# stacking

def stack_taps(taps):
    """``(L+1, M_R, M_T)`` taps -> ``((L+1) M_T, M_R)`` stacked coefficients."""
    taps = np.asarray(taps, dtype=np.complex128)
    n_taps, m_r, m_t = taps.shape
    return np.ascontiguousarray(taps.conj().transpose(0, 2, 1).reshape(n_taps * m_t, m_r))


def unstack_taps(a_star, m_t):
    """Inverse of :func:`stack_taps`."""
    a_star = np.asarray(a_star, dtype=np.complex128)
    d, m_r = a_star.shape
    if d % m_t:
        raise ConfigurationError(f"{d} stacked rows are not a multiple of M_T={m_t}")
    return a_star.reshape(d // m_t, m_t, m_r).conj().transpose(0, 2, 1).copy()


def stacked_regressors(t, order, history=None):
    """Tap-major regressors ``t_bar(n)`` for every row of ``t``.

    Parameters
    ----------
    t : array, shape (n, M_T)
    order : int
        Filter order ``L``; each regressor has ``(L+1) * M_T`` entries.
    history : array, shape (L, M_T), optional
        Samples preceding ``t`` (oldest first); zeros when omitted.
    """
    t = np.asarray(t, dtype=np.complex128)
    n, m_t = t.shape
    if history is None:
        history = np.zeros((order, m_t), dtype=np.complex128)
    padded = np.concatenate([history[len(history) - order:] if order else history[:0], t])
    out = np.empty((n, (order + 1) * m_t), dtype=np.complex128)
    for lag in range(order + 1):
        out[:, lag * m_t:(lag + 1) * m_t] = padded[order - lag:order - lag + n]
    return out


# ---------------------------------------------------------------------------
# static filters

@dataclass(frozen=True)
class CancellerFilter:
    """The filter ``A(z)`` added to the relay input, ``M_R x M_T`` of order ``L_A``."""

    channel: FirMimoChannel

    @property
    def order(self):
        return self.channel.order

    @property
    def a_star(self):
        return stack_taps(self.channel.taps)


def make_ni(m_r, m_t, order=1):
    """Natural isolation: the all-zero filter."""
    m_r = check_positive_int(m_r, "m_r")
    m_t = check_positive_int(m_t, "m_t")
    order = check_positive_int(order, "order", minimum=0)
    return CancellerFilter(FirMimoChannel(np.zeros((order + 1, m_r, m_t), dtype=np.complex128)))


def make_tdc(estimated_channel, m_r=None, m_t=None):
    """Time-domain cancellation with the negated channel estimate."""
    if m_r is not None and estimated_channel.rows != m_r or m_t is not None and estimated_channel.cols != m_t:
        raise ConfigurationError(
            f"estimate is {estimated_channel.rows}x{estimated_channel.cols}, "
            f"expected {m_r}x{m_t}"
        )
    return CancellerFilter(FirMimoChannel(-estimated_channel.taps))


def cancel(filt, t_history, q):
    """``e(n) = q(n) + sum_l A[l] t~(n-l)`` for the newest sample in ``t_history``."""
    q = np.asarray(q, dtype=np.complex128).reshape(-1)
    if q.shape[0] != filt.channel.rows:
        raise ConfigurationError(
            f"q has length {q.shape[0]}, filter has {filt.channel.rows} outputs"
        )
    return q + apply_fir(filt.channel, t_history)


# ---------------------------------------------------------------------------
# recursive least squares

@dataclass
class RlsState:
    """Mutable RLS state; one instance per adapting relay."""

    a_star: np.ndarray
    p_bar: np.ndarray
    forgetting_factor: float = 1.0
    step_size: float = 1.0
    iteration: int = 0
    symmetrize: bool = True

    @property
    def n_regressors(self):
        return self.a_star.shape[0]


def rls_init(m_r, m_t, order, forgetting_factor=1.0, step_size=1.0, symmetrize=True):
    """Zero coefficients and identity inverse correlation."""
    m_r = check_positive_int(m_r, "m_r")
    m_t = check_positive_int(m_t, "m_t")
    order = check_positive_int(order, "order", minimum=0)
    lam = float(forgetting_factor)
    if not 0.0 < lam <= 1.0:
        raise ConfigurationError(f"forgetting factor must lie in (0, 1], got {lam}", ["lambda"])
    mu = float(step_size)
    if not mu > 0.0 or not np.isfinite(mu):
        raise ConfigurationError(f"step size must be positive, got {mu}", ["mu"])
    d = (order + 1) * m_t
    return RlsState(
        a_star=np.zeros((d, m_r), dtype=np.complex128),
        p_bar=np.eye(d, dtype=np.complex128),
        forgetting_factor=lam,
        step_size=mu,
        symmetrize=symmetrize,
    )


def _check_diverged(a_star, p_bar):
    if not (np.all(np.isfinite(a_star)) and np.all(np.isfinite(p_bar))):
        return True
    return np.abs(a_star).max() > MAX_COEF_MAGNITUDE or np.trace(p_bar).real > MAX_P_TRACE


def rls_step(state, t_bar, q):
    """Advance ``state`` by one sample in place and return it.

    ``k = P t_bar / (lambda + t_bar^H P t_bar)``,
    ``A_star += mu k (q - A_star^H t_bar)^H``,
    ``P = (P - k t_bar^H P) / lambda``.
    """
    t_bar = np.asarray(t_bar, dtype=np.complex128).reshape(-1)
    q = np.asarray(q, dtype=np.complex128).reshape(-1)
    if t_bar.shape[0] != state.a_star.shape[0] or q.shape[0] != state.a_star.shape[1]:
        raise ConfigurationError(
            f"regressor/observation sizes {t_bar.shape[0]}/{q.shape[0]} do not match "
            f"state of shape {state.a_star.shape}"
        )
    lam = state.forgetting_factor
    p_t = state.p_bar @ t_bar
    gain = p_t / (lam + np.vdot(t_bar, p_t).real)
    innovation = q - state.a_star.conj().T @ t_bar
    state.a_star = state.a_star + state.step_size * np.outer(gain, innovation.conj())
    # t_bar^H P equals (P t_bar)^H because P is Hermitian.
    p_bar = (state.p_bar - np.outer(gain, p_t.conj())) / lam
    if state.symmetrize:
        p_bar = 0.5 * (p_bar + p_bar.conj().T)
    state.p_bar = p_bar
    state.iteration += 1
    if _check_diverged(state.a_star, state.p_bar):
        raise DivergenceError("RLS diverged", state.iteration)
    return state


@numba.njit(cache=True)
def _rls_kernel(tbar, q, a_star, p_bar, lam, mu, symmetrize, reference, ref_energy,
                residual, em_trace):
    # In-place RLS sweep. Returns -1 on success or the 0-based index of the
    # sample at which the divergence guard tripped.
    n, d = tbar.shape
    m_r = q.shape[1]
    track = ref_energy > 0.0
    p_t = np.empty(d, dtype=np.complex128)
    gain = np.empty(d, dtype=np.complex128)
    innov = np.empty(m_r, dtype=np.complex128)
    for i in range(n):
        denom = lam
        for r in range(d):
            acc = 0j
            for c in range(d):
                acc += p_bar[r, c] * tbar[i, c]
            p_t[r] = acc
        for r in range(d):
            denom += (tbar[i, r].conjugate() * p_t[r]).real
        for r in range(d):
            gain[r] = p_t[r] / denom
        for j in range(m_r):
            acc = q[i, j]
            for r in range(d):
                acc -= a_star[r, j].conjugate() * tbar[i, r]
            innov[j] = acc
            residual[i, j] = acc
        coef_max = 0.0
        err = 0.0
        for r in range(d):
            for j in range(m_r):
                a_star[r, j] += mu * gain[r] * innov[j].conjugate()
                v = abs(a_star[r, j])
                if v > coef_max or v != v:
                    coef_max = v if v == v else np.inf
                if track:
                    diff = a_star[r, j] - reference[r, j]
                    err += diff.real * diff.real + diff.imag * diff.imag
        trace = 0.0
        for r in range(d):
            for c in range(d):
                p_bar[r, c] = (p_bar[r, c] - gain[r] * p_t[c].conjugate()) / lam
        if symmetrize:
            for r in range(d):
                for c in range(r, d):
                    avg = 0.5 * (p_bar[r, c] + p_bar[c, r].conjugate())
                    p_bar[r, c] = avg
                    p_bar[c, r] = avg.conjugate()
        for r in range(d):
            trace += p_bar[r, r].real
        if track:
            em_trace[i] = err / ref_energy
        if not (coef_max <= 1e6) or not (trace <= 1e12):
            return i
    return -1


def rls_run(state, t_bars, qs, reference=None):
    """Run the RLS over a block of samples, in place.

    Parameters
    ----------
    state : RlsState
    t_bars : array, shape (n, d)
        Stacked regressors, see :func:`stacked_regressors`.
    qs : array, shape (n, M_R)
        Observed relay inputs.
    reference : array, shape (d, M_R), optional
        Stacked true channel; when given, the linear error metric after every
        update is returned as well.

    Returns
    -------
    residual : array, shape (n, M_R)
        A-priori error ``q(n) - A_star(n-1)^H t_bar(n)``, i.e. the cancelled
        relay input when the canceller uses the current estimate.
    em_trace : array, shape (n,) or None
        Linear error metric per iteration.
    """
    t_bars = np.ascontiguousarray(t_bars, dtype=np.complex128)
    qs = np.ascontiguousarray(qs, dtype=np.complex128)
    d, m_r = state.a_star.shape
    if t_bars.ndim != 2 or t_bars.shape[1] != d or qs.shape != (t_bars.shape[0], m_r):
        raise ConfigurationError(
            f"regressors {t_bars.shape} / observations {qs.shape} do not match state {state.a_star.shape}"
        )
    n = t_bars.shape[0]
    if reference is None:
        ref = np.zeros((d, m_r), dtype=np.complex128)
        ref_energy = 0.0
    else:
        ref = np.ascontiguousarray(reference, dtype=np.complex128)
        ref_energy = float(np.sum(np.abs(ref) ** 2))
        if ref_energy == 0.0:
            raise UndefinedMetricError("error metric is undefined for an all-zero channel")
    residual = np.empty((n, m_r), dtype=np.complex128)
    em_trace = np.empty(n if reference is not None else 0)
    a_star = np.ascontiguousarray(state.a_star.copy())
    p_bar = np.ascontiguousarray(state.p_bar.copy())
    stop = _rls_kernel(t_bars, qs, a_star, p_bar, state.forgetting_factor, state.step_size,
                       state.symmetrize, ref, ref_energy, residual, em_trace)
    state.a_star = a_star
    state.p_bar = p_bar
    if stop >= 0:
        state.iteration += stop + 1
        raise DivergenceError("RLS diverged", state.iteration)
    state.iteration += n
    return residual, (em_trace if reference is not None else None)


# ---------------------------------------------------------------------------
# metrics and oracles

def error_metric_linear(a_star, h_star):
    a_star = np.asarray(a_star)
    h_star = np.asarray(h_star)
    if a_star.shape != h_star.shape:
        raise ConfigurationError(f"shapes differ: {a_star.shape} vs {h_star.shape}")
    ref = np.sum(np.abs(h_star) ** 2)
    if ref == 0:
        raise UndefinedMetricError("error metric is undefined for an all-zero channel")
    return float(np.sum(np.abs(a_star - h_star) ** 2) / ref)


def error_metric(a_star, h_star):
    """Normalised squared Frobenius error in dB, floored at -300 dB."""
    ratio = error_metric_linear(a_star, h_star)
    if ratio <= 0:
        return EM_FLOOR_DB
    return float(max(10.0 * np.log10(ratio), EM_FLOOR_DB))


def _sample_weights(n, forgetting_factor):
    return forgetting_factor ** np.arange(n - 1, -1, -1, dtype=float)


def weighted_correlation(t_bars, forgetting_factor=1.0, regularization=0.0):
    """``reg * lambda^n I + sum_k lambda^(n-k) t_bar(k) t_bar(k)^H`` built densely."""
    t_bars = np.asarray(t_bars, dtype=np.complex128)
    n, d = t_bars.shape
    w = _sample_weights(n, forgetting_factor)
    sigma = (t_bars.T * w) @ t_bars.conj()
    return sigma + regularization * forgetting_factor ** n * np.eye(d)


def batch_solve_oracle(t_bars, qs, forgetting_factor=1.0, regularization=0.0):
    """Exponentially weighted least-squares coefficients by a dense solve.

    Minimises ``sum_k lambda^(n-k) |q(k) - A^H t_bar(k)|^2
    + reg * lambda^n |A|_F^2`` through an orthogonal-decomposition
    least-squares solve of the square-root-weighted data. With
    ``regularization=1`` this reproduces RLS started from ``P = I``,
    ``A = 0`` when ``lambda = mu = 1``.
    """
    t_bars = np.asarray(t_bars, dtype=np.complex128)
    qs = np.asarray(qs, dtype=np.complex128)
    n, d = t_bars.shape
    sqrt_w = np.sqrt(_sample_weights(n, forgetting_factor))
    design = sqrt_w[:, None] * t_bars.conj()
    target = sqrt_w[:, None] * qs.conj()
    if regularization > 0:
        design = np.vstack([design, np.sqrt(regularization * forgetting_factor ** n) * np.eye(d)])
        target = np.vstack([target, np.zeros((d, qs.shape[1]))])
    sol, _, rank, sv = np.linalg.lstsq(design, target, rcond=None)
    if rank < d or sv[-1] <= 1e-12 * sv[0]:
        raise RankDeficiencyError(f"weighted correlation has rank {rank} < {d}")
    return sol


# ---------------------------------------------------------------------------
# estimators

class _BaseCanceller(BaseEstimator):
    """Shared plumbing: ``coef_`` holds the stacked loop-back channel estimate."""

    def _validate_pair(self, t, q):
        t = check_complex_array(t, name="t")
        q = check_complex_array(q, name="q")
        check_consistent_length(t, q)
        return t, q

    def _check_features(self, t):
        if t.shape[1] != self.n_features_in_:
            raise ConfigurationError(
                f"t has {t.shape[1]} antennas, canceller was fitted with {self.n_features_in_}"
            )

    @property
    def taps_(self):
        check_is_fitted(self, "coef_")
        return unstack_taps(self.coef_, self.n_features_in_)

    def canceller_filter(self):
        """The filter ``A(z)`` that subtracts the estimated interference."""
        return CancellerFilter(FirMimoChannel(-self.taps_))

    def predict(self, t):
        """Estimated self-interference ``sum_l A_hat[l] t~(n-l)``, zero pre-history."""
        check_is_fitted(self, "coef_")
        t = check_complex_array(t, name="t")
        self._check_features(t)
        return filter_sequence(FirMimoChannel(self.taps_), t)

    def cancel(self, t, q):
        """Relay input after cancellation with the current, frozen filter."""
        t, q = self._validate_pair(t, q)
        return q - self.predict(t)

    def filter(self, t, q):
        """Cancel a block of samples; static schemes do not adapt."""
        if not hasattr(self, "coef_"):
            self.fit(t, q)
        return self.cancel(t, q)

    def error_metric(self, h_true):
        """EM in dB of ``coef_`` against a true channel (``FirMimoChannel`` or taps)."""
        check_is_fitted(self, "coef_")
        taps = h_true.taps if isinstance(h_true, FirMimoChannel) else h_true
        return error_metric(self.coef_, stack_taps(taps))


class NaturalIsolation(_BaseCanceller):
    """No digital cancellation; relies on physical isolation only.

    Parameters
    ----------
    order : int, default=1
    """

    def __init__(self, order=1):
        self.order = order

    def fit(self, t, q):
        t, q = self._validate_pair(t, q)
        order = check_positive_int(self.order, "order", minimum=0)
        self.n_features_in_ = t.shape[1]
        self.n_outputs_ = q.shape[1]
        self.coef_ = np.zeros(((order + 1) * t.shape[1], q.shape[1]), dtype=np.complex128)
        return self


class TimeDomainCanceller(_BaseCanceller):
    """Cancellation with a fixed (possibly erroneous) loop-back channel estimate.

    Parameters
    ----------
    channel_estimate : FirMimoChannel
        Estimate ``H~_LI``; the filter is its negative.
    """

    def __init__(self, channel_estimate=None):
        self.channel_estimate = channel_estimate

    def fit(self, t=None, q=None):
        if not isinstance(self.channel_estimate, FirMimoChannel):
            raise ConfigurationError("channel_estimate must be a FirMimoChannel")
        est = self.channel_estimate
        if t is not None and q is not None:
            t, q = self._validate_pair(t, q)
            make_tdc(est, m_r=q.shape[1], m_t=t.shape[1])
        self.n_features_in_ = est.cols
        self.n_outputs_ = est.rows
        self.coef_ = stack_taps(est.taps)
        return self


class RLSCanceller(_BaseCanceller):
    """Recursive least squares identification of the loop-back channel.

    Only the known baseband transmit signal ``t`` and the relay input ``q``
    are used; the source signal and receiver noise act as observation noise
    because they are uncorrelated with ``t``.

    Parameters
    ----------
    order : int, default=1
        Filter order ``L_A``.
    forgetting_factor : float, default=1.0
        Exponential weight on past samples, in ``(0, 1]``.
    step_size : float, default=1.0
        Newton step size ``mu``.
    symmetrize : bool, default=True
        Re-symmetrise the inverse correlation matrix after each update.

    Attributes
    ----------
    coef_ : ndarray of shape ((order+1) * M_T, M_R)
        Stacked estimate of the loop-back channel.
    inverse_correlation_ : ndarray of shape ((order+1) * M_T, (order+1) * M_T)
    n_iter_ : int
        Samples processed since the last :meth:`fit`.
    error_metric_trace_ : ndarray of shape (n_iter_,)
        Linear error metric per sample; only when a ``reference`` is passed.

    Examples
    --------
    >>> rng = np.random.default_rng(0)
    >>> t = rng.standard_normal((200, 2)) + 0j
    >>> h = FirMimoChannel(rng.standard_normal((2, 2, 2)))
    >>> est = RLSCanceller(order=1).fit(t, filter_sequence(h, t))
    >>> est.error_metric(h) < -40
    True
    """

    def __init__(self, order=1, forgetting_factor=1.0, step_size=1.0, symmetrize=True):
        self.order = order
        self.forgetting_factor = forgetting_factor
        self.step_size = step_size
        self.symmetrize = symmetrize

    def _reset(self, m_t, m_r):
        self.state_ = rls_init(m_r, m_t, self.order, self.forgetting_factor,
                               self.step_size, self.symmetrize)
        self.n_features_in_ = m_t
        self.n_outputs_ = m_r
        self._t_tail = np.zeros((self.order, m_t), dtype=np.complex128)
        self._trace = []

    def _adapt(self, t, q, reference):
        t, q = self._validate_pair(t, q)
        if not hasattr(self, "state_"):
            self._reset(t.shape[1], q.shape[1])
        self._check_features(t)
        ref = None
        if reference is not None:
            taps = reference.taps if isinstance(reference, FirMimoChannel) else reference
            ref = stack_taps(taps)
        t_bars = stacked_regressors(t, self.order, self._t_tail)
        try:
            residual, trace = rls_run(self.state_, t_bars, q, ref)
        finally:
            self._sync()
        if self.order:
            self._t_tail = np.concatenate([self._t_tail, t])[-self.order:]
        if trace is not None:
            self._trace.append(trace)
        return residual, trace

    @property
    def error_metric_trace_(self):
        if not getattr(self, "_trace", None):
            raise AttributeError("no reference channel was given while adapting")
        if len(self._trace) > 1:
            self._trace = [np.concatenate(self._trace)]
        return self._trace[0]

    def _sync(self):
        self.coef_ = self.state_.a_star
        self.inverse_correlation_ = self.state_.p_bar
        self.n_iter_ = self.state_.iteration

    def fit(self, t, q, reference=None):
        """Adapt from a cold start over ``(t, q)``.

        Parameters
        ----------
        t : array-like of shape (n_samples, M_T)
            Known baseband transmit samples.
        q : array-like of shape (n_samples, M_R)
            Relay input samples.
        reference : FirMimoChannel, optional
            True loop-back channel, used only to record ``error_metric_trace_``.
        """
        for attr in ("state_", "coef_", "_trace"):
            self.__dict__.pop(attr, None)
        self._adapt(t, q, reference)
        return self

    def partial_fit(self, t, q, reference=None):
        """Continue adapting over further samples."""
        self._adapt(t, q, reference)
        return self

    def filter(self, t, q, reference=None, return_trace=False):
        """Adapt over ``(t, q)`` and return the cancelled input.

        Sample ``n`` is cancelled with the estimate formed from samples
        ``< n``, as in a running relay. With ``return_trace`` the linear
        error metric of this block (or None without a reference) is
        returned as well.
        """
        residual, trace = self._adapt(t, q, reference)
        return (residual, trace) if return_trace else residual
