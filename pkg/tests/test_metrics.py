import doctest

import numpy as np
import pytest
from scipy import stats

import fdrelay.canceller
import fdrelay.config
import fdrelay.ofdm
from fdrelay.errors import ConfigurationError, SummaryError
from fdrelay.metrics import ber, bit_errors, convergence_time, db, from_db, sinr, summarize_convergence


def test_db_round_trip():
    assert db(100.0) == pytest.approx(20.0)
    np.testing.assert_allclose(from_db(db(np.array([0.5, 3.0]))), [0.5, 3.0])


def test_sinr_accounting():
    assert sinr(1.0, 0.0, 0.1) == pytest.approx(10.0)
    assert sinr(2.0, 0.1, 0.1) == pytest.approx(10.0)
    with pytest.raises(ConfigurationError):
        sinr(1.0, 0.0, 0.0)
    with pytest.raises(ConfigurationError):
        sinr(-1.0, 0.0, 1.0)


def test_ber_counts():
    tx = np.array([0, 1, 1, 0, 1, 0, 0, 1])
    rx = tx.copy()
    rx[[1, 6]] ^= 1
    assert ber(tx, rx) == 0.25
    assert bit_errors(tx, rx) == 2
    assert ber(tx, tx) == 0.0
    with pytest.raises(ConfigurationError):
        ber(tx, rx[:-1])
    with pytest.raises(ConfigurationError):
        ber([], [])


def test_convergence_time_is_first_crossing_one_based():
    trace = np.array([0.0, -10.0, -31.0, -29.0, -35.0])
    assert convergence_time(trace, -30.0) == 3
    assert convergence_time(trace, -30.0 - 10) is None
    assert convergence_time([-30.0], -30.0) == 1


def test_summary_matches_lognormal_mle(rng):
    x = np.round(rng.lognormal(7.0, 0.4, 500))
    s = summarize_convergence(list(x) + [None], bin_width=100)
    shape, loc, scale = stats.lognorm.fit(x, floc=0)
    assert s.count == 500
    assert s.lognormal_sigma == pytest.approx(shape, rel=1e-6)
    assert s.lognormal_mu == pytest.approx(np.log(scale), rel=1e-6)
    assert s.mean == pytest.approx(x.mean())
    assert s.median == pytest.approx(np.median(x))
    assert s.counts.sum() == 500
    assert np.all(np.diff(s.bin_edges) == 100)
    assert s.bin_edges[0] <= x.min() and s.bin_edges[-1] > x.max()
    assert s.lognormal_mean == pytest.approx(np.exp(s.lognormal_mu + s.lognormal_sigma ** 2 / 2))


def test_summary_rejects_empty():
    with pytest.raises(SummaryError):
        summarize_convergence([None, None])


@pytest.mark.parametrize("module", [fdrelay.canceller, fdrelay.config, fdrelay.ofdm])
def test_docstring_examples(module):
    result = doctest.testmod(module, extraglobs={"np": np})
    assert result.failed == 0
