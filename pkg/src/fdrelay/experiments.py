"""Monte-Carlo experiments: RLS convergence time, SINR and BER sweeps.

Every realization draws from its own counter-based random streams, so
results do not depend on execution order or on the number of worker
processes. The same realization index reuses the same underlying draws at
every self-interference level and for every scheme (common random numbers),
which keeps the sweep curves directly comparable.
"""
import csv
import dataclasses
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .canceller import RLSCanceller, stack_taps
from .channel import FirMimoChannel, draw_rayleigh_channel, filter_sequence, perturb_channel
from .config import SCHEMES
from .errors import UndefinedMetricError
from .metrics import MetricsRecord, convergence_time, db, from_db, sinr, summarize_convergence
from .ofdm import ImpairmentModel
from .relay import RelayScenario, detect_at_relay, generate_ofdm_stream, generate_relay_transmit, simulate_relay_input

ROLES = ("channels", "estimate", "source", "relay", "impairment", "noise")
CHUNK_SYMBOLS = 16

CSV_COLUMNS = {
    "convergence": ("realization", "seed", "converged", "convergence_sample", "em_final_db"),
    "sinr": ("scheme", "sigma2_li_db", "sinr_db", "realizations", "samples_per_point"),
    "ber": ("scheme", "sigma2_li_db", "ber", "bits_counted", "bit_errors"),
}


def seed_for(master_seed, realization_index, role_tag):
    """Independent generator for one (realization, role) pair.

    Streams are derived by ``SeedSequence`` spawn keys, so any pair maps to
    the same stream no matter which process asks for it.
    """
    role = ROLES.index(role_tag)
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(realization_index), role))
    return np.random.Generator(np.random.PCG64(seq))


def realization_seed(master_seed, realization_index):
    """A 32-bit label identifying the realization's streams in output files."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(realization_index),))
    return int(seq.generate_state(1)[0])


def _power(db_value):
    return 0.0 if db_value == -math.inf else float(from_db(db_value))


def build_scenario(cfg, sigma2_li_db, realization, scheme="rls"):
    """Channels for one realization; the no-SI scheme gets a zero loop-back channel."""
    rng = seed_for(cfg.master_seed, realization, "channels")
    sigma2_li = _power(sigma2_li_db)
    h_sr = draw_rayleigh_channel(cfg.m_r, cfg.n_s, cfg.l_sr, 1.0, rng)
    h_li = draw_rayleigh_channel(cfg.m_r, cfg.m_t, cfg.l_li, sigma2_li, rng)
    h_est = perturb_channel(h_li, cfg.alpha * sigma2_li, seed_for(cfg.master_seed, realization, "estimate"))
    if scheme == "no-si":
        h_li = FirMimoChannel(np.zeros(h_li.shape))
    return RelayScenario(
        h_sr=h_sr,
        h_li=h_li,
        h_li_estimate=h_est,
        impairment=ImpairmentModel(cfg.delta),
        noise_variance=_power(cfg.sigma2_nr_db),
        tx_power=1.0,
        processing_delay=cfg.processing_delay,
    )


@dataclass
class _RunOutput:
    record: MetricsRecord
    em_checkpoints: dict = field(default_factory=dict)


def simulate_realization(cfg, scheme, sigma2_li_db, realization, detect=True, em_checkpoints=()):
    """Simulate one relay realization and collect its metrics.

    The run is processed in chunks of OFDM symbols. Per-symbol power and
    bit-error tallies are kept so the measurement window can start after
    the adaptation has converged.
    """
    scenario = build_scenario(cfg, sigma2_li_db, realization, scheme)
    rngs = {role: seed_for(cfg.master_seed, realization, role) for role in ROLES[2:]}
    sym_len = cfg.n_cp + cfg.n_sub
    n_symbols = cfg.ofdm_symbols
    h_ref = None
    if scheme == "rls":
        canceller = RLSCanceller(order=cfg.l_a, forgetting_factor=cfg.lam, step_size=cfg.mu)
        if cfg.l_a == cfg.l_li and np.any(scenario.h_li.taps != 0):
            h_ref = scenario.h_li
    checkpoints = sorted(int(c) for c in em_checkpoints)
    em_at = {}

    per_symbol = np.zeros((n_symbols, 5))  # P_x, P_i, P_n, bit errors, bits
    x_tail = np.zeros((cfg.l_sr, cfg.n_s), dtype=np.complex128)
    known_tail = np.zeros((cfg.l_li, cfg.m_t), dtype=np.complex128)
    radiated_tail = np.zeros((cfg.l_li, cfg.m_t), dtype=np.complex128)
    traces = []
    failed = 0
    for start in range(0, n_symbols, CHUNK_SYMBOLS):
        count = min(CHUNK_SYMBOLS, n_symbols - start)
        src = generate_ofdm_stream(rngs["source"], cfg.n_s, cfg.n_sub, cfg.n_cp, count)
        x = src.time_samples if cfg.include_source else np.zeros_like(src.time_samples)
        t_known = generate_relay_transmit(rngs["relay"], cfg.m_t, cfg.n_sub, cfg.n_cp, count).time_samples
        sig = simulate_relay_input(scenario, x, t_known, rngs["impairment"], rngs["noise"],
                                   x_history=x_tail, radiated_history=radiated_tail)
        q = sig.q
        if scheme == "tdc":
            z = -filter_sequence(scenario.h_li_estimate, t_known, known_tail)
        elif scheme == "rls":
            e_block, trace = canceller.filter(t_known, q, reference=h_ref, return_trace=True)
            z = e_block - q
            if trace is not None:
                traces.append(trace)
        else:
            z = np.zeros_like(q)
        x_tail = _tail(x_tail, x)
        known_tail = _tail(known_tail, t_known)
        radiated_tail = _tail(radiated_tail, sig.radiated)

        shape = (count, sym_len, cfg.m_r)
        rows = per_symbol[start:start + count]
        rows[:, 0] = np.mean(np.abs(sig.source.reshape(shape)) ** 2, axis=(1, 2))
        rows[:, 1] = np.mean(np.abs((sig.interference + z).reshape(shape)) ** 2, axis=(1, 2))
        rows[:, 2] = np.mean(np.abs(sig.noise.reshape(shape)) ** 2, axis=(1, 2))
        if detect:
            bits, n_failed = detect_at_relay(q + z, scenario.h_sr, cfg.n_sub, cfg.n_cp, src.stream_power)
            failed += n_failed
            rows[:, 3] = np.count_nonzero(bits != src.bits, axis=(1, 2))
            rows[:, 4] = src.bits[0].size

    record = MetricsRecord(scheme=scheme, sigma2_li_db=float(sigma2_li_db), realization=realization,
                           seed=realization_seed(cfg.master_seed, realization))
    start_sample = min(cfg.warmup_samples, n_symbols * sym_len)
    if traces:
        trace = np.concatenate(traces)
        em_db = 10.0 * np.log10(np.maximum(trace, 1e-30))
        record.convergence_sample = convergence_time(em_db, cfg.em_threshold_db)
        record.em_final_db = float(max(em_db[-1], -300.0))
        for c in checkpoints:
            if 1 <= c <= len(trace):
                em_at[c] = float(trace[c - 1])
        if scheme == "rls":
            # late or missing convergence still leaves the second half to measure
            half = (n_symbols * sym_len) // 2
            conv = record.convergence_sample
            start_sample = half if conv is None else min(conv, half)
    # measurement window begins at the first whole symbol after the warm-up
    record.window_start = min(int(math.ceil(start_sample / sym_len)), n_symbols - 1)
    record.tallies = per_symbol
    record.failed_subcarriers = failed
    apply_window(record, record.window_start, sym_len, detect)
    return _RunOutput(record, em_at)


def apply_window(record, first_symbol, symbol_length, with_bits=True):
    """Recompute a record's SINR and bit counts over symbols ``first_symbol:``."""
    window = record.tallies[first_symbol:]
    record.samples = int(window.shape[0] * symbol_length)
    record.signal_power = float(window[:, 0].mean())
    record.interference_power = float(window[:, 1].mean())
    record.noise_power = float(window[:, 2].mean())
    record.sinr_db = None
    if record.noise_power > 0:
        record.sinr_db = sinr(record.signal_power, record.interference_power, record.noise_power)
    if with_bits:
        record.bit_errors = int(window[:, 3].sum())
        record.bits = int(window[:, 4].sum())
        record.ber = record.bit_errors / record.bits
    return record


def _tail(previous, block):
    k = previous.shape[0]
    if k == 0:
        return previous
    return np.concatenate([previous, block])[-k:]


# ---------------------------------------------------------------------------
# orchestration

def _task(args):
    cfg, scheme, sigma2_li_db, realization, detect, checkpoints = args
    return simulate_realization(cfg, scheme, sigma2_li_db, realization, detect, checkpoints)


def _map(tasks, workers):
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


@dataclass
class ExperimentResult:
    """Resolved config, per-realization records and provenance."""

    kind: str
    config: object
    records: list
    rows: list
    summary: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def csv_body(self):
        """Header plus data rows; identical for identical config and seed."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS[self.kind])
        for row in self.rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS[self.kind]])
        return buf.getvalue()

    def to_csv(self):
        """CSV text with the resolved config and provenance as leading ``#`` lines."""
        lines = [f"# fdrelay {self.kind}"]
        lines += [f"# {k}={_fmt(v)}" for k, v in self.provenance.items()]
        lines += [f"# config.{k}={_fmt(v)}" for k, v in self.config.as_dict().items()]
        return "\n".join(lines) + "\n" + self.csv_body()

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "-inf" if value < 0 else "inf"
        return format(value, ".10g")
    return str(value)


def _provenance(cfg):
    return {
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "master_seed": cfg.master_seed,
    }


def run_convergence(config, workers=1, em_checkpoints=()):
    """RLS convergence-time experiment.

    Each realization draws fresh channels and adapts over
    ``ofdm_symbols`` OFDM symbols; the convergence time is the first sample
    whose error metric reaches ``em_threshold_db``. ``em_checkpoints`` lists
    1-based iterations at which the linear error metric is kept per
    realization (in ``extras["em_at"]``).
    """
    cfg = config.resolve("convergence").validate("convergence")
    sigma2_li_db = cfg.sigma2_li_db[0]
    if _power(sigma2_li_db) == 0.0:
        raise UndefinedMetricError("the error metric is undefined without self-interference")
    if cfg.l_a != cfg.l_li:
        raise UndefinedMetricError("the error metric needs the filter order to match the channel order")
    tasks = [(cfg, "rls", sigma2_li_db, r, False, tuple(em_checkpoints)) for r in range(cfg.realizations)]
    outputs = _map(tasks, workers)
    records = [o.record for o in outputs]
    rows = [
        {
            "realization": rec.realization,
            "seed": rec.seed,
            "converged": rec.convergence_sample is not None,
            "convergence_sample": rec.convergence_sample,
            "em_final_db": rec.em_final_db,
        }
        for rec in records
    ]
    converged = [rec.convergence_sample for rec in records if rec.convergence_sample is not None]
    summary = {"realizations": len(records), "converged": len(converged),
               "not_converged": len(records) - len(converged)}
    extras = {"em_at": {c: np.array([o.em_checkpoints.get(c, np.nan) for o in outputs])
                        for c in em_checkpoints}}
    if converged:
        s = summarize_convergence(converged, cfg.bin_width)
        summary.update(mean=s.mean, median=s.median, std=s.std,
                       lognormal_mu=s.lognormal_mu, lognormal_sigma=s.lognormal_sigma,
                       lognormal_mean=s.lognormal_mean)
        extras["histogram"] = (s.bin_edges, s.counts)
    return ExperimentResult("convergence", cfg, records, rows, summary, extras, _provenance(cfg))


def simulate_sweep(config, workers=1, detect=True):
    """Per-realization records for every (scheme, sigma2_li_db) pair of a sweep.

    Within each point all realizations are re-evaluated over a common
    window starting at the latest of their individual window starts, so
    pooled bit counts weight every realization equally. The ``no-si``
    reference does not depend on the interference level and is simulated
    once per realization.
    """
    cfg = config.resolve("sweep").validate("sweep")
    tasks = []
    for scheme in cfg.scheme:
        levels = cfg.sigma2_li_db[:1] if scheme == "no-si" else cfg.sigma2_li_db
        tasks += [(cfg, scheme, s2, r, detect, ()) for s2 in levels for r in range(cfg.realizations)]
    records = []
    for out in _map(tasks, workers):
        rec = out.record
        if rec.scheme == "no-si":
            records += [dataclasses.replace(rec, sigma2_li_db=float(s2)) for s2 in cfg.sigma2_li_db]
        else:
            records.append(rec)
    sym_len = cfg.n_cp + cfg.n_sub
    for _, recs in _group(records):
        first = max(r.window_start for r in recs)
        for rec in recs:
            apply_window(rec, first, sym_len, detect)
    return cfg, records


def _group(records):
    groups = {}
    for rec in records:
        groups.setdefault((rec.scheme, rec.sigma2_li_db), []).append(rec)
    order = {s: i for i, s in enumerate(SCHEMES)}
    return [(k, sorted(groups[k], key=lambda r: r.realization))
            for k in sorted(groups, key=lambda k: (order[k[0]], k[1]))]


def sinr_rows(records):
    """Mean over realizations of the post-convergence SINR in dB, per point."""
    rows = []
    for (scheme, s2), recs in _group(records):
        rows.append({
            "scheme": scheme,
            "sigma2_li_db": s2,
            "sinr_db": float(np.mean([r.sinr_db for r in recs])),
            "realizations": len(recs),
            "samples_per_point": sum(r.samples for r in recs),
        })
    return rows


def ber_rows(records):
    """Pooled bit-error ratio per point."""
    rows = []
    for (scheme, s2), recs in _group(records):
        bits = sum(r.bits for r in recs)
        errors = sum(r.bit_errors for r in recs)
        rows.append({"scheme": scheme, "sigma2_li_db": s2, "ber": errors / bits if bits else None,
                     "bits_counted": bits, "bit_errors": errors})
    return rows


def run_sinr_sweep(config, workers=1):
    """SINR after cancellation versus self-interference power, per scheme."""
    cfg, records = simulate_sweep(config, workers, detect=False)
    return ExperimentResult("sinr", cfg, records, sinr_rows(records), provenance=_provenance(cfg))


def run_ber_sweep(config, workers=1):
    """Uncoded BER at the relay versus self-interference power, per scheme.

    The ``no-si`` scheme is the interference-free (half-duplex equivalent)
    reference.
    """
    cfg, records = simulate_sweep(config, workers, detect=True)
    return ExperimentResult("ber", cfg, records, ber_rows(records), provenance=_provenance(cfg))


def results_from_records(cfg, records):
    """SINR and BER results sharing one simulated sweep."""
    prov = _provenance(cfg)
    return (ExperimentResult("sinr", cfg, records, sinr_rows(records), provenance=prov),
            ExperimentResult("ber", cfg, records, ber_rows(records), provenance=prov))


def crossing_level(sigma2_db, ber_values, target=1e-2):
    """Interference level (dB) where a BER curve rises through ``target``.

    Uses the last upward crossing, interpolating ``log10(BER)`` linearly in
    dB. Returns None when the curve never crosses.
    """
    x = np.asarray(sigma2_db, dtype=float)
    y = np.log10(np.maximum(np.asarray(ber_values, dtype=float), 1e-12))
    t = np.log10(target)
    found = None
    for i in range(len(x) - 1):
        if y[i] < t <= y[i + 1]:
            found = x[i] + (t - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
    return None if found is None else float(found)
