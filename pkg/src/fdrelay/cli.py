"""Command-line entry point.

Every ``SimConfig`` field has a kebab-case flag (``--sigma2-li-db``,
``--master-seed``, ``--lambda`` ...). ``--config FILE`` reads ``key=value``
lines first; flags given on the command line override the file.

Exit codes: 0 success, 2 configuration error, 3 runtime divergence.
"""
import argparse
import sys
from dataclasses import fields

from . import __version__
from .config import SimConfig
from .errors import ConfigurationError, DivergenceError, UndefinedMetricError
from .experiments import run_ber_sweep, run_convergence, run_sinr_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3

_HELP = {
    "n_s": "source streams",
    "n_d": "destination antennas (documented, not simulated)",
    "m_r": "relay receive antennas",
    "m_t": "relay transmit antennas",
    "l_sr": "source-relay channel order",
    "l_rd": "relay-destination channel order (not simulated)",
    "l_li": "loop-back channel order",
    "l_a": "canceller filter order",
    "n_sub": "OFDM subcarriers",
    "n_cp": "cyclic prefix length (default: l_sr)",
    "sigma2_li_db": "self-interference power grid in dB: start:stop:step, a,b,c or one value",
    "sigma2_nr_db": "relay noise power in dB",
    "delta": "transmit impairment level",
    "alpha": "loop-back channel estimation error level",
    "lam": "RLS forgetting factor",
    "mu": "RLS step size",
    "em_threshold_db": "error metric level that counts as converged",
    "ofdm_symbols": "OFDM symbols per realization",
    "realizations": "Monte-Carlo realizations per point",
    "master_seed": "master seed for every random stream",
    "scheme": "comma list of ni, tdc, rls, no-si (or all)",
    "include_source": "true to transmit the source signal during the run",
    "warmup_samples": "samples skipped before measuring the static schemes",
    "processing_delay": "relay processing delay in samples (default: one OFDM symbol)",
    "bin_width": "convergence histogram bin width in samples",
}


def _flag(name):
    return "--lambda" if name == "lam" else "--" + name.replace("_", "-")


def _add_config_flags(parser):
    group = parser.add_argument_group("simulation parameters")
    for f in fields(SimConfig):
        group.add_argument(_flag(f.name), dest=f.name, metavar="VALUE",
                           default=argparse.SUPPRESS, help=_HELP.get(f.name))
    parser.add_argument("--config", metavar="FILE", help="key=value configuration file")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fdrelay",
        description="Monte-Carlo experiments for a full-duplex MIMO-OFDM relay "
                    "with self-interference cancellation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    experiments = [
        ("convergence", "RLS convergence-time histogram"),
        ("sinr-sweep", "SINR after cancellation versus self-interference power"),
        ("ber-sweep", "BER at the relay versus self-interference power"),
    ]
    for name, text in experiments:
        p = sub.add_parser(name, help=text, description=text)
        _add_config_flags(p)
        p.add_argument("-o", "--output", metavar="PATH", help="CSV file (default: stdout)")
        p.add_argument("--workers", type=int, default=1, help="worker processes")

    p = sub.add_parser("validate-config", help="check a configuration and print it resolved")
    _add_config_flags(p)
    p.add_argument("--experiment", choices=("convergence", "sweep"), default="sweep",
                   help="experiment whose defaults and constraints apply")
    return parser


def load_config(args):
    """Config file values overlaid with the flags given on the command line."""
    mapping = {}
    if args.config:
        try:
            mapping.update(SimConfig.from_file(args.config).as_dict())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file: {exc}", ["config"]) from exc
        mapping = {k: v for k, v in mapping.items() if v is not None}
    for name in SimConfig.field_names():
        if name in vars(args):
            mapping[name] = getattr(args, name)
    return SimConfig.from_mapping(mapping)


def _emit(result, args, out):
    text = result.to_csv()
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)


def _report_convergence(result, stream):
    s = result.summary
    print(f"realizations: {s['realizations']}  converged: {s['converged']}  "
          f"not converged: {s['not_converged']}", file=stream)
    if "mean" not in s:
        return
    print(f"mean {s['mean']:.1f}  median {s['median']:.1f}  std {s['std']:.1f} samples", file=stream)
    print(f"log-normal fit: mu {s['lognormal_mu']:.4f}  sigma {s['lognormal_sigma']:.4f}  "
          f"mean {s['lognormal_mean']:.1f}", file=stream)
    edges, counts = result.extras["histogram"]
    peak = max(counts.max(), 1)
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        bar = "#" * int(round(40 * c / peak))
        print(f"{int(lo):>7d}-{int(hi):<7d} {c:>5d} {bar}", file=stream)


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "validate-config":
            resolved = cfg.resolve(args.experiment).validate(args.experiment)
            for key, value in resolved.as_dict().items():
                print(f"{key}={value}", file=stdout)
            return EXIT_OK
        if args.workers < 1:
            raise ConfigurationError("--workers must be at least 1", ["workers"])
        if args.command == "convergence":
            result = run_convergence(cfg, workers=args.workers)
            # keep stdout clean for CSV when no output file is given
            _report_convergence(result, stdout if args.output else stderr)
        elif args.command == "sinr-sweep":
            result = run_sinr_sweep(cfg, workers=args.workers)
        else:
            result = run_ber_sweep(cfg, workers=args.workers)
        _emit(result, args, stdout)
    except (ConfigurationError, UndefinedMetricError) as exc:
        print(f"fdrelay: configuration error: {exc}", file=stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"fdrelay: divergence: {exc}", file=stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
