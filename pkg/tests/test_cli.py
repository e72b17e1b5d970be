import io

import pytest

from fdrelay.cli import EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_OK, build_parser, load_config, main
from fdrelay.config import SCHEMES, SimConfig, parse_grid, parse_schemes
from fdrelay.errors import ConfigurationError, DivergenceError

TINY = ["--n-sub", "32", "--ofdm-symbols", "3", "--realizations", "2", "--warmup-samples", "33"]


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def body(text):
    return "".join(line + "\n" for line in text.splitlines() if not line.startswith("#"))


def test_parse_grid_forms():
    assert parse_grid("-10:40:5") == tuple(float(v) for v in range(-10, 41, 5))
    assert parse_grid("0:1:0.25") == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert parse_grid("3, -inf") == (3.0, float("-inf"))
    assert parse_grid(7) == (7.0,)
    for bad in ("1:2", "5:0:1", "0:5:0"):
        with pytest.raises(ConfigurationError):
            parse_grid(bad)


def test_parse_schemes():
    assert parse_schemes("all") == SCHEMES
    assert parse_schemes("RLS, no_si") == ("rls", "no-si")


def test_from_mapping_and_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nrealizations = 7\nlambda=0.99\nsigma2-li-db = 0:10:5\ninclude_source = no\n")
    cfg = SimConfig.from_file(path)
    assert (cfg.realizations, cfg.lam, cfg.sigma2_li_db, cfg.include_source) == (7, 0.99, (0.0, 5.0, 10.0), False)
    with pytest.raises(ConfigurationError) as info:
        SimConfig.from_mapping({"realisations": 3})
    assert info.value.fields == ("realisations",)
    with pytest.raises(ConfigurationError):
        SimConfig.from_mapping({"realizations": "many"})
    path.write_text("oops\n")
    with pytest.raises(ConfigurationError):
        SimConfig.from_file(path)


def test_resolve_defaults():
    conv = SimConfig().resolve("convergence")
    assert (conv.n_sub, conv.sigma2_li_db, conv.scheme, conv.realizations) == (8192, (0.0,), ("rls",), 500)
    assert conv.n_cp == 1 and conv.processing_delay == 8193
    sweep = SimConfig().resolve("sweep")
    assert (sweep.n_sub, sweep.ofdm_symbols, sweep.realizations) == (1024, 200, 50)
    assert sweep.sigma2_li_db == parse_grid("-10:40:5")
    assert SimConfig(n_sub=64).resolve("sweep").n_sub == 64


def test_validation_lists_fields():
    cfg = SimConfig(n_cp=0, lam=1.5, scheme=("rls", "magic"), delta=-1.0, n_s=4)
    names = {name for name, _ in cfg.validation_errors()}
    assert {"n_cp", "lam", "scheme", "delta", "m_r"} <= names
    with pytest.raises(ConfigurationError) as info:
        cfg.validate()
    assert "lam" in info.value.fields
    assert SimConfig(scheme=("ni",)).validation_errors("convergence")


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("realizations=9\nmaster_seed=4\n")
    args = build_parser().parse_args(["sinr-sweep", "--config", str(path), "--realizations", "3", "--lambda", "0.9"])
    cfg = load_config(args)
    assert (cfg.realizations, cfg.master_seed, cfg.lam) == (3, 4, 0.9)


def test_every_field_has_a_flag():
    parser = build_parser()
    for name in SimConfig.field_names():
        flag = "--lambda" if name == "lam" else "--" + name.replace("_", "-")
        args = parser.parse_args(["validate-config", flag, "1"])
        assert getattr(args, name) == "1"


def test_validate_config_prints_resolved_fields():
    code, out, _ = run(["validate-config", "--experiment", "convergence", "--realizations", "5"])
    assert code == EXIT_OK
    lines = dict(line.split("=", 1) for line in out.splitlines())
    assert lines["realizations"] == "5" and lines["n_sub"] == "8192"


def test_config_errors_exit_2(tmp_path):
    assert run(["validate-config", "--lambda", "0"])[0] == EXIT_CONFIG
    assert run(["sinr-sweep", "--scheme", "lms"])[0] == EXIT_CONFIG
    assert run(["ber-sweep", "--config", str(tmp_path / "missing.cfg")])[0] == EXIT_CONFIG
    code, _, err = run(["convergence", "--sigma2-li-db=-inf"] + TINY)
    assert code == EXIT_CONFIG and "undefined" in err
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["sinr-sweep", "--nope"])
    assert info.value.code == 2


def test_divergence_exits_3(monkeypatch):
    def explode(*args, **kwargs):
        raise DivergenceError("RLS diverged", 17)

    monkeypatch.setattr("fdrelay.cli.run_sinr_sweep", explode)
    code, _, err = run(["sinr-sweep"] + TINY)
    assert code == EXIT_DIVERGENCE and "iteration 17" in err


def test_sweep_csv_layout(tmp_path):
    out_path = tmp_path / "ber.csv"
    code, _, _ = run(["ber-sweep", "--sigma2-li-db", "0,20", "--scheme", "ni,rls", "-o", str(out_path)] + TINY)
    assert code == EXIT_OK
    text = out_path.read_text()
    assert "# config.n_sub=32" in text and "# master_seed=0" in text
    rows = body(text).splitlines()
    assert rows[0] == "scheme,sigma2_li_db,ber,bits_counted,bit_errors"
    assert [r.split(",")[:2] for r in rows[1:]] == [["ni", "0"], ["ni", "20"], ["rls", "0"], ["rls", "20"]]


def test_convergence_reports_summary():
    code, out, err = run(["convergence", "--n-sub", "512", "--ofdm-symbols", "16", "--realizations", "3"])
    assert code == EXIT_OK
    assert body(out).splitlines()[0] == "realization,seed,converged,convergence_sample,em_final_db"
    assert "realizations: 3" in err and "mean" in err
