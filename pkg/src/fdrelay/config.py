"""Simulation configuration.

Fields left as ``None`` take experiment-specific defaults in :meth:`SimConfig.resolve`:
the convergence experiment uses 8192 subcarriers and a single 0 dB
self-interference level, the sweeps a desk-scale 1024 subcarriers,
200 OFDM symbols and the grid -10:40:5 dB.
"""
import dataclasses
import math
from dataclasses import dataclass, fields
from typing import Optional, Tuple

from .errors import ConfigurationError

SCHEMES = ("ni", "tdc", "rls", "no-si")
EXPERIMENTS = ("convergence", "sweep")

FULL_SCALE = {"n_sub": 8192, "ofdm_symbols": 2000}
DEFAULTS = {
    "convergence": {"n_sub": 8192, "ofdm_symbols": 4, "realizations": 500, "sigma2_li_db": (0.0,), "scheme": ("rls",)},
    "sweep": {
        "n_sub": 1024,
        "ofdm_symbols": 200,
        "realizations": 50,
        "sigma2_li_db": tuple(float(v) for v in range(-10, 41, 5)),
        "scheme": SCHEMES,
    },
}


def parse_grid(text):
    """Parse ``"a:b:step"`` (inclusive), ``"a,b,c"`` or a single value into a tuple of floats.

    >>> parse_grid("-10:10:5")
    (-10.0, -5.0, 0.0, 5.0, 10.0)
    """
    if isinstance(text, (int, float)):
        return (float(text),)
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"grid {text!r} must look like start:stop:step", ["sigma2_li_db"])
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigurationError(f"grid {text!r} is empty", ["sigma2_li_db"])
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(count))
    return tuple(float(p) for p in text.split(",") if p.strip())


def parse_schemes(text):
    if isinstance(text, (tuple, list)):
        items = list(text)
    else:
        items = [s.strip() for s in str(text).split(",") if s.strip()]
    items = [s.lower().replace("_", "-") for s in items]
    if items == ["all"]:
        return SCHEMES
    return tuple(items)


def _parse_bool(text):
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class SimConfig:
    n_s: int = 2
    n_d: int = 2  # destination hop is not simulated
    m_r: int = 3
    m_t: int = 3
    l_sr: int = 1
    l_rd: int = 1
    l_li: int = 1
    l_a: int = 1
    n_sub: Optional[int] = None
    n_cp: Optional[int] = None
    sigma2_li_db: Optional[Tuple[float, ...]] = None
    sigma2_nr_db: float = -15.0
    delta: float = 1e-5
    alpha: float = 1e-2
    lam: float = 1.0
    mu: float = 1.0
    em_threshold_db: float = -30.0
    ofdm_symbols: Optional[int] = None
    realizations: Optional[int] = None
    master_seed: int = 0
    scheme: Optional[Tuple[str, ...]] = None
    include_source: bool = True
    warmup_samples: int = 2048
    processing_delay: Optional[int] = None
    bin_width: int = 100

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, mapping):
        """Build from string or typed values keyed by field name (kebab-case allowed)."""
        kwargs = {}
        errors = []
        types = {f.name: f for f in fields(cls)}
        for raw_key, value in mapping.items():
            key = raw_key.strip().replace("-", "_")
            if key == "lambda":
                key = "lam"
            if key not in types:
                errors.append(key)
                continue
            try:
                kwargs[key] = _coerce(key, value)
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"{key}: {exc}", [key]) from exc
        if errors:
            raise ConfigurationError(f"unknown config fields: {', '.join(errors)}", errors)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path):
        """Read ``key = value`` lines; ``#`` starts a comment."""
        mapping = {}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigurationError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                mapping[key.strip()] = value.strip()
        return cls.from_mapping(mapping)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def resolve(self, experiment):
        """Fill experiment-specific defaults; returns a new config."""
        if experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {experiment!r}")
        changes = {k: v for k, v in DEFAULTS[experiment].items() if getattr(self, k) is None}
        cfg = self.replace(**changes)
        if cfg.n_cp is None:
            cfg = cfg.replace(n_cp=cfg.l_sr)
        if cfg.processing_delay is None:
            cfg = cfg.replace(processing_delay=cfg.n_cp + cfg.n_sub)
        return cfg

    def validation_errors(self, experiment=None):
        """List of ``(field, message)`` problems; empty when valid."""
        errs = []
        for name in ("n_s", "n_d", "m_r", "m_t", "realizations", "ofdm_symbols",
                     "n_sub", "bin_width", "processing_delay"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                errs.append((name, f"must be a positive integer, got {v!r}"))
        for name in ("l_sr", "l_rd", "l_li", "l_a", "warmup_samples", "master_seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                errs.append((name, f"must be a non-negative integer, got {v!r}"))
        if self.n_cp is not None and isinstance(self.l_sr, int) and isinstance(self.l_li, int):
            if self.n_cp < max(self.l_sr, self.l_li):
                errs.append(("n_cp", f"cyclic prefix {self.n_cp} shorter than channel order"))
            if self.n_sub is not None and self.n_cp > self.n_sub:
                errs.append(("n_cp", "cyclic prefix longer than the OFDM body"))
        if isinstance(self.n_s, int) and isinstance(self.m_r, int) and self.n_s > self.m_r:
            errs.append(("m_r", "zero forcing needs at least as many receive antennas as streams"))
        for name in ("sigma2_nr_db", "em_threshold_db"):
            v = getattr(self, name)
            if math.isnan(v) or v == math.inf:
                errs.append((name, f"must be finite or -inf, got {v!r}"))
        for name in ("delta", "alpha"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                errs.append((name, f"must be a finite value >= 0, got {v!r}"))
        if not 0.0 < self.lam <= 1.0:
            errs.append(("lam", f"forgetting factor must lie in (0, 1], got {self.lam}"))
        if not (math.isfinite(self.mu) and self.mu > 0):
            errs.append(("mu", f"step size must be positive, got {self.mu}"))
        if self.sigma2_li_db is not None:
            if len(self.sigma2_li_db) == 0:
                errs.append(("sigma2_li_db", "sweep grid is empty"))
            if any(math.isnan(v) or v == math.inf for v in self.sigma2_li_db):
                errs.append(("sigma2_li_db", "powers must be finite or -inf"))
        if self.scheme is not None:
            bad = [s for s in self.scheme if s not in SCHEMES]
            if bad or not self.scheme:
                errs.append(("scheme", f"unknown scheme(s) {bad}; choose from {', '.join(SCHEMES)}"))
        if experiment == "convergence":
            if self.scheme is not None and tuple(self.scheme) != ("rls",):
                errs.append(("scheme", "the convergence experiment runs the rls scheme only"))
            if self.sigma2_li_db is not None and len(self.sigma2_li_db) != 1:
                errs.append(("sigma2_li_db", "the convergence experiment takes a single value"))
        return errs

    def validate(self, experiment=None):
        errs = self.validation_errors(experiment)
        if errs:
            msg = "; ".join(f"{name}: {text}" for name, text in errs)
            raise ConfigurationError(f"invalid configuration: {msg}", [n for n, _ in errs])
        return self

    def as_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            out[f.name] = v
        return out


_INT_FIELDS = {"n_s", "n_d", "m_r", "m_t", "l_sr", "l_rd", "l_li", "l_a", "n_sub", "n_cp",
               "ofdm_symbols", "realizations", "master_seed",
               "warmup_samples", "processing_delay", "bin_width"}
_FLOAT_FIELDS = {"sigma2_nr_db", "delta", "alpha", "lam", "mu", "em_threshold_db"}


def _coerce(key, value):
    if value is None:
        return None
    if key in _INT_FIELDS:
        if isinstance(value, str):
            return int(value.strip())
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)
    if key in _FLOAT_FIELDS:
        return float(value)
    if key == "sigma2_li_db":
        return parse_grid(value)
    if key == "scheme":
        return parse_schemes(value)
    if key == "include_source":
        return _parse_bool(value)
    raise ValueError(f"no parser for {key}")  # pragma: no cover
