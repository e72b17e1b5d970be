"""Full-duplex MIMO-OFDM relay simulator with adaptive self-interference cancellation."""
__version__ = "0.1.0"

from .canceller import (
    CancellerFilter,
    NaturalIsolation,
    RLSCanceller,
    RlsState,
    TimeDomainCanceller,
    batch_solve_oracle,
    cancel,
    error_metric,
    make_ni,
    make_tdc,
    rls_init,
    rls_step,
    stack_taps,
    unstack_taps,
)
from .channel import (
    FirMimoChannel,
    SignalHistory,
    apply_fir,
    awgn,
    draw_rayleigh_channel,
    filter_sequence,
    perturb_channel,
)
from .config import SimConfig
from .errors import (
    ConfigurationError,
    DivergenceError,
    InputError,
    RankDeficiencyError,
    SummaryError,
    UndefinedMetricError,
)

__all__ = [
    "CancellerFilter", "NaturalIsolation", "RLSCanceller", "RlsState", "TimeDomainCanceller",
    "batch_solve_oracle", "cancel", "error_metric", "make_ni", "make_tdc", "rls_init",
    "rls_step", "stack_taps", "unstack_taps", "FirMimoChannel", "SignalHistory", "apply_fir",
    "awgn", "draw_rayleigh_channel", "filter_sequence", "perturb_channel", "SimConfig",
    "ConfigurationError", "DivergenceError", "InputError", "RankDeficiencyError",
    "SummaryError", "UndefinedMetricError",
]
