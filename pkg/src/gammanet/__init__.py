"""Multi-timescale value estimation.

Value estimators that take the prediction timescale as an input, so one
set of weights answers queries at any horizon and every transition can
train many horizons at once.
"""

from .timescale import (
    Timescale,
    TimescaleInput,
    TimescaleInputMode,
    TimescaleSetSpec,
    encode_timescale_input,
    gamma_to_tau,
    sample_training_set,
    tau_to_gamma,
)
from .features import (
    OneHotCoder,
    SparseFeatures,
    TileCoder,
    TileLayerSpec,
    build_tile_coder,
)
from .linear import FixedBaseline, LinearGammaNet, run_online, td_delta
from .deep import (
    Adam,
    DeepGammaNet,
    EmbeddingKind,
    PrioritizedReplay,
    init_scaled_weights,
    nstep_scaled_delta,
    run_deep_training,
    sync_target,
    train_step,
)
from .environments import (
    EndOfStream,
    FiniteMDPEnv,
    SquareWaveEnv,
    TraceReplay,
    Transition,
    load_trace,
)
from .evaluation import (
    MetricsReport,
    analytic_mdp_values,
    compose_difference_return,
    default_probes,
    interpolate_prediction,
    monte_carlo_return,
    normalized_mse,
    prediction_correlation,
    train_probe_suite,
    true_return_periodic,
)

__version__ = "0.1.0"
