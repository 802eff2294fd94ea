"""Queue-management toolkit: beta-curve AQM schemes, classic baselines,
a deterministic dumbbell network simulator, and batch experiment tooling."""

from .aqm_base import (
    AqmScheme,
    DropDecision,
    EwmaState,
    PacketRecord,
    QueueState,
    UpdateTimer,
    admit,
    ewma_update,
    timer_due,
)
from .baselines import Ared, Codel, CodelState, DropTail, Pie, PieState, Red, RedConfig
from .beta_family import (
    ABetaRed,
    AdaptiveState,
    BetaDropCurve,
    BetaRed,
    BetaRedConfig,
    DBetaRed,
    betared_drop_probability,
    target_queue_from_delay,
)
from .experiment import (
    SCHEMES,
    ExperimentSpec,
    RunResult,
    SpecError,
    build_scheme,
    emit_outputs,
    execute,
    load_spec,
    run_experiment,
)
from .metrics import (
    MetricsReport,
    average_queue_length,
    compute_report,
    drop_rate,
    end_to_end_latency,
    jitter,
    moving_average_queue,
    throughput,
)
from .netsim import (
    FlowState,
    Simulation,
    TopologyConfig,
    Trace,
    build_dumbbell,
    scenario1_plan,
    scenario2_flows,
    scenario2_plan,
)
from .special_functions import (
    BetaMoments,
    BetaShape,
    beta_cdf_by_moments,
    moments_to_shape,
    regularized_incomplete_beta,
    sigma_from_scale,
)

__version__ = "0.1.0"
