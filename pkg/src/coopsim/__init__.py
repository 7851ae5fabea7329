"""Slotted-time cooperation simulator: model, controllers, oracle, analysis."""

from .analysis import (
    ChainSolution,
    DriftConstants,
    busy_period_moments,
    compute_d,
    drift_constants,
    frame_length_bounds,
    steady_state,
    throughput_lower_bound,
)
from .baselines import (
    AlwaysCoopPolicy,
    CounterPolicy,
    CounterState,
    NoCoopPolicy,
    always_coop_decide,
    counter_decide,
    no_coop_decide,
)
from .controller import (
    FadeState,
    FadingModel,
    FramePowers,
    FrameDriftPenaltyPolicy,
    MultiUserDecision,
    SizeCapExceededError,
    admit,
    cooperation_threshold,
    frame_power,
    solve_multiuser_frame,
    solve_p0,
    solve_p1,
    solve_p1_fading,
)
from .engine import (
    PolicySpec,
    RunMetrics,
    Scenario,
    StationaryRandomPolicy,
    build_policy,
    derive_seed,
    run_adaptive,
    run_episode,
    sweep_v,
)
from .model import (
    ModelParams,
    Phase,
    PowerSet,
    SlotOutcome,
    SystemState,
    UnstableChainError,
    step_pu_queue,
    step_su_queue,
    update_virtual_queue,
)
from .montecarlo import (
    batch_mean_stderr,
    binomial_cdf,
    sample_busy_periods,
    sample_frames,
    sample_idle_periods,
)
from .oracle import (
    StationaryPolicy,
    StationarySimResult,
    grid_search,
    optimal_two_point,
    simulate_stationary,
)

__version__ = "0.1.0"
